#include <algorithm>
#include <map>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"

namespace xdv {

OptimizationReport greedy_optimize(Experiment& exp) {
  OptimizationReport report;
  report.split_fingerprint = split_list_fingerprint(exp.splits);
  std::map<std::string, ConfigOutcome> evaluated;
  std::map<std::string, std::string> failed;

  const auto evaluate = [&](const PipelineConfig& c) -> const ConfigOutcome* {
    const std::string key = c.key();
    if (const auto it = evaluated.find(key); it != evaluated.end()) return &it->second;
    if (failed.count(key)) return nullptr;
    try {
      return &evaluated.emplace(key, run_config(exp, c)).first->second;
    } catch (const Error& e) {
      failed[key] = e.what();
      if (exp.log) exp.log(key + " failed: " + e.what());
      return nullptr;
    }
  };

  PipelineConfig incumbent = exp.cfg.baseline;
  for (std::size_t si = 0; si < kStageCount; ++si) {
    const Stage stage = static_cast<Stage>(si);
    StageReport sr;
    sr.stage = stage;
    sr.incumbent_before = incumbent;
    for (const auto& value : exp.cfg.menus.of(stage)) {
      const PipelineConfig c = with_stage(incumbent, stage, value);
      sr.candidates.push_back(stage_value(c, stage));
      const ConfigOutcome* o = evaluate(c);
      ConfigOutcome copy;
      copy.config = c;
      if (o) copy = *o;
      sr.outcomes.push_back(std::move(copy));
      sr.failed.push_back(o == nullptr);
      sr.failure.push_back(o ? std::string{} : failed[c.key()]);
    }

    // Best median; the incumbent keeps its place on ties, otherwise the
    // earliest candidate in menu order wins.
    const std::string incumbent_value = stage_value(incumbent, stage);
    for (std::size_t k = 0; k < sr.candidates.size(); ++k) {
      if (sr.failed[k]) continue;
      if (sr.winner == kNoWinner) {
        sr.winner = k;
        continue;
      }
      const double m = sr.outcomes[k].summary.median, best = sr.outcomes[sr.winner].summary.median;
      if (m < best || (m == best && sr.candidates[k] == incumbent_value)) sr.winner = k;
    }

    std::vector<std::vector<double>> groups;
    for (std::size_t k = 0; k < sr.candidates.size(); ++k)
      if (!sr.failed[k]) {
        sr.tested.push_back(k);
        groups.push_back(sr.outcomes[k].hters);
      }
    if (groups.size() >= 2) sr.test = stat_test(groups);

    if (sr.winner != kNoWinner) incumbent = sr.outcomes[sr.winner].config;
    sr.improved = !(incumbent == sr.incumbent_before);
    if (exp.log) {
      std::string msg = "stage " + std::string(stage_tag(stage)) + ": ";
      msg += sr.winner == kNoWinner ? "all candidates failed, keeping " + incumbent_value
                                    : "selected " + sr.candidates[sr.winner];
      exp.log(msg);
    }
    report.stages.push_back(std::move(sr));
  }
  report.chosen = incumbent;
  // Configurations absent from the store in reuse-only mode were never run.
  const auto stored = [&](const std::string& key) {
    if (!exp.store) return false;
    for (std::size_t i = 0; i < exp.splits.size(); ++i)
      if (!exp.store->find(exp.fingerprint, key, static_cast<int>(i))) return false;
    return true;
  };
  report.distinct_configs = evaluated.size();
  for (const auto& [key, why] : failed) report.distinct_configs += exp.compute || stored(key);
  report.total_runs = report.distinct_configs * exp.splits.size();
  return report;
}

}  // namespace xdv
