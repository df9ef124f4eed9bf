#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

constexpr std::uint64_t kMedianRunStream = 0x4D454449414E;

std::string fixed5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

// Display width in code points (cells hold UTF-8).
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], display_width(r[c]));
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) line += c + 1 == r.size() ? r[c] : pad(r[c], width[c] + 2);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

// Candidate names entering the rank tests, in menu order.
std::vector<std::string> tested_names(const StageReport& s) {
  std::vector<std::string> names;
  for (const auto k : s.tested) names.push_back(s.candidates[k]);
  return names;
}

}  // namespace

std::string render_stage_table(const StageReport& s) {
  std::vector<std::vector<std::string>> rows{{"Method", "Median", "Mean±StdDev", "Min", "Max"}};
  for (std::size_t k = 0; k < s.candidates.size(); ++k) {
    if (s.failed[k]) {
      rows.push_back({s.candidates[k], "failed", "", "", ""});
      continue;
    }
    const SummaryStats& st = s.outcomes[k].summary;
    rows.push_back({s.candidates[k], fixed5(st.median), fixed5(st.mean) + "±" + fixed5(st.stddev),
                    fixed5(st.min), fixed5(st.max)});
  }
  return aligned(rows);
}

std::string render_dunn_table(const StageReport& s) {
  std::string out;
  if (!s.test) return "Rank tests not run (fewer than two successful candidates)\n";
  out += "Kruskal-Wallis H = " + fixed5(s.test->h_statistic) + ", p = " + fixed5(s.test->kw_pvalue) + "\n";
  if (!s.test->posthoc_run) return out + "Dunn post hoc not run (p > 0.05)\n";
  const auto names = tested_names(s);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{""};
  for (std::size_t j = 0; j + 1 < names.size(); ++j) header.push_back(names[j]);
  rows.push_back(header);
  for (std::size_t i = 1; i < names.size(); ++i) {
    std::vector<std::string> row{names[i]};
    for (std::size_t j = 0; j < i; ++j) row.push_back(fixed5(s.test->pairwise.at(i, j)));
    rows.push_back(row);
  }
  return out + aligned(rows);
}

std::string summary_csv(const StageReport& s) {
  std::string out = "method,n,failures,median,mean,stddev,min,max\n";
  char buf[256];
  for (std::size_t k = 0; k < s.candidates.size(); ++k) {
    if (s.failed[k]) {
      out += s.candidates[k] + ",0,failed,,,,,\n";
      continue;
    }
    const auto& o = s.outcomes[k];
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", o.summary.n, o.failures,
                  o.summary.median, o.summary.mean, o.summary.stddev, o.summary.min, o.summary.max);
    out += s.candidates[k] + buf;
  }
  return out;
}

std::string dunn_csv(const StageReport& s) {
  if (!s.test || !s.test->posthoc_run) return {};
  const auto names = tested_names(s);
  std::string out = "method";
  for (std::size_t j = 0; j + 1 < names.size(); ++j) out += "," + names[j];
  out += "\n";
  for (std::size_t i = 1; i < names.size(); ++i) {
    out += names[i];
    for (std::size_t j = 0; j + 1 < names.size(); ++j) out += "," + (j < i ? fixed5(s.test->pairwise.at(i, j)) : "");
    out += "\n";
  }
  return out;
}

std::size_t median_run_index(std::span<const RunResult> runs, std::uint64_t seed) {
  std::vector<double> h;
  for (const auto& r : runs)
    if (r.ok) h.push_back(r.eval.hter);
  if (h.empty()) fail(ErrorKind::InsufficientData, "no successful runs to pick a median run from");
  std::sort(h.begin(), h.end());
  const std::size_t n = h.size();
  const double lo = h[(n - 1) / 2], hi = h[n / 2];
  const double median = (lo + hi) / 2.0;
  std::vector<std::size_t> pick;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].ok && runs[i].eval.hter == median) pick.push_back(i);
  if (pick.empty())
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (runs[i].ok && (runs[i].eval.hter == lo || runs[i].eval.hter == hi)) pick.push_back(i);
  Rng rng(seed);
  return pick[static_cast<std::size_t>(rng.below(pick.size()))];
}

void write_report(const OptimizationReport& report, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  if (report.stages.empty()) fail(ErrorKind::InsufficientData, "nothing to report");
  std::filesystem::create_directories(out_dir);
  nlohmann::ordered_json chosen;
  chosen["pipeline"] = {{"enhancement", report.chosen.enhancement},
                        {"layer", report.chosen.layer},
                        {"normalization", norm_tag(report.chosen.normalization)},
                        {"combination", combine_tag(report.chosen.combination)},
                        {"classifier", classifier_tag(report.chosen.classifier)}};
  chosen["key"] = report.chosen.key();
  chosen["distinct_configs"] = report.distinct_configs;
  chosen["total_runs"] = report.total_runs;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016" PRIx64, report.split_fingerprint);
  chosen["split_fingerprint"] = hex;
  chosen["stages"] = nlohmann::ordered_json::array();

  std::string text;
  for (std::size_t si = 0; si < report.stages.size(); ++si) {
    const StageReport& s = report.stages[si];
    const std::string tag(stage_tag(s.stage));
    text += "== " + tag + " ==\n" + render_stage_table(s) + "\n" + render_dunn_table(s) + "\n";
    write_file(out_dir / ("summary_" + tag + ".csv"), summary_csv(s));
    if (const auto d = dunn_csv(s); !d.empty()) write_file(out_dir / ("dunn_" + tag + ".csv"), d);

    nlohmann::ordered_json st;
    st["stage"] = tag;
    st["winner"] = s.winner == kNoWinner ? nlohmann::ordered_json() : nlohmann::ordered_json(s.candidates[s.winner]);
    st["improved"] = s.improved;
    if (s.test) {
      st["kruskal_wallis_h"] = s.test->h_statistic;
      st["kruskal_wallis_p"] = s.test->kw_pvalue;
      st["posthoc"] = s.test->posthoc_run;
    }
    if (s.improved && s.winner != kNoWinner) {
      const auto& runs = s.outcomes[s.winner].runs;
      const std::size_t idx = median_run_index(runs, derive_seed(derive_seed(cfg.master_seed, kMedianRunStream), si));
      st["det_split"] = runs[idx].split_index;
      if (!runs[idx].eval_scores.empty())
        write_file(out_dir / ("det_" + tag + ".csv"), det_csv(det_points(runs[idx].eval_scores)));
    }
    chosen["stages"].push_back(st);
  }
  text += "Chosen pipeline: " + report.chosen.key() + "\n";
  text += "Distinct configurations: " + std::to_string(report.distinct_configs) +
          ", runs: " + std::to_string(report.total_runs) + "\n";
  write_file(out_dir / "chosen_pipeline.json", chosen.dump(2) + "\n");
  write_file(out_dir / "report.txt", text);
}

}  // namespace xdv
