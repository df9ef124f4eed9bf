#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"

namespace xdv {
namespace {

using json = nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

json real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

double real_of(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return NAN;
  }
  return j.get<double>();
}

json report_json(const ThresholdReport& r) {
  return {{"tau", real(r.tau)}, {"far", r.far}, {"frr", r.frr}, {"hter", r.hter}};
}

ThresholdReport report_of(const json& j) {
  return {real_of(j.at("tau")), j.at("far").get<double>(), j.at("frr").get<double>(), j.at("hter").get<double>()};
}

json scores_json(const PairScoreSet& s) {
  json a = json::array();
  for (const auto& p : s) a.push_back(json::array({p.score, p.genuine ? 1 : 0}));
  return a;
}

PairScoreSet scores_of(const json& j) {
  PairScoreSet out;
  for (const auto& e : j) out.push_back({e.at(0).get<double>(), e.at(1).get<int>() != 0});
  return out;
}

std::string index_key(std::uint64_t experiment, const std::string& config, int split) {
  return hex64(experiment) + "|" + config + "|" + std::to_string(split);
}

}  // namespace

std::string run_result_to_json(const RunResult& r) {
  json j;
  j["experiment"] = hex64(r.experiment);
  j["config"] = r.config.key();
  j["split"] = r.split_index;
  j["split_seed"] = r.split_seed;
  j["split_fingerprint"] = hex64(r.split_fingerprint);
  j["ok"] = r.ok;
  if (!r.ok) {
    j["error"] = r.error;
    return j.dump();
  }
  j["hp"] = {{"c_exp", r.hp.c_exp},
             {"gamma_exp", r.hp.gamma_exp},
             {"penalty", penalty_tag(r.hp.penalty)},
             {"class_weight", class_weight_tag(r.hp.class_weight)}};
  j["cv_eer"] = r.mean_cv_eer;
  j["converged"] = r.converged;
  j["dev"] = report_json(r.dev);
  j["eval"] = report_json(r.eval);
  if (!r.dev_scores.empty()) j["dev_scores"] = scores_json(r.dev_scores);
  if (!r.eval_scores.empty()) j["eval_scores"] = scores_json(r.eval_scores);
  return j.dump();
}

RunResult run_result_from_json(std::string_view line) {
  RunResult r;
  try {
    const json j = json::parse(line);
    r.experiment = parse_hex64(j.at("experiment").get<std::string>());
    r.config = pipeline_from_key(j.at("config").get<std::string>());
    r.split_index = j.at("split").get<int>();
    r.split_seed = j.at("split_seed").get<std::uint64_t>();
    r.split_fingerprint = parse_hex64(j.at("split_fingerprint").get<std::string>());
    r.ok = j.at("ok").get<bool>();
    if (!r.ok) {
      r.error = j.value("error", std::string{});
      return r;
    }
    const json& hp = j.at("hp");
    r.hp.c_exp = hp.at("c_exp").get<int>();
    r.hp.gamma_exp = hp.at("gamma_exp").get<int>();
    r.hp.penalty = penalty_of(hp.at("penalty").get<std::string>());
    r.hp.class_weight = class_weight_of(hp.at("class_weight").get<std::string>());
    r.mean_cv_eer = j.at("cv_eer").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.dev = report_of(j.at("dev"));
    r.eval = report_of(j.at("eval"));
    if (j.contains("dev_scores")) r.dev_scores = scores_of(j.at("dev_scores"));
    if (j.contains("eval_scores")) r.eval_scores = scores_of(j.at("eval_scores"));
  } catch (const json::exception& e) {
    fail(ErrorKind::MalformedRow, std::string("result record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    fail(ErrorKind::MalformedRow, std::string("result record: ") + e.what());
  }
  return r;
}

ResultsStore::ResultsStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read results store '" + path_.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t pos = 0, line_no = 0, good_end = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) break;  // unterminated tail from an interrupted write
    const std::string_view line(text.data() + pos, nl - pos);
    if (!line.empty()) {
      RunResult r;
      try {
        r = run_result_from_json(line);
      } catch (const Error& e) {
        fail(ErrorKind::MalformedRow,
             path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
      index_[index_key(r.experiment, r.config.key(), r.split_index)] = records_.size();
      records_.push_back(std::move(r));
    }
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end < text.size()) std::filesystem::resize_file(path_, good_end);
}

void ResultsStore::append(const RunResult& r) {
  const std::string line = run_result_to_json(r) + "\n";
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorKind::Io, "cannot append to results store '" + path_.string() + "'");
  out << line;
  out.flush();
  if (!out) fail(ErrorKind::Io, "write to results store '" + path_.string() + "' failed");
  index_[index_key(r.experiment, r.config.key(), r.split_index)] = records_.size();
  records_.push_back(r);
}

const RunResult* ResultsStore::find(std::uint64_t experiment, const std::string& config_key, int split_index) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(index_key(experiment, config_key, split_index));
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<RunResult> ResultsStore::all() const {
  std::lock_guard lock(mutex_);
  return {records_.begin(), records_.end()};
}

std::size_t ResultsStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

}  // namespace xdv
