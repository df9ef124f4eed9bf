#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdv/classify.hpp"
#include "xdv/dataset.hpp"
#include "xdv/embedding.hpp"
#include "xdv/evalstats.hpp"
#include "xdv/imaging.hpp"
#include "xdv/vectorops.hpp"

namespace xdv {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// The five-stage pipeline tuple.
struct PipelineConfig {
  std::string enhancement = "none";
  std::string layer = "fc7";
  NormMethod normalization = NormMethod::None;
  CombineMethod combination = CombineMethod::AbsSub;
  ClassifierKind classifier = ClassifierKind::LinearSvm;

  // "<enhancement>/<layer>/<norm>/<combination>/<classifier>"
  std::string key() const;
  bool operator==(const PipelineConfig&) const = default;
};

PipelineConfig pipeline_from_key(std::string_view key);

enum class Stage { Enhancement, Layer, Normalization, Combination, Classifier };
inline constexpr std::size_t kStageCount = 5;

std::string_view stage_tag(Stage s);  // enhancement | layer | normalization | combination | classifier
std::string stage_value(const PipelineConfig& c, Stage s);
PipelineConfig with_stage(PipelineConfig c, Stage s, std::string_view value);

struct StageMenus {
  std::vector<std::string> enhancement{"none", "retinex", "ace", "clahe"};
  std::vector<std::string> layer{"fc6n", "fc6", "fc7n", "fc7", "fc8"};
  std::vector<std::string> normalization{"none", "l1", "l2", "z"};
  std::vector<std::string> combination{"sub", "mult", "cross", "phase"};
  std::vector<std::string> classifier{"linsvm", "rbfsvm", "lr"};

  const std::vector<std::string>& of(Stage s) const;
  std::vector<std::string>& of(Stage s);
};

struct DatasetSource {
  enum class Kind { Synthetic, Manifest };
  Kind kind = Kind::Synthetic;
  std::filesystem::path manifest;
  int n_subjects = 50;
  std::uint64_t seed = 7;
  DomainShiftParams shift;
};

struct ExperimentConfig {
  DatasetSource dataset;
  // Descriptor used directly (lbp, dct) and as input of the surrogate deep
  // head for fc* layers without an external file.
  std::string builtin = "lbp";
  // enhancement tag ("*" = any) -> stored layer tag -> EMB1 path.
  std::map<std::string, std::map<std::string, std::filesystem::path>> external;
  StageMenus menus;
  PipelineConfig baseline;
  int grid_stride = 5;
  std::uint64_t master_seed = 1;
  int n_splits = 100;
  int jobs = 1;
  std::filesystem::path output_dir = "xdv_out";
  RetinexParams retinex;
  AceParams ace;
  ClaheParams clahe;
  CombineOptions combine_options;
  SolverOptions solver;
  bool retain_scores = true;
  double min_success_fraction = 0.9;

  EnhancementMethod enhancement(std::string_view tag) const;
  std::optional<std::filesystem::path> external_path(std::string_view enhancement, std::string_view layer) const;
  // Hash of every setting that influences run results (not jobs, menus or
  // the output location).
  std::uint64_t fingerprint() const;
};

// Relative paths inside the file resolve against the file's directory.
ExperimentConfig parse_experiment_config(std::string_view json, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

// Lazily computed, thread-safe cache of per-sample raw feature vectors for
// (enhancement, layer). Vectors are returned before normalization.
class FeatureBank {
 public:
  FeatureBank(const ExperimentConfig& cfg, std::vector<FaceSample> samples);
  ~FeatureBank();
  FeatureBank(const FeatureBank&) = delete;
  FeatureBank& operator=(const FeatureBank&) = delete;

  const EmbeddingMap& vectors(std::string_view enhancement, std::string_view layer);
  const std::vector<FaceSample>& samples() const noexcept { return samples_; }
  std::vector<std::string> subjects() const;
  std::size_t faces_enhanced() const;

 private:
  struct Impl;
  ExperimentConfig cfg_;
  std::vector<FaceSample> samples_;
  std::unique_ptr<Impl> impl_;
};

std::vector<FaceSample> load_dataset(const DatasetSource& source);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunResult {
  PipelineConfig config;
  int split_index = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t split_fingerprint = 0;
  std::uint64_t experiment = 0;
  bool ok = false;
  std::string error;
  ThresholdReport dev;   // EER point on dev
  ThresholdReport eval;  // rates on eval at dev tau
  HyperParams hp;
  double mean_cv_eer = 0.0;
  bool converged = true;
  PairScoreSet dev_scores;
  PairScoreSet eval_scores;
};

std::string run_result_to_json(const RunResult& r);
RunResult run_result_from_json(std::string_view line);

// Eval-pair labels held back until the decision threshold is fixed.
class LabelVault {
 public:
  explicit LabelVault(std::vector<bool> labels) : labels_(std::move(labels)) {}
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<bool>& reveal() {
    ++reads_;
    return labels_;
  }
  std::size_t reads() const noexcept { return reads_; }

 private:
  std::vector<bool> labels_;
  std::size_t reads_ = 0;
};

// Ordered record of protocol events within one run.
struct RunTrace {
  std::vector<std::string> events;
  std::size_t eval_label_reads = 0;
};

std::uint64_t run_seed(std::uint64_t master_seed, int split_index);

RunResult run_single(const PipelineConfig& config, const SplitPlan& split, int split_index, FeatureBank& bank,
                     const ExperimentConfig& cfg, RunTrace* trace = nullptr);

// Append-only JSON-Lines store; one RunResult per line.
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path);
  const std::filesystem::path& path() const noexcept { return path_; }
  void append(const RunResult& r);
  const RunResult* find(std::uint64_t experiment, const std::string& config_key, int split_index) const;
  std::vector<RunResult> all() const;
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::deque<RunResult> records_;  // stable addresses for find()
  std::map<std::string, std::size_t> index_;
};

struct ConfigOutcome {
  PipelineConfig config;
  std::vector<RunResult> runs;  // split order
  std::vector<double> hters;    // successful runs, split order
  SummaryStats summary;
  std::size_t failures = 0;
};

// Context shared by every run of one experiment.
struct Experiment {
  ExperimentConfig cfg;
  std::vector<SplitPlan> splits;
  std::unique_ptr<FeatureBank> bank;
  std::uint64_t fingerprint = 0;
  std::unique_ptr<ResultsStore> store;  // optional sink / resume source
  bool compute = true;                  // false: only reuse stored results
  std::size_t computed_runs = 0;
  std::function<void(const std::string&)> log;
};

Experiment open_experiment(const ExperimentConfig& cfg, bool with_store = true);

// Runs every split (bounded worker pool), committing results in split order.
// Throws InsufficientData when fewer than min_success_fraction succeed.
ConfigOutcome run_config(Experiment& exp, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Greedy optimization and reporting
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNoWinner = static_cast<std::size_t>(-1);

struct StageReport {
  Stage stage = Stage::Enhancement;
  PipelineConfig incumbent_before;
  std::vector<std::string> candidates;  // stage values, menu order
  std::vector<ConfigOutcome> outcomes;  // parallel to candidates
  std::vector<bool> failed;
  std::vector<std::string> failure;
  std::optional<StatTestReport> test;   // over successful candidates
  std::vector<std::size_t> tested;      // candidate indices entering the test
  std::size_t winner = kNoWinner;  // candidate index, kNoWinner when all failed
  bool improved = false;
};

struct OptimizationReport {
  std::vector<StageReport> stages;
  PipelineConfig chosen;
  std::size_t distinct_configs = 0;
  std::size_t total_runs = 0;
  std::uint64_t split_fingerprint = 0;
};

OptimizationReport greedy_optimize(Experiment& exp);

// Aligned-text renderings.
std::string render_stage_table(const StageReport& s);
std::string render_dunn_table(const StageReport& s);
std::string summary_csv(const StageReport& s);
std::string dunn_csv(const StageReport& s);

// Index into `runs` of the run reported for a configuration: among runs whose
// HTER equals the median (or, for an even count, one of the two middle
// values), one chosen with a seeded draw.
std::size_t median_run_index(std::span<const RunResult> runs, std::uint64_t seed);

// Writes summary_/dunn_/det_<stage>.csv, chosen_pipeline.json and report.txt.
void write_report(const OptimizationReport& report, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir);

}  // namespace xdv
