#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"

using namespace xdv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("xdv_test_orch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_config(const std::string& name, int subjects, int splits) {
  ExperimentConfig cfg;
  cfg.dataset.n_subjects = subjects;
  cfg.dataset.seed = 7;
  cfg.n_splits = splits;
  cfg.master_seed = 3;
  cfg.output_dir = scratch_dir(name);
  cfg.baseline = pipeline_from_key("none/lbp/none/sub/linsvm");
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pipeline keys") {
  const auto c = pipeline_from_key("ace/fc6/l2/phase/rbfsvm");
  CHECK(c.enhancement == "ace");
  CHECK(c.layer == "fc6");
  CHECK(c.normalization == NormMethod::L2);
  CHECK(c.combination == CombineMethod::PhaseCorr);
  CHECK(c.classifier == ClassifierKind::RbfSvm);
  CHECK(c.key() == "ace/fc6/l2/phase/rbfsvm");
  CHECK(PipelineConfig{}.key() == "none/fc7/none/sub/linsvm");
  CHECK(with_stage(c, Stage::Layer, "fc8").key() == "ace/fc8/l2/phase/rbfsvm");
  CHECK(stage_value(c, Stage::Combination) == "phase");
  CHECK_THROWS_AS(pipeline_from_key("ace/fc6/l2"), Error);
  CHECK_THROWS_AS(pipeline_from_key("gamma/fc6/l2/sub/lr"), Error);
}

TEST_CASE("default menus sum to sixteen configurations") {
  const StageMenus m;
  std::size_t sum = 0;
  for (std::size_t s = 0; s < kStageCount; ++s) sum += m.of(static_cast<Stage>(s)).size();
  CHECK(sum - (kStageCount - 1) == 16);
}

TEST_CASE("experiment config parsing") {
  const auto cfg = parse_experiment_config(R"({
    "dataset": {"synthetic": {"n_subjects": 20, "seed": 9, "shift": "strong_cast"}},
    "embeddings": {"builtin": "dct", "external": {"fc6n": "emb/fc6n.emb", "ace": {"fc8": "/abs/fc8.emb"}}},
    "menus": {"classifier": ["linsvm", "lr"]},
    "baseline": {"layer": "lbp"},
    "grid": "full", "master_seed": 5, "n_splits": 7, "jobs": 3, "output_dir": "out",
    "enhancement_params": {"ace": {"slope": 10}},
    "phase_correlation": "classical"
  })", "/base");
  CHECK(cfg.dataset.n_subjects == 20);
  CHECK(cfg.dataset.seed == 9);
  CHECK(cfg.dataset.shift.color_cast == DomainShiftParams::strong_cast().color_cast);
  CHECK(cfg.builtin == "dct");
  CHECK(cfg.external_path("retinex", "fc6n") == fs::path("/base/emb/fc6n.emb"));
  CHECK(cfg.external_path("ace", "fc8") == fs::path("/abs/fc8.emb"));
  CHECK(!cfg.external_path("none", "fc8").has_value());
  CHECK(cfg.menus.classifier == std::vector<std::string>{"linsvm", "lr"});
  CHECK(cfg.baseline.key() == "none/lbp/none/sub/linsvm");
  CHECK(cfg.grid_stride == 1);
  CHECK(cfg.n_splits == 7);
  CHECK(cfg.jobs == 3);
  CHECK(cfg.output_dir == fs::path("/base/out"));
  CHECK(cfg.ace.slope == 10.0);
  CHECK(cfg.enhancement("ace").ace.slope == 10.0);
  CHECK(cfg.combine_options.classical_phase);

  // round trip through JSON keeps the result-relevant fingerprint
  const auto back = parse_experiment_config(experiment_config_to_json(cfg));
  CHECK(back.fingerprint() == cfg.fingerprint());
  auto other = cfg;
  other.master_seed = 6;
  CHECK(other.fingerprint() != cfg.fingerprint());
  other = cfg;
  other.jobs = 1;
  CHECK(other.fingerprint() == cfg.fingerprint());

  CHECK_THROWS_AS(parse_experiment_config("{not json"), Error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"grid": "medium"})"), Error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"menus": {"layer": []}})"), Error);
  CHECK_THROWS_AS(parse_experiment_config(R"({"embeddings": {"external": {"fc7": "x.emb"}}})"), Error);
}

TEST_CASE("always-accept runs give half total error on every split") {
  auto cfg = small_config("accept", 20, 5);
  auto exp = open_experiment(cfg, false);
  for (const char* tag : {"accept", "reject"}) {
    auto config = cfg.baseline;
    config = with_stage(config, Stage::Classifier, tag);
    const auto outcome = run_config(exp, config);
    REQUIRE(outcome.hters.size() == 5);
    for (double h : outcome.hters) CHECK(h == 0.5);
    CHECK(outcome.summary.median == 0.5);
    CHECK(outcome.summary.mean == 0.5);
    CHECK(outcome.summary.stddev == 0.0);
  }
}

TEST_CASE("one run is deterministic and keeps eval labels sealed until the threshold is fixed") {
  auto cfg = small_config("single", 15, 1);
  auto exp = open_experiment(cfg, false);
  RunTrace t1, t2;
  const auto a = run_single(cfg.baseline, exp.splits[0], 0, *exp.bank, cfg, &t1);
  const auto b = run_single(cfg.baseline, exp.splits[0], 0, *exp.bank, cfg, &t2);
  REQUIRE(a.ok);
  CHECK(run_result_to_json(a) == run_result_to_json(b));
  CHECK(t1.events == t2.events);

  CHECK(t1.eval_label_reads == 1);
  const auto pos = [&](const char* e) {
    return std::find(t1.events.begin(), t1.events.end(), e) - t1.events.begin();
  };
  const auto n = static_cast<long>(t1.events.size());
  REQUIRE(pos("threshold-fixed") < n);
  REQUIRE(pos("eval-labels-read") < n);
  CHECK(pos("threshold-fixed") < pos("eval-scored"));
  CHECK(pos("eval-scored") < pos("eval-labels-read"));
  CHECK(pos("eval-labels-read") == n - 1);
  CHECK(a.eval.tau == a.dev.tau);

  // the threshold comes from dev scores alone
  CHECK(eer_threshold(a.dev_scores).tau == a.dev.tau);
  const auto at = rates_at(a.eval_scores, a.dev.tau);
  CHECK(at.far == a.eval.far);
  CHECK(at.frr == a.eval.frr);
  CHECK(a.eval_scores.size() == 9);
  CHECK(a.dev_scores.size() == 9);
}

TEST_CASE("run results serialize losslessly") {
  auto cfg = small_config("serialize", 10, 1);
  auto exp = open_experiment(cfg, false);
  const auto r = run_single(cfg.baseline, exp.splits[0], 0, *exp.bank, cfg);
  const auto line = run_result_to_json(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(run_result_to_json(run_result_from_json(line)) == line);
  const auto back = run_result_from_json(line);
  CHECK(back.eval.hter == r.eval.hter);
  CHECK(back.dev_scores == r.dev_scores);
  CHECK(back.hp == r.hp);
}

TEST_CASE("golden baseline runs") {
  const auto golden = nlohmann::json::parse(read_file(fs::path(XDV_GOLDEN_DIR) / "baseline_runs.json"));
  for (const auto& c : golden.at("cases")) {
    CAPTURE(c.at("name").get<std::string>());
    auto cfg = parse_experiment_config(nlohmann::json{{"dataset", {{"synthetic", c.at("dataset")}}},
                                                      {"master_seed", c.at("master_seed")},
                                                      {"n_splits", c.at("n_splits")},
                                                      {"grid", c.at("grid")}}
                                           .dump());
    auto exp = open_experiment(cfg, false);
    const auto outcome = run_config(exp, pipeline_from_key(c.at("config").get<std::string>()));
    const auto want = c.at("eval_hter").get<std::vector<double>>();
    const auto tau = c.at("dev_tau").get<std::vector<double>>();
    REQUIRE(outcome.hters.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(std::abs(outcome.hters[i] - want[i]) < 1e-12);
      CHECK(outcome.runs[i].dev.tau == doctest::Approx(tau[i]).epsilon(1e-9));
      CHECK(outcome.hters[i] < c.at("max_hter").get<double>());
    }
  }
}

TEST_CASE("results store resumes and tolerates a torn tail") {
  auto cfg = small_config("store", 12, 4);
  cfg.baseline = pipeline_from_key("none/lbp/l2/sub/random");
  std::string first;
  {
    auto exp = open_experiment(cfg);
    const auto outcome = run_config(exp, cfg.baseline);
    CHECK(exp.computed_runs == 4);
    CHECK(exp.store->size() == 4);
    first = read_file(exp.store->path());
  }
  {
    auto exp = open_experiment(cfg);
    const auto outcome = run_config(exp, cfg.baseline);
    CHECK(exp.computed_runs == 0);
    CHECK(read_file(exp.store->path()) == first);
  }
  // drop the last record and leave half a line behind
  const auto path = cfg.output_dir / "results.jsonl";
  const auto cut = first.rfind('\n', first.size() - 2);
  std::ofstream(path, std::ios::binary | std::ios::trunc) << first.substr(0, cut + 1) << first.substr(cut + 1, 40);
  {
    auto exp = open_experiment(cfg);
    CHECK(exp.store->size() == 3);
    run_config(exp, cfg.baseline);
    CHECK(exp.computed_runs == 1);
  }
  {
    auto exp = open_experiment(cfg);
    exp.compute = false;
    CHECK(run_config(exp, cfg.baseline).hters.size() == 4);
    CHECK_THROWS_AS(run_config(exp, pipeline_from_key("none/lbp/l2/sub/accept")), Error);
  }
}

TEST_CASE("greedy accounting with small menus") {
  auto cfg = small_config("greedy", 15, 3);
  cfg.baseline = pipeline_from_key("none/lbp/none/sub/accept");
  cfg.menus.enhancement = {"none"};
  cfg.menus.layer = {"lbp", "dct"};
  cfg.menus.normalization = {"none", "l2"};
  cfg.menus.combination = {"sub", "mult"};
  cfg.menus.classifier = {"accept", "reject", "random"};
  auto exp = open_experiment(cfg);
  const auto report = greedy_optimize(exp);
  CHECK(report.distinct_configs == 1 + 2 + 2 + 2 + 3 - 4);
  CHECK(report.total_runs == report.distinct_configs * 3);
  CHECK(exp.store->size() == report.total_runs);
  CHECK(report.stages.size() == 5);
  // ties keep the incumbent
  CHECK(report.stages[1].winner == 0);
  CHECK(!report.stages[1].improved);
  CHECK(report.split_fingerprint == split_list_fingerprint(exp.splits));
  for (const auto& r : exp.store->all()) CHECK(r.split_fingerprint == exp.splits[static_cast<std::size_t>(r.split_index)].fingerprint());

  write_report(report, cfg, cfg.output_dir);
  for (const char* f : {"report.txt", "chosen_pipeline.json", "summary_layer.csv", "summary_classifier.csv"})
    CHECK(fs::exists(cfg.output_dir / f));

  // reuse-only replays count exactly what the store holds
  auto replay = open_experiment(cfg);
  replay.compute = false;
  const auto again = greedy_optimize(replay);
  CHECK(again.distinct_configs == report.distinct_configs);
  CHECK(again.total_runs == report.total_runs);
  CHECK(again.chosen == report.chosen);
  auto partial_cfg = cfg;
  partial_cfg.output_dir = scratch_dir("greedy_partial");
  {
    auto partial = open_experiment(partial_cfg);
    run_config(partial, partial_cfg.baseline);
  }
  auto sparse = open_experiment(partial_cfg);
  sparse.compute = false;
  const auto thin = greedy_optimize(sparse);
  CHECK(thin.distinct_configs == 1);
  CHECK(thin.total_runs == 3);
}

TEST_CASE("degenerate menus evaluate only the baseline") {
  auto cfg = small_config("single_menu", 10, 4);
  cfg.baseline = pipeline_from_key("none/lbp/none/sub/reject");
  for (std::size_t s = 0; s < kStageCount; ++s)
    cfg.menus.of(static_cast<Stage>(s)) = {stage_value(cfg.baseline, static_cast<Stage>(s))};
  auto exp = open_experiment(cfg);
  const auto report = greedy_optimize(exp);
  CHECK(report.distinct_configs == 1);
  CHECK(report.total_runs == 4);
  CHECK(report.chosen == cfg.baseline);
}

TEST_CASE("median run selection") {
  std::vector<RunResult> runs(5);
  const double h[5] = {0.3, 0.1, 0.2, 0.5, 0.4};
  for (int i = 0; i < 5; ++i) {
    runs[static_cast<std::size_t>(i)].ok = true;
    runs[static_cast<std::size_t>(i)].eval.hter = h[i];
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(median_run_index(runs, seed) == 0);
  runs.pop_back();  // {0.3, 0.1, 0.2, 0.5}: middle values 0.2 and 0.3
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto i = median_run_index(runs, seed);
    CHECK((i == 0 || i == 2));
  }
}

TEST_CASE("stage tables") {
  StageReport s;
  s.stage = Stage::Combination;
  s.candidates = {"sub", "mult", "cross"};
  const std::vector<std::vector<double>> hters{{0.1, 0.2, 0.15}, {0.4, 0.5, 0.45}, {0.3, 0.35, 0.32}};
  for (std::size_t i = 0; i < 3; ++i) {
    ConfigOutcome o;
    o.hters = hters[i];
    o.summary = summarize(hters[i]);
    s.outcomes.push_back(o);
    s.failed.push_back(false);
    s.failure.emplace_back();
    s.tested.push_back(i);
  }
  s.test = stat_test(hters);
  s.winner = 0;
  const auto table = render_stage_table(s);
  const auto header = table.substr(0, table.find('\n'));
  std::istringstream cols(header);
  std::vector<std::string> names;
  for (std::string w; cols >> w;) names.push_back(w);
  CHECK(names == std::vector<std::string>{"Method", "Median", "Mean±StdDev", "Min", "Max"});
  CHECK(table.find("0.15000") != std::string::npos);

  const auto dunn = render_dunn_table(s);
  CHECK(dunn.find("Kruskal-Wallis") != std::string::npos);
  if (s.test->posthoc_run) {
    // lower triangle: row i lists i entries
    std::istringstream lines(dunn);
    std::vector<std::string> rows;
    for (std::string l; std::getline(lines, l);) rows.push_back(l);
    const auto last = rows.back();
    CHECK(last.rfind("cross", 0) == 0);
    CHECK(std::count(last.begin(), last.end(), '.') == 2);
  }
  const auto csv = summary_csv(s);
  CHECK(csv.rfind("method,n,failures,median,mean,stddev,min,max\n", 0) == 0);
}
