#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "xdv/embedding.hpp"
#include "xdv/error.hpp"
#include "xdv/image_io.hpp"
#include "xdv/orchestrator.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> splits;
  std::string grid;
  std::optional<int> jobs;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--splits", splits, "Number of random splits")->check(CLI::PositiveNumber);
    app->add_option("--grid", grid, "Hyperparameter grid")->check(CLI::IsMember({"coarse", "full"}));
    app->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output directory");
  }

  xdv::ExperimentConfig load() const {
    xdv::ExperimentConfig cfg = config.empty() ? xdv::ExperimentConfig{} : xdv::load_experiment_config(config);
    if (seed) cfg.master_seed = *seed;
    if (splits) cfg.n_splits = *splits;
    if (!grid.empty()) cfg.grid_stride = grid == "full" ? 1 : 5;
    if (jobs) cfg.jobs = *jobs;
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
  }
};

void log_line(const std::string& msg) { std::fprintf(stderr, "[xdv] %s\n", msg.c_str()); }

void print_outcome(const xdv::ConfigOutcome& o) {
  xdv::StageReport s;
  s.candidates = {o.config.key()};
  s.outcomes = {o};
  s.failed = {false};
  s.failure = {""};
  std::cout << xdv::render_stage_table(s);
  std::cout << "runs: " << o.runs.size() << ", failures: " << o.failures << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain face verification experiments"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cross-domain dataset");
  int synth_subjects = 50;
  std::uint64_t synth_seed = 7;
  std::string synth_shift = "default";
  std::string synth_out = "synthetic";
  synth->add_option("--subjects", synth_subjects, "Number of subjects")->check(CLI::Range(3, 100000));
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--shift", synth_shift, "Domain shift preset")
      ->check(CLI::IsMember({"default", "none", "strong_cast"}));
  synth->add_option("--out", synth_out, "Output directory");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and optionally dump aligned faces");
  std::string ingest_manifest;
  std::string ingest_dump;
  std::string ingest_enhance = "none";
  ingest->add_option("manifest", ingest_manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--dump", ingest_dump, "Directory for aligned (and enhanced) PNG crops");
  ingest->add_option("--enhance", ingest_enhance, "Enhancement applied to dumped crops");

  // embed
  auto* embed = app.add_subcommand("embed", "Write built-in embeddings as an EMB1 file");
  CommonFlags embed_flags;
  embed_flags.attach(embed);
  std::string embed_manifest, embed_layer = "lbp", embed_enhance = "none", embed_file;
  embed->add_option("--manifest", embed_manifest, "Manifest CSV (default: the config's dataset)");
  embed->add_option("--layer", embed_layer, "lbp | dct | fc6n | fc7n | fc8");
  embed->add_option("--enhancement", embed_enhance, "Enhancement applied before embedding");
  embed->add_option("--file", embed_file, "Output EMB1 path (default: <out>/<enhancement>_<layer>.emb1)");

  // run
  auto* run = app.add_subcommand("run", "Evaluate one pipeline configuration over all splits");
  CommonFlags run_flags;
  run_flags.attach(run);
  std::string run_pipeline;
  run->add_option("--pipeline", run_pipeline, "enhancement/layer/norm/combination/classifier (default: baseline)");

  // greedy
  auto* greedy = app.add_subcommand("greedy", "Greedy stage-by-stage pipeline optimization");
  CommonFlags greedy_flags;
  greedy_flags.attach(greedy);

  // report
  auto* report = app.add_subcommand("report", "Rebuild tables from a stored results.jsonl");
  CommonFlags report_flags;
  report_flags.attach(report);

  // det
  auto* det = app.add_subcommand("det", "Export the DET curve of one stored run");
  CommonFlags det_flags;
  det_flags.attach(det);
  std::string det_pipeline;
  int det_split = -1;
  std::string det_file;
  det->add_option("--pipeline", det_pipeline, "Configuration key (default: baseline)");
  det->add_option("--split", det_split, "Split index (default: the median run)");
  det->add_option("--file", det_file, "Output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      xdv::DomainShiftParams shift;
      if (synth_shift == "none") shift = xdv::DomainShiftParams::none();
      if (synth_shift == "strong_cast") shift = xdv::DomainShiftParams::strong_cast();
      const auto samples = xdv::synthesize_dataset(synth_subjects, synth_seed, shift);
      const auto manifest = xdv::write_manifest(synth_out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << manifest.string() << "\n";
    } else if (*ingest) {
      const auto samples = xdv::ingest_manifest(ingest_manifest);
      std::cout << samples.size() << " samples, " << xdv::subject_ids(samples).size() << " subjects\n";
      if (!ingest_dump.empty()) {
        std::filesystem::create_directories(ingest_dump);
        const auto method = xdv::enhancement_of(ingest_enhance);
        for (const auto& s : samples) {
          const auto face = xdv::enhance(xdv::normalize_geometry(s), method);
          std::string name = s.subject_id + "_" + std::string(xdv::to_string(s.domain)) + "_" +
                             std::string(method.tag()) + ".png";
          xdv::write_png(std::filesystem::path(ingest_dump) / name, face.pixels);
        }
        std::cout << "dumped " << samples.size() << " crops to " << ingest_dump << "\n";
      }
    } else if (*embed) {
      xdv::ExperimentConfig cfg = embed_flags.load();
      if (!embed_manifest.empty()) {
        cfg.dataset.kind = xdv::DatasetSource::Kind::Manifest;
        cfg.dataset.manifest = embed_manifest;
      }
      const xdv::Layer layer = xdv::layer_of(embed_layer);
      if (!xdv::is_builtin(layer) && layer != xdv::stored_layer(layer))
        throw xdv::Error(xdv::ErrorKind::InvalidArgument, "EMB1 files hold pre-activation layers: fc6n, fc7n or fc8");
      cfg.external.clear();
      xdv::FeatureBank bank(cfg, xdv::load_dataset(cfg.dataset));
      const auto& map = bank.vectors(embed_enhance, embed_layer);
      std::vector<xdv::FeatureVector> vectors;
      for (const auto& [key, v] : map) {
        xdv::FeatureVector copy = v;
        copy.meta.sample_id = key.subject_id;
        vectors.push_back(std::move(copy));
      }
      std::filesystem::path file = embed_file;
      if (file.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        file = cfg.output_dir / (std::string(xdv::enhancement_of(embed_enhance).tag()) + "_" + embed_layer + ".emb1");
      }
      xdv::write_emb1(file, xdv::layer_tag(layer), vectors);
      std::cout << "wrote " << vectors.size() << " vectors to " << file.string() << "\n";
    } else if (*run) {
      const xdv::ExperimentConfig cfg = run_flags.load();
      auto exp = xdv::open_experiment(cfg);
      exp.log = log_line;
      const auto pipeline = run_pipeline.empty() ? cfg.baseline : xdv::pipeline_from_key(run_pipeline);
      print_outcome(xdv::run_config(exp, pipeline));
    } else if (*greedy || *report) {
      const xdv::ExperimentConfig cfg = (*greedy ? greedy_flags : report_flags).load();
      auto exp = xdv::open_experiment(cfg);
      exp.log = log_line;
      exp.compute = static_cast<bool>(*greedy);
      const auto rep = xdv::greedy_optimize(exp);
      xdv::write_report(rep, cfg, cfg.output_dir);
      for (const auto& s : rep.stages) {
        std::cout << "== " << xdv::stage_tag(s.stage) << " ==\n"
                  << xdv::render_stage_table(s) << "\n"
                  << xdv::render_dunn_table(s) << "\n";
      }
      std::cout << "chosen pipeline: " << rep.chosen.key() << "\n"
                << "distinct configurations: " << rep.distinct_configs << ", runs: " << rep.total_runs << "\n";
    } else if (*det) {
      const xdv::ExperimentConfig cfg = det_flags.load();
      auto exp = xdv::open_experiment(cfg);
      exp.compute = false;
      const auto pipeline = det_pipeline.empty() ? cfg.baseline : xdv::pipeline_from_key(det_pipeline);
      const auto outcome = xdv::run_config(exp, pipeline);
      const std::size_t idx = det_split >= 0 ? static_cast<std::size_t>(det_split)
                                             : xdv::median_run_index(outcome.runs, cfg.master_seed);
      if (idx >= outcome.runs.size() || !outcome.runs[idx].ok)
        throw xdv::Error(xdv::ErrorKind::InvalidArgument, "no successful run at split " + std::to_string(idx));
      if (outcome.runs[idx].eval_scores.empty())
        throw xdv::Error(xdv::ErrorKind::InsufficientData, "run was stored without scores");
      const std::string csv = xdv::det_csv(xdv::det_points(outcome.runs[idx].eval_scores));
      if (det_file.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(det_file) << csv;
      }
    }
  } catch (const xdv::Error& e) {
    std::fprintf(stderr, "xdv: %s error: %s\n", std::string(xdv::to_string(e.kind())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "xdv: %s\n", e.what());
    return 1;
  }
  return 0;
}
