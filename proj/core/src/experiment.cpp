#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <thread>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

constexpr std::uint64_t kRunStream = 0x52554E;  // per-split solver and baseline seeds

// Calls body(i) for i in [0, n) on up to `jobs` threads.
template <class Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
    });
  for (auto& t : pool) t.join();
}

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(ErrorKind::Stage, std::string(stage) + ": " + std::string(to_string(e.kind())) + ": " + e.what());
  }
}

std::size_t position_of(std::span<const std::string> list, const std::string& id) {
  const auto it = std::find(list.begin(), list.end(), id);
  if (it == list.end()) fail(ErrorKind::InvalidArgument, "subject '" + id + "' missing from split");
  return static_cast<std::size_t>(it - list.begin());
}

TrainingSet rows_of(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const std::size_t> rows) {
  TrainingSet t;
  t.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  t.y.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    t.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    t.y.push_back(y[rows[k]]);
  }
  return t;
}

}  // namespace

std::vector<FaceSample> load_dataset(const DatasetSource& source) {
  if (source.kind == DatasetSource::Kind::Manifest) return ingest_manifest(source.manifest);
  return synthesize_dataset(source.n_subjects, source.seed, source.shift);
}

// ---------------------------------------------------------------------------
// FeatureBank
// ---------------------------------------------------------------------------

struct FeatureBank::Impl {
  std::mutex mutex;
  std::vector<AlignedFace> aligned;
  std::map<std::string, std::vector<AlignedFace>> enhanced;
  std::map<std::string, EmbeddingMap> vectors;  // "<enhancement>|<layer>"
  std::size_t faces_enhanced = 0;
};

FeatureBank::FeatureBank(const ExperimentConfig& cfg, std::vector<FaceSample> samples)
    : cfg_(cfg), samples_(std::move(samples)), impl_(std::make_unique<Impl>()) {
  std::map<EmbeddingKey, int> seen;
  for (const auto& s : samples_) {
    if (++seen[{s.subject_id, s.domain}] > 1)
      fail(ErrorKind::DuplicateRecord, "dataset has two " + std::string(to_string(s.domain)) + " samples for subject '" +
                                           s.subject_id + "'");
  }
  for (const auto& id : subjects())
    for (const Domain d : {Domain::IdDocument, Domain::Selfie})
      if (!seen.count({id, d}))
        fail(ErrorKind::InsufficientData,
             "subject '" + id + "' has no " + std::string(to_string(d)) + " sample");
}

FeatureBank::~FeatureBank() = default;

std::vector<std::string> FeatureBank::subjects() const { return subject_ids(samples_); }

std::size_t FeatureBank::faces_enhanced() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->faces_enhanced;
}

const EmbeddingMap& FeatureBank::vectors(std::string_view enhancement, std::string_view layer_name) {
  const EnhancementMethod method = cfg_.enhancement(enhancement);
  const Layer layer = layer_of(layer_name);
  const std::string enh(method.tag());
  const std::string key = enh + "|" + std::string(layer_tag(layer));
  std::lock_guard lock(impl_->mutex);
  if (const auto it = impl_->vectors.find(key); it != impl_->vectors.end()) return it->second;

  const std::size_t n = samples_.size();
  const auto external = is_builtin(layer) ? std::nullopt
                                          : cfg_.external_path(enh, layer_tag(stored_layer(layer)));
  if (external) {
    EmbeddingMap loaded = load_external(*external, layer);
    EmbeddingMap out;
    for (const auto& s : samples_) {
      const auto it = loaded.find({s.subject_id, s.domain});
      if (it == loaded.end())
        fail(ErrorKind::InsufficientData, "embedding file '" + external->string() + "' has no vector for " + s.key());
      FeatureVector v = is_rectified(layer) ? rectify(it->second) : it->second;
      v.meta.layer = std::string(layer_tag(layer));
      out.emplace(EmbeddingKey{s.subject_id, s.domain}, std::move(v));
    }
    return impl_->vectors.emplace(key, std::move(out)).first->second;
  }

  if (impl_->aligned.empty()) {
    impl_->aligned.resize(n);
    parallel_for(n, cfg_.jobs, [&](std::size_t i) { impl_->aligned[i] = normalize_geometry(samples_[i]); });
  }
  auto eit = impl_->enhanced.find(enh);
  if (eit == impl_->enhanced.end()) {
    std::vector<AlignedFace> faces(n);
    parallel_for(n, cfg_.jobs, [&](std::size_t i) { faces[i] = enhance(impl_->aligned[i], method); });
    if (method.kind != EnhancementKind::None) impl_->faces_enhanced += n;
    eit = impl_->enhanced.emplace(enh, std::move(faces)).first;
  }

  // Deep layers share one descriptor and head pass per face.
  std::vector<Layer> layers{layer};
  if (!is_builtin(layer)) layers = {Layer::Fc6n, Layer::Fc6, Layer::Fc7n, Layer::Fc7, Layer::Fc8};
  const Layer base = layer_of(cfg_.builtin);
  std::vector<std::vector<FeatureVector>> per_sample(n);
  parallel_for(n, cfg_.jobs, [&](std::size_t i) { per_sample[i] = embed_builtin(eit->second[i], layers, base); });
  const EmbeddingMap* requested = nullptr;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    EmbeddingMap out;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureVector v = std::move(per_sample[i][l]);
      v.meta.domain = samples_[i].domain;
      v.meta.sample_id = samples_[i].key();
      validate(v);
      out.emplace(EmbeddingKey{samples_[i].subject_id, samples_[i].domain}, std::move(v));
    }
    const std::string k = enh + "|" + std::string(layer_tag(layers[l]));
    auto& slot = impl_->vectors.insert_or_assign(k, std::move(out)).first->second;
    if (layers[l] == layer) requested = &slot;
  }
  const std::size_t dim = requested->begin()->second.values.size();
  for (const auto& [k, v] : *requested)
    if (v.values.size() != dim)
      fail(ErrorKind::DimensionMismatch, "layer " + std::string(layer_tag(layer)) + " mixes dimensions " +
                                             std::to_string(dim) + " and " + std::to_string(v.values.size()));
  return *requested;
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t master_seed, int split_index) {
  return derive_seed(derive_seed(master_seed, kRunStream), static_cast<std::uint64_t>(split_index));
}

RunResult run_single(const PipelineConfig& config, const SplitPlan& split, int split_index, FeatureBank& bank,
                     const ExperimentConfig& cfg, RunTrace* trace) {
  RunResult r;
  r.config = config;
  r.split_index = split_index;
  r.split_seed = split.seed;
  r.split_fingerprint = split.fingerprint();
  const std::uint64_t seed = run_seed(cfg.master_seed, split_index);
  const auto note = [&](const char* event) {
    if (trace) trace->events.emplace_back(event);
  };

  std::vector<PairRef> eval_ids;
  std::vector<bool> eval_labels;
  for (const auto& p : split.eval_pairs) {
    eval_ids.push_back({p.id_subject, p.selfie_subject, false});
    eval_labels.push_back(p.genuine);
  }
  LabelVault vault(std::move(eval_labels));

  Eigen::MatrixXd train_x, dev_x, eval_x;
  std::vector<int> train_y;
  for (const auto& p : split.train_pairs) train_y.push_back(p.genuine ? 1 : -1);
  GridResult grid;
  if (is_baseline(config.classifier)) {
    // Baselines ignore features; each pair is scored through a distinct ordinal.
    const auto ordinals = [](std::size_t n, double offset) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
      for (std::size_t k = 0; k < n; ++k) x(static_cast<Eigen::Index>(k), 0) = offset + static_cast<double>(k);
      return x;
    };
    train_x = ordinals(split.train_pairs.size(), 0.0);
    dev_x = ordinals(split.dev_pairs.size(), 1e9);
    eval_x = ordinals(eval_ids.size(), 2e9);
    note("combined");
  } else {
    const EmbeddingMap& raw = in_stage("embed", [&]() -> const EmbeddingMap& {
      return bank.vectors(config.enhancement, config.layer);
    });
    note("embedded");

    // Normalized (id, selfie) vectors per subject.
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> normed;
    in_stage("normalize", [&] {
      for (const auto* set : {&split.train_subjects, &split.dev_subjects, &split.eval_subjects})
        for (const auto& id : *set) {
          const auto a = raw.find({id, Domain::IdDocument});
          const auto b = raw.find({id, Domain::Selfie});
          if (a == raw.end() || b == raw.end())
            fail(ErrorKind::InsufficientData, "no features for subject '" + id + "'");
          normed[id] = {normalize(a->second.values, config.normalization),
                        normalize(b->second.values, config.normalization)};
        }
    });
    note("normalized");

    // Pair features; only subject ids are consulted here.
    const auto pair_matrix = [&](const std::vector<PairRef>& pairs) {
      Eigen::MatrixXd x;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto f = combine(normed.at(pairs[k].id_subject).first, normed.at(pairs[k].selfie_subject).second,
                               config.combination, cfg.combine_options);
        if (k == 0) x.resize(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(f.size()));
        x.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
      }
      if (!x.allFinite()) fail(ErrorKind::NonFinite, "combined features are not finite");
      return x;
    };

    in_stage("combine", [&] {
      train_x = pair_matrix(split.train_pairs);
      dev_x = pair_matrix(split.dev_pairs);
      eval_x = pair_matrix(eval_ids);
    });
    note("combined");

    // Train pairs are the row-major cross product over train_subjects.
    const std::size_t u = split.train_subjects.size();
    if (split.train_pairs.size() != u * u)
      fail(ErrorKind::InvalidArgument, "split train pairs are not the full cross product");
    const auto within = [&](const std::vector<std::string>& fold) {
      std::vector<std::size_t> rows;
      for (const auto& a : fold)
        for (const auto& b : fold) rows.push_back(position_of(split.train_subjects, a) * u + position_of(split.train_subjects, b));
      return rows;
    };
    std::vector<CvFold> folds;
    for (std::size_t f = 0; f < split.cv_folds.size(); ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t g = 0; g < split.cv_folds.size(); ++g)
        if (g != f) {
          const auto rows = within(split.cv_folds[g]);
          train_rows.insert(train_rows.end(), rows.begin(), rows.end());
        }
      const auto test_rows = within(split.cv_folds[f]);
      folds.push_back({rows_of(train_x, train_y, train_rows), rows_of(train_x, train_y, test_rows)});
    }

    grid = in_stage("grid-search", [&] {
      return grid_search(config.classifier, folds, GridSpec::with_stride(cfg.grid_stride), derive_seed(seed, 1),
                         cfg.solver);
    });
    note("grid-searched");
  }
  r.hp = grid.best;
  r.mean_cv_eer = grid.mean_cv_eer;

  TrainingSet full;
  full.x = std::move(train_x);
  full.y = std::move(train_y);
  const TrainedModel model =
      in_stage("train", [&] { return train(config.classifier, full, grid.best, derive_seed(seed, 2), cfg.solver); });
  r.converged = model.converged;
  note("trained");

  in_stage("threshold", [&] {
    const Eigen::VectorXd s = score_rows(model, dev_x);
    r.dev_scores.resize(split.dev_pairs.size());
    for (std::size_t k = 0; k < split.dev_pairs.size(); ++k)
      r.dev_scores[k] = {s[static_cast<Eigen::Index>(k)], split.dev_pairs[k].genuine};
    r.dev = eer_threshold(r.dev_scores);
  });
  note("threshold-fixed");

  in_stage("evaluate", [&] {
    const Eigen::VectorXd s = score_rows(model, eval_x);
    note("eval-scored");
    const std::vector<bool>& labels = vault.reveal();
    note("eval-labels-read");
    r.eval_scores.resize(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) r.eval_scores[k] = {s[static_cast<Eigen::Index>(k)], labels[k]};
    r.eval = rates_at(r.eval_scores, r.dev.tau);
  });
  if (trace) trace->eval_label_reads = vault.reads();
  if (!cfg.retain_scores) {
    r.dev_scores.clear();
    r.eval_scores.clear();
  }
  r.ok = true;
  return r;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

Experiment open_experiment(const ExperimentConfig& cfg, bool with_store) {
  Experiment exp;
  exp.cfg = cfg;
  std::vector<FaceSample> samples = load_dataset(cfg.dataset);
  const auto subjects = subject_ids(samples);
  exp.splits = plan_many_splits(subjects, cfg.master_seed, cfg.n_splits);
  Fingerprint fp;
  fp.add(cfg.fingerprint()).add(split_list_fingerprint(exp.splits));
  for (const auto& s : samples) {
    fp.add(std::string_view(s.key()));
    for (const auto px : s.image.pixels) fp.add(static_cast<std::uint64_t>(px));
    fp.add(s.left_eye.x).add(s.left_eye.y).add(s.right_eye.x).add(s.right_eye.y);
    fp.add(s.roi.x).add(s.roi.y).add(s.roi.w).add(s.roi.h);
  }
  exp.fingerprint = fp.value();
  exp.bank = std::make_unique<FeatureBank>(cfg, std::move(samples));
  if (with_store) exp.store = std::make_unique<ResultsStore>(cfg.output_dir / "results.jsonl");
  return exp;
}

ConfigOutcome run_config(Experiment& exp, const PipelineConfig& config) {
  const std::size_t n = exp.splits.size();
  const std::string key = config.key();
  ConfigOutcome out;
  out.config = config;
  out.runs.resize(n);
  std::vector<char> stored(n, 0);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < n; ++i) {
    const RunResult* hit = exp.store ? exp.store->find(exp.fingerprint, key, static_cast<int>(i)) : nullptr;
    if (hit) {
      out.runs[i] = *hit;
      stored[i] = 1;
    } else {
      todo.push_back(i);
    }
  }
  if (!todo.empty() && !exp.compute)
    fail(ErrorKind::InsufficientData, "results store lacks " + std::to_string(todo.size()) + " runs of " + key);
  if (exp.log && !todo.empty())
    exp.log(key + ": " + std::to_string(todo.size()) + " runs (" + std::to_string(n - todo.size()) + " reused)");

  std::string prepare_error;
  if (!todo.empty() && !is_baseline(config.classifier)) {
    try {
      in_stage("embed", [&] { exp.bank->vectors(config.enhancement, config.layer); });
    } catch (const Error& e) {
      prepare_error = e.what();
    }
  }

  std::mutex commit_mutex;
  std::vector<char> done(n, 0);
  std::size_t cursor = 0;
  const auto commit = [&](std::size_t i) {
    std::lock_guard lock(commit_mutex);
    done[i] = 1;
    while (cursor < n && (done[cursor] || stored[cursor])) {
      if (!stored[cursor] && exp.store) exp.store->append(out.runs[cursor]);
      ++cursor;
    }
  };
  for (std::size_t i = 0; i < n && stored[i]; ++i) cursor = i + 1;

  parallel_for(todo.size(), exp.cfg.jobs, [&](std::size_t t) {
    const std::size_t i = todo[t];
    RunResult r;
    if (!prepare_error.empty()) {
      r.error = prepare_error;
    } else {
      try {
        r = run_single(config, exp.splits[i], static_cast<int>(i), *exp.bank, exp.cfg);
      } catch (const std::exception& e) {
        r = RunResult{};
        r.error = e.what();
      }
    }
    r.config = config;
    r.split_index = static_cast<int>(i);
    r.split_seed = exp.splits[i].seed;
    r.split_fingerprint = exp.splits[i].fingerprint();
    r.experiment = exp.fingerprint;
    out.runs[i] = std::move(r);
    commit(i);
  });
  exp.computed_runs += todo.size();

  for (const auto& r : out.runs) {
    if (r.ok) out.hters.push_back(r.eval.hter);
    else ++out.failures;
  }
  const double need = std::ceil(exp.cfg.min_success_fraction * static_cast<double>(n) - 1e-9);
  if (static_cast<double>(out.hters.size()) < need || out.hters.empty()) {
    std::string first;
    for (const auto& r : out.runs)
      if (!r.ok) {
        first = r.error;
        break;
      }
    fail(ErrorKind::InsufficientData, key + ": only " + std::to_string(out.hters.size()) + " of " +
                                          std::to_string(n) + " runs succeeded; first error: " + first);
  }
  out.summary = summarize(out.hters);
  return out;
}

}  // namespace xdv
