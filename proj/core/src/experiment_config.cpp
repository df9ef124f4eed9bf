#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdv/error.hpp"
#include "xdv/orchestrator.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kStageTags[kStageCount] = {"enhancement", "layer", "normalization", "combination",
                                                      "classifier"};

void check_value(Stage s, std::string_view v) {
  switch (s) {
    case Stage::Enhancement: enhancement_of(v); break;
    case Stage::Layer: layer_of(v); break;
    case Stage::Normalization: norm_of(v); break;
    case Stage::Combination: combine_of(v); break;
    case Stage::Classifier: classifier_of(v); break;
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("config field '") + key + "': " + e.what());
  }
}

DomainShiftParams parse_shift(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "default") return {};
    if (s == "none") return DomainShiftParams::none();
    if (s == "strong_cast") return DomainShiftParams::strong_cast();
    fail(ErrorKind::InvalidArgument, "unknown shift preset '" + s + "' (valid: default, none, strong_cast)");
  }
  DomainShiftParams p;
  p.color_cast = get_or(j, "color_cast", p.color_cast);
  p.blur_sigma = get_or(j, "blur_sigma", p.blur_sigma);
  p.downscale = get_or(j, "downscale", p.downscale);
  p.illumination_gradient = get_or(j, "illumination_gradient", p.illumination_gradient);
  p.noise_sigma = get_or(j, "noise_sigma", p.noise_sigma);
  return p;
}

json shift_json(const DomainShiftParams& p) {
  return {{"color_cast", p.color_cast},
          {"blur_sigma", p.blur_sigma},
          {"downscale", p.downscale},
          {"illumination_gradient", p.illumination_gradient},
          {"noise_sigma", p.noise_sigma}};
}

json pipeline_json(const PipelineConfig& c) {
  json j;
  for (std::size_t s = 0; s < kStageCount; ++s) j[std::string(kStageTags[s])] = stage_value(c, static_cast<Stage>(s));
  return j;
}

PipelineConfig parse_pipeline(const json& j, PipelineConfig base) {
  for (std::size_t s = 0; s < kStageCount; ++s) {
    const std::string key(kStageTags[s]);
    if (j.contains(key)) base = with_stage(base, static_cast<Stage>(s), j.at(key).get<std::string>());
  }
  return base;
}

json params_json(const ExperimentConfig& c) {
  return {{"retinex", {{"sigma", c.retinex.sigma}, {"low_percentile", c.retinex.low_percentile},
                       {"high_percentile", c.retinex.high_percentile}}},
          {"ace", {{"slope", c.ace.slope}, {"limit", c.ace.limit}, {"neighbor_stride", c.ace.neighbor_stride}}},
          {"clahe", {{"tiles_x", c.clahe.tiles_x}, {"tiles_y", c.clahe.tiles_y}, {"clip_limit", c.clahe.clip_limit}}}};
}

}  // namespace

std::string PipelineConfig::key() const {
  std::string k;
  for (std::size_t s = 0; s < kStageCount; ++s) {
    if (s) k += '/';
    k += stage_value(*this, static_cast<Stage>(s));
  }
  return k;
}

PipelineConfig pipeline_from_key(std::string_view key) {
  PipelineConfig c;
  std::size_t s = 0, start = 0;
  for (;; ++s) {
    const auto slash = key.find('/', start);
    const auto part = key.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    if (s >= kStageCount) fail(ErrorKind::InvalidArgument, "pipeline key '" + std::string(key) + "' has too many parts");
    c = with_stage(c, static_cast<Stage>(s), part);
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  if (s + 1 != kStageCount)
    fail(ErrorKind::InvalidArgument, "pipeline key '" + std::string(key) + "' needs five '/'-separated parts");
  return c;
}

std::string_view stage_tag(Stage s) { return kStageTags[static_cast<std::size_t>(s)]; }

std::string stage_value(const PipelineConfig& c, Stage s) {
  switch (s) {
    case Stage::Enhancement: return c.enhancement;
    case Stage::Layer: return c.layer;
    case Stage::Normalization: return std::string(norm_tag(c.normalization));
    case Stage::Combination: return std::string(combine_tag(c.combination));
    case Stage::Classifier: return std::string(classifier_tag(c.classifier));
  }
  return {};
}

PipelineConfig with_stage(PipelineConfig c, Stage s, std::string_view value) {
  switch (s) {
    case Stage::Enhancement: c.enhancement = std::string(enhancement_of(value).tag()); break;
    case Stage::Layer: c.layer = std::string(layer_tag(layer_of(value))); break;
    case Stage::Normalization: c.normalization = norm_of(value); break;
    case Stage::Combination: c.combination = combine_of(value); break;
    case Stage::Classifier: c.classifier = classifier_of(value); break;
  }
  return c;
}

const std::vector<std::string>& StageMenus::of(Stage s) const {
  switch (s) {
    case Stage::Enhancement: return enhancement;
    case Stage::Layer: return layer;
    case Stage::Normalization: return normalization;
    case Stage::Combination: return combination;
    case Stage::Classifier: return classifier;
  }
  return enhancement;
}

std::vector<std::string>& StageMenus::of(Stage s) {
  return const_cast<std::vector<std::string>&>(static_cast<const StageMenus&>(*this).of(s));
}

EnhancementMethod ExperimentConfig::enhancement(std::string_view tag) const {
  EnhancementMethod m = enhancement_of(tag);
  m.retinex = retinex;
  m.ace = ace;
  m.clahe = clahe;
  return m;
}

std::optional<std::filesystem::path> ExperimentConfig::external_path(std::string_view enh,
                                                                     std::string_view layer) const {
  for (const std::string& key : {std::string(enh), std::string("*")}) {
    const auto it = external.find(key);
    if (it == external.end()) continue;
    const auto jt = it->second.find(std::string(layer));
    if (jt != it->second.end()) return jt->second;
  }
  return std::nullopt;
}

std::uint64_t ExperimentConfig::fingerprint() const {
  json j;
  j["dataset"] = dataset.kind == DatasetSource::Kind::Manifest
                     ? json{{"manifest", dataset.manifest.generic_string()}}
                     : json{{"n_subjects", dataset.n_subjects}, {"seed", dataset.seed}, {"shift", shift_json(dataset.shift)}};
  j["builtin"] = builtin;
  json ext = json::object();
  for (const auto& [enh, layers] : external)
    for (const auto& [layer, path] : layers) ext[enh][layer] = path.generic_string();
  j["external"] = ext;
  j["grid_stride"] = grid_stride;
  j["master_seed"] = master_seed;
  j["n_splits"] = n_splits;
  j["params"] = params_json(*this);
  j["classical_phase"] = combine_options.classical_phase;
  j["solver"] = {solver.svm_tolerance, solver.svm_max_iterations, solver.lr_tolerance, solver.lr_max_iterations};
  j["retain_scores"] = retain_scores;
  return Fingerprint{}.add(std::string_view(j.dump())).value();
}

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::InvalidArgument, "experiment config must be a JSON object");
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.contains("manifest")) {
      c.dataset.kind = DatasetSource::Kind::Manifest;
      c.dataset.manifest = resolve(d.at("manifest").get<std::string>());
    } else if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      c.dataset.n_subjects = get_or(s, "n_subjects", c.dataset.n_subjects);
      c.dataset.seed = get_or(s, "seed", c.dataset.seed);
      if (s.contains("shift")) c.dataset.shift = parse_shift(s.at("shift"));
    } else {
      fail(ErrorKind::InvalidArgument, "dataset must name 'manifest' or 'synthetic'");
    }
  }
  if (j.contains("embeddings")) {
    const json& e = j.at("embeddings");
    c.builtin = get_or<std::string>(e, "builtin", c.builtin);
    if (!is_builtin(layer_of(c.builtin))) fail(ErrorKind::InvalidArgument, "embeddings.builtin must be lbp or dct");
    if (e.contains("external")) {
      for (const auto& [k, v] : e.at("external").items()) {
        if (v.is_string()) {
          const Layer l = layer_of(k);
          if (is_builtin(l) || l != stored_layer(l))
            fail(ErrorKind::InvalidArgument, "external layer '" + k + "' must be fc6n, fc7n or fc8");
          c.external["*"][k] = resolve(v.get<std::string>());
        } else {
          const std::string enh(enhancement_of(k).tag());
          for (const auto& [lk, lv] : v.items()) {
            const Layer l = layer_of(lk);
            if (is_builtin(l) || l != stored_layer(l))
              fail(ErrorKind::InvalidArgument, "external layer '" + lk + "' must be fc6n, fc7n or fc8");
            c.external[enh][lk] = resolve(lv.get<std::string>());
          }
        }
      }
    }
  }
  if (j.contains("menus")) {
    for (std::size_t s = 0; s < kStageCount; ++s) {
      const std::string key(kStageTags[s]);
      if (!j.at("menus").contains(key)) continue;
      auto values = j.at("menus").at(key).get<std::vector<std::string>>();
      if (values.empty()) fail(ErrorKind::InvalidArgument, "menu '" + key + "' is empty");
      for (auto& v : values) {
        check_value(static_cast<Stage>(s), v);
        v = stage_value(with_stage({}, static_cast<Stage>(s), v), static_cast<Stage>(s));
      }
      c.menus.of(static_cast<Stage>(s)) = values;
    }
  }
  if (j.contains("baseline")) c.baseline = parse_pipeline(j.at("baseline"), c.baseline);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.is_number_integer()) c.grid_stride = g.get<int>();
    else if (g == "coarse") c.grid_stride = 5;
    else if (g == "full") c.grid_stride = 1;
    else fail(ErrorKind::InvalidArgument, "grid must be 'coarse', 'full' or an integer stride");
    if (c.grid_stride < 1) fail(ErrorKind::InvalidArgument, "grid stride must be positive");
  }
  c.master_seed = get_or(j, "master_seed", c.master_seed);
  c.n_splits = get_or(j, "n_splits", c.n_splits);
  if (c.n_splits < 1) fail(ErrorKind::InvalidArgument, "n_splits must be positive");
  c.jobs = std::max(1, get_or(j, "jobs", c.jobs));
  if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
  if (j.contains("enhancement_params")) {
    const json& p = j.at("enhancement_params");
    if (p.contains("retinex")) {
      const json& r = p.at("retinex");
      c.retinex.sigma = get_or(r, "sigma", c.retinex.sigma);
      c.retinex.low_percentile = get_or(r, "low_percentile", c.retinex.low_percentile);
      c.retinex.high_percentile = get_or(r, "high_percentile", c.retinex.high_percentile);
    }
    if (p.contains("ace")) {
      const json& a = p.at("ace");
      c.ace.slope = get_or(a, "slope", c.ace.slope);
      c.ace.limit = get_or(a, "limit", c.ace.limit);
      c.ace.neighbor_stride = get_or(a, "neighbor_stride", c.ace.neighbor_stride);
    }
    if (p.contains("clahe")) {
      const json& k = p.at("clahe");
      c.clahe.tiles_x = get_or(k, "tiles_x", c.clahe.tiles_x);
      c.clahe.tiles_y = get_or(k, "tiles_y", c.clahe.tiles_y);
      c.clahe.clip_limit = get_or(k, "clip_limit", c.clahe.clip_limit);
    }
  }
  if (j.contains("phase_correlation")) {
    const auto v = j.at("phase_correlation").get<std::string>();
    if (v != "printed" && v != "classical")
      fail(ErrorKind::InvalidArgument, "phase_correlation must be 'printed' or 'classical'");
    c.combine_options.classical_phase = v == "classical";
  }
  c.retain_scores = get_or(j, "retain_scores", c.retain_scores);
  c.min_success_fraction = get_or(j, "min_success_fraction", c.min_success_fraction);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open experiment config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.dataset.kind == DatasetSource::Kind::Manifest) {
    j["dataset"] = {{"manifest", c.dataset.manifest.generic_string()}};
  } else {
    j["dataset"] = {{"synthetic",
                     {{"n_subjects", c.dataset.n_subjects}, {"seed", c.dataset.seed}, {"shift", shift_json(c.dataset.shift)}}}};
  }
  json emb{{"builtin", c.builtin}};
  if (!c.external.empty()) {
    json ext = json::object();
    for (const auto& [enh, layers] : c.external)
      for (const auto& [layer, path] : layers) {
        if (enh == "*") ext[layer] = path.generic_string();
        else ext[enh][layer] = path.generic_string();
      }
    emb["external"] = ext;
  }
  j["embeddings"] = emb;
  json menus;
  for (std::size_t s = 0; s < kStageCount; ++s) menus[std::string(kStageTags[s])] = c.menus.of(static_cast<Stage>(s));
  j["menus"] = menus;
  j["baseline"] = pipeline_json(c.baseline);
  j["grid"] = c.grid_stride;
  j["master_seed"] = c.master_seed;
  j["n_splits"] = c.n_splits;
  j["jobs"] = c.jobs;
  j["output_dir"] = c.output_dir.generic_string();
  j["enhancement_params"] = params_json(c);
  j["phase_correlation"] = c.combine_options.classical_phase ? "classical" : "printed";
  j["retain_scores"] = c.retain_scores;
  j["min_success_fraction"] = c.min_success_fraction;
  return j.dump(2);
}

}  // namespace xdv
