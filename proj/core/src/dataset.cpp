#include "xdv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdv/error.hpp"
#include "xdv/image_io.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

constexpr std::string_view kManifestHeader =
    "subject_id,path,domain,eye_lx,eye_ly,eye_rx,eye_ry,roi_x,roi_y,roi_w,roi_h";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string row_tag(std::size_t row) { return "manifest row " + std::to_string(row); }

double parse_real(std::string_view token, std::size_t row, std::string_view column) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
    fail(ErrorKind::MalformedRow,
         row_tag(row) + ": column '" + std::string(column) + "' is not a real number: '" + std::string(token) + "'");
  return v;
}

}  // namespace

std::string_view to_string(Domain domain) { return domain == Domain::IdDocument ? "id" : "selfie"; }

Domain domain_from_token(std::string_view token) {
  if (token == "id") return Domain::IdDocument;
  if (token == "selfie") return Domain::Selfie;
  fail(ErrorKind::UnknownDomain, "unknown domain '" + std::string(token) + "' (expected 'id' or 'selfie')");
}

std::string FaceSample::key() const { return subject_id + "/" + std::string(to_string(domain)); }

Rect validate_sample(const FaceSample& sample) {
  if (sample.image.empty()) fail(ErrorKind::InvalidArgument, sample.key() + ": empty image");
  const double x0 = std::clamp(sample.roi.x, 0.0, static_cast<double>(sample.image.width));
  const double y0 = std::clamp(sample.roi.y, 0.0, static_cast<double>(sample.image.height));
  const double x1 = std::clamp(sample.roi.x + sample.roi.w, 0.0, static_cast<double>(sample.image.width));
  const double y1 = std::clamp(sample.roi.y + sample.roi.h, 0.0, static_cast<double>(sample.image.height));
  const Rect roi{x0, y0, x1 - x0, y1 - y0};
  if (!(roi.w > 0.0) || !(roi.h > 0.0)) fail(ErrorKind::DegenerateRoi, sample.key() + ": ROI has zero area");
  if (!roi.contains(sample.left_eye) || !roi.contains(sample.right_eye))
    fail(ErrorKind::EyesOutsideRoi, sample.key() + ": eye centers must lie inside the ROI");
  if (!(sample.left_eye.x < sample.right_eye.x))
    fail(ErrorKind::InvalidArgument, sample.key() + ": left eye x must be smaller than right eye x");
  return roi;
}

std::vector<FaceSample> ingest_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest '" + manifest_path.string() + "'");
  const std::filesystem::path base = manifest_path.parent_path();

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::MalformedRow, "manifest is empty (header required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (trim(line) != kManifestHeader)
    fail(ErrorKind::MalformedRow, "manifest header must be '" + std::string(kManifestHeader) + "'");

  std::vector<FaceSample> samples;
  std::set<std::string> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_csv(line);
    if (fields.size() != 11)
      fail(ErrorKind::MalformedRow,
           row_tag(row) + ": expected 11 fields, found " + std::to_string(fields.size()));
    if (fields[0].empty()) fail(ErrorKind::MalformedRow, row_tag(row) + ": empty subject_id");

    FaceSample s;
    s.subject_id = std::string(fields[0]);
    try {
      s.domain = domain_from_token(fields[2]);
    } catch (const Error& e) {
      fail(ErrorKind::UnknownDomain, row_tag(row) + ": " + e.what());
    }
    s.left_eye = {parse_real(fields[3], row, "eye_lx"), parse_real(fields[4], row, "eye_ly")};
    s.right_eye = {parse_real(fields[5], row, "eye_rx"), parse_real(fields[6], row, "eye_ry")};
    s.roi = {parse_real(fields[7], row, "roi_x"), parse_real(fields[8], row, "roi_y"),
             parse_real(fields[9], row, "roi_w"), parse_real(fields[10], row, "roi_h")};

    std::filesystem::path image_path{std::string(fields[1])};
    if (image_path.is_relative()) image_path = base / image_path;
    if (!std::filesystem::exists(image_path))
      fail(ErrorKind::Io, row_tag(row) + ": image file '" + image_path.string() + "' does not exist");
    try {
      s.image = read_png(image_path);
      validate_sample(s);
    } catch (const Error& e) {
      fail(e.kind(), row_tag(row) + ": " + e.what());
    }
    if (!seen.insert(s.key()).second)
      fail(ErrorKind::DuplicateRecord, row_tag(row) + ": duplicate sample '" + s.key() + "'");
    samples.push_back(std::move(s));
  }
  return samples;
}

std::filesystem::path write_manifest(const std::filesystem::path& dir, std::span<const FaceSample> samples) {
  std::filesystem::create_directories(dir / "img");
  const auto manifest = dir / "manifest.csv";
  std::ofstream out(manifest);
  if (!out) fail(ErrorKind::Io, "cannot write '" + manifest.string() + "'");
  out << kManifestHeader << '\n';
  out.precision(17);
  for (const auto& s : samples) {
    const std::string rel = "img/" + s.subject_id + "_" + std::string(to_string(s.domain)) + ".png";
    write_png(dir / rel, s.image);
    out << s.subject_id << ',' << rel << ',' << to_string(s.domain) << ',' << s.left_eye.x << ','
        << s.left_eye.y << ',' << s.right_eye.x << ',' << s.right_eye.y << ',' << s.roi.x << ',' << s.roi.y
        << ',' << s.roi.w << ',' << s.roi.h << '\n';
  }
  return manifest;
}

std::vector<std::string> subject_ids(std::span<const FaceSample> samples) {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return {ids.begin(), ids.end()};
}

std::vector<PairRef> pairs_within(std::span<const std::string> subjects) {
  std::vector<PairRef> pairs;
  pairs.reserve(subjects.size() * subjects.size());
  for (const auto& id_subject : subjects)
    for (const auto& selfie_subject : subjects)
      pairs.push_back({id_subject, selfie_subject, id_subject == selfie_subject});
  return pairs;
}

SplitPlan plan_split(std::span<const std::string> subjects, std::uint64_t seed) {
  std::vector<std::string> order(subjects.begin(), subjects.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end())
    fail(ErrorKind::InvalidArgument, "subject list contains duplicates");
  if (order.size() < 5)
    fail(ErrorKind::InsufficientData,
         "a split needs at least 5 subjects, got " + std::to_string(order.size()));

  Rng rng(seed);
  rng.shuffle(std::span<std::string>(order));

  const std::size_t u = order.size();
  const std::size_t n_train = (u * 6) / 10;
  const std::size_t n_dev = (u * 2) / 10;

  SplitPlan plan;
  plan.seed = seed;
  plan.train_subjects.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.dev_subjects.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  plan.eval_subjects.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), order.end());
  plan.train_pairs = pairs_within(plan.train_subjects);
  plan.dev_pairs = pairs_within(plan.dev_subjects);
  plan.eval_pairs = pairs_within(plan.eval_subjects);

  // Contiguous chunks in shuffled order; sizes differ by at most one when
  // the training set is not divisible by three.
  std::size_t begin = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    const std::size_t size = n_train / 3 + (f < n_train % 3 ? 1 : 0);
    plan.cv_folds[f].assign(plan.train_subjects.begin() + static_cast<std::ptrdiff_t>(begin),
                            plan.train_subjects.begin() + static_cast<std::ptrdiff_t>(begin + size));
    begin += size;
  }
  return plan;
}

std::vector<SplitPlan> plan_many_splits(std::span<const std::string> subjects, std::uint64_t master_seed, int n) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "number of splits must be positive");
  std::vector<SplitPlan> plans;
  plans.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) plans.push_back(plan_split(subjects, derive_seed(master_seed, static_cast<std::uint64_t>(i))));
  return plans;
}

std::uint64_t SplitPlan::fingerprint() const {
  Fingerprint fp;
  fp.add(seed);
  for (const auto* set : {&train_subjects, &dev_subjects, &eval_subjects}) {
    fp.add(static_cast<std::uint64_t>(set->size()));
    for (const auto& s : *set) fp.add(s);
  }
  for (const auto& fold : cv_folds) {
    fp.add(static_cast<std::uint64_t>(fold.size()));
    for (const auto& s : fold) fp.add(s);
  }
  return fp.value();
}

std::uint64_t split_list_fingerprint(std::span<const SplitPlan> plans) {
  Fingerprint fp;
  fp.add(static_cast<std::uint64_t>(plans.size()));
  for (const auto& p : plans) fp.add(p.fingerprint());
  return fp.value();
}

std::string split_plan_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["train"] = plan.train_subjects;
  j["dev"] = plan.dev_subjects;
  j["eval"] = plan.eval_subjects;
  j["cv_folds"] = plan.cv_folds;
  return j.dump();
}

SplitPlan split_plan_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("split plan JSON: ") + e.what());
  }
  SplitPlan plan;
  try {
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_subjects = j.at("train").get<std::vector<std::string>>();
    plan.dev_subjects = j.at("dev").get<std::vector<std::string>>();
    plan.eval_subjects = j.at("eval").get<std::vector<std::string>>();
    plan.cv_folds = j.at("cv_folds").get<std::array<std::vector<std::string>, 3>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("split plan JSON: ") + e.what());
  }
  plan.train_pairs = pairs_within(plan.train_subjects);
  plan.dev_pairs = pairs_within(plan.dev_subjects);
  plan.eval_pairs = pairs_within(plan.eval_subjects);
  return plan;
}

}  // namespace xdv
