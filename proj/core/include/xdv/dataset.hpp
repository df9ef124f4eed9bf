#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdv/raster.hpp"

namespace xdv {

enum class Domain : std::uint8_t { IdDocument = 0, Selfie = 1 };

// Manifest tokens: "id" and "selfie".
std::string_view to_string(Domain domain);
Domain domain_from_token(std::string_view token);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool contains(Point p) const noexcept { return p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h; }
};

// One image of one subject in one acquisition domain.
struct FaceSample {
  std::string subject_id;
  Domain domain = Domain::IdDocument;
  RgbImage image;
  Rect roi;
  Point left_eye;
  Point right_eye;

  // "<subject>/<id|selfie>", unique within a dataset.
  std::string key() const;
};

// Checks the sample invariants after clamping the ROI to the image and
// returns the clamped ROI. Throws DegenerateRoi / EyesOutsideRoi /
// InvalidArgument.
Rect validate_sample(const FaceSample& sample);

// Parses a manifest CSV (header required):
//   subject_id,path,domain,eye_lx,eye_ly,eye_rx,eye_ry,roi_x,roi_y,roi_w,roi_h
// Relative image paths resolve against the manifest's directory. Errors name
// the 1-based data row.
std::vector<FaceSample> ingest_manifest(const std::filesystem::path& manifest_path);

// Writes samples as PNGs plus a manifest under `dir`; returns the manifest path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, std::span<const FaceSample> samples);

// Rendering degradations separating the two synthetic domains.
struct DomainShiftParams {
  double color_cast = 0.18;        // ID: warm cast strength (R up, B down)
  double blur_sigma = 1.0;         // ID: Gaussian blur, pixels
  int downscale = 2;               // ID: downscale-upscale factor (1 = off)
  double illumination_gradient = 0.25;  // selfie: left-to-right gain swing
  double noise_sigma = 5.0;        // selfie: additive Gaussian noise, levels

  static DomainShiftParams none() { return {0.0, 0.0, 1, 0.0, 0.0}; }
  static DomainShiftParams strong_cast() { return {0.45, 1.0, 2, 0.25, 5.0}; }
};

// Procedural face-like dataset, two samples (ID, selfie) per subject.
// Pure function of its arguments. Requires n_subjects >= 3.
std::vector<FaceSample> synthesize_dataset(int n_subjects, std::uint64_t seed,
                                           const DomainShiftParams& shift = {});

// Sorted unique subject ids of a sample list.
std::vector<std::string> subject_ids(std::span<const FaceSample> samples);

struct PairRef {
  std::string id_subject;
  std::string selfie_subject;
  bool genuine = false;

  bool operator==(const PairRef&) const = default;
};

// One subject-disjoint 60/20/20 partition with its generated pairs.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> dev_subjects;
  std::vector<std::string> eval_subjects;
  std::vector<PairRef> train_pairs;
  std::vector<PairRef> dev_pairs;
  std::vector<PairRef> eval_pairs;
  std::array<std::vector<std::string>, 3> cv_folds;

  bool operator==(const SplitPlan&) const = default;

  std::uint64_t fingerprint() const;
};

// All ID x selfie cross products among `subjects`, row-major in the given order.
std::vector<PairRef> pairs_within(std::span<const std::string> subjects);

SplitPlan plan_split(std::span<const std::string> subjects, std::uint64_t seed);

// Split i is planned with derive_seed(master_seed, i).
std::vector<SplitPlan> plan_many_splits(std::span<const std::string> subjects, std::uint64_t master_seed,
                                        int n = 100);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(std::string_view json);

// Fingerprint of an ordered split list; equal lists give equal values.
std::uint64_t split_list_fingerprint(std::span<const SplitPlan> plans);

}  // namespace xdv
