#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "xdv/dataset.hpp"
#include "xdv/error.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

constexpr int kCanvasWidth = 176;
constexpr int kCanvasHeight = 208;
constexpr int kMarkers = 6;

using Rgb = std::array<double, 3>;

// Anisotropic Gaussian blob in face-local units, composited with alpha.
struct Blob {
  double x, y;    // center
  double sx, sy;  // spreads
  double alpha;   // peak opacity
  Rgb color;
};

// Latent identity: every geometric and photometric trait of one subject.
struct Identity {
  Rgb skin;
  Rgb hair;
  double face_w, face_h;
  double eye_dx, eye_y, eye_size;
  double brow_gap;
  double nose_y, nose_len;
  double mouth_y, mouth_w;
  double hair_line;
  double texture_freq, texture_angle, texture_phase, texture_amp;
  std::array<Blob, kMarkers> markers;
};

struct Pose {
  double cx, cy;   // face center in pixels
  double scale;    // pixels per face-local unit
  double angle;    // radians, counter-clockwise in image coordinates
};

Identity draw_identity(Rng& rng) {
  Identity id{};
  const double tone = rng.uniform(0.35, 0.85);
  id.skin = {255.0 * std::min(1.0, tone + 0.12), 255.0 * tone * 0.92, 255.0 * tone * 0.78};
  const double h = rng.uniform(0.05, 0.45);
  id.hair = {255.0 * h, 255.0 * h * rng.uniform(0.7, 1.0), 255.0 * h * rng.uniform(0.5, 0.9)};
  id.face_w = rng.uniform(0.88, 1.08);
  id.face_h = rng.uniform(1.18, 1.42);
  id.eye_dx = rng.uniform(0.36, 0.50);
  id.eye_y = rng.uniform(-0.42, -0.22);
  id.eye_size = rng.uniform(0.07, 0.12);
  id.brow_gap = rng.uniform(0.14, 0.24);
  id.nose_y = rng.uniform(0.05, 0.22);
  id.nose_len = rng.uniform(0.12, 0.26);
  id.mouth_y = rng.uniform(0.45, 0.70);
  id.mouth_w = rng.uniform(0.22, 0.40);
  id.hair_line = rng.uniform(-1.15, -0.80);
  id.texture_freq = rng.uniform(5.0, 14.0);
  id.texture_angle = rng.uniform(0.0, std::numbers::pi);
  id.texture_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  id.texture_amp = rng.uniform(0.06, 0.16);
  for (auto& m : id.markers) {
    const double shade = rng.uniform(-1.0, 1.0);
    m.x = rng.uniform(-0.75, 0.75);
    m.y = rng.uniform(-0.8, 0.95);
    m.sx = rng.uniform(0.04, 0.12);
    m.sy = rng.uniform(0.04, 0.12);
    m.alpha = rng.uniform(0.35, 0.8);
    m.color = shade < 0 ? Rgb{40.0, 30.0, 25.0} : Rgb{250.0, 235.0, 220.0};
  }
  return id;
}

std::vector<Blob> layers_of(const Identity& id) {
  std::vector<Blob> layers;
  layers.push_back({0.0, id.hair_line + 0.1, id.face_w * 1.15, 0.55, 0.95, id.hair});
  layers.push_back({0.0, 0.05, id.face_w, id.face_h, 0.98, id.skin});
  for (double side : {-1.0, 1.0}) {
    const double ex = side * id.eye_dx;
    layers.push_back({ex, id.eye_y - id.brow_gap, id.eye_size * 2.2, id.eye_size * 0.45, 0.8, id.hair});
    layers.push_back({ex, id.eye_y, id.eye_size * 1.6, id.eye_size, 0.85, {245.0, 245.0, 240.0}});
    layers.push_back({ex, id.eye_y, id.eye_size * 0.7, id.eye_size * 0.7, 0.95, {30.0, 25.0, 25.0}});
  }
  const Rgb shadow{id.skin[0] * 0.6, id.skin[1] * 0.55, id.skin[2] * 0.5};
  layers.push_back({0.0, id.nose_y, 0.07, id.nose_len, 0.55, shadow});
  layers.push_back({0.0, id.mouth_y, id.mouth_w, 0.06, 0.85, {150.0, 60.0, 60.0}});
  for (const auto& m : id.markers) layers.push_back(m);
  return layers;
}

// Face-local -> pixel.
Point to_pixel(const Pose& pose, double u, double v) {
  const double c = std::cos(pose.angle), s = std::sin(pose.angle);
  return {pose.cx + pose.scale * (c * u - s * v), pose.cy + pose.scale * (s * u + c * v)};
}

std::vector<double> render(const Identity& id, const Pose& pose) {
  const auto layers = layers_of(id);
  std::vector<double> img(static_cast<std::size_t>(kCanvasWidth) * kCanvasHeight * 3);
  const double c = std::cos(pose.angle), s = std::sin(pose.angle);
  const double tc = std::cos(id.texture_angle), ts = std::sin(id.texture_angle);
  for (int y = 0; y < kCanvasHeight; ++y) {
    for (int x = 0; x < kCanvasWidth; ++x) {
      // Pixel -> face-local (inverse rotation and scale).
      const double dx = (x - pose.cx) / pose.scale, dy = (y - pose.cy) / pose.scale;
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      Rgb px{96.0 + 30.0 * (y / static_cast<double>(kCanvasHeight)), 110.0, 128.0};
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& b = layers[k];
        const double q = ((u - b.x) * (u - b.x)) / (b.sx * b.sx) + ((v - b.y) * (v - b.y)) / (b.sy * b.sy);
        double a = b.alpha * std::exp(-0.5 * q * q);  // flat-topped profile
        if (a < 1e-4) continue;
        Rgb col = b.color;
        if (k == 1) {
          const double t = 1.0 + id.texture_amp * std::sin(id.texture_freq * (tc * u + ts * v) + id.texture_phase);
          for (auto& ch : col) ch *= t;
        }
        for (int ch = 0; ch < 3; ++ch) px[ch] = px[ch] * (1.0 - a) + a * col[ch];
      }
      auto* out = &img[(static_cast<std::size_t>(y) * kCanvasWidth + x) * 3];
      out[0] = px[0];
      out[1] = px[1];
      out[2] = px[2];
    }
  }
  return img;
}

void gaussian_blur(std::vector<double>& img, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= total;
  std::vector<double> tmp(img.size());
  auto idx = [](int x, int y, int ch) { return (static_cast<std::size_t>(y) * kCanvasWidth + x) * 3 + ch; };
  for (int y = 0; y < kCanvasHeight; ++y)
    for (int x = 0; x < kCanvasWidth; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * img[idx(std::clamp(x + i, 0, kCanvasWidth - 1), y, ch)];
        tmp[idx(x, y, ch)] = acc;
      }
  for (int y = 0; y < kCanvasHeight; ++y)
    for (int x = 0; x < kCanvasWidth; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[idx(x, std::clamp(y + i, 0, kCanvasHeight - 1), ch)];
        img[idx(x, y, ch)] = acc;
      }
}

// Box downsample by `factor`, then bilinear upsample back.
void resample_cycle(std::vector<double>& img, int factor) {
  if (factor <= 1) return;
  const int sw = kCanvasWidth / factor, sh = kCanvasHeight / factor;
  std::vector<double> small(static_cast<std::size_t>(sw) * sh * 3, 0.0);
  for (int y = 0; y < sh; ++y)
    for (int x = 0; x < sw; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int j = 0; j < factor; ++j)
          for (int i = 0; i < factor; ++i)
            acc += img[(static_cast<std::size_t>(y * factor + j) * kCanvasWidth + (x * factor + i)) * 3 + ch];
        small[(static_cast<std::size_t>(y) * sw + x) * 3 + ch] = acc / (factor * factor);
      }
  for (int y = 0; y < kCanvasHeight; ++y) {
    const double fy = std::clamp((y + 0.5) / factor - 0.5, 0.0, sh - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int x = 0; x < kCanvasWidth; ++x) {
      const double fx = std::clamp((x + 0.5) / factor - 0.5, 0.0, sw - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        auto at = [&](int xx, int yy) { return small[(static_cast<std::size_t>(yy) * sw + xx) * 3 + ch]; };
        img[(static_cast<std::size_t>(y) * kCanvasWidth + x) * 3 + ch] =
            (1 - wy) * ((1 - wx) * at(x0, y0) + wx * at(x1, y0)) + wy * ((1 - wx) * at(x0, y1) + wx * at(x1, y1));
      }
    }
  }
}

FaceSample make_sample(const std::string& subject, Domain domain, const Identity& id, std::uint64_t seed,
                       const DomainShiftParams& shift) {
  Rng rng(seed);
  const double tilt_deg = domain == Domain::IdDocument ? 2.0 : 6.0;
  Pose pose;
  pose.cx = kCanvasWidth / 2.0 + rng.uniform(-6.0, 6.0);
  pose.cy = kCanvasHeight / 2.0 + rng.uniform(-6.0, 6.0);
  pose.scale = 48.0 * rng.uniform(0.94, 1.06);
  pose.angle = rng.uniform(-tilt_deg, tilt_deg) * std::numbers::pi / 180.0;

  auto img = render(id, pose);
  if (domain == Domain::IdDocument) {
    const double c = shift.color_cast;
    for (std::size_t i = 0; i < img.size(); i += 3) {
      img[i] *= 1.0 + c;
      img[i + 1] *= 1.0 + c / 3.0;
      img[i + 2] *= 1.0 - c;
    }
    gaussian_blur(img, shift.blur_sigma);
    resample_cycle(img, shift.downscale);
  } else {
    for (int y = 0; y < kCanvasHeight; ++y)
      for (int x = 0; x < kCanvasWidth; ++x) {
        const double gain = 1.0 + shift.illumination_gradient * (2.0 * x / (kCanvasWidth - 1.0) - 1.0);
        for (int ch = 0; ch < 3; ++ch) {
          auto& v = img[(static_cast<std::size_t>(y) * kCanvasWidth + x) * 3 + ch];
          v = v * gain + (shift.noise_sigma > 0.0 ? shift.noise_sigma * rng.normal() : 0.0);
        }
      }
  }

  FaceSample s;
  s.subject_id = subject;
  s.domain = domain;
  s.image = RgbImage(kCanvasWidth, kCanvasHeight);
  for (std::size_t i = 0; i < img.size(); ++i) s.image.pixels[i] = clamp_to_byte(img[i]);
  s.left_eye = to_pixel(pose, -id.eye_dx, id.eye_y);
  s.right_eye = to_pixel(pose, id.eye_dx, id.eye_y);

  // Axis-aligned box around the rotated face oval, the way a detector would report it.
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (double u : {-id.face_w, id.face_w})
    for (double v : {-id.face_h * 0.85, id.face_h * 1.0}) {
      const Point p = to_pixel(pose, u * 0.95, v + 0.05);
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  x0 = std::max(0.0, x0);
  y0 = std::max(0.0, y0);
  x1 = std::min<double>(kCanvasWidth, x1);
  y1 = std::min<double>(kCanvasHeight, y1);
  s.roi = {x0, y0, x1 - x0, y1 - y0};
  return s;
}

}  // namespace

std::vector<FaceSample> synthesize_dataset(int n_subjects, std::uint64_t seed, const DomainShiftParams& shift) {
  if (n_subjects < 3)
    fail(ErrorKind::InsufficientData, "synthetic dataset needs at least 3 subjects (3 CV folds)");
  const int width = std::max(3, static_cast<int>(std::to_string(n_subjects).size()));
  std::vector<FaceSample> samples;
  samples.reserve(static_cast<std::size_t>(n_subjects) * 2);
  for (int i = 0; i < n_subjects; ++i) {
    std::string digits = std::to_string(i + 1);
    const std::string name = "s" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(digits.size(), width), '0') + digits;
    const std::uint64_t subject_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(subject_seed);
    const Identity id = draw_identity(rng);
    samples.push_back(make_sample(name, Domain::IdDocument, id, derive_seed(subject_seed, 1), shift));
    samples.push_back(make_sample(name, Domain::Selfie, id, derive_seed(subject_seed, 2), shift));
  }
  return samples;
}

}  // namespace xdv
