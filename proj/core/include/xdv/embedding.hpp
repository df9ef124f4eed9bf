#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdv/dataset.hpp"
#include "xdv/imaging.hpp"

namespace xdv {

inline constexpr std::size_t kLbpBins = 59;
inline constexpr int kLbpGrid = 8;
inline constexpr std::size_t kLbpDim = kLbpBins * kLbpGrid * kLbpGrid;  // 3776
inline constexpr int kDctBlock = 8;
inline constexpr std::size_t kDctCoefficients = 10;
inline constexpr std::size_t kDctDim = kDctCoefficients * 28 * 28;  // 7840
inline constexpr std::size_t kFc67Dim = 4096;
inline constexpr std::size_t kFc8Dim = 2622;

// Feature source: a built-in handcrafted embedder or a deep layer. fc6/fc7
// are the rectified views of the stored pre-activation fc6n/fc7n.
enum class Layer { Lbp, Dct, Fc6n, Fc6, Fc7n, Fc7, Fc8 };

std::string_view layer_tag(Layer layer);
Layer layer_of(std::string_view tag);
bool is_builtin(Layer layer) noexcept;
bool is_rectified(Layer layer) noexcept;
// The pre-activation layer a file must declare to serve `layer`.
Layer stored_layer(Layer layer) noexcept;
// Declared dimensionality for deep layers, 0 when unconstrained.
std::size_t expected_dim(Layer layer) noexcept;

struct FeatureMeta {
  std::string embedder;
  std::string layer;
  bool rectified = false;
  std::string sample_id;
  Domain domain = Domain::IdDocument;
  std::string normalization = "none";

  bool operator==(const FeatureMeta&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  FeatureMeta meta;

  std::size_t dim() const noexcept { return values.size(); }
};

// Throws NonFinite / InvalidArgument.
void validate(const FeatureVector& v);

// Uniform LBP(8,1): code -> bin (58 uniform patterns in code order, then the
// catch-all bin 58).
const std::array<std::uint8_t, 256>& uniform_lbp_bins();

// Uniform LBP histograms of an 8x8 grid of 28x28 cells on the luma plane.
FeatureVector embed_lbp(const AlignedFace& face);

// Orthonormal 8x8 DCT-II blocks, first 10 zigzag coefficients each.
FeatureVector embed_dct(const AlignedFace& face);

// Orthonormal 2-D DCT-II of one 8x8 block (row-major in and out).
std::array<double, 64> dct8x8(std::span<const double, 64> block);

// Zigzag scan order of an 8x8 block, as row-major indices.
const std::array<std::uint8_t, 64>& zigzag_order();

FeatureVector rectify(FeatureVector v);

// Fraction of entries exactly equal to zero.
double sparsity(const FeatureVector& v);

// ---------------------------------------------------------------------------
// EMB1 exchange format (little-endian):
//   "EMB1" | u16 version=1 | u8 tag_len, tag | u32 dim | u32 count |
//   count x { u16 id_len, id | u8 domain | dim x f32 }
// ---------------------------------------------------------------------------

struct EmbeddingKey {
  std::string subject_id;
  Domain domain = Domain::IdDocument;

  auto operator<=>(const EmbeddingKey&) const = default;
};

using EmbeddingMap = std::map<EmbeddingKey, FeatureVector>;

struct Emb1Header {
  std::uint16_t version = 1;
  std::string layer_tag;
  std::uint32_t dim = 0;
  std::uint32_t count = 0;
};

Emb1Header read_emb1_header(const std::filesystem::path& path);

// Loads a file whose declared layer is stored_layer(layer). Values are
// returned as stored; rectification for fc6/fc7 happens downstream.
EmbeddingMap load_external(const std::filesystem::path& emb_path, Layer layer);

// Values are narrowed to f32. All vectors must share one dimension.
void write_emb1(const std::filesystem::path& path, std::string_view layer_tag,
                std::span<const FeatureVector> vectors);

// ---------------------------------------------------------------------------
// Surrogate deep head: a fixed, seeded, sparse random projection stack that
// turns a handcrafted descriptor into fc6n / fc7n / fc8-shaped pre-activation
// vectors (4096 / 4096 / 2622) so the layer study runs without network
// weights. h6 = P6 x + b6, h7 = P7 relu(h6) + b7, h8 = P8 relu(h7) + b8.
// ---------------------------------------------------------------------------
class SurrogateHead {
 public:
  explicit SurrogateHead(std::size_t input_dim, std::uint64_t seed = 0x5EEDF00DULL);

  struct Activations {
    std::vector<double> fc6n;
    std::vector<double> fc7n;
    std::vector<double> fc8;
  };

  Activations forward(std::span<const double> descriptor) const;
  std::size_t input_dim() const noexcept { return input_dim_; }

 private:
  struct SparseLayer {
    std::size_t fan_in = 0;
    std::vector<std::uint32_t> index;  // outputs x fan_in
    std::vector<float> weight;         // +-1/sqrt(fan_in)
    std::vector<double> bias;
  };
  static SparseLayer make_layer(std::size_t in, std::size_t out, std::size_t fan_in, std::uint64_t seed);
  static std::vector<double> apply(const SparseLayer& layer, std::span<const double> x);

  std::size_t input_dim_;
  SparseLayer l6_, l7_, l8_;
};

// Built-in embedding of an enhanced face for any layer. Deep layers are
// produced by a SurrogateHead over `base` (lbp or dct) and rectified for
// fc6/fc7.
FeatureVector embed_builtin(const AlignedFace& face, Layer layer, Layer base = Layer::Lbp);
// Several layers of one face sharing a single descriptor and head pass.
std::vector<FeatureVector> embed_builtin(const AlignedFace& face, std::span<const Layer> layers,
                                         Layer base = Layer::Lbp);

}  // namespace xdv
