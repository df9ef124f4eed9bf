#include <algorithm>
#include <cmath>

#include "xdv/embedding.hpp"
#include "xdv/error.hpp"
#include "xdv/rng.hpp"

namespace xdv {

SurrogateHead::SparseLayer SurrogateHead::make_layer(std::size_t in, std::size_t out, std::size_t fan_in,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  SparseLayer layer;
  layer.fan_in = fan_in;
  layer.index.resize(out * fan_in);
  layer.weight.resize(out * fan_in);
  layer.bias.resize(out);
  const float magnitude = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t k = 0; k < fan_in; ++k) {
      layer.index[o * fan_in + k] = static_cast<std::uint32_t>(rng.below(in));
      layer.weight[o * fan_in + k] = (rng.next_u64() & 1u) ? magnitude : -magnitude;
    }
    layer.bias[o] = 0.01 * rng.normal();
  }
  return layer;
}

SurrogateHead::SurrogateHead(std::size_t input_dim, std::uint64_t seed)
    : input_dim_(input_dim),
      l6_(make_layer(input_dim, kFc67Dim, 64, derive_seed(seed, 6))),
      l7_(make_layer(kFc67Dim, kFc67Dim, 64, derive_seed(seed, 7))),
      l8_(make_layer(kFc67Dim, kFc8Dim, 64, derive_seed(seed, 8))) {
  if (input_dim == 0) fail(ErrorKind::InvalidArgument, "surrogate head needs a positive input dimension");
}

std::vector<double> SurrogateHead::apply(const SparseLayer& layer, std::span<const double> x) {
  const std::size_t out = layer.bias.size();
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = layer.bias[o];
    for (std::size_t k = 0; k < layer.fan_in; ++k)
      acc += static_cast<double>(layer.weight[o * layer.fan_in + k]) * x[layer.index[o * layer.fan_in + k]];
    y[o] = acc;
  }
  return y;
}

SurrogateHead::Activations SurrogateHead::forward(std::span<const double> descriptor) const {
  if (descriptor.size() != input_dim_)
    fail(ErrorKind::DimensionMismatch, "surrogate head expects " + std::to_string(input_dim_) + " inputs, got " +
                                           std::to_string(descriptor.size()));
  Activations a;
  a.fc6n = apply(l6_, descriptor);
  std::vector<double> r(a.fc6n.size());
  std::transform(a.fc6n.begin(), a.fc6n.end(), r.begin(), [](double v) { return std::max(0.0, v); });
  a.fc7n = apply(l7_, r);
  r.resize(a.fc7n.size());
  std::transform(a.fc7n.begin(), a.fc7n.end(), r.begin(), [](double v) { return std::max(0.0, v); });
  a.fc8 = apply(l8_, r);
  return a;
}

}  // namespace xdv
