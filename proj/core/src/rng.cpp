#include "xdv/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string_view>

#include "xdv/error.hpp"

namespace xdv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::UnknownDomain: return "UnknownDomain";
    case ErrorKind::EyesOutsideRoi: return "EyesOutsideRoi";
    case ErrorKind::DegenerateRoi: return "DegenerateRoi";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedRecord: return "TruncatedRecord";
    case ErrorKind::DuplicateRecord: return "DuplicateRecord";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::LayerMismatch: return "LayerMismatch";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateVector: return "DegenerateVector";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::AllGridPointsFailed: return "AllGridPointsFailed";
    case ErrorKind::Stage: return "Stage";
  }
  return "Unknown";
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless bounded draw with rejection.
  __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Fingerprint& Fingerprint::add(double v) noexcept {
  if (v == 0.0) v = 0.0;  // fold -0 into +0
  return add(std::bit_cast<std::uint64_t>(v));
}

Fingerprint& Fingerprint::add(std::string_view s) noexcept {
  add(static_cast<std::uint64_t>(s.size()));
  std::uint64_t word = 0;
  int n = 0;
  for (unsigned char ch : s) {
    word = (word << 8) | ch;
    if (++n == 8) {
      add(word);
      word = 0;
      n = 0;
    }
  }
  if (n > 0) add(word);
  return *this;
}

}  // namespace xdv
