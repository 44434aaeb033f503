#pragma once

#include <cstdint>
#include <limits>

#include "decoil/config.hpp"

namespace decoil {

// 32-bit two's-complement datapath word. The real value is raw / 2^fraction_bits
// for whichever FixedPointFormat the network declares.
struct FxValue {
  std::int32_t raw = 0;
  friend bool operator==(FxValue, FxValue) = default;
};

inline constexpr FxValue kFxMax{std::numeric_limits<std::int32_t>::max()};
inline constexpr FxValue kFxMin{std::numeric_limits<std::int32_t>::min()};

struct FxResult {
  FxValue value;
  bool saturated = false;
};

namespace fx {

constexpr std::int32_t saturate(std::int64_t v, bool& sat) {
  if (v > std::numeric_limits<std::int32_t>::max()) {
    sat = true;
    return std::numeric_limits<std::int32_t>::max();
  }
  if (v < std::numeric_limits<std::int32_t>::min()) {
    sat = true;
    return std::numeric_limits<std::int32_t>::min();
  }
  return static_cast<std::int32_t>(v);
}

// Raw-word primitives for the hot loops; `sat` is sticky (only ever set).
constexpr std::int32_t mul(std::int32_t a, std::int32_t b, int frac, bool& sat) {
  // >> on a negative int64 is an arithmetic shift (floor) in C++20.
  return saturate((std::int64_t{a} * b) >> frac, sat);
}

constexpr std::int32_t add(std::int32_t a, std::int32_t b, bool& sat) {
  return saturate(std::int64_t{a} + b, sat);
}

constexpr std::int32_t relu(std::int32_t a) { return a > 0 ? a : 0; }

}  // namespace fx

// round-half-away-from-zero(x * 2^frac), saturated.
FxResult fx_from_real(double x, FixedPointFormat fmt = kQ16_16);
double fx_to_real(FxValue v, FixedPointFormat fmt = kQ16_16);

constexpr FxResult fx_mul(FxValue a, FxValue b, FixedPointFormat fmt = kQ16_16) {
  FxResult r;
  r.value.raw = fx::mul(a.raw, b.raw, fmt.fraction_bits, r.saturated);
  return r;
}

constexpr FxResult fx_add_sat(FxValue a, FxValue b) {
  FxResult r;
  r.value.raw = fx::add(a.raw, b.raw, r.saturated);
  return r;
}

constexpr FxValue fx_relu(FxValue a) { return {fx::relu(a.raw)}; }

}  // namespace decoil
