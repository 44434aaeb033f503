#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/tensor.hpp"

namespace decoil::io {

// SplitMix64: identical sequence for a given seed on every platform.
class SeededGenerator {
 public:
  explicit SeededGenerator(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

// Top (frac+1) bits read as a signed fraction: a raw value in [-1.0, +1.0).
FxValue unit_value(std::uint64_t bits, FixedPointFormat fmt = kQ16_16);

Tensor3D random_tensor(Dims dims, SeededGenerator& gen, FixedPointFormat fmt = kQ16_16);

// Unit values scaled by 1/(w^2 d) so one conv over inputs in [-1, 1) stays in [-1, 1].
std::vector<FilterBank> random_weights(const NetworkSpec& net, SeededGenerator& gen);

inline constexpr char kTensorMagic[4] = {'D', 'C', 'L', 'F'};
inline constexpr std::uint8_t kTensorVersion = 1;

// "DCLF", version byte, u32 LE h, w, d, then h*w*d LE int32 raw values.
std::string encode_tensor(const Tensor3D& t);
Tensor3D decode_tensor(std::string_view bytes);

// Per conv layer in network order: u32 LE k, w, d, then k*w*w*d LE int32 raw values.
std::string encode_weights(const std::vector<FilterBank>& banks);
std::vector<FilterBank> decode_weights(std::string_view bytes, const NetworkSpec& net);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

// FNV-1a 64-bit, printed as 16 hex digits.
std::string digest(std::string_view bytes);

}  // namespace decoil::io
