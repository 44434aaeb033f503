#pragma once

#include <cstdint>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/tensor.hpp"

namespace decoil::golden {

// Naive layer-by-layer reference. Every conv output is the sequential
// saturating sum over (row, col, depth) of the window/filter products.

struct Stats {
  std::int64_t saturations = 0;
};

Tensor3D zero_pad(const Tensor3D& t, int pad);

Tensor3D conv_layer(const Tensor3D& input, const FilterBank& filters, const ConvSpec& spec,
                    FixedPointFormat fmt = kQ16_16, Stats* stats = nullptr);

Tensor3D maxpool_layer(const Tensor3D& input, const PoolSpec& spec);

// Returns the output of every layer in order. `weights` holds one bank per conv layer.
std::vector<Tensor3D> run_network(const NetworkSpec& net, const Tensor3D& input,
                                  const std::vector<FilterBank>& weights, Stats* stats = nullptr);

}  // namespace decoil::golden
