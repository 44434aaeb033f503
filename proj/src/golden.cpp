#include "decoil/golden.hpp"

#include <algorithm>
#include <string>

#include "decoil/error.hpp"

namespace decoil::golden {

Tensor3D zero_pad(const Tensor3D& t, int pad) {
  const auto& d = t.dims();
  Tensor3D out({d.height + 2 * pad, d.width + 2 * pad, d.depth});
  for (int r = 0; r < d.height; ++r) {
    for (int c = 0; c < d.width; ++c) {
      for (int ch = 0; ch < d.depth; ++ch) out.at(r + pad, c + pad, ch) = t.at(r, c, ch);
    }
  }
  return out;
}

Tensor3D conv_layer(const Tensor3D& input, const FilterBank& filters, const ConvSpec& spec,
                    FixedPointFormat fmt, Stats* stats) {
  const auto& in = input.dims();
  if (filters.kernel() != spec.kernel || filters.depth() != in.depth || filters.count() != spec.filters) {
    throw ValidationError("conv weights " + std::to_string(filters.count()) + "x" +
                          std::to_string(filters.kernel()) + "x" + std::to_string(filters.kernel()) +
                          "x" + std::to_string(filters.depth()) + " do not match layer (k=" +
                          std::to_string(spec.filters) + ", w=" + std::to_string(spec.kernel) +
                          ", d=" + std::to_string(in.depth) + ")");
  }
  const Dims od = output_dims(in, spec);
  const Tensor3D padded = zero_pad(input, spec.pad);
  Tensor3D out(od);
  bool sat = false;
  std::int64_t sat_count = 0;
  for (int orow = 0; orow < od.height; ++orow) {
    for (int ocol = 0; ocol < od.width; ++ocol) {
      for (int f = 0; f < spec.filters; ++f) {
        std::int32_t acc = 0;
        for (int i = 0; i < spec.kernel; ++i) {
          for (int j = 0; j < spec.kernel; ++j) {
            for (int ch = 0; ch < in.depth; ++ch) {
              sat = false;
              const auto p = fx::mul(padded.at(orow * spec.stride + i, ocol * spec.stride + j, ch).raw,
                                     filters.at(f, i, j, ch).raw, fmt.fraction_bits, sat);
              acc = fx::add(acc, p, sat);
              sat_count += sat;
            }
          }
        }
        out.at(orow, ocol, f).raw = spec.relu ? fx::relu(acc) : acc;
      }
    }
  }
  if (stats) stats->saturations += sat_count;
  return out;
}

Tensor3D maxpool_layer(const Tensor3D& input, const PoolSpec& spec) {
  const Dims od = output_dims(input.dims(), spec);
  Tensor3D out(od);
  for (int orow = 0; orow < od.height; ++orow) {
    for (int ocol = 0; ocol < od.width; ++ocol) {
      for (int ch = 0; ch < od.depth; ++ch) {
        std::int32_t m = input.at(orow * spec.stride, ocol * spec.stride, ch).raw;
        for (int i = 0; i < spec.window; ++i) {
          for (int j = 0; j < spec.window; ++j) {
            m = std::max(m, input.at(orow * spec.stride + i, ocol * spec.stride + j, ch).raw);
          }
        }
        out.at(orow, ocol, ch).raw = m;
      }
    }
  }
  return out;
}

std::vector<Tensor3D> run_network(const NetworkSpec& net, const Tensor3D& input,
                                  const std::vector<FilterBank>& weights, Stats* stats) {
  if (input.dims() != net.input) throw ValidationError("input tensor dims do not match network input");
  if (weights.size() != conv_count(net)) {
    throw ValidationError("expected " + std::to_string(conv_count(net)) + " filter banks, got " +
                          std::to_string(weights.size()));
  }
  std::vector<Tensor3D> outs;
  outs.reserve(net.layers.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Tensor3D& cur = i == 0 ? input : outs.back();
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      outs.push_back(conv_layer(cur, weights[k++], *c, net.format, stats));
    } else {
      outs.push_back(maxpool_layer(cur, std::get<PoolSpec>(net.layers[i])));
    }
  }
  return outs;
}

}  // namespace decoil::golden
