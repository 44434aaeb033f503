#pragma once

// Test-only helpers: random generators for property tests and oracles that
// are written independently of the library code they check.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/error.hpp"
#include "decoil/fileio.hpp"
#include "decoil/tensor.hpp"

namespace testutil {

using namespace decoil;

inline std::string config_path(const std::string& name) { return std::string(DECOIL_CONFIG_DIR) + "/" + name; }

// Brute-force conv: exact int64 sum of truncated products. Equal to any
// saturating reduction order as long as nothing saturates.
inline Tensor3D oracle_conv(const Tensor3D& in, const FilterBank& f, const ConvSpec& c, int frac = 16) {
  const Dims id = in.dims();
  const int ho = (id.height + 2 * c.pad - c.kernel) / c.stride + 1;
  const int wo = (id.width + 2 * c.pad - c.kernel) / c.stride + 1;
  Tensor3D out({ho, wo, c.filters});
  for (int k = 0; k < c.filters; ++k) {
    for (int r = 0; r < ho; ++r) {
      for (int q = 0; q < wo; ++q) {
        std::int64_t sum = 0;
        for (int i = 0; i < c.kernel; ++i) {
          for (int j = 0; j < c.kernel; ++j) {
            const int y = r * c.stride + i - c.pad;
            const int x = q * c.stride + j - c.pad;
            if (y < 0 || x < 0 || y >= id.height || x >= id.width) continue;
            for (int ch = 0; ch < id.depth; ++ch) {
              sum += (std::int64_t{in.at(y, x, ch).raw} * f.at(k, i, j, ch).raw) >> frac;
            }
          }
        }
        if (c.relu && sum < 0) sum = 0;
        out.at(r, q, k).raw = static_cast<std::int32_t>(sum);
      }
    }
  }
  return out;
}

inline Tensor3D oracle_pool(const Tensor3D& in, const PoolSpec& p) {
  const Dims id = in.dims();
  const int ho = (id.height - p.window) / p.stride + 1;
  const int wo = (id.width - p.window) / p.stride + 1;
  Tensor3D out({ho, wo, id.depth});
  for (int r = 0; r < ho; ++r) {
    for (int q = 0; q < wo; ++q) {
      for (int ch = 0; ch < id.depth; ++ch) {
        std::int32_t m = INT32_MIN;
        for (int i = 0; i < p.window; ++i) {
          for (int j = 0; j < p.window; ++j) m = std::max(m, in.at(r * p.stride + i, q * p.stride + j, ch).raw);
        }
        out.at(r, q, ch).raw = m;
      }
    }
  }
  return out;
}

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  bool coin() { return uniform(0, 1) == 1; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[std::size_t(uniform(0, int(v.size()) - 1))];
  }
};

// Small random chain of convs and pools that passes validation.
inline NetworkSpec random_network(Rng& rng, int max_layers = 3) {
  for (;;) {
    NetworkSpec net;
    net.input = {rng.uniform(3, 12), rng.uniform(3, 12), rng.pick(std::vector<int>{1, 2, 3, 4})};
    const int n = rng.uniform(1, max_layers);
    for (int i = 0; i < n; ++i) {
      if (i > 0 && rng.uniform(0, 3) == 0) {
        const int win = rng.uniform(1, 3);
        net.layers.push_back(PoolSpec{win, rng.uniform(1, win)});
        continue;
      }
      ConvSpec c;
      c.kernel = rng.pick(std::vector<int>{1, 3, 3, 5});
      c.filters = rng.uniform(1, 4);
      c.stride = rng.uniform(0, 4) == 0 ? 2 : 1;
      c.pad = rng.uniform(0, c.kernel - 1);
      c.relu = rng.coin();
      net.layers.push_back(c);
    }
    try {
      validate_network(net);
      return net;
    } catch (const ValidationError&) {
    }
  }
}

inline std::vector<int> divisors(int n) {
  std::vector<int> out;
  for (int i = 1; i <= n; ++i) {
    if (n % i == 0) out.push_back(i);
  }
  return out;
}

inline FusionPlan random_plan(Rng& rng, const NetworkSpec& net) {
  FusionPlan plan;
  std::size_t start = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (i + 1 == net.layers.size() || rng.coin()) {
      plan.groups.push_back({start, i});
      start = i + 1;
    }
  }
  const auto dims = chain_dims(net);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (is_conv(net.layers[i])) plan.depth_parallel.push_back(rng.pick(divisors(dims[i].depth)));
  }
  return plan;
}

struct Data {
  Tensor3D input;
  std::vector<FilterBank> weights;
};

inline Data seeded_data(const NetworkSpec& net, std::uint64_t seed) {
  io::SeededGenerator gen(seed);
  Data d;
  d.input = io::random_tensor(net.input, gen, net.format);
  d.weights = io::random_weights(net, gen);
  return d;
}

}  // namespace testutil
