#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace decoil {

// Spatial/channel extent of a feature volume: rows x columns x channels.
struct Dims {
  int height = 1;
  int width = 1;
  int depth = 1;

  std::int64_t positions() const { return std::int64_t{height} * width; }
  std::int64_t volume() const { return positions() * depth; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct ConvSpec {
  int kernel = 3;  // odd, square
  int filters = 1;
  int stride = 1;
  int pad = 0;
  bool relu = false;
  // Optional declared input depth; checked against the chained depth.
  std::optional<int> in_depth;
  // Optional default depth parallelism used when a plan omits it.
  std::optional<int> dpar;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct PoolSpec {
  int window = 2;
  int stride = 2;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec>;

inline bool is_conv(const LayerSpec& l) { return std::holds_alternative<ConvSpec>(l); }

struct FixedPointFormat {
  int integer_bits = 16;  // including sign
  int fraction_bits = 16;
  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;
};

inline constexpr FixedPointFormat kQ16_16{16, 16};

struct NetworkSpec {
  Dims input;
  std::vector<LayerSpec> layers;
  FixedPointFormat format = kQ16_16;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Inclusive, zero-based layer index range.
struct LayerRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const { return last - first + 1; }
  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

struct FusionPlan {
  std::vector<LayerRange> groups;
  // One entry per conv layer, in network order.
  std::vector<int> depth_parallel;
  friend bool operator==(const FusionPlan&, const FusionPlan&) = default;
};

// --- geometry ---------------------------------------------------------------

// Throws GeometryError when a resulting extent would be < 1.
Dims output_dims(const Dims& input, const LayerSpec& layer);

// Input dims of every layer followed by the final output: size layers+1.
std::vector<Dims> chain_dims(const NetworkSpec& net);

// For each layer, its index among conv layers, or -1 for pooling layers.
std::vector<int> conv_ordinals(const NetworkSpec& net);
std::size_t conv_count(const NetworkSpec& net);

// --- network document --------------------------------------------------------

void validate_network(const NetworkSpec& net);
NetworkSpec parse_network(std::string_view text);
std::string serialize_network(const NetworkSpec& net);
NetworkSpec load_network(const std::string& path);

// --- fusion plans -------------------------------------------------------------

void validate_plan(const FusionPlan& plan, const NetworkSpec& net);

// `expr` follows  plan := group ('|' group)* ; group := index | index '-' index.
// `dpar` is a comma-separated list with one entry per conv layer; when absent
// each conv layer uses its declared default or its full input depth.
FusionPlan parse_plan(std::string_view expr, const NetworkSpec& net,
                      std::optional<std::string_view> dpar = std::nullopt);

std::string plan_expression(const FusionPlan& plan);
std::string dpar_expression(const FusionPlan& plan);

std::vector<int> default_depth_parallel(const NetworkSpec& net);
std::vector<int> full_depth_parallel(const NetworkSpec& net);

FusionPlan single_group_plan(const NetworkSpec& net);
FusionPlan singleton_plan(const NetworkSpec& net);

// Depth-parallelism of layer `layer`; only meaningful for conv layers.
int layer_dpar(const FusionPlan& plan, const NetworkSpec& net, std::size_t layer);

}  // namespace decoil
