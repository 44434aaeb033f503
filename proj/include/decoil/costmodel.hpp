#pragma once

#include <cstdint>
#include <vector>

#include "decoil/config.hpp"

// Closed-form resource and timing estimates; no simulation involved.
namespace decoil::cost {

inline constexpr std::int64_t kBramBlockBits = 18'432;
inline constexpr int kWordBits = 32;
inline constexpr double kDefaultFreqMhz = 120.0;

// ceil(log2 n) for n >= 1.
int ceil_log2(std::int64_t n);

// 9 * (1 + ceil(2 log2 w) + ceil(log2 d_par)).
std::int64_t conv3d_latency(int kernel, int dpar);

// H_out * W_out * k * g.
std::int64_t steady_cycles(const ConvSpec& layer, Dims out, int serial_groups);

// Multipliers only: w^2 * d_par per conv layer, summed within a group; the
// plan figure is the largest group.
std::int64_t group_dsp(const FusionPlan& plan, const NetworkSpec& net, LayerRange group);
std::int64_t dsp_count(const FusionPlan& plan, const NetworkSpec& net);

struct BufferEstimate {
  std::int64_t bits = 0;
  std::int64_t blocks = 0;  // 18,432-bit blocks, ceiling per buffer / filter bank
  friend bool operator==(const BufferEstimate&, const BufferEstimate&) = default;
};

struct LayerBuffers {
  std::int64_t line_buffer_bits = 0;
  std::int64_t filter_bits = 0;  // w^2 banks of k*d words each
  std::int64_t filter_bank_bits = 0;
  std::int64_t assembly_row_bits = 0;
  std::int64_t pool_row_bits = 0;
  BufferEstimate total;
};

LayerBuffers layer_buffers(const NetworkSpec& net, std::size_t layer);
BufferEstimate group_buffers(const NetworkSpec& net, LayerRange group);
// Largest group.
BufferEstimate buffer_bits(const FusionPlan& plan, const NetworkSpec& net);

struct TrafficOptions {
  int bytes_per_value = 4;
  // Weights are fetched once per serial depth group instead of once per group run.
  bool reread_weights_per_depth_group = false;
};

struct Traffic {
  std::int64_t inputs = 0;
  std::int64_t weights = 0;
  std::int64_t outputs = 0;
  std::int64_t total() const { return inputs + weights + outputs; }
  friend bool operator==(const Traffic&, const Traffic&) = default;
};

Traffic traffic_bytes(const FusionPlan& plan, const NetworkSpec& net, const TrafficOptions& opts = {});

struct LayerEstimate {
  std::int64_t fill = 0;
  std::int64_t steady = 0;
  std::int64_t latency = 0;  // conv3d pipeline latency; 0 for pooling
  std::int64_t period_in = 1;
  std::int64_t period_out = 1;
};

// Per-layer fill/steady terms as used by the group estimate.
std::vector<LayerEstimate> group_layer_estimates(const FusionPlan& plan, const NetworkSpec& net,
                                                 LayerRange group);
std::int64_t group_estimate(const FusionPlan& plan, const NetworkSpec& net, LayerRange group);
// Sum of group estimates.
std::int64_t end_to_end_estimate(const FusionPlan& plan, const NetworkSpec& net);

double time_ms(std::int64_t cycles, double freq_mhz = kDefaultFreqMhz);

struct ResourceBudget {
  std::int64_t dsp_max = 3600;
  std::int64_t bram_bits_max = 0;  // reported only; 0 = unlimited
};

struct LayerCost {
  std::size_t layer = 0;
  bool conv = false;
  Dims in, out;
  int dpar = 0;
  int serial_groups = 0;
  std::int64_t latency = 0;
  std::int64_t steady = 0;
  std::int64_t dsp = 0;
  BufferEstimate buffers;
  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

struct GroupCost {
  LayerRange range;
  std::int64_t dsp = 0;
  BufferEstimate buffers;
  std::int64_t est_cycles = 0;
  friend bool operator==(const GroupCost&, const GroupCost&) = default;
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::vector<GroupCost> groups;
  std::int64_t total_cycles = 0;
  std::int64_t dsp = 0;
  BufferEstimate buffers;
  Traffic traffic;
  int bytes_per_value = 4;
  double freq_mhz = kDefaultFreqMhz;
  double ms = 0.0;
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

CostReport analyze(const FusionPlan& plan, const NetworkSpec& net, const TrafficOptions& traffic = {},
                   double freq_mhz = kDefaultFreqMhz);

}  // namespace decoil::cost
