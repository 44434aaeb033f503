#include "decoil/costmodel.hpp"

#include <algorithm>

#include "decoil/error.hpp"

namespace decoil::cost {

namespace {

std::int64_t blocks_for(std::int64_t bits) { return (bits + kBramBlockBits - 1) / kBramBlockBits; }

}  // namespace

int ceil_log2(std::int64_t n) {
  if (n < 1) throw ValidationError("ceil_log2 of non-positive value");
  int k = 0;
  while ((std::int64_t{1} << k) < n) ++k;
  return k;
}

std::int64_t conv3d_latency(int kernel, int dpar) {
  if (kernel < 1 || dpar < 1) throw ValidationError("conv3d_latency needs kernel >= 1 and dpar >= 1");
  // ceil(2 log2 w) == ceil(log2 w^2), exact in integers.
  return 9 * (1 + ceil_log2(std::int64_t{kernel} * kernel) + ceil_log2(dpar));
}

std::int64_t steady_cycles(const ConvSpec& layer, Dims out, int serial_groups) {
  if (serial_groups < 1) throw ValidationError("serial group count must be >= 1");
  return out.positions() * layer.filters * serial_groups;
}

std::int64_t group_dsp(const FusionPlan& plan, const NetworkSpec& net, LayerRange group) {
  const auto ords = conv_ordinals(net);
  std::int64_t dsp = 0;
  for (std::size_t i = group.first; i <= group.last; ++i) {
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      dsp += std::int64_t{c->kernel} * c->kernel * plan.depth_parallel.at(std::size_t(ords[i]));
    }
  }
  return dsp;
}

std::int64_t dsp_count(const FusionPlan& plan, const NetworkSpec& net) {
  std::int64_t best = 0;
  for (const auto& g : plan.groups) best = std::max(best, group_dsp(plan, net, g));
  return best;
}

LayerBuffers layer_buffers(const NetworkSpec& net, std::size_t layer) {
  const auto dims = chain_dims(net);
  const Dims in = dims.at(layer);
  const Dims out = dims.at(layer + 1);
  LayerBuffers b;
  if (const auto* c = std::get_if<ConvSpec>(&net.layers[layer])) {
    const std::int64_t w = c->kernel;
    b.line_buffer_bits = w * (in.width + 2 * c->pad) * in.depth * kWordBits;
    b.filter_bank_bits = std::int64_t{c->filters} * in.depth * kWordBits;
    b.filter_bits = w * w * b.filter_bank_bits;
    b.assembly_row_bits = std::int64_t{out.width} * c->filters * kWordBits;
    b.total.bits = b.line_buffer_bits + b.filter_bits + b.assembly_row_bits;
    b.total.blocks = blocks_for(b.line_buffer_bits) + w * w * blocks_for(b.filter_bank_bits) +
                     blocks_for(b.assembly_row_bits);
  } else {
    b.pool_row_bits = std::int64_t{out.width} * in.depth * kWordBits;
    b.total.bits = b.pool_row_bits;
    b.total.blocks = blocks_for(b.pool_row_bits);
  }
  return b;
}

BufferEstimate group_buffers(const NetworkSpec& net, LayerRange group) {
  BufferEstimate e;
  for (std::size_t i = group.first; i <= group.last; ++i) {
    const auto b = layer_buffers(net, i);
    e.bits += b.total.bits;
    e.blocks += b.total.blocks;
  }
  return e;
}

BufferEstimate buffer_bits(const FusionPlan& plan, const NetworkSpec& net) {
  BufferEstimate best;
  for (const auto& g : plan.groups) {
    const auto e = group_buffers(net, g);
    if (e.bits > best.bits) best = e;
  }
  return best;
}

Traffic traffic_bytes(const FusionPlan& plan, const NetworkSpec& net, const TrafficOptions& opts) {
  if (opts.bytes_per_value != 1 && opts.bytes_per_value != 2 && opts.bytes_per_value != 4) {
    throw ValidationError("bytes per value must be 1, 2 or 4");
  }
  const auto dims = chain_dims(net);
  const auto ords = conv_ordinals(net);
  const std::int64_t bpv = opts.bytes_per_value;
  Traffic t;
  for (const auto& g : plan.groups) {
    t.inputs += dims[g.first].volume() * bpv;
    t.outputs += dims[g.last + 1].volume() * bpv;
    for (std::size_t i = g.first; i <= g.last; ++i) {
      const auto* c = std::get_if<ConvSpec>(&net.layers[i]);
      if (!c) continue;
      const int depth = dims[i].depth;
      const std::int64_t values = std::int64_t{c->kernel} * c->kernel * depth * c->filters;
      const int serial = depth / plan.depth_parallel.at(std::size_t(ords[i]));
      t.weights += values * bpv * (opts.reread_weights_per_depth_group ? serial : 1);
    }
  }
  return t;
}

std::vector<LayerEstimate> group_layer_estimates(const FusionPlan& plan, const NetworkSpec& net,
                                                 LayerRange group) {
  const auto dims = chain_dims(net);
  const auto ords = conv_ordinals(net);
  std::vector<LayerEstimate> out;
  std::int64_t period = 1;
  for (std::size_t i = group.first; i <= group.last; ++i) {
    const Dims in = dims[i];
    LayerEstimate e;
    e.period_in = period;
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      const int dpar = plan.depth_parallel.at(std::size_t(ords[i]));
      const int g = in.depth / dpar;
      e.latency = conv3d_latency(c->kernel, dpar);
      e.fill = std::int64_t{c->kernel - 1} * (in.width + 2 * c->pad) * period + c->kernel + e.latency;
      e.steady = steady_cycles(*c, dims[i + 1], g);
      e.period_out = std::int64_t{c->filters} * g;
    } else {
      const auto& p = std::get<PoolSpec>(net.layers[i]);
      e.fill = std::int64_t{p.window} * in.width * period;
      e.period_out = period * p.stride * p.stride;
    }
    period = e.period_out;
    out.push_back(e);
  }
  return out;
}

std::int64_t group_estimate(const FusionPlan& plan, const NetworkSpec& net, LayerRange group) {
  // The group input streams at one element per cycle, which bounds groups
  // without (or with very cheap) convolutions.
  std::int64_t steady = chain_dims(net)[group.first].positions();
  std::int64_t fill = 0;
  for (const auto& e : group_layer_estimates(plan, net, group)) {
    steady = std::max(steady, e.steady);
    fill += e.fill;
  }
  return steady + fill;
}

std::int64_t end_to_end_estimate(const FusionPlan& plan, const NetworkSpec& net) {
  std::int64_t total = 0;
  for (const auto& g : plan.groups) total += group_estimate(plan, net, g);
  return total;
}

double time_ms(std::int64_t cycles, double freq_mhz) { return double(cycles) / (freq_mhz * 1000.0); }

CostReport analyze(const FusionPlan& plan, const NetworkSpec& net, const TrafficOptions& traffic,
                   double freq_mhz) {
  validate_plan(plan, net);
  if (!(freq_mhz > 0)) throw ValidationError("frequency must be positive");
  const auto dims = chain_dims(net);
  const auto ords = conv_ordinals(net);
  CostReport r;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    LayerCost lc;
    lc.layer = i;
    lc.in = dims[i];
    lc.out = dims[i + 1];
    lc.buffers = layer_buffers(net, i).total;
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      lc.conv = true;
      lc.dpar = plan.depth_parallel.at(std::size_t(ords[i]));
      lc.serial_groups = lc.in.depth / lc.dpar;
      lc.latency = conv3d_latency(c->kernel, lc.dpar);
      lc.steady = steady_cycles(*c, lc.out, lc.serial_groups);
      lc.dsp = std::int64_t{c->kernel} * c->kernel * lc.dpar;
    }
    r.layers.push_back(lc);
  }
  for (const auto& g : plan.groups) {
    GroupCost gc;
    gc.range = g;
    gc.dsp = group_dsp(plan, net, g);
    gc.buffers = group_buffers(net, g);
    gc.est_cycles = group_estimate(plan, net, g);
    r.total_cycles += gc.est_cycles;
    r.groups.push_back(gc);
  }
  r.dsp = dsp_count(plan, net);
  r.buffers = buffer_bits(plan, net);
  r.traffic = traffic_bytes(plan, net, traffic);
  r.bytes_per_value = traffic.bytes_per_value;
  r.freq_mhz = freq_mhz;
  r.ms = time_ms(r.total_cycles, freq_mhz);
  return r;
}

}  // namespace decoil::cost
