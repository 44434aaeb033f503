#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/costmodel.hpp"

namespace decoil::dse {

inline constexpr std::size_t kMaxEnumeratedLayers = 20;

struct PlanPoint {
  FusionPlan plan;
  std::int64_t dsp = 0;
  std::int64_t traffic_bytes = 0;
  std::int64_t est_cycles = 0;
  std::int64_t buffer_bits = 0;
  bool feasible = true;
};

// Ascending dsp, then ascending traffic, then canonical plan order.
struct ParetoFront {
  std::vector<PlanPoint> points;
};

// All 2^(n-1) contiguous partitions of n layers. Entry m places a group
// boundary after layer i exactly when bit i of m is set, so entry 0 is the
// single fused group and the last entry is all singletons.
std::vector<std::vector<LayerRange>> enumerate_plans(std::size_t n_layers);

// Greedy iterative decomposition: starting from full depth everywhere, keep
// halving one layer's d_par inside the largest over-budget group, picking the
// layer whose halving raises that group's bottleneck steady cycles least
// (ties go to the deepest layer). Odd d_par values are never split.
// Throws ValidationError when the budget cannot be met.
FusionPlan assign_depth_parallelism(const FusionPlan& plan, const NetworkSpec& net,
                                    const cost::ResourceBudget& budget);

PlanPoint evaluate(const FusionPlan& plan, const NetworkSpec& net, const cost::TrafficOptions& traffic = {});

ParetoFront pareto_front(std::span<const PlanPoint> points);

// A..: the nested chain that merges groups front to back, from all singletons
// down to one fused group.
std::vector<FusionPlan> nested_chain(const NetworkSpec& net, const std::vector<int>& dpar);

struct SweepOptions {
  cost::ResourceBudget budget;
  // When set every plan uses this d_par; otherwise it is assigned per plan.
  std::optional<std::vector<int>> fixed_dpar;
  cost::TrafficOptions traffic;
};

struct Sweep {
  std::vector<PlanPoint> points;  // canonical enumeration order
  std::vector<char> on_front;
  ParetoFront front;
  std::vector<PlanPoint> curve;
};

Sweep explore(const NetworkSpec& net, const SweepOptions& opts);

std::string tradeoff_csv(const Sweep& sweep);
std::string curve_csv(const Sweep& sweep);

}  // namespace decoil::dse
