#include "decoil/dse.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "decoil/error.hpp"

namespace decoil::dse {

std::vector<std::vector<LayerRange>> enumerate_plans(std::size_t n) {
  if (n < 1) throw ValidationError("need at least one layer to enumerate plans");
  if (n > kMaxEnumeratedLayers) {
    throw ValidationError("refusing to enumerate partitions of " + std::to_string(n) + " layers (limit " +
                          std::to_string(kMaxEnumeratedLayers) + ")");
  }
  const std::uint32_t count = 1u << (n - 1);
  std::vector<std::vector<LayerRange>> plans;
  plans.reserve(count);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    std::vector<LayerRange> groups;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (mask & (1u << i)) {
        groups.push_back({start, i});
        start = i + 1;
      }
    }
    groups.push_back({start, n - 1});
    plans.push_back(std::move(groups));
  }
  return plans;
}

namespace {

std::int64_t bottleneck(const NetworkSpec& net, const std::vector<Dims>& dims, const std::vector<int>& ords,
                        const std::vector<int>& dpar, LayerRange g) {
  std::int64_t best = 0;
  for (std::size_t i = g.first; i <= g.last; ++i) {
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      const int serial = dims[i].depth / dpar[std::size_t(ords[i])];
      best = std::max(best, cost::steady_cycles(*c, dims[i + 1], serial));
    }
  }
  return best;
}

}  // namespace

FusionPlan assign_depth_parallelism(const FusionPlan& plan, const NetworkSpec& net,
                                    const cost::ResourceBudget& budget) {
  FusionPlan out = plan;
  out.depth_parallel = full_depth_parallel(net);
  validate_plan(out, net);
  const auto dims = chain_dims(net);
  const auto ords = conv_ordinals(net);

  for (;;) {
    // Largest over-budget group; first one wins on equal dsp.
    const LayerRange* worst = nullptr;
    std::int64_t worst_dsp = budget.dsp_max;
    for (const auto& g : out.groups) {
      const auto d = cost::group_dsp(out, net, g);
      if (d > worst_dsp) {
        worst_dsp = d;
        worst = &g;
      }
    }
    if (!worst) return out;

    const std::int64_t before = bottleneck(net, dims, ords, out.depth_parallel, *worst);
    std::optional<std::size_t> pick;
    std::int64_t pick_increase = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = worst->first; i <= worst->last; ++i) {
      if (!is_conv(net.layers[i])) continue;
      const auto k = std::size_t(ords[i]);
      if (out.depth_parallel[k] % 2 != 0) continue;
      auto trial = out.depth_parallel;
      trial[k] /= 2;
      const std::int64_t inc = bottleneck(net, dims, ords, trial, *worst) - before;
      if (inc <= pick_increase) {  // later (deeper) layers win ties
        pick_increase = inc;
        pick = k;
      }
    }
    if (!pick) {
      throw ValidationError("infeasible budget: group " + std::to_string(worst->first) + "-" +
                            std::to_string(worst->last) + " needs at least " + std::to_string(worst_dsp) +
                            " DSPs but dsp_max is " + std::to_string(budget.dsp_max));
    }
    out.depth_parallel[*pick] /= 2;
  }
}

PlanPoint evaluate(const FusionPlan& plan, const NetworkSpec& net, const cost::TrafficOptions& traffic) {
  PlanPoint p;
  p.plan = plan;
  p.dsp = cost::dsp_count(plan, net);
  p.traffic_bytes = cost::traffic_bytes(plan, net, traffic).total();
  p.est_cycles = cost::end_to_end_estimate(plan, net);
  p.buffer_bits = cost::buffer_bits(plan, net).bits;
  return p;
}

ParetoFront pareto_front(std::span<const PlanPoint> points) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].dsp != points[b].dsp) return points[a].dsp < points[b].dsp;
    return points[a].traffic_bytes < points[b].traffic_bytes;
  });
  ParetoFront front;
  std::int64_t best_prev = std::numeric_limits<std::int64_t>::max();  // min traffic at strictly lower dsp
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    const std::int64_t dsp = points[idx[i]].dsp;
    const std::int64_t level_min = points[idx[i]].traffic_bytes;  // sorted, so first is minimal
    while (j < idx.size() && points[idx[j]].dsp == dsp) {
      const auto& p = points[idx[j]];
      if (p.traffic_bytes == level_min && p.traffic_bytes < best_prev) front.points.push_back(p);
      ++j;
    }
    best_prev = std::min(best_prev, level_min);
    i = j;
  }
  return front;
}

std::vector<FusionPlan> nested_chain(const NetworkSpec& net, const std::vector<int>& dpar) {
  const std::size_t n = net.layers.size();
  std::vector<FusionPlan> chain;
  for (std::size_t merged = 0; merged < n; ++merged) {
    FusionPlan p;
    p.groups.push_back({0, merged});
    for (std::size_t i = merged + 1; i < n; ++i) p.groups.push_back({i, i});
    p.depth_parallel = dpar;
    chain.push_back(std::move(p));
  }
  return chain;
}

namespace {

PlanPoint evaluate_under_budget(FusionPlan plan, const NetworkSpec& net, const SweepOptions& opts) {
  bool feasible = true;
  if (opts.fixed_dpar) {
    plan.depth_parallel = *opts.fixed_dpar;
  } else {
    try {
      plan = assign_depth_parallelism(plan, net, opts.budget);
    } catch (const ValidationError&) {
      // Report the most decomposed assignment: every d_par reduced to its odd part.
      plan.depth_parallel = full_depth_parallel(net);
      for (auto& d : plan.depth_parallel) {
        while (d % 2 == 0) d /= 2;
      }
      feasible = false;
    }
  }
  validate_plan(plan, net);
  PlanPoint p = evaluate(plan, net, opts.traffic);
  p.feasible = feasible && p.dsp <= opts.budget.dsp_max;
  return p;
}

std::string csv_row(const PlanPoint& p) {
  return plan_expression(p.plan) + ',' + std::to_string(p.plan.groups.size()) + ',' + std::to_string(p.dsp) +
         ',' + std::to_string(p.traffic_bytes) + ',' + std::to_string(p.est_cycles) + ',' +
         std::to_string(p.buffer_bits);
}

}  // namespace

Sweep explore(const NetworkSpec& net, const SweepOptions& opts) {
  Sweep s;
  for (auto& groups : enumerate_plans(net.layers.size())) {
    FusionPlan plan{std::move(groups), {}};
    s.points.push_back(evaluate_under_budget(std::move(plan), net, opts));
  }
  std::vector<PlanPoint> feasible;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    if (s.points[i].feasible) {
      feasible.push_back(s.points[i]);
      where.push_back(i);
    }
  }
  s.front = pareto_front(feasible);
  s.on_front.assign(s.points.size(), 0);
  for (const auto& f : s.front.points) {
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (s.points[i].plan == f.plan) s.on_front[i] = 1;
    }
  }
  const std::vector<int> chain_dpar = opts.fixed_dpar ? *opts.fixed_dpar : default_depth_parallel(net);
  for (auto& p : nested_chain(net, chain_dpar)) {
    SweepOptions fixed = opts;
    fixed.fixed_dpar = chain_dpar;
    s.curve.push_back(evaluate_under_budget(std::move(p), net, fixed));
  }
  return s;
}

std::string tradeoff_csv(const Sweep& sweep) {
  std::string out = "plan,groups,dsp,traffic_bytes,est_cycles,buffer_bits,pareto,dpar,status\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    out += csv_row(p) + ',' + (sweep.on_front[i] ? "1" : "0") + ",\"" + dpar_expression(p.plan) + "\"," +
           (p.feasible ? "ok" : "infeasible") + '\n';
  }
  return out;
}

std::string curve_csv(const Sweep& sweep) {
  std::string out = "label,plan,groups,dsp,traffic_bytes,est_cycles,buffer_bits\n";
  const std::size_t n = sweep.curve.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = sweep.curve[i];
    // Labelled by group count: the all-singleton end is A.
    const std::size_t rank = n - p.plan.groups.size();
    const std::string label = rank < 26 ? std::string(1, char('A' + rank)) : "g" + std::to_string(p.plan.groups.size());
    const auto row = csv_row(p);
    out += label + ',' + row + '\n';
  }
  return out;
}

}  // namespace decoil::dse
