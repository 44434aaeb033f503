#include <set>

#include "doctest.h"
#include "decoil/dse.hpp"
#include "support.hpp"

using namespace decoil;
using namespace decoil::dse;

namespace {

NetworkSpec vgg() { return load_network(testutil::config_path("vgg_prefix.json")); }

bool dominates(const PlanPoint& a, const PlanPoint& b) {
  return a.dsp <= b.dsp && a.traffic_bytes <= b.traffic_bytes &&
         (a.dsp < b.dsp || a.traffic_bytes < b.traffic_bytes);
}

PlanPoint point(std::int64_t dsp, std::int64_t traffic, std::size_t tag) {
  PlanPoint p;
  p.dsp = dsp;
  p.traffic_bytes = traffic;
  p.plan.groups = {{0, tag}};
  return p;
}

std::int64_t latency_sum(const FusionPlan& p, const NetworkSpec& net) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) s += cost::conv3d_latency(c->kernel, layer_dpar(p, net, i));
  }
  return s;
}

}  // namespace

TEST_SUITE("dse") {

TEST_CASE("partition enumeration") {
  const auto seven = enumerate_plans(7);
  REQUIRE(seven.size() == 64);
  CHECK(seven.front() == std::vector<LayerRange>{{0, 6}});
  CHECK(seven.back().size() == 7);
  std::set<std::string> seen;
  const auto net = vgg();
  for (const auto& g : seven) {
    FusionPlan p{g, default_depth_parallel(net)};
    CHECK_NOTHROW(validate_plan(p, net));
    seen.insert(plan_expression(p));
  }
  CHECK(seen.size() == 64);
  CHECK(seen.count("0|1|2|3|4|5|6") == 1);
  CHECK(seen.count("0-6") == 1);

  CHECK(enumerate_plans(1) == std::vector<std::vector<LayerRange>>{{{0, 0}}});
  std::set<std::string> three;
  for (const auto& g : enumerate_plans(3)) three.insert(plan_expression(FusionPlan{g, {}}));
  CHECK(three == std::set<std::string>{"0|1|2", "0-1|2", "0|1-2", "0-2"});
  CHECK_THROWS_AS(enumerate_plans(0), ValidationError);
  CHECK_THROWS_AS(enumerate_plans(21), ValidationError);
  CHECK(enumerate_plans(12).size() == 2048);
}

TEST_CASE("greedy depth decomposition") {
  const auto net = vgg();
  const auto fused = parse_plan("0-6", net);
  CHECK(assign_depth_parallelism(fused, net, {2907, 0}).depth_parallel == std::vector<int>{3, 64, 64, 128, 64});
  CHECK(assign_depth_parallelism(fused, net, {3483, 0}).depth_parallel == full_depth_parallel(net));
  CHECK(assign_depth_parallelism(fused, net, {100000, 0}).depth_parallel == full_depth_parallel(net));

  NetworkSpec one{{16, 16, 64}, {ConvSpec{3, 32, 1, 1}}, kQ16_16};
  const auto p = assign_depth_parallelism(single_group_plan(one), one, {288, 0});
  CHECK(p.depth_parallel == std::vector<int>{32});
  CHECK(p.depth_parallel[0] * 9 == 288);

  // every layer already at its odd part: 27 + 4 * 9 = 63 multipliers minimum
  CHECK_NOTHROW(assign_depth_parallelism(fused, net, {63, 0}));
  try {
    assign_depth_parallelism(fused, net, {62, 0});
    FAIL("expected infeasible budget");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("infeasible budget") != std::string::npos);
  }
}

TEST_CASE("decomposition respects the budget at every budget level") {
  const auto net = vgg();
  const auto full = full_depth_parallel(net);
  for (const auto& groups : enumerate_plans(net.layers.size())) {
    const FusionPlan plan{groups, {}};
    std::optional<FusionPlan> prev;
    std::int64_t prev_budget = 0;
    for (std::int64_t budget = 4000; budget >= 63; budget -= 37) {
      FusionPlan got;
      try {
        got = assign_depth_parallelism(plan, net, {budget, 0});
      } catch (const ValidationError&) {
        break;
      }
      CHECK(cost::dsp_count(got, net) <= budget);
      CHECK_NOTHROW(validate_plan(got, net));
      for (std::size_t k = 0; k < full.size(); ++k) {
        int odd = full[k];
        while (odd % 2 == 0) odd /= 2;
        const int ratio = got.depth_parallel[k] / odd;
        CHECK(got.depth_parallel[k] % odd == 0);
        CHECK((ratio & (ratio - 1)) == 0);
      }
      if (prev) {
        INFO(plan_expression(plan) << " budgets " << prev_budget << " -> " << budget);
        for (std::size_t k = 0; k < full.size(); ++k) CHECK(got.depth_parallel[k] <= prev->depth_parallel[k]);
        const auto e_hi = cost::end_to_end_estimate(*prev, net);
        const auto e_lo = cost::end_to_end_estimate(got, net);
        // Only the shorter adder trees of a halved layer can pull the estimate down.
        CHECK(e_lo + (latency_sum(*prev, net) - latency_sum(got, net)) >= e_hi);
      }
      prev = got;
      prev_budget = budget;
    }
  }
}

TEST_CASE("estimated cycles move with the budget along the fused plan") {
  const auto net = vgg();
  const auto fused = parse_plan("0-6", net);
  const auto a = assign_depth_parallelism(fused, net, {3600, 0});
  const auto b = assign_depth_parallelism(fused, net, {2907, 0});
  // conv3_1's adder tree loses a level (-9 cycles) while the bottleneck stays conv1_1.
  CHECK(cost::end_to_end_estimate(b, net) == cost::end_to_end_estimate(a, net) - 9);
  const auto c = assign_depth_parallelism(fused, net, {1500, 0});
  CHECK(cost::end_to_end_estimate(c, net) > cost::end_to_end_estimate(a, net));
}

TEST_CASE("pareto front") {
  const auto single = point(5, 5, 0);
  CHECK(pareto_front(std::vector<PlanPoint>{single}).points.size() == 1);
  const std::vector<PlanPoint> two{point(1, 10, 0), point(10, 1, 1)};
  CHECK(pareto_front(two).points.size() == 2);
  const std::vector<PlanPoint> with_dominated{point(1, 10, 0), point(10, 1, 1), point(10, 10, 2), point(1, 12, 3)};
  const auto f = pareto_front(with_dominated);
  REQUIRE(f.points.size() == 2);
  CHECK(f.points[0].dsp == 1);
  CHECK(f.points[1].dsp == 10);

  testutil::Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PlanPoint> pts;
    const int n = rng.uniform(1, 30);
    for (int i = 0; i < n; ++i) pts.push_back(point(rng.uniform(1, 20), rng.uniform(1, 20), std::size_t(i)));
    const auto front = pareto_front(pts);
    REQUIRE_FALSE(front.points.empty());
    for (const auto& m : front.points) {
      for (const auto& p : pts) CHECK_FALSE(dominates(p, m));
    }
    for (const auto& p : pts) {
      bool on = false, dom = false;
      for (const auto& m : front.points) on = on || (m.dsp == p.dsp && m.traffic_bytes == p.traffic_bytes);
      for (const auto& q : pts) dom = dom || dominates(q, p);
      CHECK(on == !dom);
    }
    for (std::size_t i = 1; i < front.points.size(); ++i) {
      CHECK(front.points[i].dsp >= front.points[i - 1].dsp);
      CHECK(front.points[i].traffic_bytes <= front.points[i - 1].traffic_bytes);
    }
    const auto again = pareto_front(front.points);
    REQUIRE(again.points.size() == front.points.size());
    for (std::size_t i = 0; i < again.points.size(); ++i) CHECK(again.points[i].plan == front.points[i].plan);
  }
}

TEST_CASE("nested chain traces the trade-off") {
  const auto net = vgg();
  const auto chain = nested_chain(net, default_depth_parallel(net));
  REQUIRE(chain.size() == 7);
  CHECK(plan_expression(chain.front()) == "0|1|2|3|4|5|6");
  CHECK(plan_expression(chain.back()) == "0-6");
  for (std::size_t i = 1; i < chain.size(); ++i) {
    const auto a = evaluate(chain[i - 1], net), b = evaluate(chain[i], net);
    CHECK(b.dsp >= a.dsp);
    CHECK(b.traffic_bytes <= a.traffic_bytes);
  }
  CHECK(evaluate(chain.back(), net).dsp == 2907);
}

TEST_CASE("merging adjacent groups over all 64 partitions") {
  const auto net = vgg();
  const auto plans = enumerate_plans(7);
  for (const auto& fixed : {std::optional<std::vector<int>>(default_depth_parallel(net)),
                            std::optional<std::vector<int>>()}) {
    SweepOptions o;
    o.fixed_dpar = fixed;
    const auto s = explore(net, o);
    REQUIRE(s.points.size() == 64);
    for (std::uint32_t m = 0; m < 64; ++m) {
      for (int bit = 0; bit < 6; ++bit) {
        if (!(m & (1u << bit))) continue;
        const auto& split = s.points[m];
        const auto& merged = s.points[m & ~(1u << bit)];
        CHECK(merged.dsp >= split.dsp);
        CHECK(merged.traffic_bytes <= split.traffic_bytes);
      }
    }
  }
}

TEST_CASE("front extremes on the VGG prefix") {
  const auto net = vgg();
  const auto s = explore(net, {});
  const auto& singletons = s.points.back();
  const auto& fused = s.points.front();
  REQUIRE(plan_expression(singletons.plan) == "0|1|2|3|4|5|6");
  REQUIRE(plan_expression(fused.plan) == "0-6");
  std::int64_t min_dsp = INT64_MAX, max_dsp = 0, max_traffic = 0, min_traffic = INT64_MAX;
  for (const auto& p : s.points) {
    min_dsp = std::min(min_dsp, p.dsp);
    max_dsp = std::max(max_dsp, p.dsp);
    max_traffic = std::max(max_traffic, p.traffic_bytes);
    min_traffic = std::min(min_traffic, p.traffic_bytes);
  }
  // no fusion: fewest multipliers, most traffic
  CHECK(singletons.dsp == min_dsp);
  CHECK(singletons.traffic_bytes == max_traffic);
  // full fusion: most multipliers, least traffic, and it closes the front
  CHECK(fused.dsp == max_dsp);
  CHECK(fused.traffic_bytes == min_traffic);
  REQUIRE_FALSE(s.front.points.empty());
  CHECK(s.front.points.back().plan == fused.plan);
  CHECK(s.front.points.front().dsp == singletons.dsp);
  CHECK(s.on_front[0] == 1);
}

TEST_CASE("sweep outputs") {
  const auto net = vgg();
  const auto s = explore(net, {});
  const auto csv = tradeoff_csv(s);
  CHECK(csv.rfind("plan,groups,dsp,traffic_bytes,est_cycles,buffer_bits,pareto,dpar,status\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
  CHECK(csv == tradeoff_csv(explore(net, {})));
  const auto curve = curve_csv(s);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 8);
  CHECK(curve.find("\nA,0|1|2|3|4|5|6,7,") != std::string::npos);
  CHECK(curve.find("\nG,0-6,1,2907,") != std::string::npos);

  const NetworkSpec one{{8, 8, 3}, {ConvSpec{3, 4, 1, 1}}, kQ16_16};
  const auto s1 = explore(one, {});
  CHECK(s1.points.size() == 1);
  const auto c1 = tradeoff_csv(s1);
  CHECK(std::count(c1.begin(), c1.end(), '\n') == 2);

  SweepOptions tight;
  tight.budget.dsp_max = 40;
  const auto st = explore(net, tight);
  REQUIRE(st.points.size() == 64);
  CHECK_FALSE(st.points.front().feasible);
  CHECK(st.points.back().feasible);
  const auto ct = tradeoff_csv(st);
  CHECK(ct.find(",infeasible\n") != std::string::npos);
  for (const auto& p : st.front.points) CHECK(p.feasible);
}

TEST_CASE("evaluate mirrors the cost model") {
  const auto net = vgg();
  const auto plan = parse_plan("0-1|2-4|5-6", net);
  const auto p = evaluate(plan, net);
  CHECK(p.dsp == cost::dsp_count(plan, net));
  CHECK(p.traffic_bytes == cost::traffic_bytes(plan, net).total());
  CHECK(p.est_cycles == cost::end_to_end_estimate(plan, net));
  CHECK(p.buffer_bits == cost::buffer_bits(plan, net).bits);
}

}  // TEST_SUITE
