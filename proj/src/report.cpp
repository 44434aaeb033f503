#include "decoil/report.hpp"

#include "decoil/error.hpp"
#include "json.hpp"

namespace decoil {

using nlohmann::ordered_json;

SimSummary summarize(const dataflow::SimResult& r, double freq_mhz) {
  SimSummary s;
  s.total_cycles = r.total_cycles;
  s.group_cycles = r.group_cycles;
  s.layers = r.layers;
  s.stall_cycles = r.stall_cycles;
  s.ms = cost::time_ms(r.total_cycles, freq_mhz);
  return s;
}

namespace {

ordered_json dims_json(const Dims& d) { return ordered_json::array({d.height, d.width, d.depth}); }
Dims dims_from(const ordered_json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

ordered_json buffers_json(const cost::BufferEstimate& b) { return {{"bits", b.bits}, {"blocks", b.blocks}}; }
cost::BufferEstimate buffers_from(const ordered_json& j) {
  return {j.at("bits").get<std::int64_t>(), j.at("blocks").get<std::int64_t>()};
}

ordered_json cost_json(const cost::CostReport& c) {
  ordered_json layers = ordered_json::array();
  for (const auto& l : c.layers) {
    layers.push_back({{"layer", l.layer},
                      {"conv", l.conv},
                      {"in", dims_json(l.in)},
                      {"out", dims_json(l.out)},
                      {"dpar", l.dpar},
                      {"serial_groups", l.serial_groups},
                      {"latency", l.latency},
                      {"steady", l.steady},
                      {"dsp", l.dsp},
                      {"buffers", buffers_json(l.buffers)}});
  }
  ordered_json groups = ordered_json::array();
  for (const auto& g : c.groups) {
    groups.push_back({{"first", g.range.first},
                      {"last", g.range.last},
                      {"dsp", g.dsp},
                      {"buffers", buffers_json(g.buffers)},
                      {"est_cycles", g.est_cycles}});
  }
  return {{"layers", layers},
          {"groups", groups},
          {"total_cycles", c.total_cycles},
          {"dsp", c.dsp},
          {"buffers", buffers_json(c.buffers)},
          {"traffic",
           {{"inputs", c.traffic.inputs},
            {"weights", c.traffic.weights},
            {"outputs", c.traffic.outputs},
            {"total", c.traffic.total()}}},
          {"bytes_per_value", c.bytes_per_value},
          {"freq_mhz", c.freq_mhz},
          {"ms", c.ms}};
}

cost::CostReport cost_from(const ordered_json& j) {
  cost::CostReport c;
  for (const auto& l : j.at("layers")) {
    cost::LayerCost lc;
    lc.layer = l.at("layer").get<std::size_t>();
    lc.conv = l.at("conv").get<bool>();
    lc.in = dims_from(l.at("in"));
    lc.out = dims_from(l.at("out"));
    lc.dpar = l.at("dpar").get<int>();
    lc.serial_groups = l.at("serial_groups").get<int>();
    lc.latency = l.at("latency").get<std::int64_t>();
    lc.steady = l.at("steady").get<std::int64_t>();
    lc.dsp = l.at("dsp").get<std::int64_t>();
    lc.buffers = buffers_from(l.at("buffers"));
    c.layers.push_back(lc);
  }
  for (const auto& g : j.at("groups")) {
    cost::GroupCost gc;
    gc.range = {g.at("first").get<std::size_t>(), g.at("last").get<std::size_t>()};
    gc.dsp = g.at("dsp").get<std::int64_t>();
    gc.buffers = buffers_from(g.at("buffers"));
    gc.est_cycles = g.at("est_cycles").get<std::int64_t>();
    c.groups.push_back(gc);
  }
  c.total_cycles = j.at("total_cycles").get<std::int64_t>();
  c.dsp = j.at("dsp").get<std::int64_t>();
  c.buffers = buffers_from(j.at("buffers"));
  const auto& t = j.at("traffic");
  c.traffic = {t.at("inputs").get<std::int64_t>(), t.at("weights").get<std::int64_t>(),
               t.at("outputs").get<std::int64_t>()};
  c.bytes_per_value = j.at("bytes_per_value").get<int>();
  c.freq_mhz = j.at("freq_mhz").get<double>();
  c.ms = j.at("ms").get<double>();
  return c;
}

}  // namespace

std::string serialize_report(const RunReport& r) {
  ordered_json j;
  j["tool_version"] = r.tool_version;
  j["command"] = r.command;
  j["network_digest"] = r.network_digest;
  j["plan"] = r.plan;
  j["dpar"] = r.dpar;
  j["layer_dims"] = ordered_json::array();
  for (const auto& d : r.layer_dims) j["layer_dims"].push_back(dims_json(d));
  if (r.sim) {
    ordered_json layers = ordered_json::array();
    for (const auto& l : r.sim->layers) {
      layers.push_back({{"layer", l.layer}, {"first_output", l.first_output}, {"last_output", l.last_output}});
    }
    j["sim"] = {{"total_cycles", r.sim->total_cycles},
                {"group_cycles", r.sim->group_cycles},
                {"layers", layers},
                {"stall_cycles", r.sim->stall_cycles},
                {"ms", r.sim->ms}};
  }
  if (r.cost) j["cost"] = cost_json(*r.cost);
  j["saturations"] = r.saturations;
  j["golden_saturations"] = r.golden_saturations;
  if (r.golden_match) j["golden_match"] = *r.golden_match;
  j["output_digest"] = r.output_digest;
  if (r.wall_clock_seconds) j["wall_clock_seconds"] = *r.wall_clock_seconds;
  return j.dump(2) + "\n";
}

RunReport parse_report(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text.begin(), text.end());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("report syntax error: ") + e.what(), e.byte);
  }
  try {
    RunReport r;
    r.tool_version = j.at("tool_version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.network_digest = j.at("network_digest").get<std::string>();
    r.plan = j.at("plan").get<std::string>();
    r.dpar = j.at("dpar").get<std::string>();
    for (const auto& d : j.at("layer_dims")) r.layer_dims.push_back(dims_from(d));
    if (auto s = j.find("sim"); s != j.end()) {
      SimSummary sim;
      sim.total_cycles = s->at("total_cycles").get<std::int64_t>();
      sim.group_cycles = s->at("group_cycles").get<std::vector<std::int64_t>>();
      for (const auto& l : s->at("layers")) {
        sim.layers.push_back({l.at("layer").get<std::size_t>(), l.at("first_output").get<std::int64_t>(),
                              l.at("last_output").get<std::int64_t>()});
      }
      sim.stall_cycles = s->at("stall_cycles").get<std::int64_t>();
      sim.ms = s->at("ms").get<double>();
      r.sim = std::move(sim);
    }
    if (auto c = j.find("cost"); c != j.end()) r.cost = cost_from(*c);
    r.saturations = j.at("saturations").get<std::int64_t>();
    r.golden_saturations = j.at("golden_saturations").get<std::int64_t>();
    if (auto g = j.find("golden_match"); g != j.end()) r.golden_match = g->get<bool>();
    r.output_digest = j.at("output_digest").get<std::string>();
    if (auto w = j.find("wall_clock_seconds"); w != j.end()) r.wall_clock_seconds = w->get<double>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("report schema error: ") + e.what());
  }
}

}  // namespace decoil
