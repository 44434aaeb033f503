#include "decoil/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "decoil/error.hpp"
#include "decoil/fileio.hpp"
#include "decoil/golden.hpp"
#include "json.hpp"

namespace decoil::cli {

namespace {

using Clock = std::chrono::steady_clock;

struct Loaded {
  NetworkSpec net;
  std::string net_digest;
  Tensor3D input;
  std::vector<FilterBank> weights;
};

NetworkSpec read_network(const Options& o, std::string* digest_out) {
  if (o.network.empty()) throw ParseError("--network is required");
  const auto text = io::read_file(o.network);
  auto net = parse_network(text);
  if (digest_out) *digest_out = io::digest(serialize_network(net));
  return net;
}

Loaded load_all(const Options& o) {
  Loaded l;
  l.net = read_network(o, &l.net_digest);
  std::optional<io::SeededGenerator> gen;
  if (o.seed) gen.emplace(*o.seed);
  if ((!o.input || !o.weights) && !gen) throw ParseError("need --input and --weights, or --seed");

  // Draw order matches cmd_gen: input first, then weights.
  if (o.input) {
    l.input = io::decode_tensor(io::read_file(*o.input));
  } else {
    l.input = io::random_tensor(l.net.input, *gen, l.net.format);
  }
  if (!(l.input.dims() == l.net.input)) {
    const auto& d = l.input.dims();
    throw ValidationError("input tensor is " + std::to_string(d.height) + "x" + std::to_string(d.width) + "x" +
                          std::to_string(d.depth) + ", network expects " + std::to_string(l.net.input.height) +
                          "x" + std::to_string(l.net.input.width) + "x" + std::to_string(l.net.input.depth));
  }
  if (o.weights) {
    l.weights = io::decode_weights(io::read_file(*o.weights), l.net);
  } else {
    if (o.input) {
      // keep the weight stream aligned with the seed-only case
      io::random_tensor(l.net.input, *gen, l.net.format);
    }
    l.weights = io::random_weights(l.net, *gen);
  }
  return l;
}

FusionPlan plan_for(const Options& o, const NetworkSpec& net) {
  const std::string expr = o.plan ? *o.plan : plan_expression(single_group_plan(net));
  std::optional<std::string_view> dpar;
  if (o.dpar) dpar = *o.dpar;
  return parse_plan(expr, net, dpar);
}

cost::TrafficOptions traffic_for(const Options& o) {
  if (o.bytes_per_value != 1 && o.bytes_per_value != 2 && o.bytes_per_value != 4) {
    throw ParseError("--bytes-per-value must be 1, 2 or 4");
  }
  return {o.bytes_per_value, o.reread_weights};
}

void write_out(const Options& o, const std::string& name, std::string_view bytes) {
  if (!o.out_dir) return;
  std::filesystem::create_directories(*o.out_dir);
  io::write_file((std::filesystem::path(*o.out_dir) / name).string(), bytes);
}

RunReport base_report(const char* command, const NetworkSpec& net, const std::string& digest) {
  RunReport r;
  r.command = command;
  r.network_digest = digest;
  r.layer_dims = chain_dims(net);
  return r;
}

void finish(RunReport& r, const Options& o, Clock::time_point t0) {
  if (o.timing) r.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_out(o, "report.json", serialize_report(r));
}

}  // namespace

Dims parse_dims(const std::string& text) {
  Dims d;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> d.height >> c1 >> d.width >> c2 >> d.depth) || c1 != ',' || c2 != ',' || !in.eof()) {
    throw ParseError("dims must be h,w,d: '" + text + "'");
  }
  if (d.height < 1 || d.width < 1 || d.depth < 1) throw ValidationError("dims must be positive");
  return d;
}

RunReport cmd_golden(const Options& o) {
  const auto t0 = Clock::now();
  auto l = load_all(o);
  golden::Stats stats;
  const auto outs = golden::run_network(l.net, l.input, l.weights, &stats);
  auto r = base_report("golden", l.net, l.net_digest);
  r.golden_saturations = stats.saturations;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    write_out(o, "layer_" + std::to_string(i) + ".dclf", io::encode_tensor(outs[i]));
  }
  r.output_digest = io::digest(io::encode_tensor(outs.back()));
  finish(r, o, t0);
  return r;
}

RunReport cmd_simulate(const Options& o) {
  const auto t0 = Clock::now();
  auto l = load_all(o);
  const auto plan = plan_for(o, l.net);
  const auto traffic = traffic_for(o);

  std::ofstream trace_file;
  dataflow::TraceSink sink;
  dataflow::SimOptions sim_opts;
  if (o.trace) {
    trace_file.open(*o.trace, std::ios::binary | std::ios::trunc);
    if (!trace_file) throw Error("cannot write " + *o.trace);
    sink = [&trace_file](const dataflow::TraceEvent& e) { trace_file << dataflow::format_trace(e) << '\n'; };
    sim_opts.trace = &sink;
  }
  const auto sim = dataflow::simulate_plan(l.net, l.input, l.weights, plan, sim_opts);

  golden::Stats gstats;
  const auto ref = golden::run_network(l.net, l.input, l.weights, &gstats);

  auto r = base_report("simulate", l.net, l.net_digest);
  r.plan = plan_expression(plan);
  r.dpar = dpar_expression(plan);
  r.sim = summarize(sim, o.freq_mhz);
  r.cost = cost::analyze(plan, l.net, traffic, o.freq_mhz);
  r.saturations = sim.saturations;
  r.golden_saturations = gstats.saturations;
  r.golden_match = sim.output == ref.back();
  if (sim.saturations == 0 && !*r.golden_match) {
    throw InvariantError("dataflow output differs from reference without saturation");
  }
  const auto encoded = io::encode_tensor(sim.output);
  r.output_digest = io::digest(encoded);
  write_out(o, "output.dclf", encoded);
  finish(r, o, t0);
  return r;
}

RunReport cmd_analyze(const Options& o) {
  const auto t0 = Clock::now();
  std::string digest;
  const auto net = read_network(o, &digest);
  const auto plan = plan_for(o, net);
  auto r = base_report("analyze", net, digest);
  r.plan = plan_expression(plan);
  r.dpar = dpar_expression(plan);
  r.cost = cost::analyze(plan, net, traffic_for(o), o.freq_mhz);
  finish(r, o, t0);
  return r;
}

DseOutput cmd_dse(const Options& o) {
  std::string digest;
  const auto net = read_network(o, &digest);
  dse::SweepOptions so;
  so.budget.dsp_max = o.dsp_max;
  so.traffic = traffic_for(o);
  if (o.dpar) so.fixed_dpar = parse_plan(plan_expression(single_group_plan(net)), net, *o.dpar).depth_parallel;
  const auto sweep = dse::explore(net, so);

  DseOutput out;
  out.tradeoff_csv = dse::tradeoff_csv(sweep);
  out.curve_csv = dse::curve_csv(sweep);

  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["network_digest"] = digest;
  j["dsp_max"] = o.dsp_max;
  j["bytes_per_value"] = so.traffic.bytes_per_value;
  j["plans"] = sweep.points.size();
  std::size_t infeasible = 0;
  for (const auto& p : sweep.points) infeasible += p.feasible ? 0 : 1;
  j["infeasible"] = infeasible;
  j["front"] = nlohmann::ordered_json::array();
  for (const auto& p : sweep.front.points) {
    j["front"].push_back({{"plan", plan_expression(p.plan)},
                          {"dpar", dpar_expression(p.plan)},
                          {"dsp", p.dsp},
                          {"traffic_bytes", p.traffic_bytes},
                          {"est_cycles", p.est_cycles}});
  }
  out.pareto_json = j.dump(2) + "\n";

  write_out(o, "tradeoff.csv", out.tradeoff_csv);
  write_out(o, "curve.csv", out.curve_csv);
  write_out(o, "pareto.json", out.pareto_json);
  return out;
}

void cmd_gen(const GenOptions& o) {
  io::SeededGenerator gen(o.seed);
  std::filesystem::create_directories(o.out_dir);
  const auto dir = std::filesystem::path(o.out_dir);
  if (o.network) {
    const auto net = parse_network(io::read_file(*o.network));
    if (o.dims && !(*o.dims == net.input)) throw ValidationError("--dims disagrees with the network input");
    io::write_file((dir / "input.dclf").string(), io::encode_tensor(io::random_tensor(net.input, gen, net.format)));
    io::write_file((dir / "weights.dclw").string(), io::encode_weights(io::random_weights(net, gen)));
    return;
  }
  if (!o.dims) throw ParseError("gen needs --network or --dims");
  io::write_file((dir / "input.dclf").string(), io::encode_tensor(io::random_tensor(*o.dims, gen)));
}

}  // namespace decoil::cli
