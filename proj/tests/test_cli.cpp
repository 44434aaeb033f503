#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "decoil/commands.hpp"
#include "decoil/fileio.hpp"
#include "decoil/golden.hpp"
#include "support.hpp"

using namespace decoil;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("decoil_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return io::read_file(p.string()); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DECOIL_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Reference SplitMix64 step, kept separate from the library implementation.
std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

cli::Options opts(const std::string& config) {
  cli::Options o;
  o.network = testutil::config_path(config);
  o.seed = 1;
  return o;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("seeded generator") {
  io::SeededGenerator g(0);
  CHECK(g.next() == 0xE220A8397B1DCDAFull);
  CHECK(g.next() == 0x6E789E6AA1B965F4ull);
  for (std::uint64_t seed : {1ull, 42ull, 0xDEADBEEFull}) {
    io::SeededGenerator lib(seed);
    std::uint64_t ref = seed;
    for (int i = 0; i < 1000; ++i) CHECK(lib.next() == splitmix(ref));
  }
  // top 17 bits as a signed fraction
  CHECK(io::unit_value(0x8000000000000000ull).raw == -65536);
  CHECK(io::unit_value(0x7FFFFFFFFFFFFFFFull).raw == 65535);
  CHECK(io::unit_value(0).raw == 0);
  std::uint64_t s = 1;
  const std::uint64_t first = splitmix(s);
  io::SeededGenerator one(1);
  const auto t = io::random_tensor({5, 5, 3}, one);
  CHECK(t.size() == 75);
  CHECK(t.values()[0].raw == std::int32_t(std::int64_t(first) >> 47));
  for (auto v : t.values()) {
    CHECK(v.raw >= -65536);
    CHECK(v.raw < 65536);
  }
}

TEST_CASE("tensor and weight files") {
  io::SeededGenerator g(3);
  const auto t = io::random_tensor({4, 3, 2}, g);
  const auto bytes = io::encode_tensor(t);
  REQUIRE(bytes.size() == 17 + 4 * 24);
  CHECK(bytes.substr(0, 4) == "DCLF");
  CHECK(std::uint8_t(bytes[4]) == 1);
  CHECK(std::uint8_t(bytes[5]) == 4);
  CHECK(std::uint8_t(bytes[9]) == 3);
  CHECK(std::uint8_t(bytes[13]) == 2);
  const std::uint32_t v0 = std::uint8_t(bytes[17]) | std::uint8_t(bytes[18]) << 8 | std::uint8_t(bytes[19]) << 16 |
                           std::uint32_t(std::uint8_t(bytes[20])) << 24;
  CHECK(std::int32_t(v0) == t.values()[0].raw);
  CHECK(io::decode_tensor(bytes) == t);
  CHECK_THROWS_AS(io::decode_tensor(bytes.substr(0, 10)), ValidationError);
  CHECK_THROWS_AS(io::decode_tensor(bytes.substr(0, bytes.size() - 1)), ValidationError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(io::decode_tensor(bad), ValidationError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(io::decode_tensor(bad), ValidationError);

  const auto net = load_network(testutil::config_path("test_example.json"));
  const auto w = io::random_weights(net, g);
  const auto wb = io::encode_weights(w);
  CHECK(wb.size() == 2 * (12 + 4 * 81));
  CHECK(io::decode_weights(wb, net) == w);
  try {
    io::decode_weights(wb.substr(0, wb.size() - 8), net);
    FAIL("expected size mismatch");
  } catch (const ValidationError& e) {
    const std::string m = e.what();
    CHECK(m.find(std::to_string(wb.size())) != std::string::npos);
    CHECK(m.find(std::to_string(wb.size() - 8)) != std::string::npos);
  }
}

TEST_CASE("weight scaling keeps one conv out of saturation") {
  NetworkSpec net{{6, 6, 16}, {ConvSpec{3, 4, 1, 1}}, kQ16_16};
  io::SeededGenerator g(5);
  auto w = io::random_weights(net, g);
  Tensor3D hi(net.input), lo(net.input);
  for (auto& v : hi.values()) v.raw = 65535;
  for (auto& v : lo.values()) v.raw = -65536;
  // worst case: every weight at the largest magnitude the scaling admits
  FilterBank worst(4, 3, 16);
  for (auto& v : worst.values()) v.raw = -65536 / (9 * 16);
  for (const auto* bank : {&w[0], &worst}) {
    for (const auto* x : {&hi, &lo}) {
      golden::Stats st;
      golden::conv_layer(*x, *bank, std::get<ConvSpec>(net.layers[0]), kQ16_16, &st);
      CHECK(st.saturations == 0);
    }
  }
}

TEST_CASE("report round-trips") {
  const auto r = cli::cmd_simulate(opts("test_example.json"));
  const auto text = serialize_report(r);
  const auto back = parse_report(text);
  CHECK(back == r);
  CHECK(serialize_report(back) == text);
  auto timed = r;
  timed.wall_clock_seconds = 0.125;
  CHECK(parse_report(serialize_report(timed)) == timed);
  CHECK_THROWS_AS(parse_report("{"), ParseError);
  CHECK_THROWS_AS(parse_report("{}"), ValidationError);
}

TEST_CASE("golden command") {
  const auto dir = scratch("golden");
  auto o = opts("test_example.json");
  o.out_dir = dir.string();
  const auto r = cli::cmd_golden(o);
  CHECK(r.golden_saturations == 0);
  const std::vector<Dims> expect{{5, 5, 3}, {5, 5, 3}, {2, 2, 3}};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(io::decode_tensor(slurp(dir / ("layer_" + std::to_string(i) + ".dclf"))).dims() == expect[i]);
  }
  CHECK(fs::exists(dir / "report.json"));

  // identity kernel: output file equals the input file
  const auto id_dir = scratch("identity");
  {
    std::ofstream(id_dir / "net.json") << R"({"input": {"h": 6, "w": 5, "d": 1},
      "layers": [{"type": "conv", "kernel": 3, "filters": 1, "pad": 1}]})";
    FilterBank bank(1, 3, 1);
    bank.at(0, 1, 1, 0).raw = 1 << 16;
    io::write_file((id_dir / "w.dclw").string(), io::encode_weights({bank}));
    io::SeededGenerator g(8);
    io::write_file((id_dir / "in.dclf").string(), io::encode_tensor(io::random_tensor({6, 5, 1}, g)));
  }
  cli::Options io_opts;
  io_opts.network = (id_dir / "net.json").string();
  io_opts.input = (id_dir / "in.dclf").string();
  io_opts.weights = (id_dir / "w.dclw").string();
  io_opts.out_dir = (id_dir / "out").string();
  cli::cmd_golden(io_opts);
  CHECK(slurp(id_dir / "out" / "layer_0.dclf") == slurp(id_dir / "in.dclf"));

  // a truncated weights file names both sizes
  const auto full = slurp(id_dir / "w.dclw");
  io::write_file((id_dir / "short.dclw").string(), full.substr(0, full.size() - 4));
  io_opts.weights = (id_dir / "short.dclw").string();
  try {
    cli::cmd_golden(io_opts);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string m = e.what();
    CHECK(m.find("expected " + std::to_string(full.size())) != std::string::npos);
    CHECK(m.find("got " + std::to_string(full.size() - 4)) != std::string::npos);
  }
}

TEST_CASE("simulate command") {
  const auto r = cli::cmd_simulate(opts("conv1_1.json"));
  REQUIRE(r.sim);
  CHECK(std::abs(r.sim->ms - 26.76) < 0.01);
  CHECK(r.golden_match == true);
  CHECK(r.saturations == 0);

  auto fused = opts("vgg_prefix_small.json");
  fused.plan = "0-6";
  auto split = fused;
  split.plan = "0|1|2|3|4|5|6";
  const auto a = cli::cmd_simulate(fused), b = cli::cmd_simulate(split);
  CHECK(a.output_digest == b.output_digest);
  CHECK(a.sim->total_cycles != b.sim->total_cycles);
  CHECK(a.cost->traffic.total() != b.cost->traffic.total());
  CHECK(*a.golden_match);
  CHECK(*b.golden_match);

  const auto dir = scratch("trace");
  auto traced = opts("test_example.json");
  traced.trace = (dir / "trace.txt").string();
  traced.out_dir = dir.string();
  cli::cmd_simulate(traced);
  std::ifstream in(dir / "trace.txt");
  std::string line;
  std::map<std::string, std::pair<std::int64_t, int>> state;  // stage -> (last accept, expected filter)
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::int64_t cycle;
    std::string stage, kind;
    int row, col, aux;
    const bool parsed = bool(ss >> cycle >> stage >> kind >> row >> col >> aux);
    REQUIRE(parsed);
    ++lines;
    if (stage.find(".conv") == std::string::npos) continue;
    auto& [last, expect_f] = state.try_emplace(stage, std::pair<std::int64_t, int>{-100, 0}).first->second;
    if (kind == "accept") {
      CHECK(cycle - last >= 3);
      last = cycle;
    } else if (kind == "emit") {
      CHECK(aux == expect_f);
      expect_f = (expect_f + 1) % 3;
    }
  }
  CHECK(lines > 100);
  CHECK(io::decode_tensor(slurp(dir / "output.dclf")).dims() == Dims{2, 2, 3});
}

TEST_CASE("analyze command") {
  auto o = opts("vgg_prefix.json");
  o.plan = "0-6";
  auto r = cli::cmd_analyze(o);
  REQUIRE(r.cost);
  CHECK(r.cost->dsp == 2907);
  CHECK_FALSE(r.sim);
  CHECK(r.cost->traffic.total() == 6'032'128);

  o.plan = "0|1|2|3|4|5|6";
  o.bytes_per_value = 1;
  r = cli::cmd_analyze(o);
  CHECK(std::abs(double(r.cost->traffic.total()) / 1e6 - 23.18) < 0.005);
  CHECK(r.cost->ms == doctest::Approx(double(r.cost->total_cycles) / 120'000.0));

  o.freq_mhz = 100.0;
  CHECK(cli::cmd_analyze(o).cost->ms == doctest::Approx(double(r.cost->total_cycles) / 100'000.0));
  o.bytes_per_value = 3;
  CHECK_THROWS_AS(cli::cmd_analyze(o), ParseError);
}

TEST_CASE("dse command") {
  const auto dir = scratch("dse");
  auto o = opts("vgg_prefix.json");
  o.out_dir = dir.string();
  const auto a = cli::cmd_dse(o);
  CHECK(std::count(a.tradeoff_csv.begin(), a.tradeoff_csv.end(), '\n') == 65);
  CHECK(slurp(dir / "tradeoff.csv") == a.tradeoff_csv);
  CHECK(slurp(dir / "curve.csv") == a.curve_csv);
  CHECK(slurp(dir / "pareto.json") == a.pareto_json);
  const auto b = cli::cmd_dse(o);
  CHECK(a.tradeoff_csv == b.tradeoff_csv);
  CHECK(a.curve_csv == b.curve_csv);
  CHECK(a.pareto_json == b.pareto_json);

  const auto one = cli::cmd_dse(opts("conv1_1.json"));
  CHECK(std::count(one.tradeoff_csv.begin(), one.tradeoff_csv.end(), '\n') == 2);

  auto tight = opts("vgg_prefix.json");
  tight.dsp_max = 40;
  CHECK(cli::cmd_dse(tight).tradeoff_csv.find("infeasible") != std::string::npos);
}

TEST_CASE("gen command") {
  const auto dir = scratch("gen");
  cli::GenOptions g;
  g.network = testutil::config_path("test_example.json");
  g.seed = 1;
  g.out_dir = (dir / "a").string();
  cli::cmd_gen(g);
  g.out_dir = (dir / "b").string();
  cli::cmd_gen(g);
  CHECK(slurp(dir / "a" / "input.dclf") == slurp(dir / "b" / "input.dclf"));
  CHECK(slurp(dir / "a" / "weights.dclw") == slurp(dir / "b" / "weights.dclw"));

  // files from gen reproduce the seed-only simulation
  auto from_files = opts("test_example.json");
  from_files.seed.reset();
  from_files.input = (dir / "a" / "input.dclf").string();
  from_files.weights = (dir / "a" / "weights.dclw").string();
  CHECK(cli::cmd_simulate(from_files) == cli::cmd_simulate(opts("test_example.json")));

  cli::GenOptions dims_only;
  dims_only.dims = cli::parse_dims("5,5,3");
  dims_only.seed = 1;
  dims_only.out_dir = (dir / "c").string();
  cli::cmd_gen(dims_only);
  const auto t = io::decode_tensor(slurp(dir / "c" / "input.dclf"));
  CHECK(t.size() == 75);
  std::uint64_t s = 1;
  CHECK(t.values()[0].raw == std::int32_t(std::int64_t(splitmix(s)) >> 47));
  CHECK_THROWS_AS(cli::parse_dims("5,5"), ParseError);
}

TEST_CASE("command-line binary and exit codes") {
  const auto dir = scratch("binary");
  const auto net = testutil::config_path("test_example.json");
  CHECK(run_cli("simulate --network " + net + " --seed 1 --out " + (dir / "s").string(), dir / "log1") == 0);
  CHECK(parse_report(slurp(dir / "log1")) == parse_report(slurp(dir / "s" / "report.json")));
  CHECK(run_cli("simulate --network " + net + " --seed 1 --plan \"0-1|1-2\"", dir / "log2") == 2);
  CHECK(run_cli("simulate --network " + net, dir / "log3") == 1);
  CHECK(run_cli("frobnicate", dir / "log4") == 1);
  {
    std::ofstream(dir / "broken.json") << "{\"input\": ";
  }
  CHECK(run_cli("analyze --network " + (dir / "broken.json").string(), dir / "log5") == 1);
  CHECK(slurp(dir / "log5").find("error") != std::string::npos);
  CHECK(run_cli("gen --dims 5,5,3 --seed 1 --out " + (dir / "g").string(), dir / "log6") == 0);
  CHECK(io::decode_tensor(slurp(dir / "g" / "input.dclf")).dims() == Dims{5, 5, 3});
  CHECK(run_cli("analyze --network " + net + " --plan \"0-2\" --dpar 4,3", dir / "log7") == 2);
  CHECK(slurp(dir / "log7").find("does not divide") != std::string::npos);
}

}  // TEST_SUITE
