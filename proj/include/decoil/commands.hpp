#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "decoil/dse.hpp"
#include "decoil/report.hpp"

// Subcommand bodies, callable in-process. File outputs go to `out_dir` when set.
namespace decoil::cli {

struct Options {
  std::string network;
  std::optional<std::string> input;
  std::optional<std::string> weights;
  std::optional<std::string> plan;  // defaults to a single fused group
  std::optional<std::string> dpar;
  int bytes_per_value = 4;
  double freq_mhz = cost::kDefaultFreqMhz;
  bool reread_weights = false;
  // Used for any input or weights not given as files.
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace;
  std::optional<std::string> out_dir;
  std::int64_t dsp_max = 3600;
  bool timing = false;  // adds wall_clock_seconds, which makes reports non-reproducible
};

RunReport cmd_golden(const Options& o);
RunReport cmd_simulate(const Options& o);
RunReport cmd_analyze(const Options& o);

struct DseOutput {
  std::string tradeoff_csv;
  std::string curve_csv;
  std::string pareto_json;
};
DseOutput cmd_dse(const Options& o);

struct GenOptions {
  std::optional<std::string> network;
  std::optional<Dims> dims;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};
// Writes input.dclf (and weights.dclw when a network is given). Same seed
// yields the same data cmd_simulate would draw from that seed.
void cmd_gen(const GenOptions& o);

// Parses "h,w,d".
Dims parse_dims(const std::string& text);

}  // namespace decoil::cli
