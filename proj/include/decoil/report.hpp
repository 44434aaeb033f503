#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/costmodel.hpp"
#include "decoil/dataflow.hpp"

namespace decoil {

inline constexpr const char* kToolVersion = "0.1.0";

struct SimSummary {
  std::int64_t total_cycles = 0;
  std::vector<std::int64_t> group_cycles;
  std::vector<dataflow::LayerTiming> layers;
  std::int64_t stall_cycles = 0;
  double ms = 0.0;
  friend bool operator==(const SimSummary&, const SimSummary&) = default;
};

struct RunReport {
  std::string tool_version = kToolVersion;
  std::string command;
  std::string network_digest;
  std::string plan;
  std::string dpar;
  std::vector<Dims> layer_dims;  // network input followed by every layer output
  std::optional<SimSummary> sim;
  std::optional<cost::CostReport> cost;
  std::int64_t saturations = 0;         // dataflow datapath
  std::int64_t golden_saturations = 0;  // reference model
  std::optional<bool> golden_match;
  std::string output_digest;
  std::optional<double> wall_clock_seconds;
  friend bool operator==(const RunReport&, const RunReport&) = default;
};

SimSummary summarize(const dataflow::SimResult& r, double freq_mhz);

std::string serialize_report(const RunReport& r);
RunReport parse_report(std::string_view text);

}  // namespace decoil
