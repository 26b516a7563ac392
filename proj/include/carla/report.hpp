#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carla/costmodel.hpp"
#include "carla/netmodel.hpp"
#include "carla/simulator.hpp"

namespace carla {

inline constexpr const char* kToolName = "carla";
inline constexpr const char* kToolVersion = "1.0.0";

struct ReportRow {
  std::string layer;
  std::string mode;
  std::int64_t cycles = 0;
  std::int64_t stalls = 0;
  std::int64_t dram_in = 0;
  std::int64_t dram_w = 0;
  std::int64_t dram_out = 0;
  double dram_mb = 0.0;
  std::int64_t macs = 0;
  double puf_eq5 = 0.0;
  std::optional<double> puf_closed;
  double latency_ms = 0.0;
  bool projection = false;
  // Counters equal the closed forms of the mode (set only where those are exact).
  std::optional<bool> formula_match;
  // Simulated counters equal the analytical model (simulate reports only).
  std::optional<bool> model_match;
};

struct RunReport {
  std::string command;  // "cost" or "simulate"
  std::string network;
  ArchConfig arch;
  std::optional<std::uint64_t> seed;
  std::vector<ReportRow> rows;
  ReportRow totals;
  // Column sums over projection shortcuts only; present when the network has any.
  std::optional<ReportRow> shortcut_totals;
};

/// Recomputes the totals rows as column sums of `rows`.
void fill_totals(RunReport& report);

RunReport cost_report(const NetworkModel& net, const NetworkCost& cost, const ArchConfig& arch);
/// `analytical` supplies the closed-form PUF and the model_match flags.
RunReport sim_report(const NetworkModel& net, const NetworkSim& sim, const NetworkCost& analytical,
                     const ArchConfig& arch, std::uint64_t seed);

/// Shortest round-trip decimal form, '.' separator, locale independent.
std::string format_number(double value);

std::string to_csv(const RunReport& report);
std::string to_json(const RunReport& report);

/// CSV of the analytical counters of each layer, one LayerCost per row.
std::string cost_csv(const NetworkModel& net, const NetworkCost& cost);

}  // namespace carla
