#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "carla/costmodel.hpp"
#include "carla/netmodel.hpp"
#include "carla/oracle.hpp"
#include "carla/report.hpp"

namespace carla {

RunReport cmd_cost(const NetworkModel& net, const ArchConfig& arch);

struct SimulateOptions {
  std::uint64_t seed = 1;
  bool counters_only = false;
  bool wrap_accumulator = false;
  unsigned threads = 0;
  // CSV trace with a leading layer column; forces sequential execution.
  std::ostream* trace = nullptr;
};

struct SimulateOutcome {
  RunReport report;
  // One line per layer whose measured counters differ from the analytical
  // model or from an applicable closed form.
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};

SimulateOutcome cmd_simulate(const NetworkModel& net, const ArchConfig& arch,
                             const SimulateOptions& opts);

struct VerifyTally {
  std::string name;
  int trials = 0;
  int passed = 0;
};

struct VerifySummary {
  std::vector<VerifyTally> tallies;
  std::vector<std::string> failures;  // first few failures, for diagnosis
  bool ok() const;
  std::string text() const;
};

/// Randomized oracle equivalence for every mode (`trials` layers each),
/// standard vs resident equivalence on FL=1 layers, and the closed-form MAC
/// count against the oracle over a fixed stride-1 shape grid.
VerifySummary cmd_verify(const LayerBounds& bounds, int trials, std::uint64_t seed,
                         const ArchConfig& arch);

/// network_cost over every (u, sram_words) pair, one CSV row per pair.
std::string cmd_sweep(const NetworkModel& net, const ArchConfig& base, const std::vector<int>& us,
                      const std::vector<int>& srams);

}  // namespace carla
