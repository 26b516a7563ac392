#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "carla/costmodel.hpp"
#include "carla/netmodel.hpp"
#include "carla/tensor.hpp"

namespace carla {

/// Counters measured while executing a layer.
struct SimCounters {
  std::int64_t cycles = 0;
  std::int64_t stall_cycles = 0;
  // PE-cycles that performed a MAC contributing to an output.
  std::int64_t active_mac_cycles = 0;
  std::int64_t dram_in_reads = 0;
  std::int64_t dram_w_reads = 0;
  std::int64_t dram_out_writes = 0;
  // Buffer swaps that found the previous partition still draining.
  std::int64_t drain_overruns = 0;
  // Partial results that left the accumulator range (wrap mode only).
  std::int64_t acc_overflows = 0;

  SimCounters& operator+=(const SimCounters& other);
  bool operator==(const SimCounters&) const = default;
};

struct SimOptions {
  // false: walk the dataflow and count, but skip all arithmetic. The
  // input and filter tensors may then be empty.
  bool compute_values = true;
  // Emulate an arch.acc_bits accumulator: partial results wrap in two's
  // complement and every wrap is counted in acc_overflows.
  bool wrap_accumulator = false;
  // CSV trace, one line per row pass / phase.
  std::ostream* trace = nullptr;
};

struct SimResult {
  Tensor3 output;
  SimCounters counters;
  // Cycles of each (filter group, partition) in execution order. Every CU of
  // the group works in lock step, so this is also the per-CU cycle count.
  std::vector<std::int64_t> partition_cycles;
};

/// Paired SRAMs of every PE slot. Partial results accumulate in the wide
/// buffer; at the end of a partition they move to the narrow buffer and
/// drain to DRAM one word per cycle per slot while the next partition
/// computes. The drain never adds cycles; a swap that finds words still
/// waiting is counted as an overrun.
class SramBank {
 public:
  SramBank(int slots, int words, int acc_bits, bool wrap);

  int words() const { return words_; }

  /// Starts a partition that uses `used_words` addresses per slot.
  void begin(int used_words);

  void accumulate(int slot, int addr, std::int64_t value) {
    std::int64_t& cell = wide_[static_cast<std::size_t>(slot) * words_ + addr];
    cell += value;
    if (wrap_ && (cell < acc_min_ || cell > acc_max_)) {
      cell = wrap_value(cell);
      ++overflows_;
    }
  }

  /// Lets `cycles` compute cycles elapse, then moves the wide contents to
  /// the narrow buffer.
  void finish(std::int64_t cycles);

  std::int64_t staged(int slot, int addr) const {
    return narrow_[static_cast<std::size_t>(slot) * words_ + addr];
  }

  std::int64_t overruns() const { return overruns_; }
  std::int64_t overflows() const { return overflows_; }

 private:
  std::int64_t wrap_value(std::int64_t v) const;

  int slots_;
  int words_;
  int used_ = 0;
  bool wrap_;
  int acc_bits_;
  std::int64_t acc_min_;
  std::int64_t acc_max_;
  std::vector<std::int64_t> wide_;
  std::vector<std::int64_t> narrow_;
  std::int64_t pending_ = 0;
  std::int64_t overruns_ = 0;
  std::int64_t overflows_ = 0;
};

/// Row-wise serial accumulation with a width-3 filter row per CU.
SimResult simulate_3x3(const ConvLayerConfig& layer, const ArchConfig& arch, const Tensor3& input,
                       const FilterBank& filters, const SimOptions& opts = {});
/// Features resident in PE registers, weights streamed through the pipeline.
SimResult simulate_1x1_standard(const ConvLayerConfig& layer, const ArchConfig& arch,
                                const Tensor3& input, const FilterBank& filters,
                                const SimOptions& opts = {});
/// Weights resident in PE registers, features streamed through the pipeline.
SimResult simulate_1x1_resident(const ConvLayerConfig& layer, const ArchConfig& arch,
                                const Tensor3& input, const FilterBank& filters,
                                const SimOptions& opts = {});
/// Filters larger than 3 split into width-3 row slices run as row passes.
SimResult simulate_row_decomposed(const ConvLayerConfig& layer, const ArchConfig& arch,
                                  const Tensor3& input, const FilterBank& filters,
                                  const SimOptions& opts = {});

SimResult simulate_layer(const ConvLayerConfig& layer, const ArchConfig& arch,
                         const Tensor3& input, const FilterBank& filters,
                         const SimOptions& opts = {});
SimResult simulate_layer(const ConvLayerConfig& layer, const ArchConfig& arch, Mode mode,
                         const Tensor3& input, const FilterBank& filters,
                         const SimOptions& opts = {});

struct NetworkSimOptions {
  SimOptions layer;
  // Feed each layer the (word-saturated) output of its producer when the
  // shapes line up, instead of fresh random tensors. Forces one thread.
  bool chain_activations = false;
  // 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct LayerSim {
  Mode mode = Mode::Conv3x3;
  SimCounters counters;
};

struct NetworkSim {
  std::vector<LayerSim> layers;
  SimCounters totals;
  double latency_s = 0.0;
};

/// Simulates every layer with random word-range tensors derived from `seed`.
/// Results are ordered by layer index.
NetworkSim simulate_network(const NetworkModel& net, const ArchConfig& arch, std::uint64_t seed,
                            const NetworkSimOptions& opts = {});

/// Runs layer `index` of `net` on the random tensors simulate_network would
/// give it.
SimResult simulate_network_layer(const NetworkModel& net, std::size_t index, const ArchConfig& arch,
                                 std::uint64_t seed, const SimOptions& opts = {});

/// CSV header of the trace lines written through SimOptions::trace.
const char* trace_header();

}  // namespace carla
