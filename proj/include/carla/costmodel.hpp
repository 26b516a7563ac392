#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "carla/netmodel.hpp"

namespace carla {

/// Accelerator parameters. The defaults describe the evaluated design:
/// 64 three-PE convolution units plus one four-PE unit, 224-word SRAMs,
/// 16-bit words and a 200 MHz clock.
///
/// `read_buses` is the number of words fetched from DRAM per cycle. Seven
/// words (112 bits) is the bandwidth the ResNet-50 latency figures assume;
/// `read_buses = 4` is the tighter 64-bit bus.
struct ArchConfig {
  int u = 64;
  int n = 3;
  int last_cu_pes = 4;
  int sram_words = 224;
  int read_buses = 7;
  int word_bits = 16;
  int acc_bits = 24;
  double clock_hz = 200e6;
  double mb_base = 1e6;

  int total_pes() const { return u * n + last_cu_pes; }
  void validate() const;

  bool operator==(const ArchConfig&) const = default;
};

enum class Mode { Conv3x3, Conv1x1Standard, Conv1x1Resident, RowDecomposed };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

struct Partitioning {
  int p = 1;
  int rows_per_block = 0;          // row-wise modes
  int features_per_partition = 0;  // standard 1x1 mode
  std::int64_t q = 0;              // weight-row loads per sub-out-fmap (FL * IC)
};

/// Output rows per SRAM and the resulting partition count for row-wise
/// modes. Throws std::invalid_argument when one output row does not fit.
Partitioning partitions_3x3(int ol, int sram_words);
/// Splits the ol*ol output positions into groups of total_pes features.
Partitioning partitions_1x1(int ol, int total_pes);

// Closed forms for the individual modes. Repetition counts over filter
// groups use ceilings so that K not divisible by U is never undercounted.
std::int64_t cycles_3x3(int ol, int z, int ic, int k, int u);
std::int64_t dram_in_3x3(int il, int p, int z, int ic, int k, int u);
std::int64_t dram_w_3x3(int ic, int k, int u, int p);
std::int64_t dram_out(int ol, int k);
/// Non-padding MACs of a stride-1 layer. Exact for z <= 1.
std::int64_t mac_count(int ic, int k, int fl, int ol, int z);

double puf(std::int64_t macs, int total_pes, std::int64_t cycles);
double puf_closed_3x3(int k, int u);
double puf_closed_1x1(int u);

std::int64_t cycles_1x1(int u, int ic, int p, int k);
std::int64_t dram_w_1x1(int u, int ic, int p, int k);
std::int64_t dram_in_1x1(int ol, int ic, int k, int u);

std::int64_t cycles_1x1_resident(int u, int ic, int k);
std::int64_t dram_w_resident(int k, int fl, int ic);
std::int64_t dram_in_resident(int il, int ic, int k, int u);

/// One width-<=3 slice of a filter row. `col` is the offset of the slice's
/// first weight inside the row; the slice is zero-filled up to three taps.
struct RowPiece {
  int row = 0;
  int col = 0;
  int width = 0;

  bool operator==(const RowPiece&) const = default;
};

/// Splits each of the fl filter rows into ceil(fl/3) slices. Requires fl > 3.
std::vector<RowPiece> decompose_rows(int fl);
/// Slices streamed by a row-wise mode: whole rows for fl <= 3, otherwise
/// decompose_rows(fl).
std::vector<RowPiece> row_pass_pieces(int fl);

Mode select_mode(const ConvLayerConfig& layer, const ArchConfig& arch);

/// Exact non-padding MAC count of any layer (separable in the two spatial
/// dimensions).
std::int64_t nonpad_macs(const ConvLayerConfig& layer);

struct LayerCost {
  Mode mode = Mode::Conv3x3;
  Partitioning partitioning;
  std::int64_t cycles = 0;
  std::int64_t stall_cycles = 0;
  std::int64_t dram_in_reads = 0;
  std::int64_t dram_w_reads = 0;
  std::int64_t dram_out_writes = 0;
  std::int64_t macs = 0;
  double puf_eq5 = 0.0;
  std::optional<double> puf_closed;
  double latency_s = 0.0;
  std::int64_t dram_bytes = 0;
  double dram_mb = 0.0;
};

/// Analytical cost of one layer in the mode picked by select_mode.
LayerCost layer_cost(const ConvLayerConfig& layer, const ArchConfig& arch);
/// Same, forcing a mode (used to compare the two 1x1 dataflows).
LayerCost layer_cost(const ConvLayerConfig& layer, const ArchConfig& arch, Mode mode);

struct CostTotals {
  std::int64_t cycles = 0;
  std::int64_t stall_cycles = 0;
  std::int64_t dram_in_reads = 0;
  std::int64_t dram_w_reads = 0;
  std::int64_t dram_out_writes = 0;
  std::int64_t macs = 0;
  double puf_eq5 = 0.0;
  double latency_s = 0.0;
  std::int64_t dram_bytes = 0;
  double dram_mb = 0.0;
};

struct NetworkCost {
  std::vector<LayerCost> layers;
  CostTotals totals;
};

/// Counters predicted by the closed forms of a mode.
struct ClosedForm {
  std::int64_t cycles = 0;
  std::int64_t dram_in_reads = 0;
  std::int64_t dram_w_reads = 0;
  std::int64_t dram_out_writes = 0;
};

/// Closed-form counters for the layer in its selected mode, but only when
/// the closed forms are exact for that shape: stride 1, full filter groups,
/// and for 3x3 a one-pixel border (same-size output). Otherwise nullopt.
std::optional<ClosedForm> closed_form_counters(const ConvLayerConfig& layer, const ArchConfig& arch);

NetworkCost network_cost(const NetworkModel& net, const ArchConfig& arch);

/// Fills the derived fields (bytes, MB, PUF, latency) from the counters.
void finalize_cost(LayerCost& cost, const ArchConfig& arch);
CostTotals sum_costs(const std::vector<LayerCost>& layers, const ArchConfig& arch);

}  // namespace carla
