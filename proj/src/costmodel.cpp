#include "carla/costmodel.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace carla {

namespace {

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Floor/ceil division that is correct for negative numerators.
constexpr std::int64_t floor_div_signed(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}
constexpr std::int64_t ceil_div_signed(std::int64_t a, std::int64_t b) {
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// Number of output indices m in [lo, hi) whose tap `tap` lands on a real
// (non-padding) input index: 0 <= m*s + tap - z < il.
std::int64_t valid_outputs(int lo, int hi, int tap, int s, int z, int il) {
  const std::int64_t first = std::max<std::int64_t>(lo, ceil_div_signed(z - tap, s));
  const std::int64_t last = std::min<std::int64_t>(hi - 1, floor_div_signed(il - 1 + z - tap, s));
  return std::max<std::int64_t>(0, last - first + 1);
}

// Input columns a slice touches over one output row. Consecutive windows
// overlap or abut when the slice is at least as wide as the stride.
std::int64_t streamed_columns(const RowPiece& piece, int ol, int il, int s, int z) {
  const std::int64_t base = static_cast<std::int64_t>(piece.col) - z;
  if (piece.width >= s) {
    const std::int64_t lo = std::max<std::int64_t>(0, base);
    const std::int64_t hi =
        std::min<std::int64_t>(il - 1, static_cast<std::int64_t>(ol - 1) * s + base + piece.width - 1);
    return std::max<std::int64_t>(0, hi - lo + 1);
  }
  std::int64_t total = 0;
  for (int n = 0; n < ol; ++n) {
    const std::int64_t lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(n) * s + base);
    const std::int64_t hi =
        std::min<std::int64_t>(il - 1, static_cast<std::int64_t>(n) * s + base + piece.width - 1);
    total += std::max<std::int64_t>(0, hi - lo + 1);
  }
  return total;
}

std::vector<std::uint8_t> column_mask(const RowPiece& piece, int ol, int il, int s, int z) {
  std::vector<std::uint8_t> mask(il, 0);
  for (int n = 0; n < ol; ++n) {
    for (int t = 0; t < piece.width; ++t) {
      const int col = n * s + piece.col + t - z;
      if (col >= 0 && col < il) mask[col] = 1;
    }
  }
  return mask;
}

void require_row_modes(const ArchConfig& arch) {
  if (arch.n < 3) {
    throw std::invalid_argument("row-wise modes need at least 3 PEs per CU for serial accumulation");
  }
}

LayerCost row_pass_cost(const ConvLayerConfig& layer, const ArchConfig& arch, Mode mode) {
  require_row_modes(arch);
  const int ol = layer.ol();
  const auto part = partitions_3x3(ol, arch.sram_words);
  const auto pieces = row_pass_pieces(layer.fl);
  const std::int64_t groups = ceil_div(layer.k, arch.u);

  std::vector<std::int64_t> piece_cols;
  std::vector<std::vector<std::uint8_t>> piece_masks;
  for (const auto& pc : pieces) {
    piece_cols.push_back(streamed_columns(pc, ol, layer.il, layer.s, layer.z));
    piece_masks.push_back(column_mask(pc, ol, layer.il, layer.s, layer.z));
  }

  std::int64_t cycles_per_channel = 0;
  std::int64_t fetched_per_channel = 0;
  for (int p = 0; p < part.p; ++p) {
    const int m_lo = p * part.rows_per_block;
    const int m_hi = std::min(ol, m_lo + part.rows_per_block);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      cycles_per_channel +=
          valid_outputs(m_lo, m_hi, pieces[i].row, layer.s, layer.z, layer.il) * piece_cols[i];
    }
    // Distinct input positions per partition; rows reused through the
    // pipeline feedback are fetched from DRAM once.
    std::map<int, std::vector<std::uint8_t>> rows;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      for (int m = m_lo; m < m_hi; ++m) {
        const int r = m * layer.s + pieces[i].row - layer.z;
        if (r < 0 || r >= layer.il) continue;
        auto& mask = rows[r];
        if (mask.empty()) mask.assign(layer.il, 0);
        for (int c = 0; c < layer.il; ++c) mask[c] |= piece_masks[i][c];
      }
    }
    for (const auto& [r, mask] : rows) {
      fetched_per_channel += std::count(mask.begin(), mask.end(), std::uint8_t{1});
    }
  }

  LayerCost cost;
  cost.mode = mode;
  cost.partitioning = part;
  cost.partitioning.q = static_cast<std::int64_t>(layer.fl) * layer.ic;
  cost.cycles = cycles_per_channel * layer.ic * groups;
  cost.dram_in_reads = fetched_per_channel * layer.ic * groups;
  cost.dram_w_reads = static_cast<std::int64_t>(layer.k) * layer.fl * layer.fl * layer.ic * part.p;
  cost.dram_out_writes = dram_out(ol, layer.k);
  if (mode == Mode::Conv3x3) cost.puf_closed = puf_closed_3x3(layer.k, arch.u);
  return cost;
}

// Output positions whose 1x1 input sample is a real feature.
std::int64_t nonpad_positions_1x1(const ConvLayerConfig& layer) {
  const std::int64_t v = valid_outputs(0, layer.ol(), 0, layer.s, layer.z, layer.il);
  return v * v;
}

void require_1x1(const ConvLayerConfig& layer) {
  if (layer.fl != 1) throw std::invalid_argument("1x1 modes need fl == 1 (layer " + layer.name + ")");
}

LayerCost standard_1x1_cost(const ConvLayerConfig& layer, const ArchConfig& arch) {
  require_1x1(layer);
  if (arch.read_buses < arch.n + 1) {
    throw std::invalid_argument("standard 1x1 mode needs read_buses >= n + 1");
  }
  if (arch.u > arch.sram_words) {
    throw std::invalid_argument("standard 1x1 mode keeps u partial results per SRAM");
  }
  const int ol = layer.ol();
  const auto part = partitions_1x1(ol, arch.total_pes());
  const std::int64_t groups = ceil_div(layer.k, arch.u);

  LayerCost cost;
  cost.mode = Mode::Conv1x1Standard;
  cost.partitioning = part;
  cost.cycles = cycles_1x1(arch.u, layer.ic, part.p, layer.k);
  cost.stall_cycles = static_cast<std::int64_t>(layer.ic) * part.p * groups;
  cost.dram_w_reads = static_cast<std::int64_t>(layer.k) * layer.ic * part.p;
  cost.dram_in_reads = nonpad_positions_1x1(layer) * layer.ic * groups;
  cost.dram_out_writes = dram_out(ol, layer.k);
  cost.puf_closed = puf_closed_1x1(arch.u);
  return cost;
}

LayerCost resident_1x1_cost(const ConvLayerConfig& layer, const ArchConfig& arch) {
  require_1x1(layer);
  const int ol = layer.ol();
  if (static_cast<std::int64_t>(ol) * ol > arch.sram_words) {
    throw std::invalid_argument("resident 1x1 mode keeps ol*ol partial results per SRAM (layer " +
                                layer.name + ")");
  }
  if (arch.read_buses < 2) throw std::invalid_argument("resident 1x1 mode needs read_buses >= 2");
  const std::int64_t group_size = static_cast<std::int64_t>(arch.n) * arch.u;
  const std::int64_t groups = ceil_div(layer.k, group_size);
  const std::int64_t streamed = nonpad_positions_1x1(layer);
  const int spare = arch.read_buses - 1;

  std::int64_t phases = 0;
  for (std::int64_t g = 0; g < groups; ++g) {
    const std::int64_t filters = std::min<std::int64_t>(group_size, layer.k - g * group_size);
    phases += std::max(streamed, ceil_div(filters, spare));
  }

  LayerCost cost;
  cost.mode = Mode::Conv1x1Resident;
  cost.partitioning = Partitioning{.p = 1, .features_per_partition = ol * ol};
  cost.cycles = phases * layer.ic;
  cost.stall_cycles = cost.cycles - streamed * layer.ic * groups;
  cost.dram_w_reads = dram_w_resident(layer.k, 1, layer.ic);
  cost.dram_in_reads = streamed * layer.ic * groups;
  cost.dram_out_writes = dram_out(ol, layer.k);
  return cost;
}

}  // namespace

void ArchConfig::validate() const {
  if (u < 1 || n < 1 || last_cu_pes < 1 || sram_words < 1 || read_buses < 1) {
    throw std::invalid_argument("arch: u, n, last_cu_pes, sram_words, read_buses must be >= 1");
  }
  if (word_bits < 2 || word_bits > 32 || acc_bits < word_bits || acc_bits > 63) {
    throw std::invalid_argument("arch: need 2 <= word_bits <= 32 and word_bits <= acc_bits <= 63");
  }
  if (!(clock_hz > 0.0) || !(mb_base > 0.0)) {
    throw std::invalid_argument("arch: clock_hz and mb_base must be positive");
  }
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Conv3x3: return "conv3x3";
    case Mode::Conv1x1Standard: return "conv1x1";
    case Mode::Conv1x1Resident: return "conv1x1_resident";
    case Mode::RowDecomposed: return "row_decomposed";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view text) {
  for (Mode m : {Mode::Conv3x3, Mode::Conv1x1Standard, Mode::Conv1x1Resident, Mode::RowDecomposed}) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

Partitioning partitions_3x3(int ol, int sram_words) {
  if (ol < 1 || sram_words < 1) throw std::invalid_argument("partitions_3x3: ol, sram_words >= 1");
  if (ol > sram_words) {
    throw std::invalid_argument("partitions_3x3: output row of " + std::to_string(ol) +
                                " does not fit a " + std::to_string(sram_words) + "-word SRAM");
  }
  Partitioning part;
  part.rows_per_block = std::min(ol, sram_words / ol);
  part.p = static_cast<int>(ceil_div(ol, part.rows_per_block));
  return part;
}

Partitioning partitions_1x1(int ol, int total_pes) {
  if (ol < 1 || total_pes < 1) throw std::invalid_argument("partitions_1x1: ol, total_pes >= 1");
  const std::int64_t features = static_cast<std::int64_t>(ol) * ol;
  Partitioning part;
  part.p = static_cast<int>(ceil_div(features, total_pes));
  part.features_per_partition = static_cast<int>(std::min<std::int64_t>(features, total_pes));
  return part;
}

std::int64_t cycles_3x3(int ol, int z, int ic, int k, int u) {
  const std::int64_t L = ol;
  return (3 * L * L - 2 * static_cast<std::int64_t>(z) * L) * ic * ceil_div(k, u);
}

std::int64_t dram_in_3x3(int il, int p, int z, int ic, int k, int u) {
  return (static_cast<std::int64_t>(il) + 2 * p - 2 * z) * il * ic * ceil_div(k, u);
}

std::int64_t dram_w_3x3(int ic, int k, int u, int p) {
  const std::int64_t q = 3 * static_cast<std::int64_t>(ic);
  return 3 * static_cast<std::int64_t>(u) * q * ceil_div(k, u) * p;
}

std::int64_t dram_out(int ol, int k) { return static_cast<std::int64_t>(ol) * ol * k; }

std::int64_t mac_count(int ic, int k, int fl, int ol, int z) {
  const std::int64_t F = fl, L = ol, Z = z;
  return static_cast<std::int64_t>(ic) * k * (F * F * L * L - 2 * Z * (2 * F * L - 2 * Z));
}

double puf(std::int64_t macs, int total_pes, std::int64_t cycles) {
  if (total_pes < 1 || cycles < 1) throw std::invalid_argument("puf: total_pes and cycles >= 1");
  return static_cast<double>(macs) / (static_cast<double>(total_pes) * static_cast<double>(cycles));
}

double puf_closed_3x3(int k, int u) {
  return static_cast<double>(k) / (static_cast<double>(u + 1) * static_cast<double>(ceil_div(k, u)));
}

double puf_closed_1x1(int u) { return static_cast<double>(u) / (u + 1); }

std::int64_t cycles_1x1(int u, int ic, int p, int k) {
  return (static_cast<std::int64_t>(u) + 1) * ic * p * ceil_div(k, u);
}

std::int64_t dram_w_1x1(int u, int ic, int p, int k) {
  return static_cast<std::int64_t>(u) * ic * p * ceil_div(k, u);
}

std::int64_t dram_in_1x1(int ol, int ic, int k, int u) {
  return static_cast<std::int64_t>(ol) * ol * ic * ceil_div(k, u);
}

std::int64_t cycles_1x1_resident(int u, int ic, int k) {
  return static_cast<std::int64_t>(u) * ic * ceil_div(k, 3 * static_cast<std::int64_t>(u));
}

std::int64_t dram_w_resident(int k, int fl, int ic) {
  return static_cast<std::int64_t>(k) * fl * fl * ic;
}

std::int64_t dram_in_resident(int il, int ic, int k, int u) {
  return static_cast<std::int64_t>(il) * il * ic * ceil_div(k, 3 * static_cast<std::int64_t>(u));
}

std::vector<RowPiece> decompose_rows(int fl) {
  if (fl <= 3) throw std::invalid_argument("decompose_rows: filter length must exceed 3");
  std::vector<RowPiece> pieces;
  for (int row = 0; row < fl; ++row) {
    for (int col = 0; col < fl; col += 3) {
      pieces.push_back({row, col, std::min(3, fl - col)});
    }
  }
  return pieces;
}

std::vector<RowPiece> row_pass_pieces(int fl) {
  if (fl > 3) return decompose_rows(fl);
  std::vector<RowPiece> pieces;
  for (int row = 0; row < fl; ++row) pieces.push_back({row, 0, fl});
  return pieces;
}

Mode select_mode(const ConvLayerConfig& layer, const ArchConfig& arch) {
  if (layer.fl == 1) {
    const std::int64_t features = static_cast<std::int64_t>(layer.ol()) * layer.ol();
    return features >= arch.total_pes() ? Mode::Conv1x1Standard : Mode::Conv1x1Resident;
  }
  if (layer.fl <= 3) return Mode::Conv3x3;
  return Mode::RowDecomposed;
}

std::int64_t nonpad_macs(const ConvLayerConfig& layer) {
  const int ol = layer.ol();
  std::int64_t per_dim = 0;
  for (int tap = 0; tap < layer.fl; ++tap) {
    per_dim += valid_outputs(0, ol, tap, layer.s, layer.z, layer.il);
  }
  return static_cast<std::int64_t>(layer.ic) * layer.k * per_dim * per_dim;
}

void finalize_cost(LayerCost& cost, const ArchConfig& arch) {
  const std::int64_t words = cost.dram_in_reads + cost.dram_w_reads + cost.dram_out_writes;
  cost.dram_bytes = words * arch.word_bits / 8;
  cost.dram_mb = static_cast<double>(cost.dram_bytes) / arch.mb_base;
  cost.latency_s = static_cast<double>(cost.cycles) / arch.clock_hz;
  cost.puf_eq5 = cost.cycles > 0 ? puf(cost.macs, arch.total_pes(), cost.cycles) : 0.0;
}

LayerCost layer_cost(const ConvLayerConfig& layer, const ArchConfig& arch) {
  return layer_cost(layer, arch, select_mode(layer, arch));
}

LayerCost layer_cost(const ConvLayerConfig& layer, const ArchConfig& arch, Mode mode) {
  layer.validate();
  arch.validate();
  LayerCost cost;
  switch (mode) {
    case Mode::Conv3x3:
      if (layer.fl > 3 || layer.fl < 2) {
        throw std::invalid_argument("3x3 mode needs fl in {2, 3} (layer " + layer.name + ")");
      }
      cost = row_pass_cost(layer, arch, mode);
      break;
    case Mode::RowDecomposed:
      if (layer.fl <= 3) {
        throw std::invalid_argument("row decomposition needs fl > 3 (layer " + layer.name + ")");
      }
      cost = row_pass_cost(layer, arch, mode);
      break;
    case Mode::Conv1x1Standard: cost = standard_1x1_cost(layer, arch); break;
    case Mode::Conv1x1Resident: cost = resident_1x1_cost(layer, arch); break;
  }
  cost.macs = nonpad_macs(layer);
  finalize_cost(cost, arch);
  return cost;
}

CostTotals sum_costs(const std::vector<LayerCost>& layers, const ArchConfig& arch) {
  CostTotals t;
  for (const auto& c : layers) {
    t.cycles += c.cycles;
    t.stall_cycles += c.stall_cycles;
    t.dram_in_reads += c.dram_in_reads;
    t.dram_w_reads += c.dram_w_reads;
    t.dram_out_writes += c.dram_out_writes;
    t.macs += c.macs;
    t.dram_bytes += c.dram_bytes;
  }
  t.dram_mb = static_cast<double>(t.dram_bytes) / arch.mb_base;
  t.latency_s = static_cast<double>(t.cycles) / arch.clock_hz;
  t.puf_eq5 = t.cycles > 0 ? puf(t.macs, arch.total_pes(), t.cycles) : 0.0;
  return t;
}

std::optional<ClosedForm> closed_form_counters(const ConvLayerConfig& layer,
                                               const ArchConfig& arch) {
  if (layer.s != 1) return std::nullopt;
  const int ol = layer.ol();
  switch (select_mode(layer, arch)) {
    case Mode::Conv3x3: {
      if (layer.fl != 3 || layer.z != 1 || layer.k % arch.u != 0) return std::nullopt;
      const auto part = partitions_3x3(ol, arch.sram_words);
      return ClosedForm{cycles_3x3(ol, layer.z, layer.ic, layer.k, arch.u),
                        dram_in_3x3(layer.il, part.p, layer.z, layer.ic, layer.k, arch.u),
                        dram_w_3x3(layer.ic, layer.k, arch.u, part.p), dram_out(ol, layer.k)};
    }
    case Mode::Conv1x1Standard: {
      if (layer.z != 0 || layer.k % arch.u != 0) return std::nullopt;
      const auto part = partitions_1x1(ol, arch.total_pes());
      return ClosedForm{cycles_1x1(arch.u, layer.ic, part.p, layer.k),
                        dram_in_1x1(ol, layer.ic, layer.k, arch.u),
                        dram_w_1x1(arch.u, layer.ic, part.p, layer.k), dram_out(ol, layer.k)};
    }
    case Mode::Conv1x1Resident: {
      // One phase costs U cycles only when the weight reload of a full
      // group takes exactly U cycles and the feature stream is not longer.
      const std::int64_t group = static_cast<std::int64_t>(arch.n) * arch.u;
      if (layer.z != 0 || layer.k % group != 0 || arch.read_buses < 2 ||
          ceil_div(group, arch.read_buses - 1) != arch.u ||
          static_cast<std::int64_t>(ol) * ol > arch.u) {
        return std::nullopt;
      }
      return ClosedForm{cycles_1x1_resident(arch.u, layer.ic, layer.k),
                        dram_in_resident(layer.il, layer.ic, layer.k, arch.u),
                        dram_w_resident(layer.k, 1, layer.ic), dram_out(ol, layer.k)};
    }
    case Mode::RowDecomposed: return std::nullopt;
  }
  return std::nullopt;
}

NetworkCost network_cost(const NetworkModel& net, const ArchConfig& arch) {
  NetworkCost result;
  result.layers.reserve(net.layers.size());
  for (const auto& layer : net.layers) result.layers.push_back(layer_cost(layer, arch));
  result.totals = sum_costs(result.layers, arch);
  return result;
}

}  // namespace carla
