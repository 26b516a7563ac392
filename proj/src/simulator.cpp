#include "carla/simulator.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

#include "carla/oracle.hpp"

namespace carla {

SimCounters& SimCounters::operator+=(const SimCounters& o) {
  cycles += o.cycles;
  stall_cycles += o.stall_cycles;
  active_mac_cycles += o.active_mac_cycles;
  dram_in_reads += o.dram_in_reads;
  dram_w_reads += o.dram_w_reads;
  dram_out_writes += o.dram_out_writes;
  drain_overruns += o.drain_overruns;
  acc_overflows += o.acc_overflows;
  return *this;
}

SramBank::SramBank(int slots, int words, int acc_bits, bool wrap)
    : slots_(slots), words_(words), wrap_(wrap), acc_bits_(acc_bits),
      acc_min_(word_min(acc_bits)), acc_max_(word_max(acc_bits)),
      wide_(static_cast<std::size_t>(slots) * words, 0),
      narrow_(static_cast<std::size_t>(slots) * words, 0) {}

void SramBank::begin(int used_words) {
  if (used_words < 0 || used_words > words_) {
    throw std::invalid_argument("SRAM addressing exceeds " + std::to_string(words_) + " words");
  }
  used_ = used_words;
  for (int s = 0; s < slots_; ++s) {
    auto first = wide_.begin() + static_cast<std::ptrdiff_t>(s) * words_;
    std::fill(first, first + used_, 0);
  }
}

void SramBank::finish(std::int64_t cycles) {
  // The previous partition drained during this partition's compute cycles.
  pending_ = std::max<std::int64_t>(0, pending_ - cycles);
  if (pending_ > 0) ++overruns_;
  for (int s = 0; s < slots_; ++s) {
    const auto offset = static_cast<std::ptrdiff_t>(s) * words_;
    std::copy(wide_.begin() + offset, wide_.begin() + offset + used_, narrow_.begin() + offset);
  }
  pending_ = used_;
}

std::int64_t SramBank::wrap_value(std::int64_t v) const {
  const auto mask = (std::uint64_t{1} << acc_bits_) - 1;
  auto u = static_cast<std::uint64_t>(v) & mask;
  if (u & (std::uint64_t{1} << (acc_bits_ - 1))) u |= ~mask;
  return static_cast<std::int64_t>(u);
}

const char* trace_header() {
  return "mode,group,cu_first,cu_last,partition,channel,piece_row,piece_col,cycles,stall_cycles,"
         "dram_in,dram_w";
}

namespace {

struct TraceStep {
  Mode mode;
  std::int64_t group;
  int cu_first;
  int cu_last;
  int partition;
  int channel;
  int piece_row;
  int piece_col;
  std::int64_t cycles;
  std::int64_t stalls;
  std::int64_t dram_in;
  std::int64_t dram_w;
};

void emit(std::ostream* out, const TraceStep& t) {
  if (!out) return;
  *out << to_string(t.mode) << ',' << t.group << ',' << t.cu_first << ',' << t.cu_last << ','
       << t.partition << ',' << t.channel << ',' << t.piece_row << ',' << t.piece_col << ','
       << t.cycles << ',' << t.stalls << ',' << t.dram_in << ',' << t.dram_w << '\n';
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

void prepare(const ConvLayerConfig& layer, const ArchConfig& arch, const Tensor3& input,
             const FilterBank& filters, const SimOptions& opts) {
  arch.validate();
  layer.validate();
  if (opts.compute_values) {
    check_shapes(layer, input, filters);
    if (filters.bias) {
      throw std::invalid_argument("the accelerator datapath has no bias; drop it from the filter bank");
    }
  }
}

// One streamed input column of a row pass and the PE taps it feeds.
struct StreamedColumn {
  int col = 0;
  int taps = 0;
  std::array<int, 3> tap{};     // tap index inside the slice
  std::array<int, 3> out_col{};  // output column the product lands in
};

// Columns of one input row that a slice needs: a column is streamed only if
// one of the slice's weights pairs it with a real output position. Padding
// columns never enter the pipeline.
std::vector<StreamedColumn> build_stream(const RowPiece& piece, const ConvLayerConfig& layer,
                                         int ol) {
  std::vector<StreamedColumn> stream;
  for (int col = 0; col < layer.il; ++col) {
    StreamedColumn sc;
    sc.col = col;
    for (int t = 0; t < piece.width; ++t) {
      const int offset = col - piece.col - t + layer.z;
      if (offset < 0 || offset % layer.s != 0) continue;
      const int n = offset / layer.s;
      if (n >= ol) continue;
      sc.tap[sc.taps] = t;
      sc.out_col[sc.taps] = n;
      ++sc.taps;
    }
    if (sc.taps > 0) stream.push_back(sc);
  }
  return stream;
}

// Shared engine of the 3x3 and row-decomposed modes. CUs 0..U-1 each own
// one output channel of the current filter group; CU #U idles.
SimResult run_row_passes(const ConvLayerConfig& layer, const ArchConfig& arch, const Tensor3& input,
                         const FilterBank& filters, const SimOptions& opts, Mode mode) {
  if (arch.n < 3) throw std::invalid_argument("row-wise modes need at least 3 PEs per CU");
  const int ol = layer.ol();
  const Partitioning part = partitions_3x3(ol, arch.sram_words);
  const auto pieces = row_pass_pieces(layer.fl);
  const std::int64_t groups = ceil_div(layer.k, arch.u);

  std::vector<std::vector<StreamedColumn>> streams;
  std::vector<std::int64_t> useful_taps;
  for (const auto& pc : pieces) {
    streams.push_back(build_stream(pc, layer, ol));
    std::int64_t taps = 0;
    for (const auto& sc : streams.back()) taps += sc.taps;
    useful_taps.push_back(taps);
  }

  SimResult res;
  if (opts.compute_values) res.output = Tensor3(layer.k, ol, ol);
  SimCounters& ctr = res.counters;
  SramBank bank(arch.u, arch.sram_words, arch.acc_bits, opts.wrap_accumulator);

  // Positions already inside the pipeline feedback for the current
  // (partition, channel); stamped instead of cleared.
  std::vector<std::uint32_t> fetched(static_cast<std::size_t>(layer.il) * layer.il, 0);
  std::uint32_t epoch = 0;
  std::vector<std::int64_t> weights(static_cast<std::size_t>(arch.u) * 3, 0);

  for (std::int64_t g = 0; g < groups; ++g) {
    const int k0 = static_cast<int>(g * arch.u);
    const int active = std::min(arch.u, layer.k - k0);
    for (int p = 0; p < part.p; ++p) {
      const int m_lo = p * part.rows_per_block;
      const int m_hi = std::min(ol, m_lo + part.rows_per_block);
      bank.begin((m_hi - m_lo) * ol);
      std::int64_t part_cycles = 0;

      for (int c = 0; c < layer.ic; ++c) {
        ++epoch;
        for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
          const RowPiece& pc = pieces[pi];
          const auto& stream = streams[pi];
          // A new weight row for every active CU arrives on the spare buses
          // while the previous row is still computing.
          const std::int64_t w_reads = static_cast<std::int64_t>(active) * pc.width;
          ctr.dram_w_reads += w_reads;
          if (opts.compute_values) {
            for (int cu = 0; cu < active; ++cu) {
              for (int t = 0; t < pc.width; ++t) {
                weights[cu * 3 + t] = filters.at(k0 + cu, c, pc.row, pc.col + t);
              }
            }
          }
          std::int64_t step_cycles = 0;
          std::int64_t step_in = 0;
          for (int m = m_lo; m < m_hi; ++m) {
            const int r = m * layer.s + pc.row - layer.z;
            if (r < 0 || r >= layer.il) continue;  // padding row: no pass at all
            const int row_base = (m - m_lo) * ol;
            for (const auto& sc : stream) {
              auto& stamp = fetched[static_cast<std::size_t>(r) * layer.il + sc.col];
              if (stamp != epoch) {
                stamp = epoch;
                ++step_in;
              }
              if (!opts.compute_values) continue;
              const std::int64_t x = input.at(c, r, sc.col);
              for (int cu = 0; cu < active; ++cu) {
                const std::int64_t* w = &weights[cu * 3];
                for (int t = 0; t < sc.taps; ++t) {
                  bank.accumulate(cu, row_base + sc.out_col[t], x * w[sc.tap[t]]);
                }
              }
            }
            step_cycles += static_cast<std::int64_t>(stream.size());
            ctr.active_mac_cycles += useful_taps[pi] * active;
          }
          ctr.cycles += step_cycles;
          ctr.dram_in_reads += step_in;
          part_cycles += step_cycles;
          emit(opts.trace, {mode, g, k0, k0 + active - 1, p, c, pc.row, pc.col, step_cycles, 0,
                            step_in, w_reads});
        }
      }

      bank.finish(part_cycles);
      res.partition_cycles.push_back(part_cycles);
      const int used = (m_hi - m_lo) * ol;
      ctr.dram_out_writes += static_cast<std::int64_t>(active) * used;
      if (opts.compute_values) {
        for (int cu = 0; cu < active; ++cu) {
          for (int a = 0; a < used; ++a) {
            res.output.at(k0 + cu, m_lo + a / ol, a % ol) = bank.staged(cu, a);
          }
        }
      }
    }
  }
  ctr.drain_overruns = bank.overruns();
  ctr.acc_overflows = bank.overflows();
  return res;
}

struct Position {
  int m;
  int n;
  int r;  // input row, or -1 for a padding position
  int col;
};

// Output positions of a 1x1 layer with the input feature each one reads.
std::vector<Position> positions_1x1(const ConvLayerConfig& layer, int ol) {
  std::vector<Position> out;
  out.reserve(static_cast<std::size_t>(ol) * ol);
  for (int m = 0; m < ol; ++m) {
    for (int n = 0; n < ol; ++n) {
      const int r = m * layer.s - layer.z;
      const int col = n * layer.s - layer.z;
      const bool real = r >= 0 && r < layer.il && col >= 0 && col < layer.il;
      out.push_back({m, n, real ? r : -1, real ? col : -1});
    }
  }
  return out;
}

void require_1x1(const ConvLayerConfig& layer) {
  if (layer.fl != 1) throw std::invalid_argument("1x1 modes need fl == 1 (layer " + layer.name + ")");
}

}  // namespace

SimResult simulate_3x3(const ConvLayerConfig& layer, const ArchConfig& arch, const Tensor3& input,
                       const FilterBank& filters, const SimOptions& opts) {
  prepare(layer, arch, input, filters, opts);
  if (layer.fl < 2 || layer.fl > 3) {
    throw std::invalid_argument("3x3 mode needs fl in {2, 3} (layer " + layer.name + ")");
  }
  return run_row_passes(layer, arch, input, filters, opts, Mode::Conv3x3);
}

SimResult simulate_row_decomposed(const ConvLayerConfig& layer, const ArchConfig& arch,
                                  const Tensor3& input, const FilterBank& filters,
                                  const SimOptions& opts) {
  prepare(layer, arch, input, filters, opts);
  if (layer.fl <= 3) {
    throw std::invalid_argument("row decomposition needs fl > 3 (layer " + layer.name + ")");
  }
  return run_row_passes(layer, arch, input, filters, opts, Mode::RowDecomposed);
}

SimResult simulate_1x1_standard(const ConvLayerConfig& layer, const ArchConfig& arch,
                                const Tensor3& input, const FilterBank& filters,
                                const SimOptions& opts) {
  prepare(layer, arch, input, filters, opts);
  require_1x1(layer);
  if (arch.read_buses < arch.n + 1) {
    throw std::invalid_argument("standard 1x1 mode needs read_buses >= n + 1");
  }
  const int ol = layer.ol();
  const int pes = arch.total_pes();
  const auto positions = positions_1x1(layer, ol);
  const int total = static_cast<int>(positions.size());
  const int parts = static_cast<int>(ceil_div(total, pes));
  const std::int64_t groups = ceil_div(layer.k, arch.u);

  SimResult res;
  if (opts.compute_values) res.output = Tensor3(layer.k, ol, ol);
  SimCounters& ctr = res.counters;
  // One SRAM per PE; each holds the partial results of the U filters that
  // stream past its resident feature.
  SramBank bank(pes, arch.sram_words, arch.acc_bits, opts.wrap_accumulator);
  std::vector<std::int64_t> regs(pes, 0);

  for (std::int64_t g = 0; g < groups; ++g) {
    const int k0 = static_cast<int>(g * arch.u);
    const int active = std::min(arch.u, layer.k - k0);
    for (int p = 0; p < parts; ++p) {
      const int first = p * pes;
      const int count = std::min(pes, total - first);
      int real = 0;
      for (int s = 0; s < count; ++s) real += positions[first + s].r >= 0;
      bank.begin(active);
      std::int64_t part_cycles = 0;

      for (int c = 0; c < layer.ic; ++c) {
        // Feature registers are refilled CU by CU, N words per cycle on the
        // spare buses; padding positions load a zero without a DRAM read.
        if (opts.compute_values) {
          for (int s = 0; s < count; ++s) {
            const Position& pos = positions[first + s];
            regs[s] = pos.r >= 0 ? input.at(c, pos.r, pos.col) : 0;
          }
        }
        ctr.dram_in_reads += real;
        std::int64_t w_reads = 0;
        for (int t = 0; t < arch.u; ++t) {
          ++ctr.cycles;
          if (t >= active) continue;  // idle slot of a partial filter group
          ++w_reads;
          ctr.active_mac_cycles += real;
          if (!opts.compute_values) continue;
          const std::int64_t w = filters.at(k0 + t, c, 0, 0);
          for (int s = 0; s < count; ++s) {
            if (positions[first + s].r >= 0) bank.accumulate(s, t, regs[s] * w);
          }
        }
        // The last CU loads its wider register set through every read bus,
        // leaving none for a weight: the pipeline stalls one cycle.
        ++ctr.cycles;
        ++ctr.stall_cycles;
        ctr.dram_w_reads += w_reads;
        const std::int64_t phase = arch.u + 1;
        part_cycles += phase;
        emit(opts.trace, {Mode::Conv1x1Standard, g, 0, arch.u, p, c, 0, 0, phase, 1, real, w_reads});
      }

      bank.finish(part_cycles);
      res.partition_cycles.push_back(part_cycles);
      ctr.dram_out_writes += static_cast<std::int64_t>(count) * active;
      if (opts.compute_values) {
        for (int s = 0; s < count; ++s) {
          const Position& pos = positions[first + s];
          for (int t = 0; t < active; ++t) res.output.at(k0 + t, pos.m, pos.n) = bank.staged(s, t);
        }
      }
    }
  }
  ctr.drain_overruns = bank.overruns();
  ctr.acc_overflows = bank.overflows();
  return res;
}

SimResult simulate_1x1_resident(const ConvLayerConfig& layer, const ArchConfig& arch,
                                const Tensor3& input, const FilterBank& filters,
                                const SimOptions& opts) {
  prepare(layer, arch, input, filters, opts);
  require_1x1(layer);
  if (arch.read_buses < 2) throw std::invalid_argument("resident 1x1 mode needs read_buses >= 2");
  const int ol = layer.ol();
  const int features = ol * ol;
  if (features > arch.sram_words) {
    throw std::invalid_argument("resident 1x1 mode keeps ol*ol partial results per SRAM (layer " +
                                layer.name + ")");
  }
  const auto positions = positions_1x1(layer, ol);
  std::vector<int> streamed;
  for (int q = 0; q < features; ++q) {
    if (positions[q].r >= 0) streamed.push_back(q);
  }
  const int group_size = arch.n * arch.u;  // regular CUs only; CU #U idles
  const std::int64_t groups = ceil_div(layer.k, group_size);
  const int spare = arch.read_buses - 1;

  SimResult res;
  if (opts.compute_values) res.output = Tensor3(layer.k, ol, ol);
  SimCounters& ctr = res.counters;
  SramBank bank(group_size, arch.sram_words, arch.acc_bits, opts.wrap_accumulator);
  std::vector<std::int64_t> regs(group_size, 0);

  for (std::int64_t g = 0; g < groups; ++g) {
    const int k0 = static_cast<int>(g * group_size);
    const int active = std::min(group_size, layer.k - k0);
    bank.begin(features);
    std::int64_t part_cycles = 0;
    for (int c = 0; c < layer.ic; ++c) {
      // Every PE register takes one weight of its own filter for channel c.
      if (opts.compute_values) {
        for (int s = 0; s < active; ++s) regs[s] = filters.at(k0 + s, c, 0, 0);
      }
      ctr.dram_w_reads += active;
      for (int q : streamed) {
        ++ctr.cycles;
        ++ctr.dram_in_reads;
        ctr.active_mac_cycles += active;
        if (!opts.compute_values) continue;
        const Position& pos = positions[q];
        const std::int64_t x = input.at(c, pos.r, pos.col);
        for (int s = 0; s < active; ++s) bank.accumulate(s, q, x * regs[s]);
      }
      // The weight set of a phase arrives on the spare buses during the
      // preceding phase; a short feature stream has to wait for it.
      const std::int64_t reload = ceil_div(active, spare);
      const std::int64_t stream = static_cast<std::int64_t>(streamed.size());
      const std::int64_t stall = std::max<std::int64_t>(0, reload - stream);
      ctr.cycles += stall;
      ctr.stall_cycles += stall;
      part_cycles += stream + stall;
      emit(opts.trace, {Mode::Conv1x1Resident, g, 0, (active - 1) / arch.n, 0, c, 0, 0,
                        stream + stall, stall, stream, active});
    }
    bank.finish(part_cycles);
    res.partition_cycles.push_back(part_cycles);
    ctr.dram_out_writes += static_cast<std::int64_t>(active) * features;
    if (opts.compute_values) {
      for (int s = 0; s < active; ++s) {
        for (int q = 0; q < features; ++q) {
          res.output.at(k0 + s, positions[q].m, positions[q].n) = bank.staged(s, q);
        }
      }
    }
  }
  ctr.drain_overruns = bank.overruns();
  ctr.acc_overflows = bank.overflows();
  return res;
}

SimResult simulate_layer(const ConvLayerConfig& layer, const ArchConfig& arch, const Tensor3& input,
                         const FilterBank& filters, const SimOptions& opts) {
  return simulate_layer(layer, arch, select_mode(layer, arch), input, filters, opts);
}

SimResult simulate_layer(const ConvLayerConfig& layer, const ArchConfig& arch, Mode mode,
                         const Tensor3& input, const FilterBank& filters, const SimOptions& opts) {
  switch (mode) {
    case Mode::Conv3x3: return simulate_3x3(layer, arch, input, filters, opts);
    case Mode::Conv1x1Standard: return simulate_1x1_standard(layer, arch, input, filters, opts);
    case Mode::Conv1x1Resident: return simulate_1x1_resident(layer, arch, input, filters, opts);
    case Mode::RowDecomposed: return simulate_row_decomposed(layer, arch, input, filters, opts);
  }
  throw std::invalid_argument("unknown mode");
}

namespace {

Tensor3 saturate_to_words(const Tensor3& t, int word_bits) {
  Tensor3 out = t;
  for (auto& v : out.data) v = std::clamp(v, word_min(word_bits), word_max(word_bits));
  return out;
}

}  // namespace

SimResult simulate_network_layer(const NetworkModel& net, std::size_t index, const ArchConfig& arch,
                                 std::uint64_t seed, const SimOptions& opts) {
  const auto& layer = net.layers.at(index);
  Tensor3 input;
  FilterBank filters;
  if (opts.compute_values) {
    input = random_input(layer, seed + 2 * index, arch.word_bits);
    filters = random_filters(layer, seed + 2 * index + 1, arch.word_bits);
  }
  return simulate_layer(layer, arch, input, filters, opts);
}

NetworkSim simulate_network(const NetworkModel& net, const ArchConfig& arch, std::uint64_t seed,
                            const NetworkSimOptions& opts) {
  const std::size_t count = net.layers.size();
  NetworkSim result;
  result.layers.resize(count);

  auto run_one = [&](std::size_t i, const Tensor3* chained) -> SimResult {
    if (!chained) return simulate_network_layer(net, i, arch, seed, opts.layer);
    const auto& layer = net.layers[i];
    return simulate_layer(layer, arch, *chained,
                          random_filters(layer, seed + 2 * i + 1, arch.word_bits), opts.layer);
  };

  if (opts.chain_activations || opts.layer.trace) {
    std::vector<Tensor3> outputs(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& layer = net.layers[i];
      const Tensor3* chained = nullptr;
      Tensor3 saturated;
      if (opts.chain_activations && layer.input && opts.layer.compute_values) {
        const Tensor3& prev = outputs[*layer.input];
        if (prev.channels == layer.ic && prev.rows == layer.il && prev.cols == layer.il) {
          saturated = saturate_to_words(prev, arch.word_bits);
          chained = &saturated;
        }
      }
      SimResult r = run_one(i, chained);
      result.layers[i] = {select_mode(layer, arch), r.counters};
      if (opts.chain_activations) outputs[i] = std::move(r.output);
    }
  } else {
    unsigned threads = opts.threads ? opts.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          SimResult r = run_one(i, nullptr);
          result.layers[i] = {select_mode(net.layers[i], arch), r.counters};
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
      worker();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (const auto& l : result.layers) result.totals += l.counters;
  result.latency_s = static_cast<double>(result.totals.cycles) / arch.clock_hz;
  return result;
}

}  // namespace carla
