#include "carla/commands.hpp"

#include <sstream>

#include "carla/simulator.hpp"

namespace carla {

RunReport cmd_cost(const NetworkModel& net, const ArchConfig& arch) {
  net.validate();
  return cost_report(net, network_cost(net, arch), arch);
}

SimulateOutcome cmd_simulate(const NetworkModel& net, const ArchConfig& arch,
                             const SimulateOptions& opts) {
  net.validate();
  const NetworkCost analytical = network_cost(net, arch);

  SimOptions layer_opts;
  layer_opts.compute_values = !opts.counters_only;
  layer_opts.wrap_accumulator = opts.wrap_accumulator;

  NetworkSim sim;
  if (opts.trace) {
    *opts.trace << "layer," << trace_header() << '\n';
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      std::ostringstream lines;
      SimOptions traced = layer_opts;
      traced.trace = &lines;
      const SimResult r = simulate_network_layer(net, i, arch, opts.seed, traced);
      std::istringstream in(lines.str());
      for (std::string line; std::getline(in, line);) {
        *opts.trace << net.layers[i].name << ',' << line << '\n';
      }
      sim.layers.push_back({select_mode(net.layers[i], arch), r.counters});
      sim.totals += r.counters;
    }
    sim.latency_s = static_cast<double>(sim.totals.cycles) / arch.clock_hz;
  } else {
    NetworkSimOptions nopts;
    nopts.layer = layer_opts;
    nopts.threads = opts.threads;
    sim = simulate_network(net, arch, opts.seed, nopts);
  }

  SimulateOutcome outcome;
  outcome.report = sim_report(net, sim, analytical, arch, opts.seed);
  for (std::size_t i = 0; i < outcome.report.rows.size(); ++i) {
    const auto& row = outcome.report.rows[i];
    const auto& a = analytical.layers[i];
    if (row.model_match == false) {
      std::ostringstream msg;
      msg << row.layer << ": measured cycles/in/w/out " << row.cycles << '/' << row.dram_in << '/'
          << row.dram_w << '/' << row.dram_out << " vs model " << a.cycles << '/'
          << a.dram_in_reads << '/' << a.dram_w_reads << '/' << a.dram_out_writes;
      outcome.mismatches.push_back(msg.str());
    }
    if (row.formula_match == false) {
      const auto cf = closed_form_counters(net.layers[i], arch);
      std::ostringstream msg;
      msg << row.layer << ": measured cycles/in/w/out " << row.cycles << '/' << row.dram_in << '/'
          << row.dram_w << '/' << row.dram_out << " vs closed form " << cf->cycles << '/'
          << cf->dram_in_reads << '/' << cf->dram_w_reads << '/' << cf->dram_out_writes;
      outcome.mismatches.push_back(msg.str());
    }
  }
  const SimCounters& t = sim.totals;
  if (t.drain_overruns > 0) {
    outcome.mismatches.push_back("output drain overran compute " +
                                 std::to_string(t.drain_overruns) + " times");
  }
  return outcome;
}

bool VerifySummary::ok() const {
  for (const auto& t : tallies) {
    if (t.passed != t.trials) return false;
  }
  return true;
}

std::string VerifySummary::text() const {
  std::ostringstream out;
  for (const auto& t : tallies) {
    out << (t.passed == t.trials ? "PASS " : "FAIL ") << t.name << ' ' << t.passed << '/'
        << t.trials << '\n';
  }
  for (const auto& f : failures) out << "  " << f << '\n';
  return out.str();
}

namespace {

std::string describe(const ConvLayerConfig& l) {
  std::ostringstream out;
  out << l.name << " il=" << l.il << " ic=" << l.ic << " fl=" << l.fl << " k=" << l.k
      << " s=" << l.s << " z=" << l.z;
  return out.str();
}

bool counters_match(const SimCounters& m, const LayerCost& a) {
  return m.cycles == a.cycles && m.stall_cycles == a.stall_cycles &&
         m.dram_in_reads == a.dram_in_reads && m.dram_w_reads == a.dram_w_reads &&
         m.dram_out_writes == a.dram_out_writes && m.active_mac_cycles == a.macs;
}

}  // namespace

VerifySummary cmd_verify(const LayerBounds& bounds, int trials, std::uint64_t seed,
                         const ArchConfig& arch) {
  VerifySummary summary;
  auto fail = [&](std::string msg) {
    if (summary.failures.size() < 20) summary.failures.push_back(std::move(msg));
  };

  struct ModeCase {
    Mode mode;
    std::vector<int> fl;
    int max_features;
  };
  const std::vector<ModeCase> cases = {
      {Mode::Conv3x3, {3}, 0},
      {Mode::Conv1x1Standard, {1}, 0},
      {Mode::Conv1x1Resident, {1}, arch.sram_words},
      {Mode::RowDecomposed, {5, 7}, 0},
  };
  std::uint64_t stream = 0;
  for (const auto& mc : cases) {
    LayerBounds b = bounds;
    b.fl = mc.fl;
    b.max_output_features = mc.max_features;
    VerifyTally tally{"oracle/" + std::string(to_string(mc.mode)), trials, 0};
    for (int t = 0; t < trials; ++t) {
      const auto rl = random_layer_gen(seed * 1000003 + stream++, b);
      const auto sim = simulate_layer(rl.layer, arch, mc.mode, rl.input, rl.filters);
      const auto ref = conv_direct(rl.layer, rl.input, rl.filters);
      const auto cost = layer_cost(rl.layer, arch, mc.mode);
      if (!(sim.output == ref.output)) {
        fail(tally.name + ": output differs for " + describe(rl.layer));
      } else if (sim.counters.active_mac_cycles != ref.non_pad_macs) {
        fail(tally.name + ": active MACs differ from oracle for " + describe(rl.layer));
      } else if (!counters_match(sim.counters, cost)) {
        fail(tally.name + ": counters differ from the cost model for " + describe(rl.layer));
      } else {
        ++tally.passed;
      }
    }
    summary.tallies.push_back(tally);
  }

  {
    LayerBounds b = bounds;
    b.fl = {1};
    b.max_output_features = arch.sram_words;
    VerifyTally tally{"mode-equivalence/1x1", trials, 0};
    for (int t = 0; t < trials; ++t) {
      const auto rl = random_layer_gen(seed * 1000003 + stream++, b);
      const auto a = simulate_1x1_standard(rl.layer, arch, rl.input, rl.filters);
      const auto r = simulate_1x1_resident(rl.layer, arch, rl.input, rl.filters);
      if (a.output == r.output) {
        ++tally.passed;
      } else {
        fail(tally.name + ": outputs differ for " + describe(rl.layer));
      }
    }
    summary.tallies.push_back(tally);
  }

  {
    VerifyTally tally{"mac-count/stride1-grid", 0, 0};
    for (int fl : {1, 3}) {
      for (int z : {0, 1}) {
        for (int ol : {1, 2, 5, 8, 13}) {
          for (auto [ic, k] : {std::pair{1, 1}, std::pair{3, 5}, std::pair{4, 64}}) {
            ConvLayerConfig l;
            l.name = "grid";
            l.fl = fl;
            l.z = z;
            l.il = ol + fl - 1 - 2 * z;
            l.ic = ic;
            l.k = k;
            if (l.il < 1 || fl > l.il + 2 * z) continue;
            ++tally.trials;
            const auto ref = conv_direct(l, Tensor3(ic, l.il, l.il), FilterBank(k, ic, fl));
            if (ref.non_pad_macs == mac_count(ic, k, fl, ol, z) &&
                ref.non_pad_macs == nonpad_macs(l)) {
              ++tally.passed;
            } else {
              fail(tally.name + ": MAC count differs for " + describe(l));
            }
          }
        }
      }
    }
    summary.tallies.push_back(tally);
  }
  return summary;
}

std::string cmd_sweep(const NetworkModel& net, const ArchConfig& base, const std::vector<int>& us,
                      const std::vector<int>& srams) {
  net.validate();
  std::ostringstream out;
  out << "u,sram_words,status,cycles,latency_ms,dram_mb,puf_eq5\n";
  for (int u : us) {
    for (int words : srams) {
      ArchConfig arch = base;
      arch.u = u;
      arch.sram_words = words;
      out << u << ',' << words << ',';
      try {
        const auto cost = network_cost(net, arch);
        const auto& t = cost.totals;
        out << "ok," << t.cycles << ','
            << format_number(static_cast<double>(t.cycles) * 1000.0 / arch.clock_hz) << ','
            << format_number(t.dram_mb) << ',' << format_number(t.puf_eq5) << '\n';
      } catch (const std::invalid_argument& e) {
        // Commas would break the row; the message itself stays readable.
        std::string msg = e.what();
        for (auto& ch : msg) {
          if (ch == ',' || ch == '\n') ch = ';';
        }
        out << "unsupported: " << msg << ",,,,\n";
      }
    }
  }
  return out.str();
}

}  // namespace carla
