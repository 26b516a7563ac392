// carla: analytical cost, cycle simulation, oracle verification and
// parameter sweeps for the CARLA convolution accelerator.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "carla/commands.hpp"

namespace {

struct NetFlags {
  std::string builtin;
  std::string network;
  bool pruned = false;
  bool with_shortcuts = false;
};

struct ArchFlags {
  carla::ArchConfig arch;
  double clock_mhz = 200.0;
  std::string mb_base = "1e6";

  carla::ArchConfig resolve() const {
    carla::ArchConfig a = arch;
    a.clock_hz = clock_mhz * 1e6;
    a.mb_base = mb_base == "2^20" ? 1048576.0 : 1e6;
    a.validate();
    return a;
  }
};

void add_net_flags(CLI::App* app, NetFlags& f) {
  auto* b = app->add_option("--builtin", f.builtin, "Builtin network")
                ->check(CLI::IsMember({"resnet50", "resnet50-sparse", "vgg16"}));
  auto* n = app->add_option("--network", f.network, "Network JSON file")->check(CLI::ExistingFile);
  b->excludes(n);
  app->add_flag("--pruned", f.pruned, "Apply the channel-pruned ResNet-50 filter counts");
  app->add_flag("--with-shortcuts", f.with_shortcuts, "Add ResNet-50 projection shortcuts");
}

void add_arch_flags(CLI::App* app, ArchFlags& f, bool with_u_and_sram = true) {
  if (with_u_and_sram) {
    app->add_option("--u", f.arch.u, "Regular CUs")->capture_default_str();
    app->add_option("--sram-words", f.arch.sram_words, "Words per SRAM")->capture_default_str();
  }
  app->add_option("--n", f.arch.n, "PEs per regular CU")->capture_default_str();
  app->add_option("--last-cu-pes", f.arch.last_cu_pes, "PEs in the last CU")->capture_default_str();
  app->add_option("--read-buses", f.arch.read_buses, "DRAM words per cycle")->capture_default_str();
  app->add_option("--clock-mhz", f.clock_mhz, "Clock frequency")->capture_default_str();
  app->add_option("--word-bits", f.arch.word_bits, "Data word width")->capture_default_str();
  app->add_option("--acc-bits", f.arch.acc_bits, "Accumulator width")->capture_default_str();
  app->add_option("--mb-base", f.mb_base, "Bytes per reported MB")
      ->check(CLI::IsMember({"1e6", "2^20"}))
      ->capture_default_str();
}

carla::NetworkModel resolve_network(const NetFlags& f) {
  carla::NetworkModel net;
  if (!f.network.empty()) {
    net = carla::load_network(f.network);
  } else {
    net = carla::build_builtin(f.builtin.empty() ? "resnet50" : f.builtin, f.with_shortcuts);
  }
  if (f.pruned) {
    if (net.name.rfind("resnet50", 0) != 0 || net.name.find("sparse") != std::string::npos) {
      throw std::invalid_argument("--pruned applies to the dense resnet50 builtin only");
    }
    net = carla::apply_channel_pruning(net, carla::resnet50_sparse_spec(net));
    net.name = f.with_shortcuts ? "resnet50-sparse+shortcuts" : "resnet50-sparse";
  }
  return net;
}

std::string render(const carla::RunReport& r, const std::string& format) {
  return format == "json" ? carla::to_json(r) : carla::to_csv(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CARLA accelerator cost model and simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(carla::kToolVersion));

  std::string format = "csv";
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", format, "Report encoding")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  };

  NetFlags cost_net;
  ArchFlags cost_arch;
  bool detail = false;
  auto* cost = app.add_subcommand("cost", "Analytical per-layer report");
  add_net_flags(cost, cost_net);
  add_arch_flags(cost, cost_arch);
  add_format(cost);
  cost->add_flag("--detail", detail, "Emit the raw per-layer cost records (CSV)");

  NetFlags sim_net;
  ArchFlags sim_arch;
  carla::SimulateOptions sim_opts;
  std::string trace_path;
  auto* simulate = app.add_subcommand("simulate", "Cycle simulation of every layer");
  add_net_flags(simulate, sim_net);
  add_arch_flags(simulate, sim_arch);
  add_format(simulate);
  simulate->add_option("--seed", sim_opts.seed, "Tensor seed")->capture_default_str();
  simulate->add_option("--threads", sim_opts.threads, "Worker threads (0 = all cores)");
  simulate->add_option("--trace", trace_path, "Write a per-pass CSV trace");
  simulate->add_flag("--counters-only", sim_opts.counters_only, "Skip the arithmetic");
  simulate->add_flag("--wrap-acc", sim_opts.wrap_accumulator,
                     "Wrap partial sums at --acc-bits and count overflows");

  ArchFlags verify_arch;
  carla::LayerBounds bounds;
  int trials = 500;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "Randomized oracle-equivalence suite");
  add_arch_flags(verify, verify_arch);
  verify->add_option("--trials", trials, "Layers per check")->capture_default_str();
  verify->add_option("--seed", verify_seed, "Generator seed")->capture_default_str();
  verify->add_option("--il-max", bounds.il_max, "Largest input side")->capture_default_str();
  verify->add_option("--ic-max", bounds.ic_max, "Largest channel count")->capture_default_str();
  verify->add_option("--k-max", bounds.k_max, "Largest filter count")->capture_default_str();

  NetFlags sweep_net;
  ArchFlags sweep_arch;
  std::vector<int> sweep_u{64};
  std::vector<int> sweep_sram{224};
  auto* sweep = app.add_subcommand("sweep", "Network cost over a (u, sram) grid");
  add_net_flags(sweep, sweep_net);
  add_arch_flags(sweep, sweep_arch, false);
  sweep->add_option("--u", sweep_u, "CU counts, comma separated")->delimiter(',');
  sweep->add_option("--sram,--sram-words", sweep_sram, "SRAM sizes, comma separated")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cost) {
      const auto net = resolve_network(cost_net);
      const auto arch = cost_arch.resolve();
      if (detail) {
        std::cout << carla::cost_csv(net, carla::network_cost(net, arch));
      } else {
        std::cout << render(carla::cmd_cost(net, arch), format);
      }
      return 0;
    }
    if (*simulate) {
      const auto net = resolve_network(sim_net);
      const auto arch = sim_arch.resolve();
      std::ofstream trace;
      if (!trace_path.empty()) {
        trace.open(trace_path);
        if (!trace) throw std::runtime_error("cannot write " + trace_path);
        sim_opts.trace = &trace;
      }
      const auto outcome = carla::cmd_simulate(net, arch, sim_opts);
      std::cout << render(outcome.report, format);
      for (const auto& m : outcome.mismatches) std::cerr << "mismatch: " << m << '\n';
      return outcome.ok() ? 0 : 1;
    }
    if (*verify) {
      const auto summary = carla::cmd_verify(bounds, trials, verify_seed, verify_arch.resolve());
      std::cout << summary.text();
      return summary.ok() ? 0 : 1;
    }
    if (*sweep) {
      const auto net = resolve_network(sweep_net);
      std::cout << carla::cmd_sweep(net, sweep_arch.resolve(), sweep_u, sweep_sram);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
