#include "carla/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace carla {

namespace {

ReportRow derive(ReportRow row, const ArchConfig& arch) {
  const std::int64_t words = row.dram_in + row.dram_w + row.dram_out;
  row.dram_mb = static_cast<double>(words * arch.word_bits / 8) / arch.mb_base;
  row.latency_ms = static_cast<double>(row.cycles) * 1000.0 / arch.clock_hz;
  row.puf_eq5 = row.cycles > 0 ? puf(row.macs, arch.total_pes(), row.cycles) : 0.0;
  return row;
}

ReportRow sum_rows(const std::vector<const ReportRow*>& rows, std::string name,
                   const ArchConfig& arch) {
  ReportRow t;
  t.layer = std::move(name);
  for (const auto* r : rows) {
    t.cycles += r->cycles;
    t.stalls += r->stalls;
    t.dram_in += r->dram_in;
    t.dram_w += r->dram_w;
    t.dram_out += r->dram_out;
    t.macs += r->macs;
  }
  return derive(t, arch);
}

std::optional<bool> formula_match(const ConvLayerConfig& layer, const ArchConfig& arch,
                                  std::int64_t cycles, std::int64_t in, std::int64_t w,
                                  std::int64_t out) {
  const auto cf = closed_form_counters(layer, arch);
  if (!cf) return std::nullopt;
  return cf->cycles == cycles && cf->dram_in_reads == in && cf->dram_w_reads == w &&
         cf->dram_out_writes == out;
}

const std::array<const char*, 15> kColumns = {
    "layer",   "mode",    "cycles",     "stalls",     "dram_in",
    "dram_w",  "dram_out", "dram_mb",   "macs",       "puf_eq5",
    "puf_closed", "latency_ms", "projection", "formula_match", "model_match"};

std::string flag(const std::optional<bool>& b) {
  if (!b) return "";
  return *b ? "1" : "0";
}

void csv_row(std::ostringstream& out, const ReportRow& r) {
  out << r.layer << ',' << r.mode << ',' << r.cycles << ',' << r.stalls << ',' << r.dram_in << ','
      << r.dram_w << ',' << r.dram_out << ',' << format_number(r.dram_mb) << ',' << r.macs << ','
      << format_number(r.puf_eq5) << ',' << (r.puf_closed ? format_number(*r.puf_closed) : "")
      << ',' << format_number(r.latency_ms) << ',' << (r.projection ? 1 : 0) << ','
      << flag(r.formula_match) << ',' << flag(r.model_match) << '\n';
}

nlohmann::ordered_json json_row(const ReportRow& r) {
  auto opt_flag = [](const std::optional<bool>& b) -> nlohmann::ordered_json {
    if (!b) return nullptr;
    return *b;
  };
  nlohmann::ordered_json j;
  j["layer"] = r.layer;
  j["mode"] = r.mode;
  j["cycles"] = r.cycles;
  j["stalls"] = r.stalls;
  j["dram_in"] = r.dram_in;
  j["dram_w"] = r.dram_w;
  j["dram_out"] = r.dram_out;
  j["dram_mb"] = r.dram_mb;
  j["macs"] = r.macs;
  j["puf_eq5"] = r.puf_eq5;
  j["puf_closed"] = r.puf_closed ? nlohmann::ordered_json(*r.puf_closed) : nullptr;
  j["latency_ms"] = r.latency_ms;
  j["projection"] = r.projection;
  j["formula_match"] = opt_flag(r.formula_match);
  j["model_match"] = opt_flag(r.model_match);
  return j;
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) return "nan";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), end);
}

void fill_totals(RunReport& report) {
  std::vector<const ReportRow*> all, shortcuts;
  for (const auto& r : report.rows) {
    all.push_back(&r);
    if (r.projection) shortcuts.push_back(&r);
  }
  report.totals = sum_rows(all, "TOTAL", report.arch);
  report.shortcut_totals.reset();
  if (!shortcuts.empty()) report.shortcut_totals = sum_rows(shortcuts, "TOTAL_SHORTCUTS", report.arch);
}

RunReport cost_report(const NetworkModel& net, const NetworkCost& cost, const ArchConfig& arch) {
  RunReport report;
  report.command = "cost";
  report.network = net.name;
  report.arch = arch;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const auto& c = cost.layers[i];
    ReportRow row;
    row.layer = layer.name;
    row.mode = std::string(to_string(c.mode));
    row.cycles = c.cycles;
    row.stalls = c.stall_cycles;
    row.dram_in = c.dram_in_reads;
    row.dram_w = c.dram_w_reads;
    row.dram_out = c.dram_out_writes;
    row.macs = c.macs;
    row.puf_closed = c.puf_closed;
    row.projection = layer.projection;
    row.formula_match =
        formula_match(layer, arch, c.cycles, c.dram_in_reads, c.dram_w_reads, c.dram_out_writes);
    report.rows.push_back(derive(row, arch));
  }
  fill_totals(report);
  return report;
}

RunReport sim_report(const NetworkModel& net, const NetworkSim& sim, const NetworkCost& analytical,
                     const ArchConfig& arch, std::uint64_t seed) {
  RunReport report;
  report.command = "simulate";
  report.network = net.name;
  report.arch = arch;
  report.seed = seed;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const auto& m = sim.layers[i].counters;
    const auto& a = analytical.layers[i];
    ReportRow row;
    row.layer = layer.name;
    row.mode = std::string(to_string(sim.layers[i].mode));
    row.cycles = m.cycles;
    row.stalls = m.stall_cycles;
    row.dram_in = m.dram_in_reads;
    row.dram_w = m.dram_w_reads;
    row.dram_out = m.dram_out_writes;
    row.macs = m.active_mac_cycles;
    row.puf_closed = a.puf_closed;
    row.projection = layer.projection;
    row.formula_match =
        formula_match(layer, arch, m.cycles, m.dram_in_reads, m.dram_w_reads, m.dram_out_writes);
    row.model_match = m.cycles == a.cycles && m.stall_cycles == a.stall_cycles &&
                      m.dram_in_reads == a.dram_in_reads && m.dram_w_reads == a.dram_w_reads &&
                      m.dram_out_writes == a.dram_out_writes && m.active_mac_cycles == a.macs;
    report.rows.push_back(derive(row, arch));
  }
  fill_totals(report);
  return report;
}

std::string to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "# tool=" << kToolName << ' ' << kToolVersion << " command=" << report.command
      << " network=" << report.network;
  if (report.seed) out << " seed=" << *report.seed;
  out << '\n';
  const auto& a = report.arch;
  out << "# arch u=" << a.u << " n=" << a.n << " last_cu_pes=" << a.last_cu_pes
      << " sram_words=" << a.sram_words << " read_buses=" << a.read_buses
      << " word_bits=" << a.word_bits << " acc_bits=" << a.acc_bits
      << " clock_hz=" << format_number(a.clock_hz) << " mb_base=" << format_number(a.mb_base)
      << '\n';
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : report.rows) csv_row(out, r);
  csv_row(out, report.totals);
  if (report.shortcut_totals) csv_row(out, *report.shortcut_totals);
  return out.str();
}

std::string to_json(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["command"] = report.command;
  doc["network"] = report.network;
  doc["seed"] = report.seed ? nlohmann::ordered_json(*report.seed) : nullptr;
  const auto& a = report.arch;
  doc["arch"] = {{"u", a.u},
                 {"n", a.n},
                 {"last_cu_pes", a.last_cu_pes},
                 {"sram_words", a.sram_words},
                 {"read_buses", a.read_buses},
                 {"word_bits", a.word_bits},
                 {"acc_bits", a.acc_bits},
                 {"clock_hz", a.clock_hz},
                 {"mb_base", a.mb_base}};
  doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) doc["layers"].push_back(json_row(r));
  doc["totals"] = json_row(report.totals);
  if (report.shortcut_totals) doc["shortcut_totals"] = json_row(*report.shortcut_totals);
  return doc.dump(2) + "\n";
}

std::string cost_csv(const NetworkModel& net, const NetworkCost& cost) {
  std::ostringstream out;
  out << "layer,mode,p,rows_per_block,features_per_partition,q,cycles,stall_cycles,dram_in_reads,"
         "dram_w_reads,dram_out_writes,macs,puf_eq5,puf_closed,latency_s,dram_bytes,dram_mb\n";
  for (std::size_t i = 0; i < cost.layers.size(); ++i) {
    const auto& c = cost.layers[i];
    out << net.layers[i].name << ',' << to_string(c.mode) << ',' << c.partitioning.p << ','
        << c.partitioning.rows_per_block << ',' << c.partitioning.features_per_partition << ','
        << c.partitioning.q << ',' << c.cycles << ',' << c.stall_cycles << ',' << c.dram_in_reads
        << ',' << c.dram_w_reads << ',' << c.dram_out_writes << ',' << c.macs << ','
        << format_number(c.puf_eq5) << ',' << (c.puf_closed ? format_number(*c.puf_closed) : "")
        << ',' << format_number(c.latency_s) << ',' << c.dram_bytes << ','
        << format_number(c.dram_mb) << '\n';
  }
  return out.str();
}

}  // namespace carla
