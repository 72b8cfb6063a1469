#include "dspgemm/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dspgemm/error.hpp"
#include "dspgemm/gemm_engine.hpp"
#include "dspgemm/perf_model.hpp"

namespace dspgemm {

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

MachineModel machine_from(const std::string& path) {
  MachineModel m = path.empty() ? default_ftm7032() : load_machine_config(path);
  if (auto v = validate(m); !v.ok()) throw Error("invalid machine model: " + v.violations.front());
  return m;
}

std::optional<Strategy> strategy_option(const std::string& s) {
  if (s == "auto") return std::nullopt;
  return strategy_from_string(s);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("write to " + path + " failed");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string capacity_lines(const FeasibilityReport& rep) {
  std::ostringstream out;
  for (const auto& l : rep.levels)
    out << "  " << to_string(l.level) << ": " << l.used_bytes << " / " << l.capacity_bytes << " bytes "
        << (l.ok() ? "ok" : "OVERFLOW") << "\n";
  for (const auto& v : rep.violations) out << "  violation: " << v << "\n";
  return out.str();
}

std::string trace_csv(const SimReport& r) {
  std::ostringstream out;
  out << "phase_tag,core_id,src,dst,bytes,overlappable\n";
  for (const auto& e : r.dma_events) {
    out << e.phase_tag() << ',';
    if (e.core_id == kSharedCore)
      out << "shared";
    else
      out << e.core_id;
    out << ',' << to_string(e.src) << ',' << to_string(e.dst) << ',' << e.bytes << ','
        << (e.overlappable ? "true" : "false") << '\n';
  }
  return out.str();
}

// Two polylines (TGEMM, ftIMM) plus the roofline, GFlops against row.
std::string sweep_svg(const std::vector<SpeedupRow>& rows, const std::string& title) {
  const double W = 800, H = 420, L = 60, R = 20, T = 40, B = 60;
  double ymax = 1;
  for (const auto& r : rows) ymax = std::max({ymax, r.tgemm_gflops, r.ftimm_gflops, r.roofline_gflops});
  ymax *= 1.05;
  const std::size_t n = rows.size();
  auto x = [&](std::size_t i) { return L + (n > 1 ? (W - L - R) * double(i) / double(n - 1) : (W - L - R) / 2); };
  auto y = [&](double v) { return T + (H - T - B) * (1 - v / ymax); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4;
    s << "<text x=\"4\" y=\"" << fmt("%.1f", y(v) + 4) << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << fmt("%.0f", v) << "</text>\n";
  }
  auto line = [&](auto get, const char* color, const char* label, int slot) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i) s << fmt("%.1f", x(i)) << ',' << fmt("%.1f", y(get(rows[i]))) << ' ';
    s << "\"/>\n";
    s << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * slot << "\" fill=\"" << color
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
  };
  line([](const SpeedupRow& r) { return r.tgemm_gflops; }, "#1f77b4", "TGEMM (model)", 0);
  line([](const SpeedupRow& r) { return r.ftimm_gflops; }, "#d62728", "ftIMM (model)", 1);
  line([](const SpeedupRow& r) { return r.roofline_gflops; }, "#7f7f7f", "roofline", 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sh = rows[i].shape;
    s << "<text x=\"" << fmt("%.1f", x(i)) << "\" y=\"" << H - B + 14 + 12 * (i % 3)
      << "\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"middle\">" << sh.M << 'x' << sh.N << 'x'
      << sh.K << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<std::int64_t> pow2_range(int lo, int hi) {
  std::vector<std::int64_t> v;
  for (int e = lo; e <= hi; ++e) v.push_back(std::int64_t(1) << e);
  return v;
}

}  // namespace

std::vector<MatrixShape> sweep_preset(const std::string& name) {
  const std::vector<std::int64_t> ns{16, 32, 48, 64, 80, 96};
  const std::vector<std::int64_t> small{32, 64, 128, 256, 512};
  std::vector<MatrixShape> v;
  if (name == "fig5a") {
    for (auto n : ns)
      for (auto k : small) v.push_back({1 << 16, n, k});
  } else if (name == "fig5b") {
    for (auto n : ns)
      for (auto m : small) v.push_back({m, n, 1 << 16});
  } else if (name == "fig5c") {
    for (auto n : ns) v.push_back({20480, n, 20480});
  } else if (name == "fig5d" || name == "fig5-4") {
    for (auto m : pow2_range(12, 20)) v.push_back({m, 32, 32});
  } else if (name == "fig5e" || name == "fig5-5") {
    for (auto k : pow2_range(12, 20)) v.push_back({32, 32, k});
  } else if (name == "fig5f" || name == "fig5-6") {
    for (std::int64_t mk : {2048, 4096, 8192, 16384, 20480}) v.push_back({mk, 32, mk});
  } else {
    throw Error("unknown preset '" + name + "' (fig5a..fig5f)");
  }
  return v;
}

std::vector<MatrixShape> parse_shapes_csv(const std::string& text) {
  std::vector<MatrixShape> v;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!std::isdigit(static_cast<unsigned char>(line[first]))) {
      if (v.empty()) continue;  // header
      throw Error("shapes csv line " + std::to_string(lineno) + ": expected M,N,K");
    }
    std::istringstream row(line);
    std::int64_t d[3];
    char comma = 0;
    if (!(row >> d[0] >> comma) || comma != ',' || !(row >> d[1] >> comma) || comma != ',' || !(row >> d[2]))
      throw Error("shapes csv line " + std::to_string(lineno) + ": expected M,N,K");
    if (d[0] < 1 || d[1] < 1 || d[2] < 1) throw Error("shapes csv line " + std::to_string(lineno) + ": non-positive size");
    v.push_back({d[0], d[1], d[2]});
  }
  if (v.empty()) throw Error("shapes csv contains no shapes");
  return v;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Irregular-shape GEMM planner and simulator for a multi-core VLIW DSP model", "dspgemm"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "Print tool and format versions");

  std::string machine;
  auto add_machine = [&](CLI::App* sub) {
    sub->add_option("--machine", machine, "Machine model JSON")->check(CLI::ExistingFile);
  };

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Choose strategy and block sizes for a shape");
  std::int64_t pm = 0, pn = 0, pk = 0;
  std::string pstrategy = "auto";
  bool pjson = false;
  plan_cmd->add_option("--m", pm)->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("--n", pn)->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("--k", pk)->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("--strategy", pstrategy)->check(CLI::IsMember({"auto", "tgemm", "ftimm-m", "ftimm-k"}));
  plan_cmd->add_flag("--json", pjson);
  add_machine(plan_cmd);

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Search the CMR-optimal initial blocks");
  std::string tstrategy = "m";
  bool tjson = false;
  tune_cmd->add_option("--strategy", tstrategy)->check(CLI::IsMember({"m", "k"}));
  tune_cmd->add_flag("--json", tjson);
  add_machine(tune_cmd);

  // schedule
  auto* sched_cmd = app.add_subcommand("schedule", "Generate the micro-kernel loop body");
  int ms = 0, na = 0, ka = 512;
  std::string sformat = "table";
  bool sverify = false;
  sched_cmd->add_option("--ms", ms)->required()->check(CLI::Range(1, 64));
  sched_cmd->add_option("--na", na)->required()->check(CLI::Range(1, kMaxNa));
  sched_cmd->add_option("--ka", ka)->check(CLI::Range(1, 1 << 30));
  sched_cmd->add_option("--format", sformat)->check(CLI::IsMember({"table", "csv"}));
  sched_cmd->add_flag("--verify", sverify);
  add_machine(sched_cmd);

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute a seeded GEMM on the simulated cluster");
  std::int64_t rm = 0, rn = 0, rk = 0;
  std::string rstrategy = "auto", trace_path, out_path;
  std::uint64_t seed = 42;
  bool check = false;
  int threads = 0;
  run_cmd->add_option("--m", rm)->required()->check(CLI::PositiveNumber);
  run_cmd->add_option("--n", rn)->required()->check(CLI::PositiveNumber);
  run_cmd->add_option("--k", rk)->required()->check(CLI::PositiveNumber);
  run_cmd->add_option("--strategy", rstrategy)->check(CLI::IsMember({"auto", "tgemm", "ftimm-m", "ftimm-k"}));
  run_cmd->add_option("--seed", seed);
  run_cmd->add_flag("--check", check, "Compare against the naive oracle");
  run_cmd->add_option("--dump-trace", trace_path, "Write the DMA trace as CSV");
  run_cmd->add_option("--out", out_path, "Write C in FTMM format");
  run_cmd->add_option("--threads", threads, "Host threads (0: one per simulated core)")->check(CLI::NonNegativeNumber);
  add_machine(run_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Modeled TGEMM vs ftIMM over a shape grid");
  std::string preset, shapes_path, csv_path, svg_path;
  auto* preset_opt = sweep_cmd->add_option("--preset", preset, "fig5a..fig5f");
  auto* shapes_opt = sweep_cmd->add_option("--shapes", shapes_path, "CSV of M,N,K rows")->check(CLI::ExistingFile);
  preset_opt->excludes(shapes_opt);
  sweep_cmd->add_option("--out", csv_path, "CSV output (default stdout)");
  sweep_cmd->add_option("--svg", svg_path, "Chart output");
  add_machine(sweep_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Summarize the machine model, initial blocks and kernels");
  add_machine(report_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (version) {
      out << "dspgemm " << kToolVersion << " (FTMM format " << kFtmmVersion << ", machine config 1)\n";
      return 0;
    }
    if (app.get_subcommands().empty()) {
      err << app.help();
      return kExitUsage;
    }
    const MachineModel model = machine_from(machine);

    if (*plan_cmd) {
      const MatrixShape shape{pm, pn, pk};
      const auto forced = strategy_option(pstrategy);
      const ExecutionPlan plan = forced ? plan_for(*forced, shape, model) : adjust(shape, model);
      if (pjson) {
        out << to_json(plan, shape, model) << "\n";
      } else {
        out << "shape    " << pm << " x " << pn << " x " << pk << "\n" << describe(plan);
        out << "capacity\n" << capacity_lines(capacity_check(plan.strategy, plan.blocks, model));
        out << "modeled flops " << fmt("%.6g", modeled_flops(plan, shape, model)) << "\n";
      }
      return 0;
    }

    if (*tune_cmd) {
      const Strategy s = tstrategy == "m" ? Strategy::FTIMM_M : Strategy::FTIMM_K;
      const BlockSizes b = initial_blocks(s, model);
      const auto [fo, fi] = s == Strategy::FTIMM_M ? cmr_m_strategy(b, model.num_cores) : cmr_k_strategy(b, model.num_cores);
      const auto rep = capacity_check(s, b, model);
      if (tjson) {
        nlohmann::ordered_json j;
        j["strategy"] = std::string(to_string(s));
        j["blocks"] = {{"m_g", b.m_g}, {"k_g", b.k_g}, {"n_g", b.n_g}, {"m_a", b.m_a},
                       {"k_a", b.k_a}, {"n_a", b.n_a}, {"m_s", b.m_s}};
        j["cmr"] = {{s == Strategy::FTIMM_M ? "f1" : "f3", fo}, {s == Strategy::FTIMM_M ? "f2" : "f4", fi}};
        for (const auto& l : rep.levels)
          j["capacity"][std::string(to_string(l.level))] = {{"used_bytes", l.used_bytes},
                                                             {"capacity_bytes", l.capacity_bytes}};
        out << j.dump(2) << "\n";
      } else {
        out << "strategy " << to_string(s) << "\n";
        out << "blocks   m_g=" << b.m_g << " k_g=" << b.k_g << " n_g=" << b.n_g << " m_a=" << b.m_a
            << " k_a=" << b.k_a << " n_a=" << b.n_a << " m_s=" << b.m_s << "\n";
        out << "cmr      " << (s == Strategy::FTIMM_M ? "f1=" : "f3=") << fmt("%.3f", fo)
            << (s == Strategy::FTIMM_M ? " f2=" : " f4=") << fmt("%.3f", fi) << "\n";
        out << "capacity\n" << capacity_lines(rep);
      }
      return 0;
    }

    if (*sched_cmd) {
      const MicroKernelSpec spec = select_tiling(ms, na, model, ka);
      MicroKernelSpec group = spec;
      group.m_s = spec.m_u;
      const VliwSchedule sched = generate_schedule(group, model);
      const CycleEstimate est = estimate_cycles(sched, spec, ka, model);
      out << (sformat == "csv" ? format_schedule_csv(sched) : format_schedule_table(sched));
      out << "m_s=" << ms << " n_a=" << na << " m_u=" << spec.m_u << " k_u=" << spec.k_u << " v_n=" << spec.v_n
          << " ii=" << est.ii << " fmac=" << est.filled_fmac_slots << "/" << est.fmac_slots
          << " efficiency=" << fmt("%.4f", est.fmac_efficiency)
          << " bound=" << fmt("%.4f", theoretical_upper_bound(na, model)) << " cycles(k_a=" << ka
          << ")=" << est.total_cycles << "\n";
      if (sverify) {
        const auto issues = verify_schedule(sched, group, model);
        for (const auto& is : issues)
          out << "issue" << (is.cycle > 0 ? " cycle " + std::to_string(is.cycle) : std::string()) << ": "
              << is.message << "\n";
        out << "verify " << (issues.empty() ? "ok" : "FAILED") << "\n";
        if (!issues.empty()) return kExitVerify;
      }
      return 0;
    }

    if (*run_cmd) {
      const MatrixShape shape{rm, rn, rk};
      if (double(rm) * double(rk) + double(rk) * double(rn) + double(rm) * double(rn) > 4.0e8)
        throw Error("run: matrices too large for a functional run; use sweep for model-only results");
      const auto forced = strategy_option(rstrategy);
      const ExecutionPlan plan = forced ? plan_for(*forced, shape, model) : adjust(shape, model);
      const Matrix a = random_matrix(rm, rk, seed);
      const Matrix b = random_matrix(rk, rn, seed + 1);
      const Matrix c0 = random_matrix(rm, rn, seed + 2);
      Matrix c = c0;
      EngineOptions opt;
      opt.host_threads = threads;
      const SimReport rep = run_plan(a.view(), b.view(), c.view(), plan, model, opt);
      const TimeEstimate t = estimate_time(rep, model);
      out << "shape      " << rm << " x " << rn << " x " << rk << "  seed " << seed << "\n";
      out << "strategy   " << to_string(plan.strategy) << "\n";
      out << "checksum   " << fmt("%.17g", rep.result_checksum) << "\n";
      out << "dma        " << rep.dma_events.size() << " transfers, " << rep.ddr_bytes() << " DDR bytes\n";
      out << "model      " << fmt("%.9g", t.overlapped_time_s) << " s, " << fmt("%.3f", t.gflops) << " GFlops, "
          << "efficiency " << fmt("%.4f", t.efficiency) << ", roofline "
          << fmt("%.3f", roofline(shape, model, model.num_cores)) << " GFlops\n";
      if (!trace_path.empty()) write_text(trace_path, trace_csv(rep));
      if (!out_path.empty()) save_ftmm(out_path, c.view());
      if (check) {
        Matrix ref = c0;
        naive_gemm(a.view(), b.view(), ref.view());
        const double e = max_relative_error(c.view(), ref.view());
        const double tol = rk > (1 << 16) ? 1e-4 : 1e-5;
        out << "max_rel_error " << fmt("%.3e", e) << " (tolerance " << fmt("%.0e", tol) << ") "
            << (e <= tol ? "ok" : "FAILED") << "\n";
        if (!(e <= tol)) return kExitVerify;
      }
      return 0;
    }

    if (*sweep_cmd) {
      if (preset.empty() && shapes_path.empty()) throw Error("sweep: give --preset or --shapes");
      const auto shapes = preset.empty() ? parse_shapes_csv(read_text(shapes_path)) : sweep_preset(preset);
      const auto rows = speedup_table(shapes, model);
      const std::string csv = speedup_csv(rows);
      if (csv_path.empty())
        out << csv;
      else
        write_text(csv_path, csv);
      if (!svg_path.empty()) write_text(svg_path, sweep_svg(rows, preset.empty() ? shapes_path : preset));
      return 0;
    }

    if (*report_cmd) {
      out << "cores " << model.num_cores << ", peak " << fmt("%.1f", model.peak_gflops_per_core())
          << " GFlops/core, " << fmt("%.1f", model.peak_gflops_cluster()) << " GFlops/cluster\n";
      for (const auto& l : model.memory_levels)
        out << "  " << to_string(l.level) << " " << (l.capacity_bytes ? std::to_string(l.capacity_bytes) : "unbounded")
            << (l.is_shared ? " shared" : " per core") << "\n";
      out << "  DMA DDR " << fmt("%.1f", model.latency.dma_ddr_bandwidth_gbps) << " GB/s, GSM "
          << fmt("%.1f", model.latency.dma_gsm_bandwidth_gbps) << " GB/s\n";
      for (Strategy s : {Strategy::FTIMM_M, Strategy::FTIMM_K}) {
        const BlockSizes b = initial_blocks(s, model);
        const auto [fo, fi] = s == Strategy::FTIMM_M ? cmr_m_strategy(b, model.num_cores) : cmr_k_strategy(b, model.num_cores);
        out << to_string(s) << " m_g=" << b.m_g << " k_g=" << b.k_g << " n_g=" << b.n_g << " m_a=" << b.m_a
            << " k_a=" << b.k_a << " n_a=" << b.n_a << " m_s=" << b.m_s << "  cmr " << fmt("%.3f", fo) << " / "
            << fmt("%.3f", fi) << "\n";
      }
      for (int n : {96, 64, 32}) {
        const MicroKernelSpec spec = select_tiling(6, n, model, 512);
        MicroKernelSpec group = spec;
        group.m_s = spec.m_u;
        const auto sched = generate_schedule(group, model);
        out << "kernel m_s=6 n_a=" << n << ": m_u=" << spec.m_u << " k_u=" << spec.k_u << " ii=" << sched.ii
            << " fmac " << sched.filled_fmac_slots() << "/" << 3 * sched.ii << " bound "
            << fmt("%.4f", theoretical_upper_bound(n, model)) << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"dspgemm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data(), out, err);
}

}  // namespace dspgemm
