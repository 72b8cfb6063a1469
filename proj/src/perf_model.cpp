#include "dspgemm/perf_model.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dspgemm/error.hpp"

namespace dspgemm {

double dma_seconds(const DmaEvent& e, const MachineModel& model) {
  const bool ddr = e.src == MemLevel::DDR || e.dst == MemLevel::DDR;
  const double bw = (ddr ? model.latency.dma_ddr_bandwidth_gbps : model.latency.dma_gsm_bandwidth_gbps) * 1e9;
  return double(e.bytes) / bw + model.latency.dma_startup_cycles / (model.core.clock_ghz * 1e9);
}

namespace {

struct Stage {
  double compute = 0;
  double hidden = 0;  // ping-pong prefetch recorded for this stage
  double serial = 0;
};

}  // namespace

TimeEstimate estimate_time(const SimReport& r, const MachineModel& model) {
  const int P = int(r.compute_cycles.size());
  if (P == 0) throw Error("estimate_time: empty report");
  const double hz = model.core.clock_ghz * 1e9;
  const int E = std::max(r.num_epochs, 1);

  TimeEstimate t;
  t.compute_cycles = r.compute_cycles;
  t.dma_time_s.assign(P, {});
  t.active_cores = std::max(1, r.active_cores());

  // stages[epoch][core] -> per-stage totals
  std::vector<std::vector<std::vector<Stage>>> stages(E, std::vector<std::vector<Stage>>(P));
  auto stage_at = [&](int e, int c, int s) -> Stage& {
    auto& v = stages[e][c];
    if (int(v.size()) <= s) v.resize(s + 1);
    return v[s];
  };
  std::vector<double> shared_hidden(E + 1, 0.0), shared_serial(E, 0.0), reduce(E, 0.0);
  std::vector<std::vector<double>> core_dma(E, std::vector<double>(P, 0.0));

  KernelCycleCache cache(model);
  for (const auto& k : r.kernel_events) stage_at(k.epoch, k.core_id, k.stage).compute += cache.cycles(k.spec) / hz;

  double ddr_bytes = 0, shared_total = 0;
  for (const auto& e : r.dma_events) {
    const double s = dma_seconds(e, model);
    if (e.src == MemLevel::DDR || e.dst == MemLevel::DDR) ddr_bytes += double(e.bytes);
    if (e.core_id == kSharedCore) {
      t.shared_dma_time_s[e.dst] += s;
      shared_total += s;
      (e.overlappable ? shared_hidden[e.epoch] : shared_serial[e.epoch]) += s;
      continue;
    }
    t.dma_time_s[e.core_id][e.dst] += s;
    if (e.phase == Phase::Reduce) {
      // Partial tiles land in one GSM tile one core after another.
      t.reduction_bytes += e.bytes;
      reduce[e.epoch] += s;
      continue;
    }
    core_dma[e.epoch][e.core_id] += s;
    Stage& st = stage_at(e.epoch, e.core_id, e.stage);
    (e.overlappable ? st.hidden : st.serial) += s;
  }

  double critical = 0;
  for (int e = 0; e < E; ++e) {
    double slowest = 0;
    for (int c = 0; c < P; ++c) {
      const auto& v = stages[e][c];
      if (v.empty()) continue;
      double core = v[0].hidden;  // nothing to hide the first prefetch behind
      for (std::size_t s = 0; s < v.size(); ++s) {
        const double next = s + 1 < v.size() ? v[s + 1].hidden : 0.0;
        core += v[s].serial + std::max(v[s].compute, next);
      }
      slowest = std::max(slowest, core);
    }
    const double prefetch = e + 1 < E ? shared_hidden[e + 1] : 0.0;
    critical += std::max(slowest, prefetch) + shared_serial[e] + reduce[e] + (e == 0 ? shared_hidden[0] : 0.0);
  }

  double compute_only = 0, core_dma_max = 0;
  for (int c = 0; c < P; ++c) {
    compute_only = std::max(compute_only, r.compute_cycles[c] / hz);
    double d = 0;
    for (int e = 0; e < E; ++e) d += core_dma[e][c];
    core_dma_max = std::max(core_dma_max, d);
  }

  t.compute_only_s = compute_only;
  t.critical_path_s = critical;
  t.ddr_bound_s = ddr_bytes / (model.latency.dma_ddr_bandwidth_gbps * 1e9);
  t.dma_only_s = std::max({t.ddr_bound_s, core_dma_max, shared_total});
  t.overlapped_time_s = std::max({critical, t.ddr_bound_s, compute_only});
  const double flops = 2.0 * double(r.shape.M) * double(r.shape.N) * double(r.shape.K);
  t.gflops = t.overlapped_time_s > 0 ? flops / t.overlapped_time_s / 1e9 : 0;
  t.efficiency = t.gflops / (t.active_cores * model.peak_gflops_per_core());
  return t;
}

TimeEstimate estimate_time(const SimReport& report, const ExecutionPlan& plan, const MachineModel& model) {
  if (plan.strategy != report.plan.strategy) throw Error("estimate_time: plan does not match the report");
  return estimate_time(report, model);
}

double arithmetic_intensity(const MatrixShape& s) {
  const double M = double(s.M), N = double(s.N), K = double(s.K);
  return 2 * M * N * K / (4 * (M * K + K * N + 2 * M * N));
}

double roofline(const MatrixShape& shape, const MachineModel& model, int num_cores) {
  if (shape.M < 1 || shape.N < 1 || shape.K < 1) throw Error("roofline: shape must be positive");
  return std::min(num_cores * model.peak_gflops_per_core(),
                  arithmetic_intensity(shape) * model.latency.dma_ddr_bandwidth_gbps);
}

SpeedupRow speedup_row(const MatrixShape& shape, const MachineModel& model) {
  SpeedupRow row;
  row.shape = shape;
  const ExecutionPlan ft = adjust(shape, model);
  row.strategy = ft.strategy;
  const auto tg = estimate_time(simulate(plan_for(Strategy::TGEMM, shape, model), shape, model), model);
  const auto fi = ft.strategy == Strategy::TGEMM ? tg : estimate_time(simulate(ft, shape, model), model);
  row.tgemm_time_s = tg.overlapped_time_s;
  row.ftimm_time_s = fi.overlapped_time_s;
  row.tgemm_gflops = tg.gflops;
  row.ftimm_gflops = fi.gflops;
  row.speedup = tg.overlapped_time_s / fi.overlapped_time_s;
  row.roofline_gflops = roofline(shape, model, model.num_cores);
  row.roofline_fraction = fi.gflops / row.roofline_gflops;
  return row;
}

std::vector<SpeedupRow> speedup_table(const std::vector<MatrixShape>& shapes, const MachineModel& model) {
  if (shapes.empty()) throw Error("speedup_table: no shapes");
  std::vector<SpeedupRow> rows;
  rows.reserve(shapes.size());
  for (const auto& s : shapes) rows.push_back(speedup_row(s, model));
  return rows;
}

std::string speedup_csv(const std::vector<SpeedupRow>& rows) {
  std::ostringstream out;
  out << "M,N,K,strategy,tgemm_gflops_model,ftimm_gflops_model,speedup,roofline,roofline_fraction\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", (long long)r.shape.M,
                  (long long)r.shape.N, (long long)r.shape.K, std::string(to_string(r.strategy)).c_str(),
                  r.tgemm_gflops, r.ftimm_gflops, r.speedup, r.roofline_gflops, r.roofline_fraction);
    out << buf;
  }
  return out.str();
}

}  // namespace dspgemm
