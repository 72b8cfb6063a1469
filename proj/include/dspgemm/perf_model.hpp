#pragma once

#include <map>
#include <string>
#include <vector>

#include "dspgemm/gemm_engine.hpp"

namespace dspgemm {

struct TimeEstimate {
  std::vector<std::int64_t> compute_cycles;                 // per core
  std::vector<std::map<MemLevel, double>> dma_time_s;      // per core, keyed by destination level
  std::map<MemLevel, double> shared_dma_time_s;
  double compute_only_s = 0;   // busiest core, kernels back to back
  double dma_only_s = 0;       // busiest DMA path, or DDR bytes / bandwidth
  double critical_path_s = 0;  // per-epoch ping-pong replay
  double ddr_bound_s = 0;      // all DDR traffic through one shared port
  double overlapped_time_s = 0;
  double gflops = 0;
  double efficiency = 0;
  int active_cores = 0;
  std::uint64_t reduction_bytes = 0;
};

double dma_seconds(const DmaEvent& e, const MachineModel& model);

TimeEstimate estimate_time(const SimReport& report, const MachineModel& model);
TimeEstimate estimate_time(const SimReport& report, const ExecutionPlan& plan, const MachineModel& model);

// A and B read once, C read and written once.
double arithmetic_intensity(const MatrixShape& shape);
double roofline(const MatrixShape& shape, const MachineModel& model, int num_cores);

struct SpeedupRow {
  MatrixShape shape;
  Strategy strategy = Strategy::TGEMM;  // what the dispatcher picked
  double tgemm_time_s = 0;
  double ftimm_time_s = 0;
  double tgemm_gflops = 0;
  double ftimm_gflops = 0;
  double speedup = 0;
  double roofline_gflops = 0;
  double roofline_fraction = 0;
};

// Model-only TGEMM vs dispatched ftIMM per shape.
std::vector<SpeedupRow> speedup_table(const std::vector<MatrixShape>& shapes, const MachineModel& model);
SpeedupRow speedup_row(const MatrixShape& shape, const MachineModel& model);

std::string speedup_csv(const std::vector<SpeedupRow>& rows);

}  // namespace dspgemm
