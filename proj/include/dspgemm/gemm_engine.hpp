#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dspgemm/blocking_tuner.hpp"
#include "dspgemm/matrix.hpp"

namespace dspgemm {

inline constexpr int kSharedCore = -1;

// Which algorithm step a transfer belongs to.
enum class Phase : std::uint8_t {
  A_g,       // A panel into GSM (TGEMM)
  A_s,       // A row strip into SM
  B_g,       // B panel into GSM (ftIMM, M-parallel)
  B_a,       // B panel into AM
  C_a_load,  // C block into AM
  C_a_store, // C block back to DDR
  C_g_load,  // C tile into GSM (ftIMM, K-parallel)
  C_g_store,
  Reduce,    // partial C_a folded into C_g by cores 1..P-1
};

std::string_view to_string(Phase p);

// Transfers and kernel calls are grouped into epochs (barrier-delimited
// regions where the shared GSM buffer is stable) and, per core, into
// stages (one micro-kernel call each). An overlappable transfer recorded
// in stage s is the ping-pong prefetch that runs behind stage s-1.
struct DmaEvent {
  Phase phase = Phase::A_s;
  int core_id = kSharedCore;
  int epoch = 0;
  int stage = 0;
  MemLevel src = MemLevel::DDR;
  MemLevel dst = MemLevel::AM;
  std::uint64_t bytes = 0;
  bool overlappable = false;

  std::string phase_tag() const;  // e.g. "B_a@e3.s17"
  bool operator==(const DmaEvent&) const = default;
};

struct KernelEvent {
  int core_id = 0;
  int epoch = 0;
  int stage = 0;
  MicroKernelSpec spec;  // spec.k_a is the call's depth
  bool tgemm = false;

  bool operator==(const KernelEvent&) const = default;
};

struct KernelInvocation {
  MicroKernelSpec spec;
  int k_a = 0;
  std::int64_t count = 0;
};

struct SimReport {
  ExecutionPlan plan;
  MatrixShape shape;
  double result_checksum = 0;  // 0 in model-only runs
  std::vector<DmaEvent> dma_events;
  std::vector<KernelEvent> kernel_events;
  int num_epochs = 0;
  std::vector<std::vector<KernelInvocation>> kernel_invocations;  // per core
  std::vector<std::int64_t> compute_cycles;                       // per core, kernels only
  std::int64_t critical_compute_cycles = 0;
  std::map<MemLevel, std::uint64_t> bytes_per_level;  // by destination level
  std::map<MemLevel, std::uint64_t> peak_footprint;   // per core for SM/AM

  std::uint64_t bytes(Phase p) const;
  std::uint64_t ddr_bytes() const;  // transfers with DDR on either side
  int active_cores() const;
};

struct EngineOptions {
  bool compute = true;    // false: trace and model only, matrices untouched
  int host_threads = 0;   // 0: one per simulated core, capped by the host
};

SimReport run_tgemm(ConstMatView a, ConstMatView b, MatView c, const MachineModel& model,
                    const EngineOptions& opt = {});
SimReport run_ftimm_m(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan,
                      const MachineModel& model, const EngineOptions& opt = {});
SimReport run_ftimm_k(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan,
                      const MachineModel& model, const EngineOptions& opt = {});
SimReport run_auto(ConstMatView a, ConstMatView b, MatView c, const MachineModel& model,
                   const EngineOptions& opt = {});
// Dispatch on plan.strategy.
SimReport run_plan(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan,
                   const MachineModel& model, const EngineOptions& opt = {});

// Model-only runs over a shape, no matrices needed.
SimReport simulate(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model);

}  // namespace dspgemm
