#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dspgemm/machine_model.hpp"
#include "dspgemm/microkernel.hpp"

namespace dspgemm {

enum class Strategy { TGEMM, FTIMM_M, FTIMM_K };

std::string_view to_string(Strategy s);
// Accepts TGEMM / FTIMM_M / FTIMM_K in any case, plus ftimm-m, ftimm-k, m, k.
Strategy strategy_from_string(std::string_view name);

struct MatrixShape {
  std::int64_t M = 0;
  std::int64_t N = 0;
  std::int64_t K = 0;

  bool operator==(const MatrixShape&) const = default;
};

// Fields a strategy does not block are set to their loop extent.
struct BlockSizes {
  int m_g = 0;
  int k_g = 0;
  int n_g = 0;
  int m_a = 0;
  int k_a = 0;
  int n_a = 0;
  int m_s = 0;

  bool operator==(const BlockSizes&) const = default;
};

struct ExecutionPlan {
  Strategy strategy = Strategy::TGEMM;
  BlockSizes blocks;
  MicroKernelSpec kernel;
  int num_cores = 1;
};

// Flops per transferred element at the GSM (f1) and AM (f2) level.
std::pair<double, double> cmr_m_strategy(const BlockSizes& b, int num_core);
// Same for the K-parallel scheme: GSM-resident C (f3) and per-core AM (f4).
std::pair<double, double> cmr_k_strategy(const BlockSizes& b, int num_core);

struct LevelUsage {
  MemLevel level = MemLevel::AM;
  std::uint64_t used_bytes = 0;
  std::uint64_t capacity_bytes = 0;
  bool ok() const { return used_bytes <= capacity_bytes; }
};

struct FeasibilityReport {
  std::vector<LevelUsage> levels;  // GSM, SM, AM
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  const LevelUsage& usage(MemLevel level) const;
};

FeasibilityReport capacity_check(Strategy strategy, const BlockSizes& b, const MachineModel& model);

// Grid search for the CMR-optimal blocks of a strategy, memoized per model.
BlockSizes initial_blocks(Strategy strategy, const MachineModel& model);

// Largest m_s whose k_u = 1 tile fits the register file for this n_a.
int max_register_ms(int n_a, const MachineModel& model);

struct AdjustParams {
  std::int64_t m_threshold = 0;  // 0: 6 * num_cores * 6
  std::int64_t k_threshold = 0;  // 0: 4 * initial K-strategy k_a
};

std::int64_t m_threshold(const MachineModel& model, const AdjustParams& p = {});
std::int64_t k_threshold(const MachineModel& model, const AdjustParams& p = {});

// Strategy selection plus shape-specific block sizes.
ExecutionPlan adjust(const MatrixShape& shape, const MachineModel& model, const AdjustParams& params = {});
// Blocks for a forced strategy.
ExecutionPlan plan_for(Strategy strategy, const MatrixShape& shape, const MachineModel& model);

// Flops the plan actually issues, counting lane padding of partial vectors
// and TGEMM's fixed 96-wide B panels.
double modeled_flops(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model);

std::string describe(const ExecutionPlan& plan);
std::string to_json(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model);

}  // namespace dspgemm
