#pragma once

#include <array>
#include <climits>
#include <map>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dspgemm/machine_model.hpp"

namespace dspgemm {

// Tiling of one micro-kernel call: C_a[m_s][n_a] += A_s[m_s][k_a] * B_a[k_a][n_a].
// Rows are processed in groups of m_u; k is unrolled by k_u with one partial
// accumulator set per ku.
struct MicroKernelSpec {
  int m_s = 0;
  int n_a = 0;
  int k_a = 0;
  int m_u = 0;
  int k_u = 0;
  int v_n = 0;

  bool operator==(const MicroKernelSpec&) const = default;
};

inline constexpr int kMaxNa = 96;

int vector_groups(int n_a, int simd_width);

// Vector registers live across one loop body: accumulators, broadcast
// operands and B vectors.
int register_demand(int m_u, int k_u, int v_n);

// Chooses (m_u, k_u) for an m_s x n_a micro-kernel. Throws Error when the
// request is out of range or no tiling fits the register file.
MicroKernelSpec select_tiling(int m_s, int n_a, const MachineModel& model, int k_a = INT_MAX);

// Empty when a MicroKernelSpec satisfies its structural invariants under the model.
std::vector<std::string> check_spec(const MicroKernelSpec& spec, const MachineModel& model);

enum class Opcode : std::uint8_t {
  SLDH, SLDW, SFEXTS32L, SBALE2H, SVBCAST, SVBCAST2, VLDW, VLDDW, VFMULAS32, SBR,
  SADD,  // loop counter / address update on the fixed-point unit
  NOP,
};

enum class Unit : std::uint8_t {
  ScalarLS1, ScalarFMAC1, ScalarFMAC2, SIEU, VectorLS1, VectorLS2,
  VectorFMAC1, VectorFMAC2, VectorFMAC3, Control,
};

inline constexpr int kNumUnits = 10;
inline constexpr int kNumVectorFmacUnits = 3;

std::string_view to_string(Opcode op);
std::string_view to_string(Unit unit);
std::string_view display_name(Unit unit);  // table row label
bool is_scalar_unit(Unit unit);

// Abstract register names. Scalar registers are indexed by broadcast group;
// vector registers follow the micro-kernel's (ku, mu, nn) indexing.
enum class RegFile : std::uint8_t { ScalarRaw, ScalarLo, ScalarHi, VecA, VecB, VecC };

struct Reg {
  RegFile file = RegFile::VecA;
  std::int16_t a = 0;
  std::int16_t b = 0;
  std::int16_t c = 0;

  auto operator<=>(const Reg&) const = default;
};

std::string to_string(const Reg& r);

struct Instruction {
  Opcode op = Opcode::NOP;
  Unit unit = Unit::Control;
  // Issue time relative to the start of the loop body the instruction
  // belongs to. Software-pipelined producers may issue in an earlier body
  // (negative time); the steady-state slot is time mod ii.
  int time = 0;
  std::vector<Reg> dst;
  std::vector<Reg> src;
};

struct VliwSchedule {
  int ii = 0;  // loop-body length in cycles
  int m_u = 0;
  int k_u = 0;
  int v_n = 0;
  std::vector<Instruction> body;
  int prologue_cycles = 0;
  int epilogue_cycles = 0;
  int iterations_covered = 0;  // (mu, ku) pairs retired per loop body

  // steady_state()[cycle][unit] -> index into body, or -1.
  std::vector<std::array<int, kNumUnits>> steady_state() const;
  int slot(int time) const { return ((time % ii) + ii) % ii; }
  int count(Opcode op) const;
  int filled_fmac_slots() const { return count(Opcode::VFMULAS32); }
};

// Software-pipelined, rule-based schedule for one m_u row group. Throws
// Error if no loop-body length up to a generous bound admits a placement.
VliwSchedule generate_schedule(const MicroKernelSpec& spec, const MachineModel& model);

enum class IssueKind {
  IllegalUnit,
  UnitConflict,
  ScalarIssueWidth,
  VectorIssueWidth,
  BroadcastThroughput,
  LoadBandwidth,
  AccumulatorHazard,
  OperandLatency,
  RegisterOverwrite,
  MissingProducer,
  Coverage,
  Branch,
};

struct Issue {
  IssueKind kind;
  int cycle = -1;  // 1-based steady-state cycle, -1 when not cycle specific
  std::string message;
};

std::vector<Issue> verify_schedule(const VliwSchedule& sched, const MicroKernelSpec& spec,
                                   const MachineModel& model);

struct CycleEstimate {
  int ii = 0;
  int filled_fmac_slots = 0;
  int fmac_slots = 0;  // kNumVectorFmacUnits * ii
  double fmac_efficiency = 0;
  double cycles_per_k_iter = 0;  // over all m_s rows
  long long total_cycles = 0;    // full call, k_a deep
};

// Cycle estimate for one micro-kernel call of depth k_a. The schedule is
// the main row group's; a shrunk tail group is scheduled on demand.
CycleEstimate estimate_cycles(const VliwSchedule& sched, const MicroKernelSpec& spec, int k_a,
                              const MachineModel& model);

// Memoized estimate_cycles for full micro-kernel calls (spec.k_a deep).
// Not thread-safe.
class KernelCycleCache {
 public:
  explicit KernelCycleCache(const MachineModel& model) : model_(model) {}
  std::int64_t cycles(const MicroKernelSpec& spec);

 private:
  const MachineModel& model_;
  std::map<std::array<int, 6>, std::int64_t> memo_;
};

// Upper bound of vector-FMAC utilization imposed by broadcast bandwidth.
double theoretical_upper_bound(int n_a);
double theoretical_upper_bound(int n_a, const MachineModel& model);

std::string format_schedule_table(const VliwSchedule& sched);
std::string format_schedule_csv(const VliwSchedule& sched);

}  // namespace dspgemm
