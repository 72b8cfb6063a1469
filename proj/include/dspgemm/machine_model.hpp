#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dspgemm {

// Memory hierarchy of one cluster. DDR and GSM are shared by all cores;
// SM (scalar side) and AM (vector side) are private scratchpads.
enum class MemLevel { DDR, GSM, SM, AM };

std::string_view to_string(MemLevel level);
MemLevel mem_level_from_string(std::string_view name);

struct MemoryLevelDesc {
  MemLevel level = MemLevel::DDR;
  std::uint64_t capacity_bytes = 0;  // 0 means unbounded (DDR only)
  bool is_shared = false;

  bool operator==(const MemoryLevelDesc&) const = default;
};

struct CoreDesc {
  int num_vpe = 16;
  int fmac_units_per_vpe = 3;
  int simd_width_fp32 = 32;
  int vector_registers_per_vpe = 64;
  int reserved_vector_registers = 4;
  double clock_ghz = 1.8;
  int scalar_issue_width = 5;
  int vector_issue_width = 6;
  int broadcast_fp32_per_cycle = 2;
  int vector_load_bytes_per_cycle = 512;

  int total_issue_width() const { return scalar_issue_width + vector_issue_width; }
  int usable_vector_registers() const { return vector_registers_per_vpe - reserved_vector_registers; }
  // Each FMAC unit retires two FP32 madds (four flops) per VPE per cycle.
  double peak_gflops() const { return double(num_vpe) * fmac_units_per_vpe * 2 * 2 * clock_ghz; }

  bool operator==(const CoreDesc&) const = default;
};

// Instruction latencies are in core cycles. Only t_fma, t_vldw and t_sbr
// shape the steady-state loop bodies; the scalar chain latencies only move the
// prologue.
struct LatencyDesc {
  int t_fma = 6;
  int t_vldw = 4;
  int t_sbr = 3;
  int t_sld = 1;    // SLDH / SLDW
  int t_sext = 1;   // SFEXTS32L / SBALE2H
  int t_bcast = 1;  // SVBCAST / SVBCAST2
  double dma_ddr_bandwidth_gbps = 42.6;
  double dma_gsm_bandwidth_gbps = 128.0;
  int dma_startup_cycles = 0;

  bool operator==(const LatencyDesc&) const = default;
};

struct MachineModel {
  std::vector<MemoryLevelDesc> memory_levels;
  CoreDesc core;
  LatencyDesc latency;
  int num_cores = 8;

  // Throws std::out_of_range when the level is absent.
  const MemoryLevelDesc& level(MemLevel which) const;
  MemoryLevelDesc& level(MemLevel which);
  std::uint64_t capacity(MemLevel which) const { return level(which).capacity_bytes; }

  double peak_gflops_per_core() const { return core.peak_gflops(); }
  double peak_gflops_cluster() const { return core.peak_gflops() * num_cores; }
  int simd_width() const { return core.simd_width_fp32; }

  bool operator==(const MachineModel&) const = default;
};

// FT-m7032 GPDSP cluster defaults: 8 cores, 6 MiB GSM, 64 KiB SM and
// 768 KiB AM per core, 345.6 GFlops FP32 per core.
MachineModel default_ftm7032();

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate(const MachineModel& model);

// Machine configuration files are flat JSON objects, one key per field.
// Unknown keys are rejected; missing keys keep their defaults.
MachineModel parse_machine_config(std::string_view json_text);
std::string to_machine_config(const MachineModel& model);
MachineModel load_machine_config(const std::filesystem::path& path);

}  // namespace dspgemm
