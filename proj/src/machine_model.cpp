#include "dspgemm/machine_model.hpp"

#include <fstream>
#include <sstream>

#include "dspgemm/error.hpp"
#include "json.hpp"

namespace dspgemm {

using nlohmann::json;

std::string_view to_string(MemLevel level) {
  switch (level) {
    case MemLevel::DDR: return "DDR";
    case MemLevel::GSM: return "GSM";
    case MemLevel::SM: return "SM";
    case MemLevel::AM: return "AM";
  }
  return "?";
}

MemLevel mem_level_from_string(std::string_view name) {
  if (name == "DDR") return MemLevel::DDR;
  if (name == "GSM") return MemLevel::GSM;
  if (name == "SM") return MemLevel::SM;
  if (name == "AM") return MemLevel::AM;
  throw Error("unknown memory level '" + std::string(name) + "'");
}

const MemoryLevelDesc& MachineModel::level(MemLevel which) const {
  for (const auto& l : memory_levels)
    if (l.level == which) return l;
  throw std::out_of_range("machine model has no " + std::string(to_string(which)) + " level");
}

MemoryLevelDesc& MachineModel::level(MemLevel which) {
  for (auto& l : memory_levels)
    if (l.level == which) return l;
  throw std::out_of_range("machine model has no " + std::string(to_string(which)) + " level");
}

MachineModel default_ftm7032() {
  MachineModel m;
  m.memory_levels = {
      {MemLevel::DDR, 0, true},
      {MemLevel::GSM, 6ull << 20, true},
      {MemLevel::SM, 64ull << 10, false},
      {MemLevel::AM, 768ull << 10, false},
  };
  return m;
}

ValidationResult validate(const MachineModel& m) {
  ValidationResult r;
  auto fail = [&](std::string msg) { r.violations.push_back(std::move(msg)); };

  for (MemLevel lvl : {MemLevel::DDR, MemLevel::GSM, MemLevel::SM, MemLevel::AM}) {
    int count = 0;
    const MemoryLevelDesc* found = nullptr;
    for (const auto& l : m.memory_levels) {
      if (l.level == lvl) {
        ++count;
        found = &l;
      }
    }
    const std::string name(to_string(lvl));
    if (count == 0) {
      fail("missing " + name + " level");
      continue;
    }
    if (count > 1) fail("duplicate " + name + " level");
    if (lvl != MemLevel::DDR && found->capacity_bytes == 0) fail(name + " capacity must be positive");
    const bool shared = lvl == MemLevel::DDR || lvl == MemLevel::GSM;
    if (found->is_shared != shared) fail(name + (shared ? " must be shared" : " must be per-core"));
  }

  const auto& c = m.core;
  auto positive = [&](long long v, const char* what) {
    if (v <= 0) fail(std::string(what) + " must be positive");
  };
  positive(c.num_vpe, "num_vpe");
  positive(c.fmac_units_per_vpe, "fmac_units_per_vpe");
  positive(c.simd_width_fp32, "simd_width_fp32");
  positive(c.vector_registers_per_vpe, "vector_registers_per_vpe");
  positive(c.scalar_issue_width, "scalar_issue_width");
  positive(c.vector_issue_width, "vector_issue_width");
  positive(c.broadcast_fp32_per_cycle, "broadcast_fp32_per_cycle");
  positive(c.vector_load_bytes_per_cycle, "vector_load_bytes_per_cycle");
  if (c.reserved_vector_registers < 0) fail("reserved_vector_registers must be non-negative");
  if (c.reserved_vector_registers >= c.vector_registers_per_vpe)
    fail("reserved_vector_registers must leave at least one usable register");
  if (!(c.clock_ghz > 0)) fail("clock_ghz must be positive");
  if (c.simd_width_fp32 > 0 && c.vector_load_bytes_per_cycle > 0 &&
      c.vector_load_bytes_per_cycle < 4 * c.simd_width_fp32)
    fail("vector_load_bytes_per_cycle must cover at least one vector");

  const auto& t = m.latency;
  positive(t.t_fma, "t_fma");
  positive(t.t_vldw, "t_vldw");
  positive(t.t_sbr, "t_sbr");
  positive(t.t_sld, "t_sld");
  positive(t.t_sext, "t_sext");
  positive(t.t_bcast, "t_bcast");
  if (!(t.dma_ddr_bandwidth_gbps > 0)) fail("dma_ddr_bandwidth_gbps must be positive");
  if (!(t.dma_gsm_bandwidth_gbps > 0)) fail("dma_gsm_bandwidth_gbps must be positive");
  if (t.dma_startup_cycles < 0) fail("dma_startup_cycles must be non-negative");

  positive(m.num_cores, "num_cores");
  return r;
}

namespace {

// Each config key binds to one field of the model.
template <class F>
void for_each_field(MachineModel& m, F&& f) {
  f("ddr_capacity_bytes", m.level(MemLevel::DDR).capacity_bytes);
  f("gsm_capacity_bytes", m.level(MemLevel::GSM).capacity_bytes);
  f("sm_capacity_bytes", m.level(MemLevel::SM).capacity_bytes);
  f("am_capacity_bytes", m.level(MemLevel::AM).capacity_bytes);
  f("num_vpe", m.core.num_vpe);
  f("fmac_units_per_vpe", m.core.fmac_units_per_vpe);
  f("simd_width_fp32", m.core.simd_width_fp32);
  f("vector_registers_per_vpe", m.core.vector_registers_per_vpe);
  f("reserved_vector_registers", m.core.reserved_vector_registers);
  f("clock_ghz", m.core.clock_ghz);
  f("scalar_issue_width", m.core.scalar_issue_width);
  f("vector_issue_width", m.core.vector_issue_width);
  f("broadcast_fp32_per_cycle", m.core.broadcast_fp32_per_cycle);
  f("vector_load_bytes_per_cycle", m.core.vector_load_bytes_per_cycle);
  f("t_fma", m.latency.t_fma);
  f("t_vldw", m.latency.t_vldw);
  f("t_sbr", m.latency.t_sbr);
  f("t_sld", m.latency.t_sld);
  f("t_sext", m.latency.t_sext);
  f("t_bcast", m.latency.t_bcast);
  f("dma_ddr_bandwidth_gbps", m.latency.dma_ddr_bandwidth_gbps);
  f("dma_gsm_bandwidth_gbps", m.latency.dma_gsm_bandwidth_gbps);
  f("dma_startup_cycles", m.latency.dma_startup_cycles);
  f("num_cores", m.num_cores);
}

}  // namespace

MachineModel parse_machine_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("machine config: ") + e.what());
  }
  if (!doc.is_object()) throw Error("machine config: top level must be an object");

  MachineModel m = default_ftm7032();
  std::size_t consumed = 0;
  for_each_field(m, [&](const char* key, auto& field) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    ++consumed;
    using T = std::remove_reference_t<decltype(field)>;
    if (!it->is_number()) throw Error(std::string("machine config: '") + key + "' must be a number");
    if constexpr (std::is_floating_point_v<T>) {
      field = it->template get<T>();
    } else {
      if (!it->is_number_integer()) throw Error(std::string("machine config: '") + key + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned() || it->template get<long long>() >= 0)
          field = it->template get<T>();
        else
          throw Error(std::string("machine config: '") + key + "' must be non-negative");
      } else {
        field = it->template get<T>();
      }
    }
  });
  if (consumed != doc.size()) {
    MachineModel probe = default_ftm7032();
    for (const auto& [key, value] : doc.items()) {
      bool known = false;
      for_each_field(probe, [&](const char* k, auto&) { known = known || key == k; });
      if (!known) throw Error("machine config: unknown key '" + key + "'");
    }
  }
  return m;
}

std::string to_machine_config(const MachineModel& model) {
  MachineModel m = model;
  json doc = json::object();
  for_each_field(m, [&](const char* key, auto& field) { doc[key] = field; });
  return doc.dump(2) + "\n";
}

MachineModel load_machine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open machine config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_machine_config(ss.str());
}

}  // namespace dspgemm
