#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dspgemm/error.hpp"
#include "dspgemm/machine_model.hpp"

using namespace dspgemm;

TEST_CASE("default model matches the FT-m7032 cluster") {
  const MachineModel m = default_ftm7032();
  CHECK(m.num_cores == 8);
  CHECK(m.peak_gflops_per_core() == doctest::Approx(345.6).epsilon(1e-12));
  CHECK(m.peak_gflops_cluster() == doctest::Approx(2764.8).epsilon(1e-12));
  CHECK(m.capacity(MemLevel::AM) == 786432);
  CHECK(m.capacity(MemLevel::SM) == 65536);
  CHECK(m.capacity(MemLevel::GSM) == 6291456);
  CHECK(m.capacity(MemLevel::DDR) == 0);
  CHECK(m.level(MemLevel::GSM).is_shared);
  CHECK_FALSE(m.level(MemLevel::AM).is_shared);
  CHECK(m.core.usable_vector_registers() == 60);
  CHECK(m.core.total_issue_width() == 11);
  CHECK(m.simd_width() == 32);
  CHECK(m.latency.t_fma == 6);
  CHECK(validate(m).ok());
}

TEST_CASE("peak is VPEs x FMACs x 2 lanes x 2 flops x clock") {
  MachineModel m = default_ftm7032();
  m.core.clock_ghz = 1.0;
  m.core.num_vpe = 1;
  CHECK(m.peak_gflops_per_core() == doctest::Approx(3 * 2 * 2));
}

TEST_CASE("validate rejects broken models") {
  SUBCASE("zero AM") {
    MachineModel m = default_ftm7032();
    m.level(MemLevel::AM).capacity_bytes = 0;
    const auto r = validate(m);
    REQUIRE_FALSE(r.ok());
    CHECK(r.violations.front() == "AM capacity must be positive");
  }
  SUBCASE("all registers reserved") {
    MachineModel m = default_ftm7032();
    m.core.reserved_vector_registers = 64;
    CHECK_FALSE(validate(m).ok());
  }
  SUBCASE("zero latency") {
    MachineModel m = default_ftm7032();
    m.latency.t_fma = 0;
    CHECK_FALSE(validate(m).ok());
  }
  SUBCASE("missing level") {
    MachineModel m = default_ftm7032();
    m.memory_levels.pop_back();
    CHECK_FALSE(validate(m).ok());
    CHECK_THROWS_AS(m.level(MemLevel::AM), std::out_of_range);
  }
  SUBCASE("private GSM") {
    MachineModel m = default_ftm7032();
    m.level(MemLevel::GSM).is_shared = false;
    CHECK_FALSE(validate(m).ok());
  }
  SUBCASE("no bandwidth") {
    MachineModel m = default_ftm7032();
    m.latency.dma_ddr_bandwidth_gbps = 0;
    CHECK_FALSE(validate(m).ok());
  }
}

TEST_CASE("config round trip") {
  MachineModel m = default_ftm7032();
  m.num_cores = 4;
  m.latency.t_vldw = 1;
  m.latency.dma_ddr_bandwidth_gbps = 100.5;
  m.level(MemLevel::AM).capacity_bytes = 393216;
  const MachineModel back = parse_machine_config(to_machine_config(m));
  CHECK(back == m);
}

TEST_CASE("partial config keeps defaults") {
  const MachineModel m = parse_machine_config(R"({"num_cores": 2, "t_sbr": 7})");
  CHECK(m.num_cores == 2);
  CHECK(m.latency.t_sbr == 7);
  CHECK(m.latency.t_fma == 6);
  CHECK(m.capacity(MemLevel::AM) == 786432);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_machine_config(R"({"num_core": 2})"), Error);
  CHECK_THROWS_AS(parse_machine_config(R"({"num_cores": 2.5})"), Error);
  CHECK_THROWS_AS(parse_machine_config(R"({"num_cores": "8"})"), Error);
  CHECK_THROWS_AS(parse_machine_config(R"([1, 2])"), Error);
  CHECK_THROWS_AS(parse_machine_config("{"), Error);
  CHECK_THROWS_AS(load_machine_config("/nonexistent/machine.json"), Error);
}

TEST_CASE("load from file") {
  const auto path = std::filesystem::temp_directory_path() / "dspgemm_machine_test.json";
  {
    std::ofstream f(path);
    f << R"({"gsm_capacity_bytes": 3145728, "clock_ghz": 2.0})";
  }
  const MachineModel m = load_machine_config(path);
  std::filesystem::remove(path);
  CHECK(m.capacity(MemLevel::GSM) == 3145728);
  CHECK(m.peak_gflops_per_core() == doctest::Approx(16 * 3 * 4 * 2.0));
}

TEST_CASE("level names") {
  for (MemLevel l : {MemLevel::DDR, MemLevel::GSM, MemLevel::SM, MemLevel::AM})
    CHECK(mem_level_from_string(to_string(l)) == l);
  CHECK_THROWS_AS(mem_level_from_string("L2"), Error);
}
