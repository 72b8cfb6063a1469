#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dspgemm/cli.hpp"
#include "dspgemm/error.hpp"
#include "dspgemm/matrix.hpp"

using namespace dspgemm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp(const std::string& name) {
  const char* dir = std::getenv("DSPGEMM_TMP");
  const fs::path base = dir ? fs::path(dir) : fs::temp_directory_path();
  return base / ("cli_" + name);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

bool has(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("plan for a tall-and-skinny shape") {
  const auto r = cli({"plan", "--m", "65536", "--n", "32", "--k", "32"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "FTIMM_M"));
  const auto j = cli({"plan", "--m", "65536", "--n", "32", "--k", "32", "--json"});
  CHECK(j.code == 0);
  CHECK(has(j.out, "\"strategy\": \"FTIMM_M\""));
  const auto forced = cli({"plan", "--m", "65536", "--n", "32", "--k", "32", "--strategy", "tgemm"});
  CHECK(has(forced.out, "TGEMM"));
}

TEST_CASE("run with oracle check") {
  const auto r = cli({"run", "--m", "64", "--n", "32", "--k", "64", "--check"});
  CHECK(r.code == 0);
  REQUIRE(has(r.out, "max_rel_error "));
  const auto pos = r.out.find("max_rel_error ") + 14;
  CHECK(std::stod(r.out.substr(pos)) <= 1e-5);
}

TEST_CASE("schedule table for n_a = 32") {
  const auto r = cli({"schedule", "--ms", "6", "--na", "32", "--format", "table"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "ii=7"));
  std::istringstream lines(r.out);
  std::string line;
  bool seen = false;
  while (std::getline(lines, line))
    if (line.rfind("Vector FMAC3", 0) == 0) {
      seen = true;
      CHECK_FALSE(has(line, "VFMULAS32"));
    }
  CHECK(seen);
  const auto v = cli({"schedule", "--ms", "6", "--na", "32", "--verify"});
  CHECK(v.code == 0);
  CHECK(has(v.out, "verify ok"));
  const auto csv = cli({"schedule", "--ms", "6", "--na", "64", "--format", "csv"});
  CHECK(csv.out.rfind("unit,1,2,3,4,5,6,7,8\n", 0) == 0);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"plan", "--m", "4"}).code == 1);
  CHECK(cli({"plan", "--m", "0", "--n", "4", "--k", "4"}).code == 1);
  CHECK(cli({"run", "--m", "4", "--n", "4", "--k", "4", "--frobnicate"}).code == 1);
  CHECK(cli({"schedule", "--ms", "6", "--na", "97"}).code == 1);
  CHECK(cli({"sweep", "--preset", "nope"}).code == 1);
  CHECK(cli({"plan", "--m", "4", "--n", "4", "--k", "4", "--machine", "/nonexistent.json"}).code == 1);
  const auto r = cli({"bogus"});
  CHECK_FALSE(r.err.empty());
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("verification failure exits 2") {
  // K = 4096 in two FP32 summation orders differs by ~3e-5 for this seed.
  const auto r = cli({"run", "--m", "32", "--n", "32", "--k", "4096", "--check"});
  CHECK(r.code == 2);
  CHECK(has(r.out, "FAILED"));
}

TEST_CASE("version") {
  const auto r = cli({"--version"});
  CHECK(r.code == 0);
  CHECK(has(r.out, kToolVersion));
  CHECK(has(r.out, "FTMM format 1"));
}

TEST_CASE("sweep CSV is byte-identical across invocations") {
  const auto a = tmp("sweep_a.csv"), b = tmp("sweep_b.csv"), svg = tmp("sweep.svg");
  REQUIRE(cli({"sweep", "--preset", "fig5d", "--out", a.string(), "--svg", svg.string()}).code == 0);
  REQUIRE(cli({"sweep", "--preset", "fig5d", "--out", b.string()}).code == 0);
  const std::string sa = slurp(a);
  CHECK(sa == slurp(b));
  CHECK(sa.rfind("M,N,K,strategy,tgemm_gflops_model,ftimm_gflops_model,speedup,roofline,roofline_fraction\n", 0) == 0);
  CHECK(has(slurp(svg), "<svg"));
  const auto stdout_run = cli({"sweep", "--preset", "fig5d"});
  CHECK(stdout_run.out == sa);
}

TEST_CASE("sweep from a shapes file") {
  const auto shapes = tmp("shapes.csv");
  {
    std::ofstream f(shapes);
    f << "M,N,K\n65536,32,32\n32,32,1048576\n";
  }
  const auto r = cli({"sweep", "--shapes", shapes.string()});
  CHECK(r.code == 0);
  CHECK(has(r.out, "\n65536,32,32,FTIMM_M,"));
  CHECK(has(r.out, "\n32,32,1048576,FTIMM_K,"));
  CHECK(parse_shapes_csv("1,2,3\n").size() == 1);
  CHECK_THROWS_AS(parse_shapes_csv("1,2\n"), Error);
}

TEST_CASE("presets") {
  CHECK(sweep_preset("fig5a").size() == 6 * 5);
  CHECK(sweep_preset("fig5d").front() == MatrixShape{4096, 32, 32});
  CHECK(sweep_preset("fig5e").back() == MatrixShape{32, 32, 1 << 20});
  CHECK(sweep_preset("fig5-6") == sweep_preset("fig5f"));
  CHECK_THROWS_AS(sweep_preset("fig9"), Error);
}

TEST_CASE("run is deterministic and writes trace and matrix") {
  const auto t1 = tmp("trace1.csv"), t2 = tmp("trace2.csv"), c = tmp("c.ftmm");
  const auto r1 = cli({"run", "--m", "300", "--n", "24", "--k", "500", "--seed", "7", "--dump-trace", t1.string(),
                       "--out", c.string(), "--threads", "1"});
  const auto r2 = cli({"run", "--m", "300", "--n", "24", "--k", "500", "--seed", "7", "--dump-trace", t2.string(),
                       "--threads", "4"});
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(r1.out == r2.out);
  const std::string trace = slurp(t1);
  CHECK(trace == slurp(t2));
  CHECK(trace.rfind("phase_tag,core_id,src,dst,bytes,overlappable\n", 0) == 0);
  CHECK(has(trace, ",shared,DDR,GSM,"));
  const Matrix m = load_ftmm(c);
  CHECK(m.rows() == 300);
  CHECK(m.cols() == 24);
  const auto other = cli({"run", "--m", "300", "--n", "24", "--k", "500", "--seed", "8"});
  CHECK(other.out != r1.out);
}

TEST_CASE("--machine is honored by every subcommand") {
  const auto cfg = tmp("machine.json");
  {
    std::ofstream f(cfg);
    f << R"({"num_cores": 2, "am_capacity_bytes": 393216, "dma_ddr_bandwidth_gbps": 10.0})";
  }
  const std::string mp = cfg.string();
  const auto base_plan = cli({"plan", "--m", "65536", "--n", "32", "--k", "32", "--json"});
  const auto plan = cli({"plan", "--m", "65536", "--n", "32", "--k", "32", "--json", "--machine", mp});
  CHECK(plan.code == 0);
  CHECK(plan.out != base_plan.out);
  CHECK(has(plan.out, "393216"));

  const auto tune = cli({"tune", "--strategy", "m", "--machine", mp});
  CHECK(tune.code == 0);
  CHECK(tune.out != cli({"tune", "--strategy", "m"}).out);

  MachineModel slow = default_ftm7032();
  slow.latency.t_fma = 8;
  const auto cfg2 = tmp("machine_fma.json");
  {
    std::ofstream f(cfg2);
    f << to_machine_config(slow);
  }
  const auto sched = cli({"schedule", "--ms", "8", "--na", "96", "--machine", cfg2.string(), "--verify"});
  CHECK(sched.code == 0);
  CHECK(sched.out != cli({"schedule", "--ms", "8", "--na", "96", "--verify"}).out);

  const auto run = cli({"run", "--m", "64", "--n", "32", "--k", "64", "--machine", mp});
  CHECK(run.code == 0);
  CHECK(run.out != cli({"run", "--m", "64", "--n", "32", "--k", "64"}).out);

  const auto sweep = cli({"sweep", "--preset", "fig5d", "--machine", mp});
  CHECK(sweep.code == 0);
  CHECK(sweep.out != cli({"sweep", "--preset", "fig5d"}).out);

  const auto report = cli({"report", "--machine", mp});
  CHECK(report.code == 0);
  CHECK(has(report.out, "cores 2"));

  const auto badcfg = tmp("machine_bad.json");
  {
    std::ofstream f(badcfg);
    f << R"({"num_cores": 0})";
  }
  CHECK(cli({"report", "--machine", badcfg.string()}).code == 1);
}
