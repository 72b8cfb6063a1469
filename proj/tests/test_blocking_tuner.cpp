#include <doctest.h>

#include <chrono>

#include "dspgemm/blocking_tuner.hpp"
#include "dspgemm/error.hpp"

using namespace dspgemm;

namespace {

// Second evaluation of the ratios: flops over elements moved, counted per
// block the way the loop nests move them.
std::pair<double, double> cmr_m_ref(double ma, double kg, double ng, double ka, double na, double p) {
  const double flops_g = 2.0 * (p * ma) * kg * ng;
  const double elems_g = kg * ng + (p * ma) * kg + 2.0 * (p * ma) * ng;
  const double flops_a = 2.0 * (p * ma) * ka * na;
  const double elems_a = ka * na + (p * ma) * ka + 2.0 * (p * ma) * na;
  return {flops_g / elems_g, flops_a / elems_a};
}

std::pair<double, double> cmr_k_ref(double mg, double ng, double ma, double ka, double na, double p) {
  const double flops_g = 2.0 * mg * (p * ka) * ng;
  const double elems_g = mg * (p * ka) + (p * ka) * ng + 2.0 * mg * ng;
  const double flops_a = 2.0 * ma * (p * ka) * na;
  const double elems_a = ma * (p * ka) + (p * ka) * na + 2.0 * ma * na;
  return {flops_g / elems_g, flops_a / elems_a};
}

BlockSizes reference_m() { return {320, 5888, 96, 320, 864, 96, 8}; }
BlockSizes reference_k() { return {1024, 512, 512, 1024, 512, 96, 14}; }

}  // namespace

TEST_CASE("M-strategy ratios agree with a second evaluation") {
  const BlockSizes b = reference_m();
  const auto [f1, f2] = cmr_m_strategy(b, 8);
  const auto [r1, r2] = cmr_m_ref(320, 5888, 96, 864, 96, 8);
  CHECK(f1 == doctest::Approx(r1).epsilon(1e-12));
  CHECK(f2 == doctest::Approx(r2).epsilon(1e-12));
  for (int p : {1, 2, 3, 8, 64}) {
    const BlockSizes x{64, 1000, 48, 40, 300, 32, 6};
    const auto [a1, a2] = cmr_m_strategy(x, p);
    const auto [e1, e2] = cmr_m_ref(40, 1000, 48, 300, 32, p);
    CHECK(a1 == doctest::Approx(e1).epsilon(1e-12));
    CHECK(a2 == doctest::Approx(e2).epsilon(1e-12));
  }
}

TEST_CASE("K-strategy ratios agree with a second evaluation") {
  const auto [f3, f4] = cmr_k_strategy(reference_k(), 8);
  const auto [r3, r4] = cmr_k_ref(1024, 512, 1024, 512, 96, 8);
  CHECK(f3 == doctest::Approx(r3).epsilon(1e-12));
  CHECK(f4 == doctest::Approx(r4).epsilon(1e-12));
}

TEST_CASE("all-ones blocks give one half") {
  const BlockSizes one{1, 1, 1, 1, 1, 1, 1};
  CHECK(cmr_m_strategy(one, 1).first == 0.5);
  CHECK(cmr_m_strategy(one, 1).second == 0.5);
  CHECK(cmr_k_strategy(one, 1).first == 0.5);
  CHECK(cmr_k_strategy(one, 1).second == 0.5);
}

TEST_CASE("f1 grows with k_g and tends to its many-core limit") {
  BlockSizes b = reference_m();
  const double base = cmr_m_strategy(b, 8).first;
  b.k_g *= 2;
  CHECK(cmr_m_strategy(b, 8).first > base);

  const BlockSizes p = reference_m();
  const double kg = p.k_g, ng = p.n_g;
  const double limit = 2 * kg * ng / (kg + 2 * ng);
  CHECK(cmr_m_strategy(p, 1000000).first == doctest::Approx(limit).epsilon(1e-3));
}

TEST_CASE("reference blocks fit exactly") {
  const MachineModel m = default_ftm7032();
  for (auto [s, b] : {std::pair{Strategy::FTIMM_M, reference_m()}, std::pair{Strategy::FTIMM_K, reference_k()}}) {
    const auto rep = capacity_check(s, b, m);
    CHECK(rep.ok());
    CHECK(rep.usage(MemLevel::AM).used_bytes == 786432);
    CHECK(rep.usage(MemLevel::SM).ok());
    CHECK(rep.usage(MemLevel::GSM).ok());
    BlockSizes over = b;
    over.k_a += 1;
    const auto bad = capacity_check(s, over, m);
    CHECK_FALSE(bad.ok());
    CHECK_FALSE(bad.usage(MemLevel::AM).ok());
  }
}

TEST_CASE("structural violations") {
  const MachineModel m = default_ftm7032();
  BlockSizes b = reference_m();
  b.n_a = 128;
  b.n_g = 128;
  CHECK_FALSE(capacity_check(Strategy::FTIMM_M, b, m).ok());
  b = reference_m();
  b.m_s = 400;
  CHECK_FALSE(capacity_check(Strategy::FTIMM_M, b, m).ok());
  b = reference_m();
  b.k_a = 0;
  CHECK_FALSE(capacity_check(Strategy::FTIMM_M, b, m).ok());
}

TEST_CASE("search dominates the reference blocks") {
  const MachineModel m = default_ftm7032();
  const auto t0 = std::chrono::steady_clock::now();
  const BlockSizes bm = initial_blocks(Strategy::FTIMM_M, m);
  const BlockSizes bk = initial_blocks(Strategy::FTIMM_K, m);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs <= 10.0);

  CHECK(capacity_check(Strategy::FTIMM_M, bm, m).ok());
  CHECK(capacity_check(Strategy::FTIMM_K, bk, m).ok());
  const auto [f1, f2] = cmr_m_strategy(bm, 8);
  const auto [p1, p2] = cmr_m_strategy(reference_m(), 8);
  CHECK(f1 >= p1);
  CHECK(f2 >= p2);
  const auto [f3, f4] = cmr_k_strategy(bk, 8);
  const auto [p3, p4] = cmr_k_strategy(reference_k(), 8);
  CHECK(f3 >= p3);
  CHECK(f4 >= p4);
  CHECK(bm.m_s >= 6);
  CHECK(bk.m_s >= 6);
  CHECK(bm.n_a == 96);
}

TEST_CASE("search respects a smaller AM") {
  MachineModel m = default_ftm7032();
  m.level(MemLevel::AM).capacity_bytes /= 2;
  for (Strategy s : {Strategy::FTIMM_M, Strategy::FTIMM_K}) CHECK(capacity_check(s, initial_blocks(s, m), m).ok());
}

TEST_CASE("thresholds") {
  const MachineModel m = default_ftm7032();
  CHECK(m_threshold(m) == 288);
  CHECK(k_threshold(m) == 4 * initial_blocks(Strategy::FTIMM_K, m).k_a);
  CHECK(m_threshold(m, {100, 0}) == 100);
}

TEST_CASE("strategy selection") {
  const MachineModel m = default_ftm7032();
  CHECK(adjust({65536, 32, 32}, m).strategy == Strategy::FTIMM_M);
  CHECK(adjust({32, 32, 1 << 20}, m).strategy == Strategy::FTIMM_K);
  CHECK(adjust({20480, 32, 20480}, m).strategy == Strategy::FTIMM_M);
  CHECK(adjust({4096, 4096, 4096}, m).strategy == Strategy::TGEMM);
  CHECK(adjust({32, 32, 32}, m).strategy == Strategy::TGEMM);
}

TEST_CASE("every adjusted plan is feasible with a consistent kernel") {
  const MachineModel m = default_ftm7032();
  const std::vector<MatrixShape> shapes = {
      {65536, 32, 32}, {32, 32, 1 << 20}, {20480, 32, 20480}, {4096, 4096, 4096}, {512, 96, 512},
      {1, 1, 1},       {7, 5, 9},         {300, 17, 4000},    {289, 96, 1},       {100, 64, 2000},
      {6, 1, 1 << 16}, {65536, 96, 512}, {1000, 97, 1000}};
  for (const auto& s : shapes) {
    CAPTURE(s.M);
    CAPTURE(s.N);
    CAPTURE(s.K);
    const auto plan = adjust(s, m);
    CHECK(capacity_check(plan.strategy, plan.blocks, m).ok());
    CHECK(check_spec(plan.kernel, m).empty());
    CHECK(plan.kernel.m_s == plan.blocks.m_s);
    CHECK(plan.kernel.n_a == plan.blocks.n_a);
    CHECK(plan.blocks.m_s <= std::max<std::int64_t>(s.M, 1));
    if (s.M >= 6 * m.num_cores) CHECK(plan.blocks.m_s >= 6);
    CHECK(plan.num_cores == m.num_cores);
  }
}

TEST_CASE("parallel dimension is spread over the cores") {
  const MachineModel m = default_ftm7032();
  const auto pm = adjust({65536, 32, 32}, m);
  CHECK(pm.blocks.n_a == 32);
  CHECK(pm.blocks.k_a == 32);
  CHECK((65536 + pm.blocks.m_a - 1) / pm.blocks.m_a >= m.num_cores);
  const auto pk = adjust({32, 32, 1 << 20}, m);
  CHECK(pk.blocks.m_a == 32);
  CHECK((std::int64_t(1) << 20) / pk.blocks.k_a >= m.num_cores);
}

TEST_CASE("ftIMM issues no padding flops beyond the lane for N <= 32") {
  const MachineModel m = default_ftm7032();
  for (std::int64_t n : {1, 16, 32}) {
    const MatrixShape s{65536, n, 64};
    const auto p = plan_for(Strategy::FTIMM_M, s, m);
    CHECK(modeled_flops(p, s, m) == 2.0 * 65536 * 32 * 64);
    const auto t = plan_for(Strategy::TGEMM, s, m);
    CHECK(modeled_flops(t, s, m) == 2.0 * 65536 * 96 * 64);
  }
}

TEST_CASE("names and rendering") {
  CHECK(strategy_from_string("ftimm-m") == Strategy::FTIMM_M);
  CHECK(strategy_from_string("K") == Strategy::FTIMM_K);
  CHECK(strategy_from_string("tgemm") == Strategy::TGEMM);
  CHECK_THROWS_AS(strategy_from_string("x"), Error);
  const MachineModel m = default_ftm7032();
  const MatrixShape s{65536, 32, 32};
  const auto p = adjust(s, m);
  CHECK(describe(p).find("FTIMM_M") != std::string::npos);
  CHECK(to_json(p, s, m).find("\"strategy\": \"FTIMM_M\"") != std::string::npos);
}
