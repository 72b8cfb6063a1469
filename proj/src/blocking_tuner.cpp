#include "dspgemm/blocking_tuner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "dspgemm/error.hpp"

namespace dspgemm {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::TGEMM: return "TGEMM";
    case Strategy::FTIMM_M: return "FTIMM_M";
    case Strategy::FTIMM_K: return "FTIMM_K";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  std::string s;
  for (char c : name) s += c == '-' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
  if (s == "TGEMM") return Strategy::TGEMM;
  if (s == "FTIMM_M" || s == "M") return Strategy::FTIMM_M;
  if (s == "FTIMM_K" || s == "K") return Strategy::FTIMM_K;
  throw Error("unknown strategy '" + std::string(name) + "'");
}

std::pair<double, double> cmr_m_strategy(const BlockSizes& b, int num_core) {
  const double P = num_core, ma = b.m_a, kg = b.k_g, ng = b.n_g, ka = b.k_a, na = b.n_a;
  const double f1 = 2 * ma * kg * ng * P / (P * ma * (kg + 2 * ng) + kg * ng);
  const double f2 = 2 * ma * ka * na * P / (P * ma * (ka + 2 * na) + ka * na);
  return {f1, f2};
}

std::pair<double, double> cmr_k_strategy(const BlockSizes& b, int num_core) {
  const double P = num_core, mg = b.m_g, ng = b.n_g, ma = b.m_a, ka = b.k_a, na = b.n_a;
  const double f3 = 2 * mg * ka * ng * P / (P * ka * (mg + ng) + 2 * mg * ng);
  const double f4 = 2 * ma * ka * na * P / (P * ka * (ma + na) + 2 * ma * na);
  return {f3, f4};
}

const LevelUsage& FeasibilityReport::usage(MemLevel level) const {
  for (const auto& l : levels)
    if (l.level == level) return l;
  throw std::out_of_range("no usage entry for " + std::string(to_string(level)));
}

namespace {

constexpr std::uint64_t kF32 = 4;
constexpr int kTgemmMg = 512, kTgemmKg = 512, kTgemmNa = 96, kTgemmMs = 6;
constexpr int kStep = 32;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t floor_step(std::int64_t x) { return x >= kStep ? x / kStep * kStep : x; }

}  // namespace

FeasibilityReport capacity_check(Strategy strategy, const BlockSizes& b, const MachineModel& model) {
  FeasibilityReport r;
  auto u64 = [](int v) { return std::uint64_t(std::max(v, 0)); };
  std::uint64_t gsm = 0, sm = 0, am = 0;
  switch (strategy) {
    case Strategy::FTIMM_M:
      gsm = 2 * u64(b.k_g) * u64(b.n_g) * kF32;
      am = u64(b.m_a) * u64(b.n_a) * kF32 + 2 * u64(b.k_a) * u64(b.n_a) * kF32;
      sm = 2 * u64(b.m_s) * u64(b.k_a) * kF32;
      break;
    case Strategy::FTIMM_K:
      gsm = u64(b.m_g) * u64(b.n_g) * kF32;
      am = u64(b.m_a) * u64(b.n_a) * kF32 + 2 * u64(b.k_a) * u64(b.n_a) * kF32;
      sm = 2 * u64(b.m_s) * u64(b.k_a) * kF32;
      break;
    case Strategy::TGEMM:
      // B panels always occupy the full 96-column layout.
      gsm = u64(b.m_g) * u64(b.k_g) * kF32 * 2;
      am = 2 * u64(b.k_g) * kTgemmNa * kF32 + u64(b.m_g) * kTgemmNa * kF32;
      sm = 2 * u64(b.m_s) * u64(b.k_g) * kF32;
      break;
  }
  r.levels = {{MemLevel::GSM, gsm, model.capacity(MemLevel::GSM)},
              {MemLevel::SM, sm, model.capacity(MemLevel::SM)},
              {MemLevel::AM, am, model.capacity(MemLevel::AM)}};
  for (const auto& l : r.levels)
    if (!l.ok())
      r.violations.push_back(std::string(to_string(l.level)) + " overflow: " + std::to_string(l.used_bytes) + " > " +
                             std::to_string(l.capacity_bytes) + " bytes");

  if (std::min({b.m_g, b.k_g, b.n_g, b.m_a, b.k_a, b.n_a, b.m_s}) < 1) r.violations.push_back("block sizes must be positive");
  if (b.n_a > kMaxNa) r.violations.push_back("n_a exceeds 96");
  if (b.n_a > b.n_g && strategy != Strategy::TGEMM) r.violations.push_back("n_a exceeds n_g");
  if (strategy == Strategy::TGEMM) {
    if (b.m_s > b.m_g) r.violations.push_back("m_s exceeds m_g");
  } else if (b.m_s > b.m_a) {
    r.violations.push_back("m_s exceeds m_a");
  }
  if (strategy == Strategy::FTIMM_M && b.k_a > b.k_g) r.violations.push_back("k_a exceeds k_g");
  if (strategy == Strategy::FTIMM_K && b.m_a > b.m_g) r.violations.push_back("m_a exceeds m_g");
  return r;
}

int max_register_ms(int n_a, const MachineModel& model) {
  const int v_n = vector_groups(n_a, model.simd_width());
  return std::max(1, (model.core.usable_vector_registers() - v_n) / (v_n + 1));
}

namespace {

BlockSizes search_m(const MachineModel& model) {
  const int P = model.num_cores, V = model.simd_width();
  const std::int64_t gsm = model.capacity(MemLevel::GSM) / kF32;
  const std::int64_t am = model.capacity(MemLevel::AM) / kF32;
  const std::int64_t sm = model.capacity(MemLevel::SM) / kF32;

  BlockSizes best{};
  std::tuple<double, int, double, double, int> best_key{-1, 0, 0, 0, 0};
  for (int n_a = V; n_a <= kMaxNa; n_a += V) {
    const int ms_hi = max_register_ms(n_a, model);
    const int ms_lo = std::min(6, ms_hi);
    // The GSM panel only has to cover the N <= 96 regime.
    for (int n_g = n_a; n_g <= kMaxNa; n_g += V) {
      const int k_g = int(floor_step(gsm / (2 * n_g)));
      if (k_g < 1) continue;
      for (int m_a = kStep;; m_a += kStep) {
        const std::int64_t ka_am = (am - std::int64_t(m_a) * n_a) / (2 * n_a);
        if (ka_am < 1) break;
        const int k_a = int(floor_step(std::min({ka_am, sm / (2 * ms_lo), std::int64_t(k_g)})));
        if (k_a < 1) continue;
        const int m_s = int(std::min<std::int64_t>({ms_hi, sm / (2 * k_a), m_a}));
        if (m_s < ms_lo) continue;
        BlockSizes b{m_a, k_g, n_g, m_a, k_a, n_a, m_s};
        const auto [f1, f2] = cmr_m_strategy(b, P);
        const auto key = std::make_tuple(std::min(f1, f2), k_g, f1, f2, m_s);
        if (key > best_key) {
          best_key = key;
          best = b;
        }
      }
    }
  }
  return best;
}

BlockSizes search_k(const MachineModel& model) {
  const int P = model.num_cores, V = model.simd_width();
  const std::int64_t gsm = model.capacity(MemLevel::GSM) / kF32;
  const std::int64_t am = model.capacity(MemLevel::AM) / kF32;
  const std::int64_t sm = model.capacity(MemLevel::SM) / kF32;

  BlockSizes best{};
  std::tuple<double, double, double, int> best_key{-1, 0, 0, 0};
  for (int n_a = V; n_a <= kMaxNa; n_a += V) {
    const int ms_hi = max_register_ms(n_a, model);
    const int ms_lo = std::min(6, ms_hi);
    for (int m_a = kStep;; m_a += kStep) {
      const std::int64_t ka_am = (am - std::int64_t(m_a) * n_a) / (2 * n_a);
      if (ka_am < 1) break;
      const int k_a = int(floor_step(std::min(ka_am, sm / (2 * ms_lo))));
      if (k_a < 1) continue;
      const int m_s = int(std::min<std::int64_t>({ms_hi, sm / (2 * k_a), m_a}));
      if (m_s < ms_lo) continue;
      for (int m_g = m_a;; m_g += kStep) {
        const int n_g = int(floor_step(gsm / m_g));
        if (n_g < n_a) break;
        BlockSizes b{m_g, k_a, n_g, m_a, k_a, n_a, m_s};
        const auto [f3, f4] = cmr_k_strategy(b, P);
        const auto key = std::make_tuple(std::min(f3, f4), f3, f4, m_s);
        if (key > best_key) {
          best_key = key;
          best = b;
        }
      }
    }
  }
  return best;
}

}  // namespace

BlockSizes initial_blocks(Strategy strategy, const MachineModel& model) {
  if (strategy == Strategy::TGEMM) return BlockSizes{kTgemmMg, kTgemmKg, kTgemmNa, kTgemmMg, kTgemmKg, kTgemmNa, kTgemmMs};

  static std::mutex mu;
  static std::map<std::pair<int, std::string>, BlockSizes> cache;
  const auto key = std::make_pair(int(strategy), to_machine_config(model));
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const BlockSizes b = strategy == Strategy::FTIMM_M ? search_m(model) : search_k(model);
  if (b.n_a == 0) throw Error("initial_blocks: no feasible " + std::string(to_string(strategy)) + " blocks for this machine");
  std::lock_guard lock(mu);
  cache.emplace(key, b);
  return b;
}

std::int64_t m_threshold(const MachineModel& model, const AdjustParams& p) {
  return p.m_threshold > 0 ? p.m_threshold : 6 * std::int64_t(model.num_cores) * 6;
}

std::int64_t k_threshold(const MachineModel& model, const AdjustParams& p) {
  return p.k_threshold > 0 ? p.k_threshold : 4 * std::int64_t(initial_blocks(Strategy::FTIMM_K, model).k_a);
}

namespace {

void check_shape(const MatrixShape& s) {
  if (s.M < 1 || s.N < 1 || s.K < 1) throw Error("matrix dimensions must be positive");
  if (s.M > INT32_MAX || s.N > INT32_MAX || s.K > INT32_MAX) throw Error("matrix dimension too large");
}

// Evens out the row groups of one m_a block, keeping m_s >= 6 when the
// block allows it.
int balance_ms(int m_a, int m_s) {
  m_s = std::max(1, std::min(m_s, m_a));
  const int groups = int(ceil_div(m_a, m_s));
  const int even = int(ceil_div(m_a, groups));
  return even >= std::min(6, m_a) ? even : m_s;
}

ExecutionPlan finish(Strategy s, const BlockSizes& b, const MachineModel& model) {
  ExecutionPlan p;
  p.strategy = s;
  p.blocks = b;
  p.num_cores = model.num_cores;
  p.kernel = select_tiling(b.m_s, b.n_a, model, s == Strategy::TGEMM ? b.k_g : b.k_a);
  if (auto rep = capacity_check(s, b, model); !rep.ok())
    throw Error("plan for " + std::string(to_string(s)) + " is infeasible: " + rep.violations.front());
  return p;
}

ExecutionPlan plan_tgemm(const MatrixShape& sh, const MachineModel& model) {
  BlockSizes b;
  b.m_g = int(std::min<std::int64_t>(kTgemmMg, sh.M));
  b.k_g = int(std::min<std::int64_t>(kTgemmKg, sh.K));
  b.n_a = kTgemmNa;
  b.n_g = int(ceil_div(sh.N, kTgemmNa) * kTgemmNa);
  b.m_a = b.m_g;
  b.k_a = b.k_g;
  b.m_s = std::min(kTgemmMs, b.m_g);
  return finish(Strategy::TGEMM, b, model);
}

ExecutionPlan plan_m(const MatrixShape& sh, const MachineModel& model) {
  const BlockSizes init = initial_blocks(Strategy::FTIMM_M, model);
  const std::int64_t P = model.num_cores;
  const std::int64_t am = model.capacity(MemLevel::AM) / kF32;
  const std::int64_t sm = model.capacity(MemLevel::SM) / kF32;
  const std::int64_t gsm = model.capacity(MemLevel::GSM) / kF32;

  BlockSizes b;
  b.n_a = int(std::min<std::int64_t>(sh.N, kMaxNa));
  b.n_g = b.n_a;
  b.k_g = int(std::min<std::int64_t>(sh.K, floor_step(gsm / (2 * b.n_g))));
  const std::int64_t k_a0 = std::min(init.k_a, b.k_g);
  const std::int64_t ma_cap = std::max<std::int64_t>(1, (am - 2 * k_a0 * b.n_a) / b.n_a);
  const std::int64_t rounds = ceil_div(sh.M, P * ma_cap);
  b.m_a = int(ceil_div(sh.M, P * rounds));
  b.m_g = int(sh.M);
  b.m_s = balance_ms(b.m_a, std::min(init.m_s, max_register_ms(b.n_a, model)));
  // Whatever AM the C block leaves goes to deeper k panels.
  const std::int64_t ka_cap = std::min((am - std::int64_t(b.m_a) * b.n_a) / (2 * b.n_a), sm / (2 * b.m_s));
  b.k_a = ka_cap >= b.k_g ? b.k_g : int(floor_step(ka_cap));
  return finish(Strategy::FTIMM_M, b, model);
}

ExecutionPlan plan_k(const MatrixShape& sh, const MachineModel& model) {
  const BlockSizes init = initial_blocks(Strategy::FTIMM_K, model);
  const std::int64_t P = model.num_cores;
  const std::int64_t am = model.capacity(MemLevel::AM) / kF32;
  const std::int64_t sm = model.capacity(MemLevel::SM) / kF32;
  const std::int64_t gsm = model.capacity(MemLevel::GSM) / kF32;

  BlockSizes b;
  b.n_a = int(std::min<std::int64_t>(sh.N, kMaxNa));
  b.n_g = int(std::min<std::int64_t>(sh.N, std::max(init.n_g, b.n_a)));
  b.m_g = int(std::min<std::int64_t>(sh.M, gsm / b.n_g));
  b.m_a = std::min(b.m_g, init.m_a);
  b.m_s = balance_ms(b.m_a, std::min(init.m_s, max_register_ms(b.n_a, model)));
  b.k_g = int(sh.K);
  // Spread K over the cores in as few rounds as the scratchpads allow.
  std::int64_t cap = std::min((am - std::int64_t(b.m_a) * b.n_a) / (2 * b.n_a), sm / (2 * b.m_s));
  cap = std::max<std::int64_t>(1, floor_step(cap));
  const std::int64_t rounds = ceil_div(sh.K, P * cap);
  b.k_a = int(std::min<std::int64_t>(sh.K, ceil_div(sh.K, P * rounds)));
  return finish(Strategy::FTIMM_K, b, model);
}

}  // namespace

ExecutionPlan plan_for(Strategy strategy, const MatrixShape& shape, const MachineModel& model) {
  check_shape(shape);
  switch (strategy) {
    case Strategy::TGEMM: return plan_tgemm(shape, model);
    case Strategy::FTIMM_M: return plan_m(shape, model);
    case Strategy::FTIMM_K: return plan_k(shape, model);
  }
  throw Error("unknown strategy");
}

ExecutionPlan adjust(const MatrixShape& shape, const MachineModel& model, const AdjustParams& params) {
  check_shape(shape);
  const int na_init = initial_blocks(Strategy::FTIMM_M, model).n_a;
  if (shape.N <= na_init && shape.M >= m_threshold(model, params)) return plan_m(shape, model);
  if (shape.N <= na_init && shape.K >= k_threshold(model, params)) return plan_k(shape, model);
  return plan_tgemm(shape, model);
}

double modeled_flops(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model) {
  const double mk = 2.0 * double(shape.M) * double(shape.K);
  if (plan.strategy == Strategy::TGEMM) return mk * double(ceil_div(shape.N, kTgemmNa) * kTgemmNa);
  const std::int64_t V = model.simd_width();
  std::int64_t lanes = 0;
  for (std::int64_t j = 0; j < shape.N; j += plan.blocks.n_g) {
    const std::int64_t ng = std::min<std::int64_t>(plan.blocks.n_g, shape.N - j);
    for (std::int64_t jj = 0; jj < ng; jj += plan.blocks.n_a)
      lanes += ceil_div(std::min<std::int64_t>(plan.blocks.n_a, ng - jj), V) * V;
  }
  return mk * double(lanes);
}

std::string describe(const ExecutionPlan& plan) {
  const auto& b = plan.blocks;
  const auto& k = plan.kernel;
  std::ostringstream out;
  out << "strategy " << to_string(plan.strategy) << "  cores " << plan.num_cores << "\n"
      << "blocks   m_g=" << b.m_g << " k_g=" << b.k_g << " n_g=" << b.n_g << " m_a=" << b.m_a << " k_a=" << b.k_a
      << " n_a=" << b.n_a << " m_s=" << b.m_s << "\n"
      << "kernel   m_s=" << k.m_s << " n_a=" << k.n_a << " m_u=" << k.m_u << " k_u=" << k.k_u << " v_n=" << k.v_n
      << "\n";
  return out.str();
}

std::string to_json(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model) {
  const auto& b = plan.blocks;
  const auto& k = plan.kernel;
  const auto rep = capacity_check(plan.strategy, b, model);
  nlohmann::ordered_json j;
  j["shape"] = {{"M", shape.M}, {"N", shape.N}, {"K", shape.K}};
  j["strategy"] = std::string(to_string(plan.strategy));
  j["num_cores"] = plan.num_cores;
  j["blocks"] = {{"m_g", b.m_g}, {"k_g", b.k_g}, {"n_g", b.n_g}, {"m_a", b.m_a},
                 {"k_a", b.k_a}, {"n_a", b.n_a}, {"m_s", b.m_s}};
  j["kernel"] = {{"m_s", k.m_s}, {"n_a", k.n_a}, {"m_u", k.m_u}, {"k_u", k.k_u}, {"v_n", k.v_n}};
  for (const auto& l : rep.levels)
    j["capacity"][std::string(to_string(l.level))] = {{"used_bytes", l.used_bytes}, {"capacity_bytes", l.capacity_bytes}};
  j["modeled_flops"] = modeled_flops(plan, shape, model);
  return j.dump(2);
}

}  // namespace dspgemm
