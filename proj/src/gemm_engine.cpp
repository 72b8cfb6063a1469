#include "dspgemm/gemm_engine.hpp"

#include <algorithm>
#include <functional>
#include <mutex>
#include <thread>
#include <tuple>

#include "dspgemm/error.hpp"
#include "dspgemm/kernel_exec.hpp"

namespace dspgemm {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::A_g: return "A_g";
    case Phase::A_s: return "A_s";
    case Phase::B_g: return "B_g";
    case Phase::B_a: return "B_a";
    case Phase::C_a_load: return "C_a_load";
    case Phase::C_a_store: return "C_a_store";
    case Phase::C_g_load: return "C_g_load";
    case Phase::C_g_store: return "C_g_store";
    case Phase::Reduce: return "reduce";
  }
  return "?";
}

std::string DmaEvent::phase_tag() const {
  return std::string(to_string(phase)) + "@e" + std::to_string(epoch) + ".s" + std::to_string(stage);
}

std::uint64_t SimReport::bytes(Phase p) const {
  std::uint64_t total = 0;
  for (const auto& e : dma_events)
    if (e.phase == p) total += e.bytes;
  return total;
}

std::uint64_t SimReport::ddr_bytes() const {
  std::uint64_t total = 0;
  for (const auto& e : dma_events)
    if (e.src == MemLevel::DDR || e.dst == MemLevel::DDR) total += e.bytes;
  return total;
}

int SimReport::active_cores() const {
  return int(std::count_if(kernel_invocations.begin(), kernel_invocations.end(),
                           [](const auto& v) { return !v.empty(); }));
}

namespace {

constexpr std::uint64_t kF32 = 4;
constexpr int kTgemmNa = 96;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

struct CoreLog {
  std::vector<DmaEvent> dma;
  std::vector<KernelEvent> kernels;
  int epoch = 0;
  int stage = 0;
};

// Simulated cluster state shared by the three algorithms.
class Sim {
 public:
  Sim(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model, const EngineOptions& opt,
      bool compute)
      : plan(plan), shape(shape), model(model), P(model.num_cores), compute(compute), logs(P) {
    const int hw = int(std::max(1u, std::thread::hardware_concurrency()));
    threads = opt.host_threads > 0 ? opt.host_threads : std::min(P, hw);
    if (!compute) threads = 1;
  }

  void begin_epoch() {
    for (auto& l : logs) {
      l.epoch = epoch;
      l.stage = 0;
    }
  }
  void end_epoch() { ++epoch; }

  void shared_dma(Phase ph, MemLevel src, MemLevel dst, std::uint64_t bytes, bool overlappable) {
    shared.push_back(DmaEvent{ph, kSharedCore, epoch, 0, src, dst, bytes, overlappable});
  }

  // Transfer feeding the next kernel call on core c.
  void dma(int c, Phase ph, MemLevel src, MemLevel dst, std::uint64_t bytes, bool overlappable) {
    auto& l = logs[c];
    l.dma.push_back(DmaEvent{ph, c, l.epoch, l.stage, src, dst, bytes, overlappable});
  }

  // Transfer draining the last kernel call on core c.
  void dma_after(int c, Phase ph, MemLevel src, MemLevel dst, std::uint64_t bytes) {
    auto& l = logs[c];
    l.dma.push_back(DmaEvent{ph, c, l.epoch, std::max(0, l.stage - 1), src, dst, bytes, false});
  }

  void kernel(int c, const MicroKernelSpec& spec, bool tgemm) {
    auto& l = logs[c];
    l.kernels.push_back(KernelEvent{c, l.epoch, l.stage++, spec, tgemm});
  }

  MicroKernelSpec tiling(int m_s, int n_a, int k_a) {
    std::lock_guard lock(tiling_mu);
    const auto key = std::make_tuple(m_s, n_a, k_a);
    if (auto it = tilings.find(key); it != tilings.end()) return it->second;
    return tilings.emplace(key, select_tiling(m_s, n_a, model, k_a)).first->second;
  }

  void for_each_core(const std::function<void(int)>& fn) {
    if (threads <= 1) {
      for (int c = 0; c < P; ++c) fn(c);
      return;
    }
    std::vector<std::jthread> pool;
    const int T = std::min(threads, P);
    for (int w = 0; w < T; ++w)
      pool.emplace_back([&, w] {
        for (int c = w; c < P; c += T) fn(c);
      });
  }

  SimReport finish(ConstMatView c_out, const std::map<MemLevel, std::uint64_t>& footprint) {
    SimReport r;
    r.plan = plan;
    r.shape = shape;
    r.num_epochs = epoch;
    r.dma_events = std::move(shared);
    for (auto& l : logs) {
      r.dma_events.insert(r.dma_events.end(), l.dma.begin(), l.dma.end());
      r.kernel_events.insert(r.kernel_events.end(), l.kernels.begin(), l.kernels.end());
    }
    std::stable_sort(r.dma_events.begin(), r.dma_events.end(), [](const DmaEvent& x, const DmaEvent& y) {
      return std::tie(x.epoch, x.core_id) < std::tie(y.epoch, y.core_id);
    });
    std::stable_sort(r.kernel_events.begin(), r.kernel_events.end(), [](const KernelEvent& x, const KernelEvent& y) {
      return std::tie(x.epoch, x.core_id) < std::tie(y.epoch, y.core_id);
    });

    for (const auto& e : r.dma_events) r.bytes_per_level[e.dst] += e.bytes;
    r.peak_footprint = footprint;

    KernelCycleCache cache(model);
    r.compute_cycles.assign(P, 0);
    std::vector<std::map<std::array<int, 6>, std::int64_t>> counts(P);
    for (const auto& k : r.kernel_events) {
      r.compute_cycles[k.core_id] += cache.cycles(k.spec);
      const auto& s = k.spec;
      counts[k.core_id][{s.m_s, s.n_a, s.k_a, s.m_u, s.k_u, s.v_n}] += 1;
    }
    r.kernel_invocations.resize(P);
    for (int c = 0; c < P; ++c)
      for (const auto& [key, n] : counts[c])
        r.kernel_invocations[c].push_back(
            KernelInvocation{MicroKernelSpec{key[0], key[1], key[2], key[3], key[4], key[5]}, key[2], n});
    r.critical_compute_cycles = *std::max_element(r.compute_cycles.begin(), r.compute_cycles.end());
    if (compute) r.result_checksum = checksum(c_out);
    return r;
  }

  const ExecutionPlan& plan;
  MatrixShape shape;
  const MachineModel& model;
  int P;
  bool compute;
  int threads = 1;
  int epoch = 0;
  std::vector<CoreLog> logs;
  std::vector<DmaEvent> shared;
  std::mutex tiling_mu;
  std::map<std::tuple<int, int, int>, MicroKernelSpec> tilings;
};

MatrixShape shape_of(ConstMatView a, ConstMatView b, ConstMatView c) {
  if (a.rows != c.rows || a.cols != b.rows || b.cols != c.cols)
    throw Error("gemm: shape mismatch: A " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + ", B " +
                std::to_string(b.rows) + "x" + std::to_string(b.cols) + ", C " + std::to_string(c.rows) + "x" +
                std::to_string(c.cols));
  return MatrixShape{std::int64_t(a.rows), std::int64_t(b.cols), std::int64_t(a.cols)};
}

void check_plan(const ExecutionPlan& plan, Strategy expected, const MachineModel& model) {
  if (plan.strategy != expected)
    throw Error("plan strategy " + std::string(to_string(plan.strategy)) + " does not match " +
                std::string(to_string(expected)));
  if (plan.num_cores != model.num_cores) throw Error("plan was built for a different core count");
  const auto& b = plan.blocks;
  if (std::min({b.m_g, b.k_g, b.n_g, b.m_a, b.k_a, b.n_a, b.m_s}) < 1) throw Error("plan has non-positive blocks");
  if (b.n_a > kMaxNa) throw Error("plan n_a exceeds 96");
}

std::uint64_t u(std::int64_t v) { return std::uint64_t(v); }

SimReport tgemm(ConstMatView A, ConstMatView B, MatView C, const MatrixShape& sh, const MachineModel& model,
                const EngineOptions& opt, bool compute) {
  const ExecutionPlan plan = plan_for(Strategy::TGEMM, sh, model);
  Sim sim(plan, sh, model, opt, compute);
  const auto& bl = plan.blocks;
  const std::int64_t nblocks = ceil_div(sh.N, kTgemmNa);

  for (std::int64_t i = 0; i < sh.M; i += bl.m_g) {
    const int mg = int(std::min<std::int64_t>(bl.m_g, sh.M - i));
    for (std::int64_t j = 0; j < sh.K; j += bl.k_g) {
      const int kg = int(std::min<std::int64_t>(bl.k_g, sh.K - j));
      sim.begin_epoch();
      sim.shared_dma(Phase::A_g, MemLevel::DDR, MemLevel::GSM, u(mg) * u(kg) * kF32, j > 0);
      sim.for_each_core([&](int c) {
        bool first = true;
        for (std::int64_t t = c; t < nblocks; t += sim.P) {
          const std::int64_t n0 = t * kTgemmNa;
          const int nb = int(std::min<std::int64_t>(kTgemmNa, sh.N - n0));
          // Panels keep the 96-column layout whatever the real width.
          sim.dma(c, Phase::B_a, MemLevel::DDR, MemLevel::AM, u(kg) * kTgemmNa * kF32, !first);
          sim.dma(c, Phase::C_a_load, MemLevel::DDR, MemLevel::AM, u(mg) * kTgemmNa * kF32, !first);
          for (int ii = 0; ii < mg; ii += bl.m_s) {
            const int ms = std::min(bl.m_s, mg - ii);
            sim.dma(c, Phase::A_s, MemLevel::GSM, MemLevel::SM, u(ms) * u(kg) * kF32, ii > 0);
            if (compute)
              exec_tgemm_kernel(A.block(i + ii, j, ms, kg), B.block(j, n0, kg, nb), C.block(i + ii, n0, ms, nb));
            sim.kernel(c, sim.tiling(ms, kTgemmNa, kg), true);
          }
          sim.dma_after(c, Phase::C_a_store, MemLevel::AM, MemLevel::DDR, u(mg) * kTgemmNa * kF32);
          first = false;
        }
      });
      sim.end_epoch();
    }
  }
  const auto fp = capacity_check(Strategy::TGEMM, bl, model);
  return sim.finish(C, {{MemLevel::GSM, fp.usage(MemLevel::GSM).used_bytes},
                        {MemLevel::SM, fp.usage(MemLevel::SM).used_bytes},
                        {MemLevel::AM, fp.usage(MemLevel::AM).used_bytes}});
}

BlockSizes clamp_blocks(BlockSizes b, const MatrixShape& sh) {
  b.m_a = int(std::min<std::int64_t>(b.m_a, sh.M));
  b.m_g = int(std::min<std::int64_t>(b.m_g, sh.M));
  b.k_a = int(std::min<std::int64_t>(b.k_a, sh.K));
  b.k_g = int(std::min<std::int64_t>(b.k_g, sh.K));
  b.n_a = int(std::min<std::int64_t>(b.n_a, sh.N));
  b.n_g = int(std::min<std::int64_t>(b.n_g, sh.N));
  b.m_s = std::min(b.m_s, b.m_a);
  return b;
}

std::map<MemLevel, std::uint64_t> footprint(Strategy s, const BlockSizes& b, const MatrixShape& sh,
                                            const MachineModel& model) {
  const auto fp = capacity_check(s, clamp_blocks(b, sh), model);
  return {{MemLevel::GSM, fp.usage(MemLevel::GSM).used_bytes},
          {MemLevel::SM, fp.usage(MemLevel::SM).used_bytes},
          {MemLevel::AM, fp.usage(MemLevel::AM).used_bytes}};
}

SimReport ftimm_m(ConstMatView A, ConstMatView B, MatView C, const MatrixShape& sh, const ExecutionPlan& plan,
                  const MachineModel& model, const EngineOptions& opt, bool compute) {
  check_plan(plan, Strategy::FTIMM_M, model);
  Sim sim(plan, sh, model, opt, compute);
  const auto& bl = plan.blocks;
  const std::int64_t mblocks = ceil_div(sh.M, bl.m_a);

  for (std::int64_t i = 0; i < sh.N; i += bl.n_g) {
    const int ng = int(std::min<std::int64_t>(bl.n_g, sh.N - i));
    for (std::int64_t j = 0; j < sh.K; j += bl.k_g) {
      const int kg = int(std::min<std::int64_t>(bl.k_g, sh.K - j));
      sim.begin_epoch();
      sim.shared_dma(Phase::B_g, MemLevel::DDR, MemLevel::GSM, u(kg) * u(ng) * kF32, j > 0);
      sim.for_each_core([&](int c) {
        for (std::int64_t t = c; t < mblocks; t += sim.P) {
          const std::int64_t m0 = t * bl.m_a;
          const int ma = int(std::min<std::int64_t>(bl.m_a, sh.M - m0));
          for (int ii = 0; ii < ng; ii += bl.n_a) {
            const int na = std::min(bl.n_a, ng - ii);
            sim.dma(c, Phase::C_a_load, MemLevel::DDR, MemLevel::AM, u(ma) * u(na) * kF32, false);
            for (int jj = 0; jj < kg; jj += bl.k_a) {
              const int ka = std::min(bl.k_a, kg - jj);
              sim.dma(c, Phase::B_a, MemLevel::GSM, MemLevel::AM, u(ka) * u(na) * kF32, jj > 0);
              for (int tt = 0; tt < ma; tt += bl.m_s) {
                const int ms = std::min(bl.m_s, ma - tt);
                sim.dma(c, Phase::A_s, MemLevel::DDR, MemLevel::SM, u(ms) * u(ka) * kF32, tt > 0);
                const MicroKernelSpec spec = sim.tiling(ms, na, ka);
                if (compute)
                  exec_ftimm_kernel(A.block(m0 + tt, j + jj, ms, ka), B.block(j + jj, i + ii, ka, na),
                                    C.block(m0 + tt, i + ii, ms, na), spec);
                sim.kernel(c, spec, false);
              }
            }
            sim.dma_after(c, Phase::C_a_store, MemLevel::AM, MemLevel::DDR, u(ma) * u(na) * kF32);
          }
        }
      });
      sim.end_epoch();
    }
  }
  return sim.finish(C, footprint(Strategy::FTIMM_M, bl, sh, model));
}

SimReport ftimm_k(ConstMatView A, ConstMatView B, MatView C, const MatrixShape& sh, const ExecutionPlan& plan,
                  const MachineModel& model, const EngineOptions& opt, bool compute) {
  check_plan(plan, Strategy::FTIMM_K, model);
  Sim sim(plan, sh, model, opt, compute);
  const auto& bl = plan.blocks;
  const std::int64_t kblocks = ceil_div(sh.K, bl.k_a);
  std::vector<Matrix> partial(compute ? sim.P : 0);

  for (std::int64_t i = 0; i < sh.M; i += bl.m_g) {
    const int mg = int(std::min<std::int64_t>(bl.m_g, sh.M - i));
    for (std::int64_t j = 0; j < sh.N; j += bl.n_g) {
      const int ng = int(std::min<std::int64_t>(bl.n_g, sh.N - j));
      for (int ii = 0; ii < mg; ii += bl.m_a) {
        const int ma = std::min(bl.m_a, mg - ii);
        for (int jj = 0; jj < ng; jj += bl.n_a) {
          const int na = std::min(bl.n_a, ng - jj);
          sim.begin_epoch();
          if (ii == 0 && jj == 0)
            sim.shared_dma(Phase::C_g_load, MemLevel::DDR, MemLevel::GSM, u(mg) * u(ng) * kF32, false);
          for (auto& p : partial) p = Matrix(ma, na);
          sim.for_each_core([&](int c) {
            bool first = true;
            for (std::int64_t t = c; t < kblocks; t += sim.P) {
              const std::int64_t k0 = t * bl.k_a;
              const int ka = int(std::min<std::int64_t>(bl.k_a, sh.K - k0));
              sim.dma(c, Phase::B_a, MemLevel::DDR, MemLevel::AM, u(ka) * u(na) * kF32, !first);
              for (int uu = 0; uu < ma; uu += bl.m_s) {
                const int ms = std::min(bl.m_s, ma - uu);
                sim.dma(c, Phase::A_s, MemLevel::DDR, MemLevel::SM, u(ms) * u(ka) * kF32, uu > 0);
                const MicroKernelSpec spec = sim.tiling(ms, na, ka);
                if (compute)
                  exec_ftimm_kernel(A.block(i + ii + uu, k0, ms, ka), B.block(k0, j + jj, ka, na),
                                    partial[c].view().block(uu, 0, ms, na), spec);
                sim.kernel(c, spec, false);
              }
              first = false;
            }
          });
          // Fold partial tiles into the GSM copy of C, lowest core first.
          // Idle cores still ship their zero tile.
          for (int c = 0; c < sim.P; ++c) {
            sim.dma_after(c, c == 0 ? Phase::C_a_store : Phase::Reduce, MemLevel::AM, MemLevel::GSM,
                          u(ma) * u(na) * kF32);
            if (!compute) continue;
            const MatView dst = C.block(i + ii, j + jj, ma, na);
            const ConstMatView src = partial[c].view();
            for (int r = 0; r < ma; ++r)
              for (int q = 0; q < na; ++q) dst(r, q) = dst(r, q) + src(r, q);
          }
          if (ii + ma >= mg && jj + na >= ng)
            sim.shared_dma(Phase::C_g_store, MemLevel::GSM, MemLevel::DDR, u(mg) * u(ng) * kF32, false);
          sim.end_epoch();
        }
      }
    }
  }
  return sim.finish(C, footprint(Strategy::FTIMM_K, bl, sh, model));
}

}  // namespace

SimReport run_tgemm(ConstMatView a, ConstMatView b, MatView c, const MachineModel& model, const EngineOptions& opt) {
  const auto sh = shape_of(a, b, c);
  return tgemm(a, b, c, sh, model, opt, opt.compute);
}

SimReport run_ftimm_m(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan, const MachineModel& model,
                      const EngineOptions& opt) {
  const auto sh = shape_of(a, b, c);
  return ftimm_m(a, b, c, sh, plan, model, opt, opt.compute);
}

SimReport run_ftimm_k(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan, const MachineModel& model,
                      const EngineOptions& opt) {
  const auto sh = shape_of(a, b, c);
  return ftimm_k(a, b, c, sh, plan, model, opt, opt.compute);
}

SimReport run_plan(ConstMatView a, ConstMatView b, MatView c, const ExecutionPlan& plan, const MachineModel& model,
                   const EngineOptions& opt) {
  switch (plan.strategy) {
    case Strategy::TGEMM: return run_tgemm(a, b, c, model, opt);
    case Strategy::FTIMM_M: return run_ftimm_m(a, b, c, plan, model, opt);
    case Strategy::FTIMM_K: return run_ftimm_k(a, b, c, plan, model, opt);
  }
  throw Error("unknown strategy");
}

SimReport run_auto(ConstMatView a, ConstMatView b, MatView c, const MachineModel& model, const EngineOptions& opt) {
  const auto sh = shape_of(a, b, c);
  return run_plan(a, b, c, adjust(sh, model), model, opt);
}

SimReport simulate(const ExecutionPlan& plan, const MatrixShape& shape, const MachineModel& model) {
  if (shape.M < 1 || shape.N < 1 || shape.K < 1) throw Error("matrix dimensions must be positive");
  const EngineOptions opt{false, 1};
  switch (plan.strategy) {
    case Strategy::TGEMM: return tgemm({}, {}, {}, shape, model, opt, false);
    case Strategy::FTIMM_M: return ftimm_m({}, {}, {}, shape, plan, model, opt, false);
    case Strategy::FTIMM_K: return ftimm_k({}, {}, {}, shape, plan, model, opt, false);
  }
  throw Error("unknown strategy");
}

}  // namespace dspgemm
