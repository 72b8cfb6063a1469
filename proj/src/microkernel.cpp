#include "dspgemm/microkernel.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "dspgemm/error.hpp"

namespace dspgemm {

int vector_groups(int n_a, int simd_width) { return (n_a + simd_width - 1) / simd_width; }

int register_demand(int m_u, int k_u, int v_n) { return k_u * m_u * v_n + m_u * k_u + k_u * v_n; }

MicroKernelSpec select_tiling(int m_s, int n_a, const MachineModel& model, int k_a) {
  if (n_a < 1 || n_a > kMaxNa) throw Error("select_tiling: n_a must be in [1, 96], got " + std::to_string(n_a));
  if (m_s < 1) throw Error("select_tiling: m_s must be positive");
  if (k_a < 1) throw Error("select_tiling: k_a must be positive");

  const int v_n = vector_groups(n_a, model.simd_width());
  const int budget = model.core.usable_vector_registers();
  const int t_fma = model.latency.t_fma;
  auto fits = [&](int mu, int ku) { return register_demand(mu, ku, v_n) <= budget; };
  auto make = [&](int mu, int ku) {
    return MicroKernelSpec{m_s, n_a, k_a == INT_MAX ? 0 : k_a, mu, ku, v_n};
  };

  // Wide B panels fill all FMAC units from one broadcast per cycle: unroll
  // rows only, as far as the register file allows.
  if (m_s >= t_fma && n_a > 2 * model.simd_width()) {
    for (int mu = m_s; mu >= t_fma; --mu)
      if (fits(mu, 1)) return make(mu, 1);
  }

  // Otherwise keep m_u = m_s (shrunk to fit) and split k into partial sums
  // until m_u * k_u covers the FMAC latency.
  const int ku_cap = std::min(k_a, 64);
  for (int mu = m_s; mu >= 1; --mu) {
    int best = 0;
    for (int ku = 2; ku <= ku_cap && fits(mu, ku); ++ku) {
      best = ku;
      if (mu * ku >= t_fma) break;
    }
    if (best > 0) return make(mu, best);
  }
  for (int mu = m_s; mu >= 1; --mu)
    if (fits(mu, 1)) return make(mu, 1);
  throw Error("select_tiling: register file cannot hold even a 1x1 micro-kernel tile");
}

std::vector<std::string> check_spec(const MicroKernelSpec& s, const MachineModel& model) {
  std::vector<std::string> out;
  if (s.m_s < 1 || s.n_a < 1 || s.m_u < 1 || s.k_u < 1) out.push_back("all tiling fields must be positive");
  if (s.n_a > kMaxNa) out.push_back("n_a exceeds 96");
  if (s.m_u > s.m_s) out.push_back("m_u exceeds m_s");
  if (s.k_a > 0 && s.k_u > s.k_a) out.push_back("k_u exceeds k_a");
  if (s.v_n != vector_groups(s.n_a, model.simd_width())) out.push_back("v_n does not match n_a");
  if (register_demand(s.m_u, s.k_u, s.v_n) > model.core.usable_vector_registers())
    out.push_back("register budget exceeded");
  return out;
}

std::string_view to_string(Opcode op) {
  switch (op) {
    case Opcode::SLDH: return "SLDH";
    case Opcode::SLDW: return "SLDW";
    case Opcode::SFEXTS32L: return "SFEXTS32L";
    case Opcode::SBALE2H: return "SBALE2H";
    case Opcode::SVBCAST: return "SVBCAST";
    case Opcode::SVBCAST2: return "SVBCAST2";
    case Opcode::VLDW: return "VLDW";
    case Opcode::VLDDW: return "VLDDW";
    case Opcode::VFMULAS32: return "VFMULAS32";
    case Opcode::SBR: return "SBR";
    case Opcode::SADD: return "SADD";
    case Opcode::NOP: return "NOP";
  }
  return "?";
}

std::string_view to_string(Unit unit) {
  switch (unit) {
    case Unit::ScalarLS1: return "ScalarLS1";
    case Unit::ScalarFMAC1: return "ScalarFMAC1";
    case Unit::ScalarFMAC2: return "ScalarFMAC2";
    case Unit::SIEU: return "SIEU";
    case Unit::VectorLS1: return "VectorLS1";
    case Unit::VectorLS2: return "VectorLS2";
    case Unit::VectorFMAC1: return "VectorFMAC1";
    case Unit::VectorFMAC2: return "VectorFMAC2";
    case Unit::VectorFMAC3: return "VectorFMAC3";
    case Unit::Control: return "Control";
  }
  return "?";
}

std::string_view display_name(Unit unit) {
  switch (unit) {
    case Unit::ScalarLS1: return "Scalar Load&Store1";
    case Unit::ScalarFMAC1: return "Scalar FMAC1";
    case Unit::ScalarFMAC2: return "Scalar FMAC2";
    case Unit::SIEU: return "SIEU";
    case Unit::VectorLS1: return "Vector Load&Store1";
    case Unit::VectorLS2: return "Vector Load&Store2";
    case Unit::VectorFMAC1: return "Vector FMAC1";
    case Unit::VectorFMAC2: return "Vector FMAC2";
    case Unit::VectorFMAC3: return "Vector FMAC3";
    case Unit::Control: return "Control unit";
  }
  return "?";
}

bool is_scalar_unit(Unit unit) {
  switch (unit) {
    case Unit::ScalarLS1:
    case Unit::ScalarFMAC1:
    case Unit::ScalarFMAC2:
    case Unit::SIEU:
    case Unit::Control:
      return true;
    default:
      return false;
  }
}

std::string to_string(const Reg& r) {
  auto idx = [](auto... v) {
    std::string s;
    ((s += "[" + std::to_string(v) + "]"), ...);
    return s;
  };
  switch (r.file) {
    case RegFile::ScalarRaw: return "R" + idx(r.a);
    case RegFile::ScalarLo: return "Rlo" + idx(r.a);
    case RegFile::ScalarHi: return "Rhi" + idx(r.a);
    case RegFile::VecA: return "Va" + idx(r.a, r.b);
    case RegFile::VecB: return "Vb" + idx(r.a, r.b);
    case RegFile::VecC: return "Vc" + idx(r.a, r.b, r.c);
  }
  return "?";
}

std::vector<std::array<int, kNumUnits>> VliwSchedule::steady_state() const {
  std::vector<std::array<int, kNumUnits>> grid(ii);
  for (auto& row : grid) row.fill(-1);
  for (std::size_t i = 0; i < body.size(); ++i) grid[slot(body[i].time)][int(body[i].unit)] = int(i);
  return grid;
}

int VliwSchedule::count(Opcode op) const {
  return int(std::count_if(body.begin(), body.end(), [&](const Instruction& in) { return in.op == op; }));
}

namespace {

int latency_of(Opcode op, const MachineModel& m) {
  const auto& t = m.latency;
  switch (op) {
    case Opcode::SLDH:
    case Opcode::SLDW: return t.t_sld;
    case Opcode::SFEXTS32L:
    case Opcode::SBALE2H: return t.t_sext;
    case Opcode::SVBCAST:
    case Opcode::SVBCAST2: return t.t_bcast;
    case Opcode::VLDW:
    case Opcode::VLDDW: return t.t_vldw;
    case Opcode::VFMULAS32: return t.t_fma;
    case Opcode::SBR: return t.t_sbr;
    default: return 1;
  }
}

int broadcast_fp32(Opcode op) {
  if (op == Opcode::SVBCAST) return 1;
  if (op == Opcode::SVBCAST2) return 2;
  return 0;
}

int load_bytes(Opcode op, const MachineModel& m) {
  const int vec = 4 * m.simd_width();
  if (op == Opcode::VLDW) return vec;
  if (op == Opcode::VLDDW) return 2 * vec;
  return 0;
}

int fmac_units(const MachineModel& m) { return std::min(m.core.fmac_units_per_vpe, kNumVectorFmacUnits); }

bool unit_allowed(Opcode op, Unit u, const MachineModel& m) {
  switch (op) {
    case Opcode::SLDH:
    case Opcode::SLDW: return u == Unit::ScalarLS1;
    case Opcode::SFEXTS32L: return u == Unit::ScalarFMAC1;
    case Opcode::SVBCAST:
    case Opcode::SVBCAST2: return u == Unit::ScalarFMAC2;
    case Opcode::SBALE2H:
    case Opcode::SADD: return u == Unit::SIEU;
    case Opcode::VLDW:
    case Opcode::VLDDW: return u == Unit::VectorLS1 || u == Unit::VectorLS2;
    case Opcode::VFMULAS32: {
      const int idx = int(u) - int(Unit::VectorFMAC1);
      return idx >= 0 && idx < fmac_units(m);
    }
    case Opcode::SBR: return u == Unit::Control;
    case Opcode::NOP: return true;
  }
  return false;
}

Unit fmac_unit(int i) { return Unit(int(Unit::VectorFMAC1) + i); }

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Modulo reservation table for one candidate loop-body length.
class Placer {
 public:
  Placer(const MachineModel& m, int ii)
      : m_(m), ii_(ii), busy_(ii), scalar_(ii, 0), vector_(ii, 0), bcast_(ii, 0), bytes_(ii, 0) {
    for (auto& r : busy_) r.fill(false);
  }

  int slot(int t) const { return ((t % ii_) + ii_) % ii_; }

  bool fits(Opcode op, Unit u, int t) const {
    const int s = slot(t);
    if (busy_[s][int(u)]) return false;
    if (is_scalar_unit(u) ? scalar_[s] >= m_.core.scalar_issue_width : vector_[s] >= m_.core.vector_issue_width)
      return false;
    if (bcast_[s] + broadcast_fp32(op) > m_.core.broadcast_fp32_per_cycle) return false;
    if (bytes_[s] + load_bytes(op, m_) > m_.core.vector_load_bytes_per_cycle) return false;
    return true;
  }

  void take(const Instruction& in) {
    const int s = slot(in.time);
    busy_[s][int(in.unit)] = true;
    (is_scalar_unit(in.unit) ? scalar_[s] : vector_[s]) += 1;
    bcast_[s] += broadcast_fp32(in.op);
    bytes_[s] += load_bytes(in.op, m_);
    body.push_back(in);
  }

  // Searches [lo, hi] from the preferred end for a slot on any listed unit.
  bool place(Opcode op, std::initializer_list<Unit> units, int lo, int hi, bool latest, std::vector<Reg> dst,
             std::vector<Reg> src, int* placed_at = nullptr) {
    for (int k = 0; k <= hi - lo; ++k) {
      const int t = latest ? hi - k : lo + k;
      for (Unit u : units) {
        if (fits(op, u, t)) {
          take(Instruction{op, u, t, std::move(dst), std::move(src)});
          if (placed_at) *placed_at = t;
          return true;
        }
      }
    }
    return false;
  }

  std::vector<Instruction> body;

 private:
  const MachineModel& m_;
  int ii_;
  std::vector<std::array<bool, kNumUnits>> busy_;
  std::vector<int> scalar_, vector_, bcast_, bytes_;
};

struct BroadcastGroup {
  std::vector<int> pairs;  // pair index p = mu * k_u + ku
};

std::optional<VliwSchedule> try_schedule(const MicroKernelSpec& spec, const MachineModel& m, int ii) {
  const int m_u = spec.m_u, k_u = spec.k_u, v_n = spec.v_n;
  const int pairs = m_u * k_u;
  const int units = std::min(fmac_units(m), v_n * m.core.broadcast_fp32_per_cycle);
  const bool dual = v_n < fmac_units(m) && m.core.broadcast_fp32_per_cycle >= 2;
  const auto& lat = m.latency;

  Placer pl(m, ii);

  // FMACs in (mu, ku, nn) order, packed onto the usable units.
  std::vector<std::vector<int>> fmac_time(pairs, std::vector<int>(v_n));
  int row = 0, used = 0;
  for (int p = 0; p < pairs; ++p) {
    const int mu = p / k_u, ku = p % k_u;
    for (int nn = 0; nn < v_n; ++nn) {
      bool ok = false;
      while (!ok && row < ii) {
        for (int u = used; u < units && !ok; ++u) {
          if (pl.fits(Opcode::VFMULAS32, fmac_unit(u), row)) {
            Reg acc{RegFile::VecC, std::int16_t(ku), std::int16_t(mu), std::int16_t(nn)};
            pl.take(Instruction{Opcode::VFMULAS32, fmac_unit(u), row, {acc},
                                {Reg{RegFile::VecA, std::int16_t(mu), std::int16_t(ku)},
                                 Reg{RegFile::VecB, std::int16_t(ku), std::int16_t(nn)}, acc}});
            fmac_time[p][nn] = row;
            used = u + 1;
            ok = true;
          }
        }
        if (!ok) {
          ++row;
          used = 0;
        }
      }
      if (!ok) return std::nullopt;
      if (used == units) {
        ++row;
        used = 0;
      }
    }
  }

  auto consumer_range = [&](const std::vector<int>& ps, int nn_lo, int nn_hi) {
    int e = INT_MAX, l = INT_MIN;
    for (int p : ps)
      for (int nn = nn_lo; nn < nn_hi; ++nn) {
        e = std::min(e, fmac_time[p][nn]);
        l = std::max(l, fmac_time[p][nn]);
      }
    return std::pair{e, l};
  };

  // Broadcast chains, placed as late as the consumers allow.
  std::vector<BroadcastGroup> groups;
  for (int p = 0; p < pairs;) {
    if (dual && p + 1 < pairs) {
      groups.push_back({{p, p + 1}});
      p += 2;
    } else {
      groups.push_back({{p}});
      p += 1;
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& ps = groups[g].pairs;
    const bool two = ps.size() == 2;
    const auto [e, l] = consumer_range(ps, 0, v_n);
    std::vector<Reg> va;
    for (int p : ps) va.push_back(Reg{RegFile::VecA, std::int16_t(p / k_u), std::int16_t(p % k_u)});
    const Reg raw{RegFile::ScalarRaw, std::int16_t(g)};
    const Reg lo{RegFile::ScalarLo, std::int16_t(g)};
    const Reg hi{RegFile::ScalarHi, std::int16_t(g)};

    int tb = 0;
    const Opcode bop = two ? Opcode::SVBCAST2 : Opcode::SVBCAST;
    std::vector<Reg> bsrc = two ? std::vector<Reg>{lo, hi} : std::vector<Reg>{lo};
    if (!pl.place(bop, {Unit::ScalarFMAC2}, l - ii - lat.t_bcast + 1, e - lat.t_bcast, true, va, bsrc, &tb))
      return std::nullopt;

    int te = 0, th = tb;
    if (!pl.place(Opcode::SFEXTS32L, {Unit::ScalarFMAC1}, tb - ii - lat.t_sext + 1, tb - lat.t_sext, true, {lo},
                  {raw}, &te))
      return std::nullopt;
    if (two && !pl.place(Opcode::SBALE2H, {Unit::SIEU}, tb - ii - lat.t_sext + 1, tb - lat.t_sext, true, {hi},
                         {raw}, &th))
      return std::nullopt;
    const int first = two ? std::min(te, th) : te;
    const int last = two ? std::max(te, th) : te;
    if (!pl.place(dual ? Opcode::SLDW : Opcode::SLDH, {Unit::ScalarLS1}, last - ii - lat.t_sld + 1,
                  first - lat.t_sld, true, {raw}, {}))
      return std::nullopt;
  }

  // B vectors: one VLDDW per adjacent nn pair, VLDW for an odd leftover.
  // Loads go as early as the register's previous readers allow.
  for (int ku = 0; ku < k_u; ++ku) {
    std::vector<int> ps;
    for (int mu = 0; mu < m_u; ++mu) ps.push_back(mu * k_u + ku);
    for (int nn = 0; nn < v_n; nn += 2) {
      const int width = std::min(2, v_n - nn);
      const auto [e, l] = consumer_range(ps, nn, nn + width);
      std::vector<Reg> vb;
      for (int j = 0; j < width; ++j) vb.push_back(Reg{RegFile::VecB, std::int16_t(ku), std::int16_t(nn + j)});
      if (!pl.place(width == 2 ? Opcode::VLDDW : Opcode::VLDW, {Unit::VectorLS1, Unit::VectorLS2},
                    l - ii - lat.t_vldw + 1, e - lat.t_vldw, false, vb, {}))
        return std::nullopt;
    }
  }

  if (lat.t_sbr > ii) return std::nullopt;
  if (!pl.place(Opcode::SBR, {Unit::Control}, 0, ii - lat.t_sbr, true, {}, {})) return std::nullopt;
  if (!pl.place(Opcode::SADD, {Unit::SIEU}, 0, ii - 1, false, {}, {})) return std::nullopt;

  VliwSchedule s;
  s.ii = ii;
  s.m_u = m_u;
  s.k_u = k_u;
  s.v_n = v_n;
  s.body = std::move(pl.body);
  s.iterations_covered = pairs;
  int min_t = 0, max_end = ii;
  for (const auto& in : s.body) {
    min_t = std::min(min_t, in.time);
    max_end = std::max(max_end, in.time + latency_of(in.op, m));
  }
  s.prologue_cycles = -min_t;
  s.epilogue_cycles = max_end - ii;
  return s;
}

}  // namespace

VliwSchedule generate_schedule(const MicroKernelSpec& spec, const MachineModel& model) {
  if (auto bad = check_spec(spec, model); !bad.empty()) throw Error("generate_schedule: " + bad.front());

  const int m_u = spec.m_u, k_u = spec.k_u, v_n = spec.v_n;
  const int pairs = m_u * k_u;
  const int fmacs = pairs * v_n;
  const int units = std::min(fmac_units(model), v_n * model.core.broadcast_fp32_per_cycle);
  const bool dual = v_n < fmac_units(model) && model.core.broadcast_fp32_per_cycle >= 2;
  const int groups = dual ? ceil_div(pairs, 2) : pairs;
  const int dual_groups = dual ? pairs / 2 : 0;
  const int loads = k_u * ceil_div(v_n, 2);
  const int bytes = k_u * v_n * 4 * model.simd_width();
  const int scalar_ops = groups * 3 + dual_groups + 2;  // chains + SBR + SADD
  const int vector_ops = fmacs + loads;

  int lower = std::max({ceil_div(fmacs, units), groups, dual_groups + 1, ceil_div(loads, 2),
                        ceil_div(bytes, model.core.vector_load_bytes_per_cycle), model.latency.t_fma,
                        model.latency.t_sbr, ceil_div(scalar_ops, model.core.scalar_issue_width),
                        ceil_div(vector_ops, model.core.vector_issue_width),
                        ceil_div(pairs, model.core.broadcast_fp32_per_cycle)});
  for (int ii = lower; ii <= lower + 64; ++ii)
    if (auto s = try_schedule(spec, model, ii)) return *std::move(s);
  throw Error("generate_schedule: cannot pack operand chains for m_u=" + std::to_string(m_u) +
              " k_u=" + std::to_string(k_u) + " v_n=" + std::to_string(v_n));
}

std::vector<Issue> verify_schedule(const VliwSchedule& sched, const MicroKernelSpec& spec,
                                   const MachineModel& model) {
  std::vector<Issue> issues;
  auto report = [&](IssueKind k, int slot, std::string msg) {
    issues.push_back(Issue{k, slot < 0 ? -1 : slot + 1, std::move(msg)});
  };
  const int ii = sched.ii;
  if (ii <= 0) {
    report(IssueKind::Coverage, -1, "empty loop body");
    return issues;
  }

  std::vector<std::array<int, kNumUnits>> occupancy(ii);
  for (auto& r : occupancy) r.fill(0);
  std::vector<int> scalar(ii, 0), vector(ii, 0), bcast(ii, 0), bytes(ii, 0);
  for (const auto& in : sched.body) {
    const int s = sched.slot(in.time);
    if (!unit_allowed(in.op, in.unit, model))
      report(IssueKind::IllegalUnit, s,
             std::string(to_string(in.op)) + " cannot issue on " + std::string(to_string(in.unit)));
    occupancy[s][int(in.unit)] += 1;
    (is_scalar_unit(in.unit) ? scalar[s] : vector[s]) += 1;
    bcast[s] += broadcast_fp32(in.op);
    bytes[s] += load_bytes(in.op, model);
  }
  for (int s = 0; s < ii; ++s) {
    for (int u = 0; u < kNumUnits; ++u)
      if (occupancy[s][u] > 1)
        report(IssueKind::UnitConflict, s, std::string(to_string(Unit(u))) + " issues more than once");
    if (scalar[s] > model.core.scalar_issue_width) report(IssueKind::ScalarIssueWidth, s, "scalar issue width exceeded");
    if (vector[s] > model.core.vector_issue_width) report(IssueKind::VectorIssueWidth, s, "vector issue width exceeded");
    if (bcast[s] > model.core.broadcast_fp32_per_cycle)
      report(IssueKind::BroadcastThroughput, s, "broadcast throughput exceeded");
    if (bytes[s] > model.core.vector_load_bytes_per_cycle)
      report(IssueKind::LoadBandwidth, s, "vector load bandwidth exceeded");
  }

  // Producers of every non-accumulator register; accumulators are their own
  // loop-carried producers.
  std::map<Reg, std::vector<int>> producers;
  std::map<Reg, std::vector<int>> acc_writes;
  for (std::size_t i = 0; i < sched.body.size(); ++i) {
    for (const auto& r : sched.body[i].dst) {
      if (r.file == RegFile::VecC)
        acc_writes[r].push_back(sched.body[i].time);
      else
        producers[r].push_back(int(i));
    }
  }

  const int t_fma = model.latency.t_fma;
  for (auto& [reg, times] : acc_writes) {
    std::sort(times.begin(), times.end());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const int next = i + 1 < times.size() ? times[i + 1] : times.front() + ii;
      if (next - times[i] < t_fma)
        report(IssueKind::AccumulatorHazard, sched.slot(times[i]), "accumulator reuse hazard on " + to_string(reg));
    }
  }

  for (const auto& in : sched.body) {
    for (const auto& r : in.src) {
      if (r.file == RegFile::VecC) continue;
      auto it = producers.find(r);
      if (it == producers.end()) {
        report(IssueKind::MissingProducer, sched.slot(in.time), "no producer for " + to_string(r));
        continue;
      }
      if (it->second.size() > 1) {
        report(IssueKind::RegisterOverwrite, sched.slot(in.time), to_string(r) + " written twice per body");
        continue;
      }
      const auto& prod = sched.body[it->second.front()];
      const int lat = latency_of(prod.op, model);
      if (prod.time + lat > in.time)
        report(IssueKind::OperandLatency, sched.slot(in.time),
               std::string(to_string(in.op)) + " reads " + to_string(r) + " before it is ready");
      else if (in.time >= prod.time + ii + lat)
        report(IssueKind::RegisterOverwrite, sched.slot(in.time),
               std::string(to_string(in.op)) + " reads " + to_string(r) + " after the next body overwrote it");
    }
  }

  // Every (ku, mu, nn) product exactly once, with matching operands.
  std::set<std::tuple<int, int, int>> seen;
  int fmacs = 0;
  for (const auto& in : sched.body) {
    if (in.op != Opcode::VFMULAS32) continue;
    ++fmacs;
    if (in.dst.size() != 1 || in.dst[0].file != RegFile::VecC || in.src.size() != 3) {
      report(IssueKind::Coverage, sched.slot(in.time), "malformed VFMULAS32");
      continue;
    }
    const Reg& c = in.dst[0];
    const Reg a{RegFile::VecA, c.b, c.a}, b{RegFile::VecB, c.a, c.c};
    if (!(in.src[0] == a && in.src[1] == b && in.src[2] == c))
      report(IssueKind::Coverage, sched.slot(in.time), "VFMULAS32 operands do not match " + to_string(c));
    if (c.a < 0 || c.a >= spec.k_u || c.b < 0 || c.b >= spec.m_u || c.c < 0 || c.c >= spec.v_n)
      report(IssueKind::Coverage, sched.slot(in.time), to_string(c) + " outside the tile");
    if (!seen.insert({c.a, c.b, c.c}).second)
      report(IssueKind::Coverage, sched.slot(in.time), to_string(c) + " accumulated twice per body");
  }
  if (fmacs != spec.m_u * spec.k_u * spec.v_n)
    report(IssueKind::Coverage, -1,
           "expected " + std::to_string(spec.m_u * spec.k_u * spec.v_n) + " VFMULAS32, found " +
               std::to_string(fmacs));

  const int branches = sched.count(Opcode::SBR);
  if (branches != 1) report(IssueKind::Branch, -1, "expected exactly one SBR, found " + std::to_string(branches));
  for (const auto& in : sched.body)
    if (in.op == Opcode::SBR && ii - sched.slot(in.time) < model.latency.t_sbr)
      report(IssueKind::Branch, sched.slot(in.time), "SBR issued fewer than t_sbr cycles before loop end");

  return issues;
}

namespace {

long long group_cycles(const VliwSchedule& s, int k_a, const MachineModel& m) {
  const long long iters = (k_a + s.k_u - 1) / s.k_u;
  long long cycles = s.prologue_cycles + iters * s.ii + s.epilogue_cycles;
  const int units = fmac_units(m);
  if (s.k_u > 1) {
    // Partial sums fold into ku = 0 in ascending order.
    const int adds = (s.k_u - 1) * s.m_u * s.v_n;
    cycles += std::max(ceil_div(adds, units), (s.k_u - 1) * m.latency.t_fma);
  }
  const int c_bytes = s.m_u * s.v_n * 4 * m.simd_width();
  cycles += 2 * ceil_div(c_bytes, m.core.vector_load_bytes_per_cycle) + m.latency.t_vldw;
  return cycles;
}

}  // namespace

CycleEstimate estimate_cycles(const VliwSchedule& sched, const MicroKernelSpec& spec, int k_a,
                              const MachineModel& model) {
  if (k_a < 1) throw Error("estimate_cycles: k_a must be positive");
  CycleEstimate est;
  est.ii = sched.ii;
  est.filled_fmac_slots = sched.filled_fmac_slots();
  est.fmac_slots = kNumVectorFmacUnits * sched.ii;
  est.fmac_efficiency = double(est.filled_fmac_slots) / est.fmac_slots;

  const int full_groups = spec.m_s / spec.m_u;
  const int tail_rows = spec.m_s % spec.m_u;
  est.total_cycles = full_groups * group_cycles(sched, k_a, model);
  est.cycles_per_k_iter = full_groups * double(sched.ii) / sched.k_u;
  if (tail_rows > 0) {
    MicroKernelSpec tail = spec;
    tail.m_u = tail_rows;
    tail.m_s = tail_rows;
    const VliwSchedule ts = generate_schedule(tail, model);
    est.total_cycles += group_cycles(ts, k_a, model);
    est.cycles_per_k_iter += double(ts.ii) / ts.k_u;
  }
  return est;
}

double theoretical_upper_bound(int n_a) { return theoretical_upper_bound(n_a, default_ftm7032()); }

double theoretical_upper_bound(int n_a, const MachineModel& model) {
  if (n_a < 1 || n_a > kMaxNa) throw Error("theoretical_upper_bound: n_a must be in [1, 96]");
  const int v_n = vector_groups(n_a, model.simd_width());
  const int units = fmac_units(model);
  // Each broadcast scalar feeds v_n FMACs.
  const int usable = std::min(units, v_n * model.core.broadcast_fp32_per_cycle);
  return double(usable) / units;
}

std::string format_schedule_table(const VliwSchedule& sched) {
  const auto grid = sched.steady_state();
  constexpr int label_w = 20, cell_w = 11;
  std::ostringstream out;
  auto pad = [&](std::string_view s, int w) {
    out << s;
    for (int i = int(s.size()); i < w; ++i) out << ' ';
  };
  pad("Cycle", label_w);
  for (int c = 1; c <= sched.ii; ++c) pad(std::to_string(c), cell_w);
  out << '\n';
  for (int u = 0; u < kNumUnits; ++u) {
    pad(display_name(Unit(u)), label_w);
    for (int c = 0; c < sched.ii; ++c) {
      const int idx = grid[c][u];
      pad(idx < 0 ? "." : to_string(sched.body[idx].op), cell_w);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_schedule_csv(const VliwSchedule& sched) {
  const auto grid = sched.steady_state();
  std::ostringstream out;
  out << "unit";
  for (int c = 1; c <= sched.ii; ++c) out << ',' << c;
  out << '\n';
  for (int u = 0; u < kNumUnits; ++u) {
    out << to_string(Unit(u));
    for (int c = 0; c < sched.ii; ++c) {
      const int idx = grid[c][u];
      out << ',';
      if (idx >= 0) out << to_string(sched.body[idx].op);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dspgemm

namespace dspgemm {

std::int64_t KernelCycleCache::cycles(const MicroKernelSpec& s) {
  const std::array<int, 6> key{s.m_s, s.n_a, s.k_a, s.m_u, s.k_u, s.v_n};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  MicroKernelSpec group = s;
  group.m_s = std::min(s.m_s, s.m_u);
  const auto est = estimate_cycles(generate_schedule(group, model_), s, s.k_a, model_);
  memo_.emplace(key, est.total_cycles);
  return est.total_cycles;
}

}  // namespace dspgemm
