#include "validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace nnmd::tools {

namespace {

constexpr double kForceTolerance = 1e-12;
constexpr double kGradientTolerance = 1e-6;
constexpr double kRotationTolerance = 1e-10;
constexpr double kPermutationTolerance = 1e-12;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

struct Variant {
  Scheme scheme;
  bool load_balance;
  std::string label() const {
    return std::string(to_string(scheme)) + (load_balance ? "+lb" : "");
  }
};

std::vector<Variant> variants(const RankTopology& topo) {
  std::vector<Variant> out{{Scheme::ThreeStage, false}, {Scheme::P2P, false}};
  if (topo.ranks_per_node() == 4) {
    out.push_back({Scheme::NodeBased, false});
    out.push_back({Scheme::NodeBased, true});
  }
  return out;
}

RunConfig double_run(const Config& cfg, const Variant& v) {
  RunConfig run = cfg.run;
  run.scheme = v.scheme;
  run.load_balance = v.load_balance;
  run.precision = PrecisionMode::Double;
  return run;
}

DeepPotential make_potential(const ModelParams& params, const CutoffSpec& cutoff) {
  ModelParams p = params;
  p.precision = PrecisionMode::Double;
  return DeepPotential(std::move(p), cutoff);
}

SuiteResult ghost_sets(const Config& cfg, const SystemState& sys, const ModelParams& params) {
  SuiteResult res{"ghost-sets", true, ""};
  const RankTopology topo = cfg.topo();
  const auto boxes = decompose(sys.box, topo);
  long checked = 0;
  for (const auto& v : variants(topo)) {
    Simulation sim(sys, make_potential(params, cfg.potential.cutoff), cfg.potential.sel,
                   double_run(cfg, v), topo, cfg.costmodel);
    const double g = sim.exchange().plan().ghost_cutoff;
    std::vector<int> gids;
    std::vector<Vec3> pos;
    for (const auto& s : sim.stores())
      for (int i = 0; i < s.nlocal; ++i) {
        gids.push_back(s.gid[i]);
        pos.push_back(s.pos[i]);
      }
    for (const auto& s : sim.stores()) {
      std::vector<AtomKey> expected;
      if (v.load_balance) {
        const int node = topo.node_of(s.rank);
        std::set<AtomKey> keys;
        for (const auto& k : oracle_ghosts(gids, pos, node_box(topo, sys.box, node), g, sys.box))
          keys.insert(k);
        for (int peer : topo.ranks_of_node(node)) {
          if (peer == s.rank) continue;
          const auto& ps = sim.stores()[peer];
          for (int i = 0; i < ps.nlocal; ++i) keys.insert(ps.key(i));
        }
        expected.assign(keys.begin(), keys.end());
      } else {
        expected = oracle_ghosts(gids, pos, boxes[s.rank], g, sys.box);
      }
      ++checked;
      if (ghost_keys(s) != expected) {
        res.passed = false;
        res.detail = v.label() + ": rank " + std::to_string(s.rank) + " holds " +
                     std::to_string(ghost_keys(s).size()) + " ghosts, oracle " +
                     std::to_string(expected.size());
        return res;
      }
    }
  }
  res.detail = std::to_string(checked) + " rank views match";
  return res;
}

SuiteResult scheme_equivalence(const Config& cfg, const SystemState& sys,
                               const ModelParams& params) {
  SuiteResult res{"scheme-equivalence", true, ""};
  const RankTopology topo = cfg.topo();
  ReferenceSimulation ref(sys, make_potential(params, cfg.potential.cutoff), cfg.potential.sel,
                          double_run(cfg, {cfg.run.scheme, false}));
  double worst = 0.0;
  for (const auto& v : variants(topo)) {
    Simulation sim(sys, make_potential(params, cfg.potential.cutoff), cfg.potential.sel,
                   double_run(cfg, v), topo, cfg.costmodel);
    const auto f = sim.forces();
    for (std::size_t i = 0; i < f.size(); ++i)
      for (int d = 0; d < 3; ++d) worst = std::max(worst, std::fabs(f[i][d] - ref.forces()[i][d]));
  }
  res.passed = worst <= kForceTolerance;
  res.detail = "max |dF| " + fmt(worst) + " eV/A";
  return res;
}

// Open (non-periodic) cluster helpers.
struct Cluster32 {
  std::vector<Vec3> pos;
  std::vector<int> types;
};

Cluster32 random_cluster(int ntypes, std::uint64_t seed, double side) {
  const SystemState s = random_system(SimBox({side, side, side}), 32, ntypes, 1.5, seed);
  return {s.positions, s.types};
}

ForceResult cluster_eval(DeepPotential& pot, const std::vector<Vec3>& pos,
                         const std::vector<int>& types, const std::vector<int>& sel) {
  std::vector<int> centers(pos.size());
  std::iota(centers.begin(), centers.end(), 0);
  const auto list = build_neighbor_list(pos, types, {}, centers, pot.cutoff(), sel);
  return compute_energy_forces(pot, pos, types, list);
}

double cluster_side(const Config& cfg) { return std::clamp(cfg.potential.cutoff.rc, 6.0, 8.0); }

SuiteResult gradients(const Config& cfg, const ModelParams& params) {
  SuiteResult res{"gradients", true, ""};
  DeepPotential pot = make_potential(params, cfg.potential.cutoff);
  const int ntypes = params.dims.ntypes;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto c = random_cluster(ntypes, seed, cluster_side(cfg));
    const auto r = cluster_eval(pot, c.pos, c.types, cfg.potential.sel);
    double fmax = 0.0;
    for (const auto& f : r.forces)
      for (double v : f) fmax = std::max(fmax, std::fabs(v));
    const double h = 1e-4;
    for (std::size_t i = 0; i < c.pos.size(); i += 4)
      for (int d = 0; d < 3; ++d) {
        auto xp = c.pos, xm = c.pos;
        xp[i][d] += h;
        xm[i][d] -= h;
        const double fd = -(cluster_eval(pot, xp, c.types, cfg.potential.sel).energy -
                            cluster_eval(pot, xm, c.types, cfg.potential.sel).energy) /
                          (2.0 * h);
        const double den = std::max(std::fabs(fd), 1e-2 * fmax);
        worst = std::max(worst, std::fabs(fd - r.forces[i][d]) / den);
      }
  }
  res.passed = worst < kGradientTolerance;
  res.detail = "max relative error " + fmt(worst);
  return res;
}

SuiteResult invariance(const Config& cfg, const ModelParams& params) {
  SuiteResult res{"invariance", true, ""};
  DeepPotential pot = make_potential(params, cfg.potential.cutoff);
  const int ntypes = params.dims.ntypes;
  double rot = 0.0, perm = 0.0;
  bool translation_exact = true;
  for (std::uint64_t seed = 11; seed <= 13; ++seed) {
    auto c = random_cluster(ntypes, seed, cluster_side(cfg));
    // Coordinates on a 2^-20 grid keep the shifted differences exact.
    for (auto& x : c.pos)
      for (double& v : x) v = std::ldexp(std::round(std::ldexp(v, 20)), -20);
    const double e0 = cluster_eval(pot, c.pos, c.types, cfg.potential.sel).energy;

    auto shifted = c.pos;
    for (auto& x : shifted) x += Vec3{3.25, -1.5, 7.0};
    if (cluster_eval(pot, shifted, c.types, cfg.potential.sel).energy != e0)
      translation_exact = false;

    Rng rng(seed);
    const double q0 = rng.normal(), q1 = rng.normal(), q2 = rng.normal(), q3 = rng.normal();
    const double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
    const double a = q0 / n, b = q1 / n, cc = q2 / n, d = q3 / n;
    const double m[3][3] = {{a * a + b * b - cc * cc - d * d, 2 * (b * cc - a * d), 2 * (b * d + a * cc)},
                            {2 * (b * cc + a * d), a * a - b * b + cc * cc - d * d, 2 * (cc * d - a * b)},
                            {2 * (b * d - a * cc), 2 * (cc * d + a * b), a * a - b * b - cc * cc + d * d}};
    auto rotated = c.pos;
    for (auto& x : rotated) {
      const Vec3 y = x;
      for (int i = 0; i < 3; ++i) x[i] = m[i][0] * y[0] + m[i][1] * y[1] + m[i][2] * y[2];
    }
    const double er = cluster_eval(pot, rotated, c.types, cfg.potential.sel).energy;
    rot = std::max(rot, std::fabs(er - e0) / std::fabs(e0));

    std::vector<std::size_t> order(c.pos.size());
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::rotate(order.begin(), order.begin() + 5, order.end());
    std::vector<Vec3> pp;
    std::vector<int> pt;
    for (auto k : order) {
      pp.push_back(c.pos[k]);
      pt.push_back(c.types[k]);
    }
    const double ep = cluster_eval(pot, pp, pt, cfg.potential.sel).energy;
    perm = std::max(perm, std::fabs(ep - e0) / std::fabs(e0));
  }
  res.passed = translation_exact && rot < kRotationTolerance && perm < kPermutationTolerance;
  res.detail = std::string("translation ") + (translation_exact ? "bitwise" : "differs") +
               ", rotation " + fmt(rot) + ", permutation " + fmt(perm);
  return res;
}

template <typename Fn>
SuiteResult guarded(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {name, false, e.what()};
  }
}

}  // namespace

std::vector<SuiteResult> run_validation(const Config& cfg) {
  const SystemState sys = build_system(cfg);
  const ModelParams params = build_params(cfg);
  return {guarded("ghost-sets", [&] { return ghost_sets(cfg, sys, params); }),
          guarded("scheme-equivalence", [&] { return scheme_equivalence(cfg, sys, params); }),
          guarded("gradients", [&] { return gradients(cfg, params); }),
          guarded("invariance", [&] { return invariance(cfg, params); })};
}

}  // namespace nnmd::tools
