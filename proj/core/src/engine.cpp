#include "nnmd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace nnmd {

void RunConfig::validate(int ntypes) const {
  if (steps < 0) throw Error(ErrorKind::Config, "run.steps must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Config, "run.dt must be > 0");
  if (temperature < 0.0) throw Error(ErrorKind::Config, "run.temperature must be >= 0");
  if (static_cast<int>(masses.size()) != ntypes)
    throw Error(ErrorKind::Config, "system.masses needs one mass per type");
  for (double m : masses)
    if (!(m > 0.0)) throw Error(ErrorKind::Config, "system.masses must be > 0");
  if (thermo_every < 1) throw Error(ErrorKind::Config, "run.thermo_every must be >= 1");
  if (leaders != 1 && leaders != 2 && leaders != 4)
    throw Error(ErrorKind::Config, "run.leaders must be 1, 2 or 4");
  if (load_balance && scheme != Scheme::NodeBased)
    throw Error(ErrorKind::Config, "run.load_balance requires the node-based scheme");
}

void write_thermo_header(std::ostream& out) {
  out << "step,etotal,epot,ekin,temperature,comm_time_us,messages\n";
}

void write_thermo_row(std::ostream& out, const ThermoRecord& r) {
  const auto old = out.precision(12);
  out << r.step << ',' << r.etotal << ',' << r.epot << ',' << r.ekin << ',' << r.temperature
      << ',' << r.comm_time_us << ',' << r.messages << '\n';
  out.precision(old);
}

double kinetic_energy(std::span<const Vec3> velocities, std::span<const int> types,
                      std::span<const double> masses) {
  double ke = 0.0;
  for (std::size_t i = 0; i < velocities.size(); ++i)
    ke += 0.5 * masses[types[i]] * dot(velocities[i], velocities[i]) * units::mvv2e;
  return ke;
}

double temperature_of(double kinetic, std::size_t natoms) {
  if (natoms == 0) return 0.0;
  return 2.0 * kinetic / (3.0 * static_cast<double>(natoms) * units::kB);
}

Vec3 total_momentum(std::span<const Vec3> velocities, std::span<const int> types,
                    std::span<const double> masses) {
  Vec3 p{0, 0, 0};
  for (std::size_t i = 0; i < velocities.size(); ++i) p += masses[types[i]] * velocities[i];
  return p;
}

void vv_step(SystemState& state, std::vector<Vec3>& forces, double dt,
             std::span<const double> masses,
             const std::function<void(const SystemState&, std::vector<Vec3>&)>& force_fn) {
  const std::size_t n = state.size();
  if (forces.size() != n || state.velocities.size() != n)
    throw Error(ErrorKind::Dimension, "forces and velocities must match the atom count");
  for (std::size_t i = 0; i < n; ++i) {
    half_kick(state.velocities[i], forces[i], masses[state.types[i]], dt);
    drift(state.positions[i], state.velocities[i], dt);
  }
  force_fn(state, forces);
  for (std::size_t i = 0; i < n; ++i)
    half_kick(state.velocities[i], forces[i], masses[state.types[i]], dt);
}

namespace {

double sum_energies(std::vector<std::pair<int, double>>& e, std::size_t natoms) {
  std::sort(e.begin(), e.end());
  if (e.size() != natoms)
    throw Error(ErrorKind::Consistency, "evaluated " + std::to_string(e.size()) +
                                            " centres for " + std::to_string(natoms) + " atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i].first != static_cast<int>(i))
      throw Error(ErrorKind::Consistency, "centre set does not cover every gid exactly once");
    total += e[i].second;
  }
  return total;
}

[[noreturn]] void rethrow_at(long step, const Error& e) {
  throw Error(e.kind(), "step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(SystemState initial, DeepPotential potential, std::vector<int> sel,
                       RunConfig config, RankTopology topo, CostModel cost)
    : box_(initial.box),
      topo_(topo),
      config_(std::move(config)),
      potential_(std::move(potential)),
      sel_(std::move(sel)),
      cluster_(topo, cost),
      exchange_(plan_exchange(config_.scheme, topo, initial.box,
                              potential_.cutoff().list_radius(), config_.leaders,
                              config_.load_balance),
                topo, initial.box) {
  const int ntypes = potential_.params().dims.ntypes;
  config_.validate(ntypes);
  initial.validate(ntypes);
  if (static_cast<int>(sel_.size()) != ntypes)
    throw Error(ErrorKind::Config, "potential.sel needs one entry per type");
  potential_.set_precision(config_.precision);
  std::vector<int> gids(initial.size());
  std::iota(gids.begin(), gids.end(), 0);
  if (initial.velocities.empty()) initial.velocities.assign(initial.size(), {0, 0, 0});
  stores_ = distribute(topo_, box_, gids, initial.types, initial.positions, initial.velocities);
  try {
    rebuild();
    compute_forces();
  } catch (const Error& e) {
    rethrow_at(0, e);
  }
  rebuilds_ = 1;
  setup_metrics_ = cluster_.metrics();
  cluster_.reset_metrics();
}

void Simulation::rebuild() {
  exchange_.rebuild(stores_, cluster_);
  const int n = topo_.num_ranks();
  const bool lb = exchange_.plan().load_balance;
  lists_.assign(n, NeighborList{});
  for (int r = 0; r < n; ++r) {
    const AtomStore& s = stores_[r];
    const std::size_t nv = static_cast<std::size_t>(s.size_view);
    std::vector<AtomKey> keys(nv);
    for (std::size_t i = 0; i < nv; ++i) keys[i] = s.key(i);
    std::vector<int> centers;
    if (lb) {
      const auto slices = partition_node_box(static_cast<int>(s.node_atoms.size()),
                                             topo_.ranks_per_node());
      const Slice sl = slices[topo_.local_index(r)];
      centers.assign(s.node_atoms.begin() + sl.begin, s.node_atoms.begin() + sl.begin + sl.count);
    } else {
      centers.resize(s.nlocal);
      std::iota(centers.begin(), centers.end(), 0);
    }
    lists_[r] = build_neighbor_list(std::span(s.pos.data(), nv), std::span(s.type.data(), nv),
                                    keys, centers, potential_.cutoff(), sel_);
  }
  ledger_ = make_ledger(stores_);
}

void Simulation::compute_forces() {
  std::vector<std::pair<int, double>> energies;
  std::size_t natoms = 0;
  for (std::size_t r = 0; r < stores_.size(); ++r) {
    const AtomStore& s = stores_[r];
    natoms += s.nlocal;
    auto& led = ledger_[r];
    for (auto& v : led) v.clear();
    const NeighborList& list = lists_[r];
    const std::size_t nv = static_cast<std::size_t>(s.size_view);
    for (std::size_t c = 0; c < list.num_centers(); ++c) {
      potential_.evaluate(std::span(s.pos.data(), nv), std::span(s.type.data(), nv), list, c,
                          terms_);
      const int gid = s.gid[list.center(c)];
      energies.emplace_back(gid, terms_.energy);
      emit_records(gid, list, c, terms_,
                   [&led](int idx, const ForceRecord& rec) { led[idx].push_back(rec); });
    }
  }
  exchange_.reverse(stores_, ledger_, cluster_);
  epot_ = sum_energies(energies, natoms);
}

void Simulation::step() {
  try {
    const double dt = config_.dt;
    for (auto& s : stores_)
      for (int i = 0; i < s.nlocal; ++i) {
        half_kick(s.vel[i], s.force[i], config_.masses[s.type[i]], dt);
        drift(s.pos[i], s.vel[i], dt);
      }
    ++step_;
    if (needs_rebuild(step_, potential_.cutoff())) {
      migrate(stores_, topo_, box_, cluster_);
      rebuild();
      ++rebuilds_;
    } else {
      exchange_.forward(stores_, cluster_);
    }
    compute_forces();
    for (auto& s : stores_)
      for (int i = 0; i < s.nlocal; ++i)
        half_kick(s.vel[i], s.force[i], config_.masses[s.type[i]], dt);
  } catch (const Error& e) {
    rethrow_at(step_, e);
  }
}

SystemState Simulation::state() const {
  std::size_t n = 0;
  for (const auto& s : stores_) n += s.nlocal;
  SystemState out;
  out.box = box_;
  out.types.assign(n, 0);
  out.positions.assign(n, {0, 0, 0});
  out.velocities.assign(n, {0, 0, 0});
  for (const auto& s : stores_)
    for (int i = 0; i < s.nlocal; ++i) {
      const auto g = static_cast<std::size_t>(s.gid[i]);
      out.types[g] = s.type[i];
      out.positions[g] = s.pos[i];
      out.velocities[g] = s.vel[i];
    }
  return out;
}

std::vector<Vec3> Simulation::forces() const {
  std::size_t n = 0;
  for (const auto& s : stores_) n += s.nlocal;
  std::vector<Vec3> out(n);
  for (const auto& s : stores_)
    for (int i = 0; i < s.nlocal; ++i) out[static_cast<std::size_t>(s.gid[i])] = s.force[i];
  return out;
}

void Simulation::scale_velocities(double factor) {
  for (auto& s : stores_)
    for (int i = 0; i < s.nlocal; ++i) s.vel[i] = factor * s.vel[i];
}

std::vector<int> Simulation::evaluated_counts() const {
  std::vector<int> out;
  for (const auto& l : lists_) out.push_back(static_cast<int>(l.num_centers()));
  return out;
}

ThermoRecord Simulation::thermo() const {
  const SystemState st = state();
  ThermoRecord r;
  r.step = step_;
  r.epot = epot_;
  r.ekin = kinetic_energy(st.velocities, st.types, config_.masses);
  r.etotal = r.epot + r.ekin;
  r.temperature = temperature_of(r.ekin, st.size());
  r.comm_time_us = cluster_.metrics().virtual_time_us;
  r.messages = cluster_.metrics().messages_sent;
  return r;
}

// ---------------------------------------------------------------------------
// ReferenceSimulation

ReferenceSimulation::ReferenceSimulation(SystemState initial, DeepPotential potential,
                                         std::vector<int> sel, RunConfig config)
    : state_(std::move(initial)),
      config_(std::move(config)),
      potential_(std::move(potential)),
      sel_(std::move(sel)) {
  const int ntypes = potential_.params().dims.ntypes;
  config_.validate(ntypes);
  state_.validate(ntypes);
  potential_.set_precision(config_.precision);
  if (state_.velocities.empty()) state_.velocities.assign(state_.size(), {0, 0, 0});
  rebuild();
  compute_forces();
}

void ReferenceSimulation::rebuild() {
  const std::size_t n = state_.size();
  for (auto& x : state_.positions) x = state_.box.wrap(x);
  std::vector<int> gids(n);
  std::iota(gids.begin(), gids.end(), 0);
  const SubBox whole{{0, 0, 0}, state_.box.lengths(), 0};
  const auto ghosts = oracle_ghosts(gids, state_.positions, whole,
                                    potential_.cutoff().list_radius(), state_.box);
  entry_gid_ = gids;
  entry_image_.assign(n, {0, 0, 0});
  for (const AtomKey& k : ghosts) {
    entry_gid_.push_back(k.gid);
    entry_image_.push_back(k.image);
  }
  const std::size_t ne = entry_gid_.size();
  entry_type_.resize(ne);
  entry_pos_.resize(ne);
  std::vector<AtomKey> keys(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    entry_type_[e] = state_.types[entry_gid_[e]];
    entry_pos_[e] = e < n ? state_.positions[e]
                          : image_position(state_.positions[entry_gid_[e]], entry_image_[e],
                                           state_.box);
    keys[e] = {entry_gid_[e], entry_image_[e]};
  }
  list_ = build_neighbor_list(entry_pos_, entry_type_, keys, gids, potential_.cutoff(), sel_);
}

void ReferenceSimulation::compute_forces() {
  const std::size_t n = state_.size();
  for (std::size_t e = 0; e < entry_gid_.size(); ++e)
    entry_pos_[e] = e < n ? state_.positions[e]
                          : image_position(state_.positions[entry_gid_[e]], entry_image_[e],
                                           state_.box);
  std::vector<std::vector<ForceRecord>> records(n);
  std::vector<std::pair<int, double>> energies;
  atom_energy_.assign(n, 0.0);
  for (std::size_t c = 0; c < list_.num_centers(); ++c) {
    potential_.evaluate(entry_pos_, entry_type_, list_, c, terms_);
    const int gid = entry_gid_[list_.center(c)];
    energies.emplace_back(gid, terms_.energy);
    atom_energy_[gid] = terms_.energy;
    emit_records(gid, list_, c, terms_, [&](int idx, const ForceRecord& rec) {
      records[entry_gid_[idx]].push_back(rec);
    });
  }
  forces_.assign(n, {0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) forces_[i] = sum_records(records[i]);
  epot_ = sum_energies(energies, n);
}

void ReferenceSimulation::step() {
  try {
    const double dt = config_.dt;
    const std::size_t n = state_.size();
    for (std::size_t i = 0; i < n; ++i) {
      half_kick(state_.velocities[i], forces_[i], config_.masses[state_.types[i]], dt);
      drift(state_.positions[i], state_.velocities[i], dt);
    }
    ++step_;
    if (needs_rebuild(step_, potential_.cutoff())) rebuild();
    compute_forces();
    for (std::size_t i = 0; i < n; ++i)
      half_kick(state_.velocities[i], forces_[i], config_.masses[state_.types[i]], dt);
  } catch (const Error& e) {
    rethrow_at(step_, e);
  }
}

ThermoRecord ReferenceSimulation::thermo() const {
  ThermoRecord r;
  r.step = step_;
  r.epot = epot_;
  r.ekin = kinetic_energy(state_.velocities, state_.types, config_.masses);
  r.etotal = r.epot + r.ekin;
  r.temperature = temperature_of(r.ekin, state_.size());
  return r;
}

RunResult run(Simulation& sim, const std::function<void(const Simulation&)>& on_thermo) {
  RunResult out;
  const long steps = sim.config().steps;
  const int every = sim.config().thermo_every;
  auto record = [&] {
    out.thermo.push_back(sim.thermo());
    if (on_thermo) on_thermo(sim);
  };
  record();
  for (long k = 1; k <= steps; ++k) {
    sim.step();
    if (k % every == 0 || k == steps) record();
  }
  out.comm = sim.cluster().metrics();
  out.rebuilds = sim.rebuild_events();
  return out;
}

// ---------------------------------------------------------------------------
// RDF

Rdf rdf(std::span<const Vec3> positions, const SimBox& box, double r_max, int bins,
        std::span<const int> types, int type_a, int type_b) {
  if (bins < 1) throw Error(ErrorKind::InvalidInput, "rdf needs at least one bin");
  const double half = 0.5 * std::min({box.length(0), box.length(1), box.length(2)});
  if (!(r_max > 0.0) || r_max > half)
    throw Error(ErrorKind::InvalidInput, "rdf r_max must be in (0, half the smallest box side]");
  const bool filter = type_a >= 0 || type_b >= 0;
  if (filter && (type_a < 0 || type_b < 0 || types.size() != positions.size()))
    throw Error(ErrorKind::InvalidInput, "type-resolved rdf needs both types and a type array");

  Rdf out;
  out.dr = r_max / bins;
  out.r.resize(bins);
  out.g.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) out.r[b] = (b + 0.5) * out.dr;

  const std::size_t n = positions.size();
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!filter || types[i] == type_a) na += 1;
    if (!filter || types[i] == type_b) nb += 1;
  }
  const bool same = !filter || type_a == type_b;
  const double npairs = same ? na * (na - 1) / 2 : na * nb;
  if (npairs <= 0) return out;

  std::vector<double> hist(bins, 0.0);
  const double rmax2 = r_max * r_max;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (filter) {
        const bool match = (types[i] == type_a && types[j] == type_b) ||
                           (types[i] == type_b && types[j] == type_a);
        if (!match) continue;
      }
      double r2 = 0.0;
      for (int d = 0; d < 3; ++d) {
        double dd = positions[j][d] - positions[i][d];
        dd -= box.length(d) * std::nearbyint(dd / box.length(d));
        r2 += dd * dd;
      }
      if (r2 >= rmax2) continue;
      const int b = std::min(bins - 1, static_cast<int>(std::sqrt(r2) / out.dr));
      hist[b] += 1.0;
    }
  const double v = box.volume();
  for (int b = 0; b < bins; ++b) {
    const double r0 = b * out.dr, r1 = (b + 1) * out.dr;
    const double shell = 4.0 / 3.0 * M_PI * (r1 * r1 * r1 - r0 * r0 * r0);
    out.g[b] = hist[b] / (npairs * shell / v);
  }
  return out;
}

void RdfAccumulator::add(std::span<const Vec3> positions, const SimBox& box,
                         std::span<const int> types, int type_a, int type_b) {
  Rdf one = rdf(positions, box, r_max_, bins_, types, type_a, type_b);
  if (frames_ == 0) {
    sum_ = std::move(one);
  } else {
    for (int b = 0; b < bins_; ++b) sum_.g[b] += one.g[b];
  }
  ++frames_;
}

Rdf RdfAccumulator::result() const {
  Rdf out = sum_;
  if (frames_ > 0)
    for (double& g : out.g) g /= frames_;
  return out;
}

}  // namespace nnmd
