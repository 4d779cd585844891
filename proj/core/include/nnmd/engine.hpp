#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "nnmd/netsim.hpp"
#include "nnmd/potential.hpp"
#include "nnmd/schemes.hpp"
#include "nnmd/structure.hpp"

namespace nnmd {

struct RunConfig {
  long steps = 100;
  double dt = 1.0;  // fs
  double temperature = 300.0;
  std::vector<double> masses{63.546};
  Scheme scheme = Scheme::NodeBased;
  int leaders = 4;
  bool load_balance = false;
  PrecisionMode precision = PrecisionMode::Double;
  std::uint64_t seed = 1;
  int thermo_every = 10;

  void validate(int ntypes) const;
};

struct ThermoRecord {
  long step = 0;
  double etotal = 0.0;
  double epot = 0.0;
  double ekin = 0.0;
  double temperature = 0.0;
  double comm_time_us = 0.0;
  long messages = 0;
};

void write_thermo_header(std::ostream& out);
void write_thermo_row(std::ostream& out, const ThermoRecord& rec);

// ---------------------------------------------------------------------------
// Integrator pieces shared by the distributed and the reference drivers

/// v += F / m * dt / 2 (unit converted).
inline void half_kick(Vec3& v, const Vec3& f, double mass, double dt) {
  const double c = 0.5 * dt * units::ftm2v / mass;
  v[0] += c * f[0];
  v[1] += c * f[1];
  v[2] += c * f[2];
}

inline void drift(Vec3& x, const Vec3& v, double dt) {
  x[0] += dt * v[0];
  x[1] += dt * v[1];
  x[2] += dt * v[2];
}

double kinetic_energy(std::span<const Vec3> velocities, std::span<const int> types,
                      std::span<const double> masses);
double temperature_of(double kinetic, std::size_t natoms);
Vec3 total_momentum(std::span<const Vec3> velocities, std::span<const int> types,
                    std::span<const double> masses);

/// One velocity-Verlet step on a plain state; `forces` holds F(x) on entry
/// and F(x') on exit. `force_fn` fills forces for the drifted positions.
void vv_step(SystemState& state, std::vector<Vec3>& forces, double dt,
             std::span<const double> masses,
             const std::function<void(const SystemState&, std::vector<Vec3>&)>& force_fn);

/// Appends the force records of centre `c` to `sink(store_index, record)`.
template <typename Sink>
void emit_records(int center_gid, const NeighborList& list, std::size_t c,
                  const CenterTerms& terms, Sink&& sink) {
  const auto nb = list.neighbors(c);
  Vec3 fi{0.0, 0.0, 0.0};
  for (std::size_t j = 0; j < nb.size(); ++j) {
    const Vec3& g = terms.grad[j];
    sink(nb[j], ForceRecord{center_gid, static_cast<int>(j), {-g[0], -g[1], -g[2]}});
    fi += g;
  }
  sink(list.center(c), ForceRecord{center_gid, -1, fi});
}

// ---------------------------------------------------------------------------
// Drivers

/// Decomposed NVE simulation over a virtual cluster.
class Simulation {
 public:
  Simulation(SystemState initial, DeepPotential potential, std::vector<int> sel,
             RunConfig config, RankTopology topo, CostModel cost = {});

  void step();
  long current_step() const noexcept { return step_; }
  long rebuild_events() const noexcept { return rebuilds_; }
  double potential_energy() const noexcept { return epot_; }
  ThermoRecord thermo() const;
  /// Global state ordered by gid. Positions are as integrated (wrapped only
  /// at rebuild steps).
  SystemState state() const;
  std::vector<Vec3> forces() const;
  void scale_velocities(double factor);

  const Cluster& cluster() const noexcept { return cluster_; }
  /// Communication of the initial exchange, kept out of `cluster().metrics()`.
  const SimMetrics& setup_metrics() const noexcept { return setup_metrics_; }
  const std::vector<AtomStore>& stores() const noexcept { return stores_; }
  const Exchange& exchange() const noexcept { return exchange_; }
  const RunConfig& config() const noexcept { return config_; }
  const SimBox& box() const noexcept { return box_; }
  /// Centres evaluated by each rank at the last force computation.
  std::vector<int> evaluated_counts() const;

 private:
  void rebuild();
  void compute_forces();

  SimBox box_;
  RankTopology topo_;
  RunConfig config_;
  DeepPotential potential_;
  std::vector<int> sel_;
  Cluster cluster_;
  Exchange exchange_;
  std::vector<AtomStore> stores_;
  std::vector<NeighborList> lists_;
  ForceLedger ledger_;
  CenterTerms terms_;
  SimMetrics setup_metrics_;
  long step_ = 0;
  long rebuilds_ = 0;
  double epot_ = 0.0;
};

/// Single-domain NVE driver: every periodic image within the list radius is
/// materialized directly. Serves as the no-decomposition oracle.
class ReferenceSimulation {
 public:
  ReferenceSimulation(SystemState initial, DeepPotential potential, std::vector<int> sel,
                      RunConfig config);

  void step();
  long current_step() const noexcept { return step_; }
  double potential_energy() const noexcept { return epot_; }
  const std::vector<double>& atom_energies() const noexcept { return atom_energy_; }
  const SystemState& state() const noexcept { return state_; }
  const std::vector<Vec3>& forces() const noexcept { return forces_; }
  ThermoRecord thermo() const;

 private:
  void rebuild();
  void compute_forces();

  SystemState state_;
  RunConfig config_;
  DeepPotential potential_;
  std::vector<int> sel_;
  std::vector<int> entry_gid_;
  std::vector<Int3> entry_image_;
  std::vector<int> entry_type_;
  std::vector<Vec3> entry_pos_;
  NeighborList list_;
  std::vector<Vec3> forces_;
  std::vector<double> atom_energy_;
  CenterTerms terms_;
  long step_ = 0;
  double epot_ = 0.0;
};

struct RunResult {
  std::vector<ThermoRecord> thermo;
  SimMetrics comm;
  long rebuilds = 0;
};

/// Runs `config.steps` steps, recording thermo at step 0, every
/// `thermo_every` steps and at the final step.
RunResult run(Simulation& sim, const std::function<void(const Simulation&)>& on_thermo = {});

// ---------------------------------------------------------------------------
// Analysis

struct Rdf {
  double dr = 0.0;
  std::vector<double> r;  // bin centres
  std::vector<double> g;
};

/// Pair histogram under the minimum image, normalized by ideal-gas shell
/// counts. With type_a/type_b >= 0 only pairs of those types are counted.
Rdf rdf(std::span<const Vec3> positions, const SimBox& box, double r_max, int bins,
        std::span<const int> types = {}, int type_a = -1, int type_b = -1);

/// Running average of g(r) over frames.
class RdfAccumulator {
 public:
  RdfAccumulator(double r_max, int bins) : r_max_(r_max), bins_(bins) {}
  void add(std::span<const Vec3> positions, const SimBox& box, std::span<const int> types = {},
           int type_a = -1, int type_b = -1);
  Rdf result() const;
  int frames() const noexcept { return frames_; }

 private:
  double r_max_;
  int bins_;
  int frames_ = 0;
  Rdf sum_;
};

}  // namespace nnmd
