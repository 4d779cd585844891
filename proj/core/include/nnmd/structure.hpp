#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nnmd/geometry.hpp"

namespace nnmd {

/// Global atom state; atom i has gid i.
struct SystemState {
  SimBox box{{1.0, 1.0, 1.0}};
  std::vector<int> types;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;

  std::size_t size() const { return positions.size(); }
  void validate(int ntypes) const;
};

/// FCC lattice of `cells` conventional cubic cells with lattice constant a.
SystemState fcc_lattice(double a, Int3 cells);

/// Water-like lattice: one O (type 0) per simple-cubic site with spacing
/// `spacing`, two H (type 1) at 0.9572 A and 104.52 degrees.
SystemState water_lattice(double spacing, Int3 cells);

/// Uniform random positions with a minimum pair separation (periodic).
/// Types are assigned round-robin.
SystemState random_system(const SimBox& box, int natoms, int ntypes, double min_separation,
                          std::uint64_t seed);

/// Uniform doubles in [0, 1) and Box-Muller normals on std::mt19937_64, so
/// streams do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double normal();

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Maxwell-Boltzmann velocities (A/fs) at temperature T with zero net momentum.
void maxwell_boltzmann(SystemState& state, std::span<const double> masses,
                       double temperature, std::uint64_t seed);

/// Extended XYZ frame: count line, comment with Lattice="Lx 0 0 0 Ly 0 0 0 Lz",
/// then `element x y z [vx vy vz]`.
void write_xyz(std::ostream& out, const SystemState& state,
               std::span<const std::string> type_names, const std::string& extra = "");
/// Reads one frame; returns false at end of stream. Element names are mapped
/// through `type_names`; an unknown element is a parse error.
bool read_xyz(std::istream& in, std::span<const std::string> type_names, SystemState& state);
SystemState load_xyz(const std::string& path, std::span<const std::string> type_names);
std::vector<SystemState> load_trajectory(const std::string& path,
                                         std::span<const std::string> type_names);

}  // namespace nnmd
