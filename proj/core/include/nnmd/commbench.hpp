#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nnmd/schemes.hpp"

namespace nnmd {

/// Sub-box sides as multiples of the ghost cutoff.
struct CommBenchCase {
  std::string label;
  Vec3 side_factors;
};

/// Sides (1,1,1), (0.5,0.5,1) and (0.5,0.5,0.5) times the cutoff.
std::vector<CommBenchCase> default_bench_cases();

struct CommBenchOptions {
  Int3 rank_grid{8, 12, 4};
  Int3 node_layout = RankTopology::kDefaultNodeLayout;
  double ghost_cutoff = 8.0;
  double density = 0.085;  // atoms per cubic angstrom
  int leaders = 4;
  RegistrationPolicy registration = RegistrationPolicy::PerNeighbor;
  CostModel cost;
  std::uint64_t seed = 1;
  std::vector<Scheme> schemes{Scheme::ThreeStage, Scheme::P2P, Scheme::NodeBased};
};

struct CommBenchRow {
  Scheme scheme = Scheme::ThreeStage;
  std::string subbox_spec;
  int rounds = 0;
  int peer_count = 0;
  double messages_per_rank = 0.0;
  std::size_t bytes = 0;  // inter-node payload, forward plus reverse
  double virtual_time_us = 0.0;
  long registered_regions = 0;  // per rank, busiest rank
  std::size_t atoms = 0;
};

/// One forward and one reverse exchange after an untimed setup rebuild,
/// for every scheme and case, on a uniform random system.
std::vector<CommBenchRow> run_comm_bench(const CommBenchOptions& options,
                                         const std::vector<CommBenchCase>& cases);

void write_comm_bench_csv(std::ostream& out, const std::vector<CommBenchRow>& rows);

}  // namespace nnmd
