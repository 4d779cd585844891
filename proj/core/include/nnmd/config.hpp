#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnmd/engine.hpp"

namespace nnmd {

struct SystemSpec {
  /// "fcc", "water", "random" or "file".
  std::string kind = "fcc";
  double lattice_constant = 3.615;
  Int3 cells{4, 4, 4};
  double spacing = 3.1;
  Vec3 box{20.0, 20.0, 20.0};
  int natoms = 0;
  double min_separation = 1.0;
  std::uint64_t seed = 1;
  std::string structure;
  std::vector<std::string> types;
  std::vector<double> masses;
};

struct PotentialSpec {
  CutoffSpec cutoff;
  std::vector<int> sel;
  ModelDims dims;
  PrecisionMode precision = PrecisionMode::Double;
  std::uint64_t seed = 1;
  /// Defaults to n_pad^2 / 4 with n_pad = sum(sel), which offsets the
  /// descriptor normalization.
  double input_scale = kDefaultInputScale;
  std::string params_path;
};

struct TopologySpec {
  Int3 rank_grid{2, 2, 1};
  Int3 node_layout = RankTopology::kDefaultNodeLayout;
};

struct OutputSpec {
  std::string thermo_csv;
  std::string metrics_csv;
  std::string trajectory;
  int trajectory_every = 10;
};

struct Config {
  SystemSpec system;
  PotentialSpec potential;
  TopologySpec topology;
  CostModel costmodel;
  RunConfig run;
  OutputSpec output;

  RankTopology topo() const { return RankTopology(topology.rank_grid, topology.node_layout); }
};

/// Reads and validates a JSON config. Missing files raise Io, malformed JSON
/// raises Parse, constraint violations raise Config; messages name the
/// offending JSON path.
Config parse_config(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin = "<config>");
/// Cross-field checks; called by the parsers.
void validate_config(const Config& cfg);

SystemState build_system(const Config& cfg);
ModelParams build_params(const Config& cfg);

}  // namespace nnmd
