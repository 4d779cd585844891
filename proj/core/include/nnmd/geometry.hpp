#pragma once

#include <vector>

#include "nnmd/types.hpp"

namespace nnmd {

/// Orthogonal, fully periodic simulation box.
class SimBox {
 public:
  explicit SimBox(Vec3 lengths);

  const Vec3& lengths() const noexcept { return lengths_; }
  double length(int d) const noexcept { return lengths_[d]; }
  double volume() const noexcept {
    return lengths_[0] * lengths_[1] * lengths_[2];
  }

  /// Maps a coordinate into [0, L_d). Values already inside are returned
  /// untouched, which makes the operation idempotent.
  double wrap(double x, int d) const;
  Vec3 wrap(const Vec3& x) const;

 private:
  Vec3 lengths_;
};

/// Position of a periodic image. Every component that materializes an image
/// uses this expression so copies made by different routes agree bitwise.
inline Vec3 image_position(const Vec3& base, const Int3& image, const SimBox& box) {
  return {base[0] + static_cast<double>(image[0]) * box.length(0),
          base[1] + static_cast<double>(image[1]) * box.length(1),
          base[2] + static_cast<double>(image[2]) * box.length(2)};
}

/// Floor division for possibly negative numerators.
inline int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

/// Rank grid grouped into nodes. Ranks are numbered node-major:
/// rank = node_id * ranks_per_node + local_index, with the node id and the
/// local index both linearised x-fastest.
class RankTopology {
 public:
  static constexpr Int3 kDefaultNodeLayout{2, 2, 1};

  RankTopology(Int3 rank_grid, Int3 node_layout = kDefaultNodeLayout);

  const Int3& rank_grid() const noexcept { return rank_grid_; }
  const Int3& node_layout() const noexcept { return node_layout_; }
  const Int3& node_grid() const noexcept { return node_grid_; }

  int num_ranks() const noexcept { return product(rank_grid_); }
  int num_nodes() const noexcept { return product(node_grid_); }
  int ranks_per_node() const noexcept { return product(node_layout_); }

  Int3 rank_coord(int rank) const;
  /// Rank at a grid coordinate; coordinates wrap periodically.
  int rank_at(Int3 coord) const;

  int node_of(int rank) const { return rank / ranks_per_node(); }
  int local_index(int rank) const { return rank % ranks_per_node(); }
  Int3 node_coord(int node) const;
  int node_at(Int3 coord) const;
  std::vector<int> ranks_of_node(int node) const;

 private:
  Int3 rank_grid_;
  Int3 node_layout_;
  Int3 node_grid_;
};

struct SubBox {
  Vec3 lo;
  Vec3 hi;
  int owner = -1;

  Vec3 sides() const { return hi - lo; }
  bool contains(const Vec3& x) const {
    for (int d = 0; d < 3; ++d)
      if (x[d] < lo[d] || x[d] >= hi[d]) return false;
    return true;
  }
};

/// Split point i * L_d / p_d of dimension d.
double split_point(const SimBox& box, int p, int i, int d);

std::vector<SubBox> decompose(const SimBox& box, const RankTopology& topo);
/// Plain rank grid without node grouping (node layout 1x1x1).
std::vector<SubBox> decompose(const SimBox& box, Int3 rank_grid);

/// Owner of the wrapped position. A coordinate equal to a split point belongs
/// to the higher cell.
int locate_rank(const Vec3& position, const SimBox& box,
                const RankTopology& topo);

/// Bounding box of the node's sub-boxes; owner is set to the node id.
SubBox node_box(const RankTopology& topo, const SimBox& box, int node_id);

struct GhostCounts {
  double nghost_bs = 0.0;  // per-rank ghosts, original scheme
  double nghost_lb = 0.0;  // per-rank replicated atoms, load-balance scheme
  double ratio() const { return nghost_lb / nghost_bs; }
};

/// Density-1 ghost-atom model for a cubic sub-box of side a and cutoff r:
///   bs = (a+2r)^3 - a^3,  lb = (2a+2r)^2 (a+2r) - a^3.
GhostCounts ghost_count_model(double a, double r);

}  // namespace nnmd
