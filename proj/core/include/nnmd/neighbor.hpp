#pragma once

#include <compare>
#include <span>
#include <vector>

#include "nnmd/types.hpp"

namespace nnmd {

struct CutoffSpec {
  double rc = 6.0;
  double rcs = 0.5;
  double skin = 2.0;
  int rebuild_every = 50;

  void validate() const;
  double list_radius() const { return rc + skin; }
};

/// Scheme-independent identity of an atom copy: global id plus the periodic
/// image it represents. Neighbor ordering is defined on this key.
struct AtomKey {
  int gid = -1;
  Int3 image{0, 0, 0};
  auto operator<=>(const AtomKey&) const = default;
};

/// Uniform cell binning over the bounding box of a point set.
class CellIndex {
 public:
  CellIndex() = default;
  CellIndex(std::span<const Vec3> positions, double cell_size);

  bool empty() const noexcept { return cell_start_.empty(); }
  const Int3& cells() const noexcept { return ncell_; }
  int cell_of(const Vec3& x) const;
  std::span<const int> atoms_in(int cell) const;
  /// Atoms in the cell containing x and its (up to) 26 neighbours.
  template <typename Fn>
  void for_each_candidate(const Vec3& x, Fn&& fn) const;

 private:
  Int3 coord_of(const Vec3& x) const;

  Vec3 lo_{0, 0, 0};
  double cell_size_ = 1.0;
  Int3 ncell_{0, 0, 0};
  std::vector<int> cell_start_;
  std::vector<int> atoms_;
};

CellIndex build_cell_index(std::span<const Vec3> positions, double cell_size);

/// Per-centre neighbour entries, grouped contiguously by neighbour type.
class NeighborList {
 public:
  NeighborList() = default;
  NeighborList(int ntypes, std::vector<int> sel);

  int ntypes() const noexcept { return ntypes_; }
  const std::vector<int>& sel() const noexcept { return sel_; }
  int padded_rows() const noexcept;
  std::size_t num_centers() const noexcept { return centers_.size(); }
  int center(std::size_t c) const { return centers_[c]; }
  const std::vector<int>& centers() const noexcept { return centers_; }

  /// Store indices of centre c's neighbours of type t, ascending by AtomKey.
  std::span<const int> neighbors(std::size_t c, int t) const;
  /// All neighbours of centre c (type groups concatenated).
  std::span<const int> neighbors(std::size_t c) const;
  int count(std::size_t c) const;
  std::size_t total_entries() const noexcept { return index_.size(); }

  void add_center(int store_index, const std::vector<std::vector<int>>& groups);

 private:
  int ntypes_ = 0;
  std::vector<int> sel_;
  std::vector<int> centers_;
  std::vector<int> offsets_{0};
  std::vector<int> index_;
};

/// Lists every atom within rc + skin of each centre (strictly closer).
/// `keys` may be empty, in which case store index order is used. Exceeding
/// sel[t] is an error.
NeighborList build_neighbor_list(std::span<const Vec3> positions,
                                 std::span<const int> types,
                                 std::span<const AtomKey> keys,
                                 std::span<const int> centers,
                                 const CutoffSpec& cutoff,
                                 const std::vector<int>& sel);

bool needs_rebuild(long step, const CutoffSpec& cutoff);

// ---------------------------------------------------------------------------

template <typename Fn>
void CellIndex::for_each_candidate(const Vec3& x, Fn&& fn) const {
  if (empty()) return;
  const Int3 c = coord_of(x);
  for (int dz = -1; dz <= 1; ++dz) {
    const int z = c[2] + dz;
    if (z < 0 || z >= ncell_[2]) continue;
    for (int dy = -1; dy <= 1; ++dy) {
      const int y = c[1] + dy;
      if (y < 0 || y >= ncell_[1]) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = c[0] + dx;
        if (xx < 0 || xx >= ncell_[0]) continue;
        for (int a : atoms_in(xx + ncell_[0] * (y + ncell_[1] * z))) fn(a);
      }
    }
  }
}

}  // namespace nnmd
