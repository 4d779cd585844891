#include "nnmd/neighbor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nnmd {

void CutoffSpec::validate() const {
  if (!(rcs > 0.0)) throw Error(ErrorKind::InvalidInput, "rcs must be > 0");
  if (!(rcs < rc)) throw Error(ErrorKind::InvalidInput, "rcs must be < rc");
  if (!(skin >= 0.0)) throw Error(ErrorKind::InvalidInput, "skin must be >= 0");
  if (rebuild_every < 1)
    throw Error(ErrorKind::InvalidInput, "rebuild_every must be >= 1");
}

CellIndex::CellIndex(std::span<const Vec3> positions, double cell_size)
    : cell_size_(cell_size) {
  if (!(cell_size > 0.0))
    throw Error(ErrorKind::InvalidInput, "cell size must be > 0");
  if (positions.empty()) return;
  Vec3 hi = positions[0];
  lo_ = positions[0];
  for (const Vec3& p : positions)
    for (int d = 0; d < 3; ++d) {
      lo_[d] = std::min(lo_[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  for (int d = 0; d < 3; ++d)
    ncell_[d] = std::max(1, static_cast<int>(std::floor((hi[d] - lo_[d]) / cell_size_)) + 1);

  const int ncells = product(ncell_);
  std::vector<int> count(ncells + 1, 0);
  std::vector<int> cell(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    cell[i] = cell_of(positions[i]);
    ++count[cell[i] + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  cell_start_ = count;
  atoms_.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    atoms_[count[cell[i]]++] = static_cast<int>(i);
}

Int3 CellIndex::coord_of(const Vec3& x) const {
  Int3 c;
  for (int d = 0; d < 3; ++d) {
    const int i = static_cast<int>(std::floor((x[d] - lo_[d]) / cell_size_));
    c[d] = std::clamp(i, 0, ncell_[d] - 1);
  }
  return c;
}

int CellIndex::cell_of(const Vec3& x) const {
  const Int3 c = coord_of(x);
  return c[0] + ncell_[0] * (c[1] + ncell_[1] * c[2]);
}

std::span<const int> CellIndex::atoms_in(int cell) const {
  return std::span<const int>(atoms_).subspan(
      cell_start_[cell], cell_start_[cell + 1] - cell_start_[cell]);
}

CellIndex build_cell_index(std::span<const Vec3> positions, double cell_size) {
  return CellIndex(positions, cell_size);
}

NeighborList::NeighborList(int ntypes, std::vector<int> sel)
    : ntypes_(ntypes), sel_(std::move(sel)) {
  if (static_cast<int>(sel_.size()) != ntypes_)
    throw Error(ErrorKind::Dimension, "sel must have one entry per type");
}

int NeighborList::padded_rows() const noexcept {
  return std::accumulate(sel_.begin(), sel_.end(), 0);
}

std::span<const int> NeighborList::neighbors(std::size_t c, int t) const {
  const std::size_t k = c * ntypes_ + t;
  return std::span<const int>(index_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
}

std::span<const int> NeighborList::neighbors(std::size_t c) const {
  const std::size_t k0 = c * ntypes_;
  const std::size_t k1 = k0 + ntypes_;
  return std::span<const int>(index_).subspan(offsets_[k0], offsets_[k1] - offsets_[k0]);
}

int NeighborList::count(std::size_t c) const {
  return static_cast<int>(neighbors(c).size());
}

void NeighborList::add_center(int store_index,
                              const std::vector<std::vector<int>>& groups) {
  centers_.push_back(store_index);
  for (const auto& g : groups) {
    index_.insert(index_.end(), g.begin(), g.end());
    offsets_.push_back(static_cast<int>(index_.size()));
  }
}

NeighborList build_neighbor_list(std::span<const Vec3> positions,
                                 std::span<const int> types,
                                 std::span<const AtomKey> keys,
                                 std::span<const int> centers,
                                 const CutoffSpec& cutoff,
                                 const std::vector<int>& sel) {
  const int ntypes = static_cast<int>(sel.size());
  if (types.size() != positions.size() ||
      (!keys.empty() && keys.size() != positions.size()))
    throw Error(ErrorKind::Dimension, "positions, types and keys must align");

  NeighborList list(ntypes, sel);
  const double rl = cutoff.list_radius();
  const double rl2 = rl * rl;
  const CellIndex cells(positions, rl);

  auto less = [&](int a, int b) {
    if (keys.empty()) return a < b;
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return a < b;
  };

  std::vector<std::vector<int>> groups(ntypes);
  for (int ci : centers) {
    for (auto& g : groups) g.clear();
    const Vec3& xi = positions[ci];
    cells.for_each_candidate(xi, [&](int j) {
      if (j == ci) return;
      const Vec3 d = positions[j] - xi;
      if (dot(d, d) < rl2) {
        const int t = types[j];
        if (t < 0 || t >= ntypes)
          throw Error(ErrorKind::InvalidInput, "atom type out of range");
        groups[t].push_back(j);
      }
    });
    for (int t = 0; t < ntypes; ++t) {
      if (static_cast<int>(groups[t].size()) > sel[t]) {
        const int id = keys.empty() ? ci : keys[ci].gid;
        throw Error(ErrorKind::CapacityExceeded,
                    "atom " + std::to_string(id) + " has " +
                        std::to_string(groups[t].size()) +
                        " neighbours of type " + std::to_string(t) +
                        ", exceeding sel=" + std::to_string(sel[t]));
      }
      std::sort(groups[t].begin(), groups[t].end(), less);
    }
    list.add_center(ci, groups);
  }
  return list;
}

bool needs_rebuild(long step, const CutoffSpec& cutoff) {
  return step % cutoff.rebuild_every == 0;
}

}  // namespace nnmd
