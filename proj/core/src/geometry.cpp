#include "nnmd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nnmd {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidTopology: return "invalid-topology";
    case ErrorKind::CapacityExceeded: return "capacity-exceeded";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Model: return "model";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Plan: return "plan";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

SimBox::SimBox(Vec3 lengths) : lengths_(lengths) {
  for (double l : lengths_)
    if (!(l > 0.0) || !std::isfinite(l))
      throw Error(ErrorKind::InvalidInput, "box lengths must be positive");
}

double SimBox::wrap(double x, int d) const {
  const double l = lengths_[d];
  if (x >= 0.0 && x < l) return x;
  double r = x - l * std::floor(x / l);
  if (r >= l) r -= l;
  if (r < 0.0) r = 0.0;
  return r;
}

Vec3 SimBox::wrap(const Vec3& x) const {
  return {wrap(x[0], 0), wrap(x[1], 1), wrap(x[2], 2)};
}

RankTopology::RankTopology(Int3 rank_grid, Int3 node_layout)
    : rank_grid_(rank_grid), node_layout_(node_layout) {
  for (int d = 0; d < 3; ++d) {
    if (rank_grid_[d] <= 0 || node_layout_[d] <= 0)
      throw Error(ErrorKind::InvalidTopology,
                  "rank grid and node layout must be positive");
    if (rank_grid_[d] % node_layout_[d] != 0)
      throw Error(ErrorKind::InvalidTopology,
                  "rank grid dimension " + std::to_string(d) +
                      " is not divisible by the node layout");
    node_grid_[d] = rank_grid_[d] / node_layout_[d];
  }
}

namespace {
int wrap_index(int i, int n) { return ((i % n) + n) % n; }
}  // namespace

Int3 RankTopology::node_coord(int node) const {
  if (node < 0 || node >= num_nodes())
    throw Error(ErrorKind::InvalidInput, "node id out of range");
  const Int3& g = node_grid_;
  return {node % g[0], (node / g[0]) % g[1], node / (g[0] * g[1])};
}

int RankTopology::node_at(Int3 c) const {
  const Int3& g = node_grid_;
  for (int d = 0; d < 3; ++d) c[d] = wrap_index(c[d], g[d]);
  return c[0] + g[0] * (c[1] + g[1] * c[2]);
}

Int3 RankTopology::rank_coord(int rank) const {
  if (rank < 0 || rank >= num_ranks())
    throw Error(ErrorKind::InvalidInput, "rank id out of range");
  const Int3 nc = node_coord(node_of(rank));
  const int li = local_index(rank);
  const Int3& nl = node_layout_;
  const Int3 lc{li % nl[0], (li / nl[0]) % nl[1], li / (nl[0] * nl[1])};
  return {nc[0] * nl[0] + lc[0], nc[1] * nl[1] + lc[1], nc[2] * nl[2] + lc[2]};
}

int RankTopology::rank_at(Int3 c) const {
  Int3 nc, lc;
  for (int d = 0; d < 3; ++d) {
    c[d] = wrap_index(c[d], rank_grid_[d]);
    nc[d] = c[d] / node_layout_[d];
    lc[d] = c[d] % node_layout_[d];
  }
  const Int3& nl = node_layout_;
  const int li = lc[0] + nl[0] * (lc[1] + nl[1] * lc[2]);
  return node_at(nc) * ranks_per_node() + li;
}

std::vector<int> RankTopology::ranks_of_node(int node) const {
  std::vector<int> out(ranks_per_node());
  for (int i = 0; i < ranks_per_node(); ++i) out[i] = node * ranks_per_node() + i;
  return out;
}

double split_point(const SimBox& box, int p, int i, int d) {
  if (i >= p) return box.length(d);
  return (static_cast<double>(i) * box.length(d)) / static_cast<double>(p);
}

std::vector<SubBox> decompose(const SimBox& box, const RankTopology& topo) {
  std::vector<SubBox> out(topo.num_ranks());
  for (int r = 0; r < topo.num_ranks(); ++r) {
    const Int3 c = topo.rank_coord(r);
    SubBox& sb = out[r];
    sb.owner = r;
    for (int d = 0; d < 3; ++d) {
      const int p = topo.rank_grid()[d];
      sb.lo[d] = split_point(box, p, c[d], d);
      sb.hi[d] = split_point(box, p, c[d] + 1, d);
    }
  }
  return out;
}

std::vector<SubBox> decompose(const SimBox& box, Int3 rank_grid) {
  return decompose(box, RankTopology(rank_grid, {1, 1, 1}));
}

int locate_rank(const Vec3& position, const SimBox& box,
                const RankTopology& topo) {
  Int3 c{};
  for (int d = 0; d < 3; ++d) {
    if (std::isnan(position[d]))
      throw Error(ErrorKind::InvalidInput, "NaN coordinate");
    if (!std::isfinite(position[d]))
      throw Error(ErrorKind::InvalidInput, "non-finite coordinate");
    const double x = box.wrap(position[d], d);
    const int p = topo.rank_grid()[d];
    int i = static_cast<int>(std::floor(x * p / box.length(d)));
    i = std::clamp(i, 0, p - 1);
    while (i + 1 < p && x >= split_point(box, p, i + 1, d)) ++i;
    while (i > 0 && x < split_point(box, p, i, d)) --i;
    c[d] = i;
  }
  return topo.rank_at(c);
}

SubBox node_box(const RankTopology& topo, const SimBox& box, int node_id) {
  if (node_id < 0 || node_id >= topo.num_nodes())
    throw Error(ErrorKind::InvalidInput, "node id out of range");
  const auto subs = decompose(box, topo);
  SubBox out;
  out.owner = node_id;
  out.lo = subs[node_id * topo.ranks_per_node()].lo;
  out.hi = subs[node_id * topo.ranks_per_node()].hi;
  for (int r : topo.ranks_of_node(node_id)) {
    for (int d = 0; d < 3; ++d) {
      out.lo[d] = std::min(out.lo[d], subs[r].lo[d]);
      out.hi[d] = std::max(out.hi[d], subs[r].hi[d]);
    }
  }
  return out;
}

GhostCounts ghost_count_model(double a, double r) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidInput, "sub-box side must be > 0");
  if (!(r >= 0.0)) throw Error(ErrorKind::InvalidInput, "cutoff must be >= 0");
  const double a3 = a * a * a;
  const double s = a + 2.0 * r;
  const double t = 2.0 * a + 2.0 * r;
  return {s * s * s - a3, t * t * s - a3};
}

}  // namespace nnmd
