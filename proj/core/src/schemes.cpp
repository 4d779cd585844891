#include "nnmd/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace nnmd {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::ThreeStage: return "three-stage";
    case Scheme::P2P: return "p2p";
    case Scheme::NodeBased: return "node-based";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "three-stage") return Scheme::ThreeStage;
  if (name == "p2p") return Scheme::P2P;
  if (name == "node-based") return Scheme::NodeBased;
  throw Error(ErrorKind::InvalidInput, "unknown scheme '" + name +
                                           "' (expected three-stage, p2p, node-based)");
}

// ---------------------------------------------------------------------------
// Plans

std::vector<int> leader_set(int leaders) {
  switch (leaders) {
    case 1: return {2};
    case 2: return {2, 3};
    case 4: return {0, 1, 2, 3};
  }
  throw Error(ErrorKind::Plan, "leader count must be 1, 2 or 4, got " + std::to_string(leaders));
}

namespace {

int layers_for(double cutoff, double side, const char* what, int d) {
  const int l = static_cast<int>(std::ceil(cutoff / side));
  if (l > kMaxLayers)
    throw Error(ErrorKind::Plan, std::string("unsupported layer depth ") + std::to_string(l) +
                                     " in dimension " + std::to_string(d) + ": " + what +
                                     " side " + std::to_string(side) + " < cutoff/" +
                                     std::to_string(kMaxLayers));
  return std::max(l, 1);
}

std::vector<Int3> offsets_within(const Int3& l) {
  std::vector<Int3> out;
  for (int z = -l[2]; z <= l[2]; ++z)
    for (int y = -l[1]; y <= l[1]; ++y)
      for (int x = -l[0]; x <= l[0]; ++x)
        if (x != 0 || y != 0 || z != 0) out.push_back({x, y, z});
  return out;
}

}  // namespace

CommPlan plan_exchange(Scheme scheme, const RankTopology& topo, const SimBox& box,
                       double ghost_cutoff, int leaders, bool load_balance) {
  if (!(ghost_cutoff > 0.0) || !std::isfinite(ghost_cutoff))
    throw Error(ErrorKind::InvalidInput, "ghost cutoff must be positive");
  if (load_balance && scheme != Scheme::NodeBased)
    throw Error(ErrorKind::Config, "load balance requires the node-based scheme");

  CommPlan plan;
  plan.scheme = scheme;
  plan.leaders = leaders;
  plan.load_balance = load_balance;
  plan.ghost_cutoff = ghost_cutoff;

  const Int3 grid = topo.rank_grid();
  for (int d = 0; d < 3; ++d) {
    double side = box.length(d);
    for (int i = 0; i < grid[d]; ++i)
      side = std::min(side, split_point(box, grid[d], i + 1, d) - split_point(box, grid[d], i, d));
    plan.layers[d] = layers_for(ghost_cutoff, side, "sub-box", d);
  }

  switch (scheme) {
    case Scheme::ThreeStage:
      for (int d = 0; d < 3; ++d)
        for (int k = 0; k < plan.layers[d]; ++k) plan.round_dims.push_back(d);
      break;
    case Scheme::P2P:
      plan.peer_offsets = offsets_within(plan.layers);
      break;
    case Scheme::NodeBased: {
      if (topo.ranks_per_node() != 4)
        throw Error(ErrorKind::Plan, "node-based scheme needs 4 ranks per node");
      plan.leader_locals = leader_set(leaders);
      const Int3 ng = topo.node_grid();
      const Int3 nl = topo.node_layout();
      for (int d = 0; d < 3; ++d) {
        double side = box.length(d);
        for (int i = 0; i < ng[d]; ++i)
          side = std::min(side, split_point(box, grid[d], (i + 1) * nl[d], d) -
                                    split_point(box, grid[d], i * nl[d], d));
        plan.node_layers[d] = layers_for(ghost_cutoff, side, "node-box", d);
      }
      plan.peer_offsets = offsets_within(plan.node_layers);
      break;
    }
  }
  return plan;
}

std::vector<int> CommPlan::messages_per_rank(const RankTopology& topo) const {
  std::vector<int> out(topo.num_ranks(), 0);
  for (int r = 0; r < topo.num_ranks(); ++r) {
    switch (scheme) {
      case Scheme::ThreeStage: out[r] = 2 * rounds(); break;
      case Scheme::P2P: out[r] = peers(); break;
      case Scheme::NodeBased: {
        const int li = topo.local_index(r);
        const int nl = static_cast<int>(leader_locals.size());
        for (int k = 0; k < peers(); ++k)
          if (leader_locals[k % nl] == li) ++out[r];
        break;
      }
    }
  }
  return out;
}

double CommPlan::average_messages_per_rank(const RankTopology& topo) const {
  const auto m = messages_per_rank(topo);
  return static_cast<double>(std::accumulate(m.begin(), m.end(), 0L)) /
         static_cast<double>(m.size());
}

int CommPlan::channels(const CostModel& cost) const {
  if (scheme == Scheme::NodeBased)
    return std::min(cost.tni_per_node,
                    static_cast<int>(leader_locals.size()) * cost.comm_threads_per_leader);
  return cost.tni_per_node;
}

// ---------------------------------------------------------------------------
// Stores

void AtomStore::clear_nonlocal() {
  gid.resize(nlocal);
  type.resize(nlocal);
  pos.resize(nlocal);
  base.resize(nlocal);
  image.resize(nlocal);
  owner.resize(nlocal);
  vel.resize(nlocal);
  force.resize(nlocal);
  node_atoms.clear();
  size_view = nlocal;
  node_nlocal = nlocal;
  node_nghost = 0;
}

void AtomStore::add_local(int id, int t, const Vec3& x, const Vec3& v) {
  if (static_cast<int>(gid.size()) != nlocal)
    throw Error(ErrorKind::Consistency, "locals must be added before ghosts");
  gid.push_back(id);
  type.push_back(t);
  pos.push_back(x);
  base.push_back(x);
  image.push_back({0, 0, 0});
  owner.push_back(rank);
  vel.push_back(v);
  force.push_back({0, 0, 0});
  ++nlocal;
  size_view = node_nlocal = nlocal;
}

std::vector<AtomStore> make_stores(const RankTopology& topo) {
  std::vector<AtomStore> stores(topo.num_ranks());
  for (int r = 0; r < topo.num_ranks(); ++r) stores[r].rank = r;
  return stores;
}

namespace {

void sort_locals(AtomStore& s) {
  std::vector<int> perm(s.nlocal);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return s.gid[a] < s.gid[b]; });
  AtomStore out;
  out.rank = s.rank;
  for (int i : perm) {
    out.add_local(s.gid[i], s.type[i], s.pos[i], s.vel[i]);
    out.force.back() = s.force[i];
  }
  for (int i = 1; i < out.nlocal; ++i)
    if (out.gid[i] == out.gid[i - 1])
      throw Error(ErrorKind::Consistency, "duplicate gid " + std::to_string(out.gid[i]) +
                                              " on rank " + std::to_string(s.rank));
  s = std::move(out);
}

}  // namespace

SimMetrics migrate(std::vector<AtomStore>& stores, const RankTopology& topo,
                   const SimBox& box, Cluster& cluster) {
  const int n = topo.num_ranks();
  std::vector<AtomStore> next = make_stores(topo);
  // outgoing[src][dst] counts
  std::vector<std::vector<int>> moved(n, std::vector<int>(n, 0));
  std::vector<std::vector<std::tuple<int, int, Vec3, Vec3>>> incoming(n);
  for (int r = 0; r < n; ++r) {
    AtomStore& s = stores[r];
    for (int i = 0; i < s.nlocal; ++i) {
      const Vec3 x = box.wrap(s.pos[i]);
      const int dst = locate_rank(x, box, topo);
      incoming[dst].emplace_back(s.gid[i], s.type[i], x, s.vel[i]);
      if (dst != r) ++moved[r][dst];
    }
  }
  for (int r = 0; r < n; ++r) {
    for (const auto& [g, t, x, v] : incoming[r]) next[r].add_local(g, t, x, v);
    sort_locals(next[r]);
  }
  stores = std::move(next);

  std::vector<Message> msgs;
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (moved[s][d] > 0)
        msgs.push_back({s, d, static_cast<std::size_t>(moved[s][d]) * kMigrantBytes,
                        Phase::Migration});
  return cluster.simulate_phase(msgs, {});
}

std::vector<AtomStore> distribute(const RankTopology& topo, const SimBox& box,
                                  std::span<const int> gids, std::span<const int> types,
                                  std::span<const Vec3> positions,
                                  std::span<const Vec3> velocities) {
  if (gids.size() != positions.size() || types.size() != positions.size() ||
      (!velocities.empty() && velocities.size() != positions.size()))
    throw Error(ErrorKind::Dimension, "atom arrays differ in length");
  auto stores = make_stores(topo);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec3 x = box.wrap(positions[i]);
    const int r = locate_rank(x, box, topo);
    stores[r].add_local(gids[i], types[i], x,
                        velocities.empty() ? Vec3{0, 0, 0} : velocities[i]);
  }
  for (auto& s : stores) sort_locals(s);
  return stores;
}

ForceLedger make_ledger(std::span<const AtomStore> stores) {
  ForceLedger ledger(stores.size());
  for (std::size_t r = 0; r < stores.size(); ++r) ledger[r].resize(stores[r].size());
  return ledger;
}

Vec3 sum_records(std::vector<ForceRecord>& records) {
  std::sort(records.begin(), records.end(), [](const ForceRecord& a, const ForceRecord& b) {
    return a.center != b.center ? a.center < b.center : a.slot < b.slot;
  });
  Vec3 f{0.0, 0.0, 0.0};
  for (const ForceRecord& r : records) f += r.f;
  return f;
}

// ---------------------------------------------------------------------------
// Exchange

bool in_ghost_region(const Vec3& x, const SubBox& region, double g) {
  for (int d = 0; d < 3; ++d)
    if (!(x[d] > region.lo[d] - g && x[d] < region.hi[d] + g)) return false;
  return !region.contains(x);
}

Exchange::Exchange(CommPlan plan, RankTopology topo, SimBox box)
    : plan_(std::move(plan)), topo_(topo), box_(box), boxes_(decompose(box, topo)) {
  if (plan_.scheme == Scheme::NodeBased && topo_.ranks_per_node() != 4)
    throw Error(ErrorKind::Plan, "node-based scheme needs 4 ranks per node");
}

Exchange::Transfer& Exchange::new_transfer(int src, int dst, int stage) {
  Transfer t;
  t.src = src;
  t.dst = dst;
  t.stage = stage;
  t.kind = src == dst ? Kind::Self : Kind::Remote;
  transfers_.push_back(std::move(t));
  return transfers_.back();
}

int Exchange::append_copy(std::vector<AtomStore>& stores, int src, int src_idx, int dst,
                          const Int3& image, Transfer& t) {
  AtomStore& s = stores[src];
  AtomStore& d = stores[dst];
  const int idx = static_cast<int>(d.size());
  const int g = s.gid[src_idx];
  const int ty = s.type[src_idx];
  const int ow = s.owner[src_idx];
  const Vec3 b = s.base[src_idx];
  d.gid.push_back(g);
  d.type.push_back(ty);
  d.base.push_back(b);
  d.image.push_back(image);
  d.pos.push_back(image_position(b, image, box_));
  d.owner.push_back(ow);
  t.src_idx.push_back(src_idx);
  t.dst_idx.push_back(idx);
  return idx;
}

void Exchange::build_three_stage(std::vector<AtomStore>& stores) {
  const int n = topo_.num_ranks();
  const Int3 grid = topo_.rank_grid();
  const double g = plan_.ghost_cutoff;
  int stage = 0;
  for (int d = 0; d < 3; ++d) {
    // recv[r][0]: arrived from the lower neighbour; recv[r][1]: from the upper.
    std::vector<std::array<std::vector<int>, 2>> recv(n);
    for (int k = 0; k < plan_.layers[d]; ++k, ++stage) {
      stages_.push_back({stage, 0});
      struct Pending {
        int src, dst, dir_slot;
        std::vector<std::pair<int, Int3>> items;
      };
      std::vector<Pending> pending;
      for (int r = 0; r < n; ++r) {
        const Int3 c = topo_.rank_coord(r);
        const AtomStore& s = stores[r];
        for (int slot = 0; slot < 2; ++slot) {
          const int dir = slot == 0 ? +1 : -1;
          Int3 cq = c;
          cq[d] += dir;
          const int q = topo_.rank_at(cq);
          const int w = floor_div(cq[d], grid[d]);
          const SubBox& bq = boxes_[q];
          Pending p{r, q, slot, {}};
          auto consider = [&](int idx) {
            Int3 im = s.image[idx];
            im[d] -= w;
            const Vec3 x = image_position(s.base[idx], im, box_);
            const bool need = dir > 0 ? x[d] > bq.lo[d] - g : x[d] < bq.hi[d] + g;
            if (need) p.items.emplace_back(idx, im);
          };
          if (k == 0) {
            for (int idx = 0; idx < static_cast<int>(s.size()); ++idx) consider(idx);
          } else {
            for (int idx : recv[r][slot]) consider(idx);
          }
          pending.push_back(std::move(p));
        }
      }
      std::vector<std::array<std::vector<int>, 2>> next(n);
      for (Pending& p : pending) {
        Transfer& t = new_transfer(p.src, p.dst, stage);
        for (const auto& [idx, im] : p.items)
          next[p.dst][p.dir_slot].push_back(append_copy(stores, p.src, idx, p.dst, im, t));
      }
      recv = std::move(next);
    }
  }
  const int nst = static_cast<int>(stages_.size());
  for (int s = 0; s < nst; ++s) stages_[s].rev_group = nst - 1 - s;
}

void Exchange::build_p2p(std::vector<AtomStore>& stores) {
  const int n = topo_.num_ranks();
  const Int3 grid = topo_.rank_grid();
  const double g = plan_.ghost_cutoff;
  stages_.push_back({0, 0});
  for (int r = 0; r < n; ++r) {
    const Int3 c = topo_.rank_coord(r);
    const int nlocal = stores[r].nlocal;
    for (const Int3& o : plan_.peer_offsets) {
      const Int3 cq{c[0] + o[0], c[1] + o[1], c[2] + o[2]};
      const int q = topo_.rank_at(cq);
      const Int3 im{-floor_div(cq[0], grid[0]), -floor_div(cq[1], grid[1]),
                    -floor_div(cq[2], grid[2])};
      Transfer& t = new_transfer(r, q, 0);
      for (int i = 0; i < nlocal; ++i) {
        const Vec3 x = image_position(stores[r].base[i], im, box_);
        if (in_ghost_region(x, boxes_[q], g)) append_copy(stores, r, i, q, im, t);
      }
    }
  }
}

void Exchange::build_node_based(std::vector<AtomStore>& stores) {
  const int nnodes = topo_.num_nodes();
  const int nranks = topo_.num_ranks();
  const Int3 ngrid = topo_.node_grid();
  const double g = plan_.ghost_cutoff;
  const std::vector<int>& leaders = plan_.leader_locals;
  const int nl = static_cast<int>(leaders.size());
  const bool lb = plan_.load_balance;
  auto is_leader = [&](int li) { return std::find(leaders.begin(), leaders.end(), li) != leaders.end(); };

  stages_.push_back({0, 1});
  stages_.push_back({0, 0});
  stages_.push_back({1, 0});

  // Stage 0: leaders collect the locals of the other ranks on their node.
  // peer_entries[r][j]: copies on rank r of the locals of local index j.
  std::vector<std::array<std::vector<int>, 4>> peer_entries(nranks);
  for (int node = 0; node < nnodes; ++node) {
    const auto ranks = topo_.ranks_of_node(node);
    for (int l : leaders)
      for (int j = 0; j < 4; ++j) {
        if (j == l) continue;
        Transfer& t = new_transfer(ranks[j], ranks[l], 0);
        for (int i = 0; i < stores[ranks[j]].nlocal; ++i)
          peer_entries[ranks[l]][j].push_back(
              append_copy(stores, ranks[j], i, ranks[l], {0, 0, 0}, t));
      }
  }

  auto node_atom_indices = [&](int r, int l, int skip_local) {
    std::vector<int> out;
    for (int j = 0; j < 4; ++j) {
      if (j == skip_local) continue;
      if (j == l) {
        for (int i = 0; i < stores[r].nlocal; ++i) out.push_back(i);
      } else {
        out.insert(out.end(), peer_entries[r][j].begin(), peer_entries[r][j].end());
      }
    }
    return out;
  };

  // Stage 1: leader-to-leader messages between nodes, one per node offset.
  std::vector<std::vector<int>> received(nranks);
  {
    struct Pending {
      int src, dst;
      Int3 image;
      std::vector<int> items;
    };
    std::vector<Pending> pending;
    for (int node = 0; node < nnodes; ++node) {
      const Int3 ca = topo_.node_coord(node);
      const auto ranks = topo_.ranks_of_node(node);
      for (int k = 0; k < plan_.peers(); ++k) {
        const Int3& o = plan_.peer_offsets[k];
        const int l = leaders[k % nl];
        const Int3 cb{ca[0] + o[0], ca[1] + o[1], ca[2] + o[2]};
        const int nb = topo_.node_at(cb);
        const Int3 im{-floor_div(cb[0], ngrid[0]), -floor_div(cb[1], ngrid[1]),
                      -floor_div(cb[2], ngrid[2])};
        const SubBox region = node_box(topo_, box_, nb);
        const int src = ranks[l];
        Pending p{src, topo_.ranks_of_node(nb)[l], im, {}};
        for (int idx : node_atom_indices(src, l, -1)) {
          const Vec3 x = image_position(stores[src].base[idx], im, box_);
          if (in_ghost_region(x, region, g)) p.items.push_back(idx);
        }
        pending.push_back(std::move(p));
      }
    }
    for (Pending& p : pending) {
      Transfer& t = new_transfer(p.src, p.dst, 1);
      for (int idx : p.items)
        received[p.dst].push_back(append_copy(stores, p.src, idx, p.dst, p.image, t));
    }
  }

  // Stage 2: leaders scatter to the other ranks of their node.
  for (int node = 0; node < nnodes; ++node) {
    const auto ranks = topo_.ranks_of_node(node);
    for (int x = 0; x < 4; ++x) {
      const int xr = ranks[x];
      for (int l : leaders) {
        if (l == x) continue;
        const int lr = ranks[l];
        std::vector<int> cand;
        if (!is_leader(x) && l == leaders.front()) cand = node_atom_indices(lr, l, x);
        cand.insert(cand.end(), received[lr].begin(), received[lr].end());
        Transfer& t = new_transfer(lr, xr, 2);
        for (int idx : cand) {
          const AtomStore& s = stores[lr];
          if (lb || in_ghost_region(s.pos[idx], boxes_[xr], g))
            append_copy(stores, lr, idx, xr, s.image[idx], t);
        }
      }
    }
  }
}

void Exchange::finalize_layout(std::vector<AtomStore>& stores) {
  const int n = topo_.num_ranks();
  const bool lb = plan_.scheme == Scheme::NodeBased && plan_.load_balance;
  const double g = plan_.ghost_cutoff;
  std::vector<std::vector<int>> remap(n);
  for (int r = 0; r < n; ++r) {
    AtomStore& s = stores[r];
    const int node = topo_.node_of(r);
    const int total = static_cast<int>(s.size());
    // class: 0 local, 1 visible node atom, 2 visible ghost, 3 relay
    std::vector<std::tuple<int, int, int, int>> key(total);
    for (int i = 0; i < total; ++i) {
      int cls = 0;
      if (i >= s.nlocal) {
        const bool node_atom = s.image[i] == Int3{0, 0, 0} && topo_.node_of(s.owner[i]) == node;
        const bool visible = lb || in_ghost_region(s.pos[i], boxes_[r], g);
        cls = !visible ? 3 : (node_atom ? 1 : 2);
      }
      key[i] = {cls, topo_.node_of(s.owner[i]), s.owner[i], i};
    }
    std::vector<int> perm(total);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return key[a] < key[b]; });
    remap[r].assign(total, -1);
    for (int k = 0; k < total; ++k) remap[r][perm[k]] = k;

    auto apply = [&](auto& v) {
      auto old = v;
      for (int k = 0; k < total; ++k) v[k] = old[perm[k]];
    };
    apply(s.gid);
    apply(s.type);
    apply(s.pos);
    apply(s.base);
    apply(s.image);
    apply(s.owner);

    s.size_view = 0;
    s.node_nlocal = 0;
    s.node_nghost = 0;
    for (int k = 0; k < total; ++k) {
      const int cls = std::get<0>(key[perm[k]]);
      if (cls == 3) break;
      ++s.size_view;
      if (cls == 2)
        ++s.node_nghost;
      else
        ++s.node_nlocal;
    }
    s.node_atoms.clear();
    if (lb) {
      for (int o : topo_.ranks_of_node(node)) {
        if (o == r) {
          for (int i = 0; i < s.nlocal; ++i) s.node_atoms.push_back(i);
        } else {
          for (int i = s.nlocal; i < s.size_view; ++i)
            if (s.owner[i] == o && s.image[i] == Int3{0, 0, 0}) s.node_atoms.push_back(i);
        }
      }
    }
  }
  for (Transfer& t : transfers_) {
    for (int& i : t.src_idx) i = remap[t.src][i];
    for (int& i : t.dst_idx) i = remap[t.dst][i];
  }
}

SimMetrics Exchange::rebuild(std::vector<AtomStore>& stores, Cluster& cluster) {
  if (static_cast<int>(stores.size()) != topo_.num_ranks())
    throw Error(ErrorKind::Dimension, "one store per rank required");
  for (auto& s : stores) {
    s.clear_nonlocal();
    for (int i = 0; i < s.nlocal; ++i) {
      if (!boxes_[s.rank].contains(s.pos[i]))
        throw Error(ErrorKind::Consistency, "atom " + std::to_string(s.gid[i]) +
                                                " lies outside the sub-box of rank " +
                                                std::to_string(s.rank));
      s.base[i] = s.pos[i];
      s.image[i] = {0, 0, 0};
      s.owner[i] = s.rank;
    }
  }
  transfers_.clear();
  stages_.clear();
  switch (plan_.scheme) {
    case Scheme::ThreeStage: build_three_stage(stores); break;
    case Scheme::P2P: build_p2p(stores); break;
    case Scheme::NodeBased: build_node_based(stores); break;
  }
  finalize_layout(stores);
  return forward(stores, cluster);
}

namespace {

struct GroupedAccounting {
  std::vector<std::vector<Message>> groups;
  void add(int group, const Message& m) {
    if (static_cast<int>(groups.size()) <= group) groups.resize(group + 1);
    groups[group].push_back(m);
  }
  SimMetrics run(Cluster& cluster, int channels) {
    SimMetrics total;
    total.rank_time_us.assign(cluster.num_ranks(), 0.0);
    for (auto& msgs : groups) total += cluster.simulate_phase(msgs, {}, channels);
    return total;
  }
};

}  // namespace

SimMetrics Exchange::forward(std::vector<AtomStore>& stores, Cluster& cluster) const {
  for (auto& s : stores)
    for (int i = 0; i < s.nlocal; ++i) s.base[i] = s.pos[i];
  GroupedAccounting acc;
  for (const Transfer& t : transfers_) {
    const AtomStore& src = stores[t.src];
    AtomStore& dst = stores[t.dst];
    for (std::size_t k = 0; k < t.src_idx.size(); ++k) {
      const int d = t.dst_idx[k];
      dst.base[d] = src.base[t.src_idx[k]];
      dst.pos[d] = image_position(dst.base[d], dst.image[d], box_);
    }
    if (t.kind == Kind::Remote)
      acc.add(stages_[t.stage].fwd_group,
              {t.src, t.dst, t.src_idx.size() * kGhostAtomBytes, Phase::ForwardGhost});
  }
  return acc.run(cluster, plan_.channels(cluster.cost()));
}

SimMetrics Exchange::reverse(std::vector<AtomStore>& stores, ForceLedger& ledger,
                             Cluster& cluster) const {
  if (ledger.size() != stores.size())
    throw Error(ErrorKind::Dimension, "ledger does not match stores");
  for (std::size_t r = 0; r < stores.size(); ++r)
    if (ledger[r].size() != stores[r].size())
      throw Error(ErrorKind::Dimension, "ledger does not match store of rank " + std::to_string(r));
  GroupedAccounting acc;
  for (auto it = transfers_.rbegin(); it != transfers_.rend(); ++it) {
    const Transfer& t = *it;
    std::size_t records = 0;
    for (std::size_t k = 0; k < t.src_idx.size(); ++k) {
      auto& from = ledger[t.dst][t.dst_idx[k]];
      auto& to = ledger[t.src][t.src_idx[k]];
      records += from.size();
      to.insert(to.end(), from.begin(), from.end());
      from.clear();
    }
    if (t.kind == Kind::Remote)
      acc.add(stages_[t.stage].rev_group,
              {t.dst, t.src, records * kForceRecordBytes, Phase::ReverseForce});
  }
  for (auto& s : stores) {
    for (std::size_t i = s.nlocal; i < s.size(); ++i)
      if (!ledger[s.rank][i].empty())
        throw Error(ErrorKind::Consistency, "unmatched force records for ghost of gid " +
                                                std::to_string(s.gid[i]));
    for (int i = 0; i < s.nlocal; ++i) s.force[i] = sum_records(ledger[s.rank][i]);
  }
  return acc.run(cluster, plan_.channels(cluster.cost()));
}

SimMetrics forward_exchange(Exchange& exchange, Cluster& cluster,
                            std::vector<AtomStore>& stores, bool rebuild) {
  return rebuild ? exchange.rebuild(stores, cluster) : exchange.forward(stores, cluster);
}

SimMetrics reverse_force_reduce(const Exchange& exchange, Cluster& cluster,
                                std::vector<AtomStore>& stores, ForceLedger& ledger) {
  return exchange.reverse(stores, ledger, cluster);
}

std::vector<AtomKey> oracle_ghosts(std::span<const int> gids, std::span<const Vec3> positions,
                                   const SubBox& region, double cutoff, const SimBox& box) {
  if (gids.size() != positions.size())
    throw Error(ErrorKind::Dimension, "gid and position arrays differ in length");
  Int3 reach;
  for (int d = 0; d < 3; ++d) reach[d] = static_cast<int>(std::ceil(cutoff / box.length(d))) + 1;
  std::vector<AtomKey> out;
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (int z = -reach[2]; z <= reach[2]; ++z)
      for (int y = -reach[1]; y <= reach[1]; ++y)
        for (int x = -reach[0]; x <= reach[0]; ++x) {
          const Int3 im{x, y, z};
          if (in_ghost_region(image_position(positions[i], im, box), region, cutoff))
            out.push_back({gids[i], im});
        }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<AtomKey> ghost_keys(const AtomStore& store) {
  std::vector<AtomKey> out;
  for (int i = store.nlocal; i < store.size_view; ++i) out.push_back(store.key(i));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Load balance

std::vector<Slice> partition_node_box(int natoms, int ranks_per_node) {
  if (natoms < 0) throw Error(ErrorKind::InvalidInput, "atom count must be >= 0");
  if (ranks_per_node < 1) throw Error(ErrorKind::InvalidInput, "ranks_per_node must be >= 1");
  std::vector<Slice> out(ranks_per_node);
  const int q = natoms / ranks_per_node;
  const int rem = natoms % ranks_per_node;
  int begin = 0;
  for (int k = 0; k < ranks_per_node; ++k) {
    out[k] = {begin, q + (k < rem ? 1 : 0)};
    begin += out[k].count;
  }
  return out;
}

double sdmr(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidInput, "SDMR of an empty series");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (!(mean > 0.0)) throw Error(ErrorKind::InvalidInput, "SDMR undefined for mean <= 0");
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return std::sqrt(var / mean) * 100.0;
}

SeriesStats series_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidInput, "statistics of an empty series");
  SeriesStats s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.sdmr = s.avg > 0.0 ? sdmr(values) : 0.0;
  return s;
}

BalanceReport balance_report(std::span<const double> counts, std::span<const double> costs) {
  if (counts.size() != costs.size())
    throw Error(ErrorKind::Dimension, "need one count and one cost per rank");
  BalanceReport rep;
  rep.counts.assign(counts.begin(), counts.end());
  rep.costs.assign(costs.begin(), costs.end());
  rep.count_stats = series_stats(counts);
  rep.cost_stats = series_stats(costs);
  return rep;
}

std::vector<double> rank_counts(const RankTopology& topo, const SimBox& box,
                                std::span<const Vec3> positions) {
  std::vector<double> out(topo.num_ranks(), 0.0);
  for (const Vec3& x : positions) out[locate_rank(box.wrap(x), box, topo)] += 1.0;
  return out;
}

std::vector<double> balanced_counts(const RankTopology& topo, const SimBox& box,
                                    std::span<const Vec3> positions) {
  const auto per_rank = rank_counts(topo, box, positions);
  std::vector<double> out(topo.num_ranks(), 0.0);
  for (int node = 0; node < topo.num_nodes(); ++node) {
    const auto ranks = topo.ranks_of_node(node);
    double total = 0.0;
    for (int r : ranks) total += per_rank[r];
    const auto slices = partition_node_box(static_cast<int>(total), static_cast<int>(ranks.size()));
    for (std::size_t k = 0; k < ranks.size(); ++k) out[ranks[k]] = slices[k].count;
  }
  return out;
}

}  // namespace nnmd
