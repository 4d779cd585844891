#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nnmd/geometry.hpp"
#include "nnmd/neighbor.hpp"
#include "nnmd/netsim.hpp"

namespace nnmd {

enum class Scheme { ThreeStage, P2P, NodeBased };

const char* to_string(Scheme scheme);
/// Accepts "three-stage", "p2p", "node-based".
Scheme parse_scheme(const std::string& name);

/// Wire sizes used for accounting.
inline constexpr std::size_t kGhostAtomBytes = 32;    // position, type, gid
inline constexpr std::size_t kForceRecordBytes = 32;  // force, centre gid, slot
inline constexpr std::size_t kMigrantBytes = 56;      // position, velocity, type, gid

inline constexpr int kMaxLayers = 3;

struct CommPlan {
  Scheme scheme = Scheme::ThreeStage;
  int leaders = 4;
  bool load_balance = false;
  double ghost_cutoff = 0.0;
  Int3 layers{0, 0, 0};       // per-rank, from sub-box sides
  Int3 node_layers{0, 0, 0};  // per-node, from node-box sides
  /// ThreeStage: dimension swept in each round.
  std::vector<int> round_dims;
  /// P2P: rank-grid offsets. NodeBased: node-grid offsets.
  std::vector<Int3> peer_offsets;
  /// NodeBased: local indices acting as leaders.
  std::vector<int> leader_locals;

  int rounds() const { return static_cast<int>(round_dims.size()); }
  int peers() const { return static_cast<int>(peer_offsets.size()); }
  /// Inter-rank messages each rank issues per forward exchange.
  std::vector<int> messages_per_rank(const RankTopology& topo) const;
  double average_messages_per_rank(const RankTopology& topo) const;
  /// Channels a node drives concurrently.
  int channels(const CostModel& cost) const;
};

/// Leader local indices for 1, 2 or 4 leaders on a 4-rank node.
std::vector<int> leader_set(int leaders);

/// `ghost_cutoff` is the width the sub-box is expanded by (the neighbour-list
/// radius rc + skin when lists carry a skin).
CommPlan plan_exchange(Scheme scheme, const RankTopology& topo, const SimBox& box,
                       double ghost_cutoff, int leaders = 4, bool load_balance = false);

/// Per-rank atom storage. Entries [0, nlocal) are owned; entries
/// [0, size_view) are visible to the force computation in the layout
/// own locals, same-node peers' locals, ghosts grouped by source node.
/// Entries past size_view are relay copies kept only for forwarding.
struct AtomStore {
  int rank = -1;
  int nlocal = 0;
  int size_view = 0;
  int node_nlocal = 0;  // view entries that are image-0 atoms of this node
  int node_nghost = 0;  // remaining view entries

  std::vector<int> gid;
  std::vector<int> type;
  std::vector<Vec3> pos;
  std::vector<Vec3> base;     // owner's canonical position
  std::vector<Int3> image;    // periodic shift relative to `base`
  std::vector<int> owner;     // owning rank
  std::vector<Vec3> vel;      // locals only
  std::vector<Vec3> force;    // locals only
  /// Node-box atoms in canonical order (owner local index, then owner's local
  /// order) as indices into this store; filled in load-balance mode.
  std::vector<int> node_atoms;

  std::size_t size() const { return gid.size(); }
  AtomKey key(std::size_t i) const { return AtomKey{gid[i], image[i]}; }
  void clear_nonlocal();
  void add_local(int id, int t, const Vec3& x, const Vec3& v);
};

std::vector<AtomStore> make_stores(const RankTopology& topo);

/// Moves every local atom to the rank owning its wrapped position and sorts
/// locals by gid. Counted as one migration phase.
SimMetrics migrate(std::vector<AtomStore>& stores, const RankTopology& topo,
                   const SimBox& box, Cluster& cluster);

/// Distributes N atoms to their owning ranks.
std::vector<AtomStore> distribute(const RankTopology& topo, const SimBox& box,
                                  std::span<const int> gids, std::span<const int> types,
                                  std::span<const Vec3> positions,
                                  std::span<const Vec3> velocities);

struct ForceRecord {
  int center = -1;  // gid of the evaluated centre
  int slot = -1;    // neighbour slot in the centre's list, -1 for the centre term
  Vec3 f{0, 0, 0};
};

/// Pending force records per rank per store entry.
using ForceLedger = std::vector<std::vector<std::vector<ForceRecord>>>;

ForceLedger make_ledger(std::span<const AtomStore> stores);

/// Sums records in (centre, slot) order; the fixed order makes the result
/// independent of how records were routed.
Vec3 sum_records(std::vector<ForceRecord>& records);

/// Ghost routing built at rebuild steps and replayed in between.
class Exchange {
 public:
  Exchange(CommPlan plan, RankTopology topo, SimBox box);

  const CommPlan& plan() const noexcept { return plan_; }

  /// Rebuilds ghost membership from the current locals and performs the
  /// forward pass. Locals must lie inside their owners' sub-boxes.
  SimMetrics rebuild(std::vector<AtomStore>& stores, Cluster& cluster);
  /// Refreshes ghost positions along the existing routes.
  SimMetrics forward(std::vector<AtomStore>& stores, Cluster& cluster) const;
  /// Sends every record held by a copy back along its route to the owner,
  /// then writes summed forces into each store's locals.
  SimMetrics reverse(std::vector<AtomStore>& stores, ForceLedger& ledger,
                     Cluster& cluster) const;

  std::size_t num_transfers() const { return transfers_.size(); }

 private:
  enum class Kind { Self, Remote };
  struct Transfer {
    int src = -1;
    int dst = -1;
    int stage = 0;
    Kind kind = Kind::Remote;
    std::vector<int> src_idx;
    std::vector<int> dst_idx;
  };
  struct StageInfo {
    int fwd_group = 0;
    int rev_group = 0;
  };

  void build_three_stage(std::vector<AtomStore>& stores);
  void build_p2p(std::vector<AtomStore>& stores);
  void build_node_based(std::vector<AtomStore>& stores);
  void finalize_layout(std::vector<AtomStore>& stores);
  Transfer& new_transfer(int src, int dst, int stage);
  int append_copy(std::vector<AtomStore>& stores, int src, int src_idx, int dst,
                  const Int3& image, Transfer& t);

  CommPlan plan_;
  RankTopology topo_;
  SimBox box_;
  std::vector<SubBox> boxes_;
  std::vector<Transfer> transfers_;
  std::vector<StageInfo> stages_;
};

SimMetrics forward_exchange(Exchange& exchange, Cluster& cluster,
                            std::vector<AtomStore>& stores, bool rebuild);
SimMetrics reverse_force_reduce(const Exchange& exchange, Cluster& cluster,
                                std::vector<AtomStore>& stores, ForceLedger& ledger);

/// Every periodic image inside the open box (lo - cutoff, hi + cutoff) and
/// outside [lo, hi). Positions must be wrapped into the box.
std::vector<AtomKey> oracle_ghosts(std::span<const int> gids,
                                   std::span<const Vec3> positions,
                                   const SubBox& region, double cutoff,
                                   const SimBox& box);

/// True when x lies in the open box (lo - g, hi + g) but not in [lo, hi).
bool in_ghost_region(const Vec3& x, const SubBox& region, double g);

/// Keys of the visible non-local entries, sorted.
std::vector<AtomKey> ghost_keys(const AtomStore& store);

// ---------------------------------------------------------------------------
// Load balance

struct Slice {
  int begin = 0;
  int count = 0;
  bool operator==(const Slice&) const = default;
};

/// Contiguous, near-equal slices; the remainder goes to the lowest ranks.
std::vector<Slice> partition_node_box(int natoms, int ranks_per_node = 4);

/// sqrt(population variance / mean) * 100.
double sdmr(std::span<const double> values);

struct SeriesStats {
  double min = 0, avg = 0, max = 0, sdmr = 0;
};

struct BalanceReport {
  std::vector<double> counts;
  std::vector<double> costs;
  SeriesStats count_stats;
  SeriesStats cost_stats;
};

SeriesStats series_stats(std::span<const double> values);
BalanceReport balance_report(std::span<const double> counts, std::span<const double> costs);

/// Per-rank evaluated-atom counts with and without node-box partitioning.
std::vector<double> rank_counts(const RankTopology& topo, const SimBox& box,
                                std::span<const Vec3> positions);
std::vector<double> balanced_counts(const RankTopology& topo, const SimBox& box,
                                    std::span<const Vec3> positions);

}  // namespace nnmd
