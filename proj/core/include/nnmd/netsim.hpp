#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nnmd/geometry.hpp"

namespace nnmd {

/// Linear alpha + beta * bytes costs, in microseconds.
struct CostModel {
  double alpha_net = 0.49;
  double beta_net = 1.0 / 6800.0;
  double alpha_noc = 0.2;
  double beta_noc = 1.0 / 100000.0;
  int tni_per_node = 6;
  int comm_threads_per_leader = 6;

  void validate() const;
  double net_cost(std::size_t bytes) const { return alpha_net + beta_net * bytes; }
  double noc_cost(std::size_t bytes) const { return alpha_noc + beta_noc * bytes; }
};

enum class Phase { ForwardGhost, ReverseForce, Migration };

struct Message {
  int src = -1;
  int dst = -1;
  std::size_t bytes = 0;
  Phase phase = Phase::ForwardGhost;
  int channel = -1;  // filled by simulate_phase
};

struct CopyRecord {
  int src = -1;
  int dst = -1;
  std::size_t bytes = 0;
  Phase phase = Phase::ForwardGhost;
};

struct SimMetrics {
  long messages_sent = 0;      // inter-node
  long messages_received = 0;
  long intra_node_copies = 0;
  std::size_t bytes_sent = 0;  // inter-node payload
  std::size_t bytes_received = 0;
  std::size_t copy_bytes = 0;
  long registered_regions = 0;
  double virtual_time_us = 0.0;
  std::vector<double> rank_time_us;

  SimMetrics& operator+=(const SimMetrics& o);
  bool operator==(const SimMetrics&) const = default;
};

/// In-process stand-in for a cluster of nodes on a periodic 3D torus.
class Cluster {
 public:
  Cluster(RankTopology topo, CostModel cost);

  const RankTopology& topology() const noexcept { return topo_; }
  const CostModel& cost() const noexcept { return cost_; }
  const SimMetrics& metrics() const noexcept { return metrics_; }
  void reset_metrics();

  int num_nodes() const { return topo_.num_nodes(); }
  int num_ranks() const { return topo_.num_ranks(); }
  bool same_node(int a, int b) const { return topo_.node_of(a) == topo_.node_of(b); }
  /// Node one hop away along `dim` in direction `dir` (+1 or -1).
  int torus_neighbor(int node, int dim, int dir) const;

  /// Accounts one communication phase. Messages whose endpoints share a node
  /// are treated as intra-node copies. `channels_per_node` < 1 means
  /// `cost.tni_per_node`. Returns the delta, which is also accumulated.
  SimMetrics simulate_phase(std::span<Message> messages,
                            std::span<const CopyRecord> copies,
                            int channels_per_node = 0);

  void add_registered_regions(long n) { metrics_.registered_regions += n; }

 private:
  RankTopology topo_;
  CostModel cost_;
  SimMetrics metrics_;
};

Cluster build_cluster(const RankTopology& topo, const CostModel& cost);

enum class RegistrationPolicy { Pooled, PerNeighbor };

/// Registered RDMA regions per rank: one pooled block, or a send and a
/// receive buffer per neighbour.
std::vector<long> register_regions(const Cluster& cluster, RegistrationPolicy policy,
                                   std::span<const int> neighbors_per_rank);
long register_regions(RegistrationPolicy policy, int neighbors);

}  // namespace nnmd
