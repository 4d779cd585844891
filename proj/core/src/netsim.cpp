#include "nnmd/netsim.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace nnmd {

void CostModel::validate() const {
  if (alpha_net < 0 || beta_net < 0 || alpha_noc < 0 || beta_noc < 0)
    throw Error(ErrorKind::InvalidInput, "cost model terms must be nonnegative");
  if (tni_per_node < 1) throw Error(ErrorKind::InvalidInput, "tni_per_node must be >= 1");
  if (comm_threads_per_leader < 1)
    throw Error(ErrorKind::InvalidInput, "comm_threads_per_leader must be >= 1");
}

SimMetrics& SimMetrics::operator+=(const SimMetrics& o) {
  messages_sent += o.messages_sent;
  messages_received += o.messages_received;
  intra_node_copies += o.intra_node_copies;
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  copy_bytes += o.copy_bytes;
  registered_regions += o.registered_regions;
  virtual_time_us += o.virtual_time_us;
  if (rank_time_us.size() < o.rank_time_us.size()) rank_time_us.resize(o.rank_time_us.size(), 0.0);
  for (std::size_t i = 0; i < o.rank_time_us.size(); ++i) rank_time_us[i] += o.rank_time_us[i];
  return *this;
}

Cluster::Cluster(RankTopology topo, CostModel cost) : topo_(topo), cost_(cost) {
  cost_.validate();
  reset_metrics();
}

void Cluster::reset_metrics() {
  metrics_ = SimMetrics{};
  metrics_.rank_time_us.assign(topo_.num_ranks(), 0.0);
}

int Cluster::torus_neighbor(int node, int dim, int dir) const {
  Int3 c = topo_.node_coord(node);
  c[dim] += dir;
  return topo_.node_at(c);
}

SimMetrics Cluster::simulate_phase(std::span<Message> messages,
                                   std::span<const CopyRecord> copies,
                                   int channels_per_node) {
  const int nranks = topo_.num_ranks();
  const int nnodes = topo_.num_nodes();
  const int channels = channels_per_node >= 1 ? channels_per_node : cost_.tni_per_node;

  SimMetrics d;
  d.rank_time_us.assign(nranks, 0.0);
  std::vector<std::vector<double>> channel_busy(nnodes, std::vector<double>(channels, 0.0));
  std::vector<int> next_channel(nnodes, 0);
  // (src, dst) -> serialized copy time
  std::map<std::pair<int, int>, double> pair_busy;

  auto check = [nranks](int src, int dst) {
    if (src < 0 || src >= nranks || dst < 0 || dst >= nranks)
      throw Error(ErrorKind::InvalidInput, "message endpoint out of range");
    if (src == dst) throw Error(ErrorKind::InvalidInput, "message to self rejected");
  };
  auto add_copy = [&](int src, int dst, std::size_t bytes) {
    const double t = cost_.noc_cost(bytes);
    pair_busy[{src, dst}] += t;
    d.rank_time_us[src] += t;
    ++d.intra_node_copies;
    d.copy_bytes += bytes;
  };

  for (Message& m : messages) {
    check(m.src, m.dst);
    if (same_node(m.src, m.dst)) {
      m.channel = -1;
      add_copy(m.src, m.dst, m.bytes);
      continue;
    }
    const int node = topo_.node_of(m.src);
    m.channel = next_channel[node];
    next_channel[node] = (next_channel[node] + 1) % channels;
    const double t = cost_.net_cost(m.bytes);
    channel_busy[node][m.channel] += t;
    d.rank_time_us[m.src] += t;
    ++d.messages_sent;
    ++d.messages_received;
    d.bytes_sent += m.bytes;
    d.bytes_received += m.bytes;
  }
  for (const CopyRecord& c : copies) {
    check(c.src, c.dst);
    if (!same_node(c.src, c.dst))
      throw Error(ErrorKind::InvalidInput, "intra-node copy crosses nodes");
    add_copy(c.src, c.dst, c.bytes);
  }

  std::vector<double> copy_time(nnodes, 0.0);
  for (const auto& [key, t] : pair_busy) {
    const int node = topo_.node_of(key.first);
    copy_time[node] = std::max(copy_time[node], t);
  }
  double phase = 0.0;
  for (int n = 0; n < nnodes; ++n) {
    const double send = *std::max_element(channel_busy[n].begin(), channel_busy[n].end());
    phase = std::max(phase, copy_time[n] + send);
  }
  d.virtual_time_us = phase;
  metrics_ += d;
  return d;
}

Cluster build_cluster(const RankTopology& topo, const CostModel& cost) {
  return Cluster(topo, cost);
}

long register_regions(RegistrationPolicy policy, int neighbors) {
  return policy == RegistrationPolicy::Pooled ? 1 : 2L * neighbors;
}

std::vector<long> register_regions(const Cluster& cluster, RegistrationPolicy policy,
                                   std::span<const int> neighbors_per_rank) {
  if (static_cast<int>(neighbors_per_rank.size()) != cluster.num_ranks())
    throw Error(ErrorKind::Dimension, "need one neighbour count per rank");
  std::vector<long> out;
  out.reserve(neighbors_per_rank.size());
  for (int n : neighbors_per_rank) out.push_back(register_regions(policy, n));
  return out;
}

}  // namespace nnmd
