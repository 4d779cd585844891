#include <gtest/gtest.h>

#include "nnmd/netsim.hpp"

using namespace nnmd;

namespace {

Cluster two_nodes(CostModel cost = {}) { return Cluster(RankTopology({4, 2, 1}, {2, 2, 1}), cost); }

}  // namespace

TEST(CostModel, Defaults) {
  const CostModel c;
  EXPECT_DOUBLE_EQ(c.net_cost(6800), 0.49 + 1.0);
  EXPECT_DOUBLE_EQ(c.noc_cost(0), 0.2);
  EXPECT_EQ(c.tni_per_node, 6);
  CostModel bad;
  bad.tni_per_node = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = CostModel{};
  bad.beta_net = -1;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Cluster, SingleMessageCostsAlphaPlusBeta) {
  Cluster c = two_nodes();
  ASSERT_EQ(c.num_nodes(), 2);
  std::vector<Message> msgs{{0, 4, 6800, Phase::ForwardGhost}};
  const SimMetrics m = c.simulate_phase(msgs, {});
  EXPECT_DOUBLE_EQ(m.virtual_time_us, 1.49);
  EXPECT_EQ(m.messages_sent, 1);
  EXPECT_EQ(m.bytes_sent, 6800u);
  EXPECT_EQ(msgs[0].channel, 0);
  EXPECT_DOUBLE_EQ(m.rank_time_us[0], 1.49);
}

TEST(Cluster, SameNodeMessagesBecomeCopies) {
  Cluster c = two_nodes();
  std::vector<Message> msgs{{0, 1, 1000, Phase::ForwardGhost}};
  const SimMetrics m = c.simulate_phase(msgs, {});
  EXPECT_EQ(m.messages_sent, 0);
  EXPECT_EQ(m.intra_node_copies, 1);
  EXPECT_EQ(m.copy_bytes, 1000u);
  EXPECT_EQ(msgs[0].channel, -1);
  EXPECT_DOUBLE_EQ(m.virtual_time_us, 0.2 + 1000 * 1e-5);
}

TEST(Cluster, ChannelsSerializeRoundRobin) {
  CostModel cost;
  cost.tni_per_node = 2;
  Cluster c = two_nodes(cost);
  std::vector<Message> msgs;
  for (int k = 0; k < 5; ++k) msgs.push_back({0, 4, 0, Phase::ForwardGhost});
  const SimMetrics m = c.simulate_phase(msgs, {});
  EXPECT_EQ(msgs[0].channel, 0);
  EXPECT_EQ(msgs[1].channel, 1);
  EXPECT_EQ(msgs[2].channel, 0);
  // Three messages on channel 0.
  EXPECT_DOUBLE_EQ(m.virtual_time_us, 3 * 0.49);
  // An explicit channel count overrides the cost model.
  Cluster c1 = two_nodes(cost);
  EXPECT_DOUBLE_EQ(c1.simulate_phase(msgs, {}, 5).virtual_time_us, 0.49);
}

TEST(Cluster, PhaseTimeIsCopyPlusSendOnBusiestNode) {
  Cluster c = two_nodes();
  std::vector<Message> msgs{{4, 0, 0, Phase::ReverseForce}};
  std::vector<CopyRecord> copies{{4, 5, 0, Phase::ReverseForce}, {4, 5, 0, Phase::ReverseForce},
                                 {6, 7, 0, Phase::ReverseForce}};
  const SimMetrics m = c.simulate_phase(msgs, copies);
  EXPECT_DOUBLE_EQ(m.virtual_time_us, 2 * 0.2 + 0.49);
  EXPECT_EQ(m.intra_node_copies, 3);
  EXPECT_DOUBLE_EQ(c.metrics().virtual_time_us, m.virtual_time_us);
  c.reset_metrics();
  EXPECT_EQ(c.metrics().virtual_time_us, 0.0);
  EXPECT_EQ(c.metrics().rank_time_us.size(), 8u);
}

TEST(Cluster, RejectsBadEndpoints) {
  Cluster c = two_nodes();
  std::vector<Message> self{{1, 1, 8, Phase::ForwardGhost}};
  EXPECT_THROW(c.simulate_phase(self, {}), Error);
  std::vector<Message> out_of_range{{0, 99, 8, Phase::ForwardGhost}};
  EXPECT_THROW(c.simulate_phase(out_of_range, {}), Error);
  std::vector<CopyRecord> cross{{0, 4, 8, Phase::ForwardGhost}};
  EXPECT_THROW(c.simulate_phase({}, cross), Error);
}

TEST(Cluster, TorusNeighborsWrap) {
  const Cluster c(RankTopology({8, 12, 4}, {2, 2, 1}), CostModel{});
  const RankTopology& t = c.topology();
  EXPECT_EQ(t.node_grid(), (Int3{4, 6, 4}));
  const int origin = t.node_at({0, 0, 0});
  EXPECT_EQ(c.torus_neighbor(origin, 0, -1), t.node_at({3, 0, 0}));
  EXPECT_EQ(c.torus_neighbor(origin, 1, +1), t.node_at({0, 1, 0}));
  EXPECT_EQ(c.torus_neighbor(c.torus_neighbor(origin, 2, 1), 2, -1), origin);
}

TEST(Registration, PooledVersusPerNeighbor) {
  EXPECT_EQ(register_regions(RegistrationPolicy::Pooled, 124), 1);
  EXPECT_EQ(register_regions(RegistrationPolicy::PerNeighbor, 124), 248);
  const Cluster c = two_nodes();
  const std::vector<int> n{1, 2, 3, 4, 5, 6, 7, 8};
  const auto per = register_regions(c, RegistrationPolicy::PerNeighbor, n);
  EXPECT_EQ(per[7], 16);
  EXPECT_THROW(register_regions(c, RegistrationPolicy::Pooled, std::vector<int>{1}), Error);
}

TEST(SimMetrics, Accumulates) {
  SimMetrics a, b;
  a.messages_sent = 2;
  a.rank_time_us = {1.0, 2.0};
  b.messages_sent = 3;
  b.rank_time_us = {0.5, 0.5};
  b.virtual_time_us = 4.0;
  a += b;
  EXPECT_EQ(a.messages_sent, 5);
  EXPECT_EQ(a.rank_time_us, (std::vector<double>{1.5, 2.5}));
  EXPECT_EQ(a.virtual_time_us, 4.0);
}
