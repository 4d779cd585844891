#include <gtest/gtest.h>

#include "nnmd/geometry.hpp"

using namespace nnmd;

TEST(SimBox, WrapMapsIntoBoxAndIsIdempotent) {
  const SimBox box({10.0, 5.0, 2.0});
  const Vec3 w = box.wrap(Vec3{-0.5, 12.0, 2.0});
  EXPECT_DOUBLE_EQ(w[0], 9.5);
  EXPECT_DOUBLE_EQ(w[1], 2.0);
  EXPECT_DOUBLE_EQ(w[2], 0.0);
  EXPECT_EQ(box.wrap(w), w);
  const Vec3 inside{3.3, 4.9, 0.1};
  EXPECT_EQ(box.wrap(inside), inside);
}

TEST(SimBox, WrapNeverReturnsUpperBound) {
  const SimBox box({3.0, 3.0, 3.0});
  const double x = box.wrap(-1e-17, 0);
  EXPECT_GE(x, 0.0);
  EXPECT_LT(x, 3.0);
}

TEST(SimBox, RejectsNonPositiveLengths) {
  EXPECT_THROW(SimBox({1.0, 0.0, 1.0}), Error);
  EXPECT_THROW(SimBox({1.0, -2.0, 1.0}), Error);
}

TEST(RankTopology, NodeGridIsComponentwiseQuotient) {
  const RankTopology t({8, 12, 8}, {2, 2, 1});
  EXPECT_EQ(t.node_grid(), (Int3{4, 6, 8}));
  EXPECT_EQ(t.num_ranks(), 768);
  EXPECT_EQ(t.num_nodes(), 192);
  EXPECT_EQ(t.ranks_per_node(), 4);
}

TEST(RankTopology, RejectsIndivisibleLayout) {
  try {
    RankTopology({3, 2, 2}, {2, 2, 1});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidTopology);
  }
}

TEST(RankTopology, NodeMajorNumberingRoundTrips) {
  const RankTopology t({4, 4, 2}, {2, 2, 1});
  for (int r = 0; r < t.num_ranks(); ++r) {
    EXPECT_EQ(t.rank_at(t.rank_coord(r)), r);
    const auto peers = t.ranks_of_node(t.node_of(r));
    ASSERT_EQ(peers.size(), 4u);
    EXPECT_EQ(peers[t.local_index(r)], r);
  }
  // Ranks of node 0 are the 2x2 block at the origin.
  EXPECT_EQ(t.rank_coord(0), (Int3{0, 0, 0}));
  EXPECT_EQ(t.rank_coord(1), (Int3{1, 0, 0}));
  EXPECT_EQ(t.rank_coord(2), (Int3{0, 1, 0}));
  EXPECT_EQ(t.rank_coord(3), (Int3{1, 1, 0}));
  EXPECT_EQ(t.rank_at({-1, 0, 0}), t.rank_at({3, 0, 0}));
}

TEST(Decompose, SubBoxesTileTheBox) {
  const SimBox box({9.0, 6.0, 3.0});
  const RankTopology t({3, 2, 1}, {1, 1, 1});
  const auto boxes = decompose(box, t);
  ASSERT_EQ(boxes.size(), 6u);
  double volume = 0.0;
  for (const auto& b : boxes) {
    const Vec3 s = b.sides();
    volume += s[0] * s[1] * s[2];
  }
  EXPECT_DOUBLE_EQ(volume, box.volume());
  EXPECT_DOUBLE_EQ(split_point(box, 3, 1, 0), 3.0);
  EXPECT_EQ(boxes[t.rank_at({2, 1, 0})].hi, box.lengths());
}

TEST(LocateRank, SplitPointBelongsToHigherCell) {
  const SimBox box({4.0, 4.0, 4.0});
  const RankTopology t({2, 2, 2}, {1, 1, 1});
  EXPECT_EQ(locate_rank({2.0, 0.0, 0.0}, box, t), t.rank_at({1, 0, 0}));
  EXPECT_EQ(locate_rank({1.999, 0.0, 0.0}, box, t), t.rank_at({0, 0, 0}));
  EXPECT_EQ(locate_rank({-0.5, 4.5, 0.0}, box, t), t.rank_at({1, 0, 0}));
  const auto boxes = decompose(box, t);
  for (double x : {0.0, 0.7, 1.999999, 2.0, 3.9999}) {
    const Vec3 p{x, x, x};
    EXPECT_TRUE(boxes[locate_rank(p, box, t)].contains(p));
  }
}

TEST(NodeBox, BoundsTheNodeRanks) {
  const SimBox box({8.0, 8.0, 4.0});
  const RankTopology t({4, 4, 2}, {2, 2, 1});
  const auto boxes = decompose(box, t);
  for (int n = 0; n < t.num_nodes(); ++n) {
    const SubBox nb = node_box(t, box, n);
    EXPECT_EQ(nb.owner, n);
    for (int r : t.ranks_of_node(n)) {
      for (int d = 0; d < 3; ++d) {
        EXPECT_GE(boxes[r].lo[d], nb.lo[d]);
        EXPECT_LE(boxes[r].hi[d], nb.hi[d]);
      }
    }
    const Vec3 s = nb.sides();
    EXPECT_DOUBLE_EQ(s[0], 4.0);
    EXPECT_DOUBLE_EQ(s[2], 2.0);
  }
}

TEST(GhostModel, UnitCubeWithCutoffTwo) {
  const GhostCounts c = ghost_count_model(1.0, 2.0);
  EXPECT_DOUBLE_EQ(c.nghost_bs, 124.0);
  EXPECT_DOUBLE_EQ(c.nghost_lb, 179.0);
  EXPECT_NEAR(c.ratio(), 179.0 / 124.0, 1e-15);
}

TEST(GhostModel, RejectsBadArguments) {
  EXPECT_THROW(ghost_count_model(0.0, 1.0), Error);
  EXPECT_THROW(ghost_count_model(1.0, -1.0), Error);
}

TEST(FloorDiv, RoundsTowardNegativeInfinity) {
  EXPECT_EQ(floor_div(7, 2), 3);
  EXPECT_EQ(floor_div(-7, 2), -4);
  EXPECT_EQ(floor_div(-8, 2), -4);
  EXPECT_EQ(floor_div(0, 3), 0);
}
