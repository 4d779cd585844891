#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nnmd/engine.hpp"

using namespace nnmd;

TEST(Lattice, FccHasFourAtomsPerCell) {
  const auto s = fcc_lattice(3.615, {3, 2, 4});
  EXPECT_EQ(s.size(), 4u * 24u);
  EXPECT_DOUBLE_EQ(s.box.length(1), 2 * 3.615);
  double dmin = 1e9;
  for (std::size_t i = 1; i < s.size(); ++i) dmin = std::min(dmin, norm(s.positions[i] - s.positions[0]));
  EXPECT_NEAR(dmin, 3.615 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(fcc_lattice(-1.0, {1, 1, 1}), Error);
}

TEST(Lattice, WaterGeometry) {
  const auto s = water_lattice(3.1, {2, 2, 2});
  ASSERT_EQ(s.size(), 24u);
  for (std::size_t i = 0; i < s.size(); i += 3) {
    ASSERT_EQ(s.types[i], 0);
    ASSERT_EQ(s.types[i + 1], 1);
    ASSERT_EQ(s.types[i + 2], 1);
    const Vec3 a = s.positions[i + 1] - s.positions[i];
    const Vec3 b = s.positions[i + 2] - s.positions[i];
    EXPECT_NEAR(norm(a), 0.9572, 1e-12);
    EXPECT_NEAR(norm(b), 0.9572, 1e-12);
    EXPECT_NEAR(std::acos(dot(a, b) / (norm(a) * norm(b))) * 180.0 / M_PI, 104.52, 1e-9);
  }
}

TEST(RandomSystem, RespectsMinimumSeparationAndSeed) {
  const SimBox box({10, 10, 10});
  const auto a = random_system(box, 60, 3, 1.5, 4);
  const auto b = random_system(box, 60, 3, 1.5, 4);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.types[4], 1);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      Vec3 d = a.positions[i] - a.positions[j];
      for (int k = 0; k < 3; ++k) d[k] -= 10.0 * std::round(d[k] / 10.0);
      EXPECT_GE(norm(d), 1.5);
    }
  EXPECT_THROW(random_system(box, 5000, 1, 3.0, 1), Error);
}

TEST(Velocities, MaxwellBoltzmannHasZeroMomentumAndTargetTemperature) {
  auto s = fcc_lattice(3.615, {6, 6, 6});
  const std::vector<double> masses{63.546};
  maxwell_boltzmann(s, masses, 500.0, 3);
  const Vec3 p = total_momentum(s.velocities, s.types, masses);
  for (double v : p) EXPECT_NEAR(v, 0.0, 1e-12);
  const double t = temperature_of(kinetic_energy(s.velocities, s.types, masses), s.size());
  EXPECT_NEAR(t, 500.0, 40.0);
}

TEST(Xyz, RoundTripIsExact) {
  auto s = water_lattice(3.1, {2, 1, 1});
  maxwell_boltzmann(s, std::vector<double>{15.999, 1.008}, 300.0, 1);
  const std::vector<std::string> names{"O", "H"};
  std::stringstream ss;
  write_xyz(ss, s, names, "step=3");
  write_xyz(ss, s, names);
  SystemState r;
  ASSERT_TRUE(read_xyz(ss, names, r));
  EXPECT_EQ(r.positions, s.positions);
  EXPECT_EQ(r.velocities, s.velocities);
  EXPECT_EQ(r.types, s.types);
  EXPECT_EQ(r.box.lengths(), s.box.lengths());
  ASSERT_TRUE(read_xyz(ss, names, r));
  EXPECT_FALSE(read_xyz(ss, names, r));
}

TEST(Xyz, ErrorsCarryLineNumbers) {
  const std::vector<std::string> names{"Cu"};
  std::stringstream ss("2\nLattice=\"5 0 0 0 5 0 0 0 5\"\nCu 0 0 0\nAr 1 1 1\n");
  SystemState r;
  try {
    read_xyz(ss, names, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  std::stringstream truncated("3\n5 5 5\nCu 0 0 0\n");
  EXPECT_THROW(read_xyz(truncated, names, r), Error);
  std::stringstream bare("1\n4 4 4\nCu 1 2 3\n");
  ASSERT_TRUE(read_xyz(bare, names, r));
  EXPECT_EQ(r.box.length(2), 4.0);
  try {
    load_xyz("/nonexistent.xyz", names);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}
