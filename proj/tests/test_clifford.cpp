#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hqrb/clifford.hpp"
#include "hqrb/device.hpp"
#include "hqrb/rng.hpp"

using namespace hqrb;

namespace {

const CliffordGroup& group() {
  static const CliffordGroup g{DeviceParams{}};
  return g;
}

}  // namespace

TEST(Clifford, TwentyFourDistinctElements) {
  const auto& g = group();
  ASSERT_EQ(g.size(), 24u);
  for (std::size_t a = 0; a < g.size(); ++a) {
    for (std::size_t b = a + 1; b < g.size(); ++b) {
      EXPECT_LT(gate_fidelity(g[a].unitary, g[b].unitary), 1.0 - 1e-6) << a << " vs " << b;
    }
  }
  std::set<AxisRotation> rotations;
  for (const auto& e : g.elements()) rotations.insert(e.rotation);
  EXPECT_EQ(rotations.size(), 24u);
}

TEST(Clifford, IdentityElement) {
  const auto& g = group();
  EXPECT_EQ(g.inverse(CliffordGroup::kIdentity), CliffordGroup::kIdentity);
  EXPECT_EQ(g[CliffordGroup::kIdentity].schedule.duration(), 0.0);
  for (std::size_t a = 0; a < g.size(); ++a) {
    EXPECT_EQ(g.multiply(a, CliffordGroup::kIdentity), a);
    EXPECT_EQ(g.multiply(CliffordGroup::kIdentity, a), a);
  }
}

TEST(Clifford, UniqueInverse) {
  const auto& g = group();
  for (std::size_t a = 0; a < g.size(); ++a) {
    std::size_t count = 0;
    for (std::size_t b = 0; b < g.size(); ++b) {
      if (g.multiply(a, b) == CliffordGroup::kIdentity) {
        ++count;
        EXPECT_EQ(b, g.inverse(a));
        EXPECT_EQ(g.multiply(b, a), CliffordGroup::kIdentity);
      }
    }
    EXPECT_EQ(count, 1u);
  }
}

TEST(Clifford, ClosureAndAssociativity) {
  const auto& g = group();
  for (std::size_t a = 0; a < g.size(); ++a) {
    for (std::size_t b = 0; b < g.size(); ++b) {
      const std::size_t ab = g.multiply(a, b);
      ASSERT_LT(ab, g.size());
      EXPECT_NEAR(gate_fidelity(g[a].unitary * g[b].unitary, g[ab].unitary), 1.0, 1e-12);
    }
  }
  Rng rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, 23);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    EXPECT_EQ(g.multiply(g.multiply(a, b), c), g.multiply(a, g.multiply(b, c)));
  }
}

TEST(Clifford, HalfTurnsCompose) {
  const auto& g = group();
  const std::size_t x90 = g.index_of(rx(kPi / 2.0));
  const std::size_t x180 = g.index_of(rx(kPi));
  EXPECT_EQ(g.multiply(x90, x90), x180);
}

TEST(Clifford, IndexOfRejectsNonClifford) {
  EXPECT_THROW(group().index_of(rx(0.3)), ValidationError);
  EXPECT_EQ(group().index_of(rz(kPi)), group().index_of(ry(kPi) * rx(kPi)));
}

TEST(Clifford, DecompositionsAreShortestWords) {
  const auto& g = group();
  std::size_t max_len = 0;
  for (const auto& e : g.elements()) {
    if (e.group_index == CliffordGroup::kIdentity) {
      EXPECT_EQ(e.decomposition.size(), 1u);
      continue;
    }
    max_len = std::max(max_len, e.decomposition.size());
  }
  // Every single-qubit Clifford is a product of at most three
  // quarter/half turns about X and Y.
  EXPECT_LE(max_len, 3u);
  EXPECT_EQ(g.describe(CliffordGroup::kIdentity), "I");
}

TEST(Clifford, SchedulesRealizeTheirUnitaryNoiselessly) {
  const DeviceParams dp;
  const DeviceModel model;
  for (const auto& e : group().elements()) {
    EXPECT_NEAR(gate_fidelity(e.schedule.target, e.unitary), 1.0, 1e-12);
    EXPECT_GE(gate_fidelity(realize(e.schedule, NoiseRealization{}, model, dp), e.unitary), 1.0 - 1e-9)
        << group().describe(e.group_index);
  }
}

TEST(Clifford, UniformSamplingChiSquare) {
  // 1e5 draws into 24 bins; the 0.999 quantile of chi^2 with 23 dof is 49.728.
  Rng rng = make_stream(2024, {7});
  std::uniform_int_distribution<std::size_t> pick(0, CliffordGroup::kSize - 1);
  std::array<double, 24> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[pick(rng)] += 1.0;
  const double expected = draws / 24.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 49.728);
}
