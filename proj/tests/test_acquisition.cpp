#include <gtest/gtest.h>

#include "boars/acquisition.hpp"
#include "support.hpp"

using namespace boars;

namespace {

Vector one(double v) { return Vector::Constant(1, v); }

AcquisitionSpec spec(AcquisitionKind kind, double xi = 0.0, double kappa = 2.0) { return {kind, xi, kappa}; }

}  // namespace

TEST(Acquisition, EiAtZeroGapIsPdfAtZero) {
  EXPECT_NEAR(acquisition_scores(one(0.4), one(1.0), 0.4, spec(AcquisitionKind::EI))[0], 0.3989422804, 1e-10);
  // sigma scales EI linearly at z = 0.
  EXPECT_NEAR(acquisition_scores(one(0.4), one(4.0), 0.4, spec(AcquisitionKind::EI))[0], 2 * 0.3989422804, 1e-10);
}

TEST(Acquisition, EiWithoutUncertainty) {
  EXPECT_EQ(acquisition_scores(one(0.3), one(0.0), 0.5, spec(AcquisitionKind::EI))[0], 0.0);
  EXPECT_EQ(acquisition_scores(one(0.5), one(0.0), 0.5, spec(AcquisitionKind::EI))[0], 0.0);
  EXPECT_DOUBLE_EQ(acquisition_scores(one(0.8), one(0.0), 0.5, spec(AcquisitionKind::EI, 0.1))[0], 0.2);
}

TEST(Acquisition, EiMatchesClosedForm) {
  std::mt19937_64 rng(31);
  const Vector mu = testing_support::random_vector(rng, 50, -1, 1);
  const Vector var = testing_support::random_vector(rng, 50, 0.01, 2);
  const Vector s = acquisition_scores(mu, var, 0.2, spec(AcquisitionKind::EI, 0.01));
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double sd = std::sqrt(var[i]), z = (mu[i] - 0.21) / sd;
    const double cdf = 0.5 * (1 + std::erf(z / std::sqrt(2.0)));
    const double pdf = std::exp(-z * z / 2) / std::sqrt(2 * std::numbers::pi);
    EXPECT_NEAR(s[i], (mu[i] - 0.21) * cdf + sd * pdf, 1e-12);
    EXPECT_GE(s[i], 0.0);
  }
}

TEST(Acquisition, UcbWithZeroKappaIsTheMean) {
  std::mt19937_64 rng(32);
  const Vector mu = testing_support::random_vector(rng, 20, -1, 1);
  const Vector var = testing_support::random_vector(rng, 20, 0, 1);
  EXPECT_EQ(acquisition_scores(mu, var, 0.0, spec(AcquisitionKind::UCB, 0.0, 0.0)), mu);
  const Vector ucb = acquisition_scores(mu, var, 0.0, spec(AcquisitionKind::UCB, 0.0, 1.5));
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(ucb[i], mu[i] + 1.5 * std::sqrt(var[i]));
}

TEST(Acquisition, ProbabilityOfImprovement) {
  EXPECT_DOUBLE_EQ(acquisition_scores(one(0.5), one(1.0), 0.5, spec(AcquisitionKind::PI))[0], 0.5);
  EXPECT_EQ(acquisition_scores(one(0.6), one(0.0), 0.5, spec(AcquisitionKind::PI))[0], 1.0);
  EXPECT_EQ(acquisition_scores(one(0.4), one(0.0), 0.5, spec(AcquisitionKind::PI))[0], 0.0);
}

TEST(Acquisition, RejectsNegativeVarianceAndMismatch) {
  EXPECT_THROW(acquisition_scores(one(0.0), one(-1e-9), 0.0, spec(AcquisitionKind::EI)), Error);
  EXPECT_THROW(acquisition_scores(Vector::Zero(2), one(0.0), 0.0, spec(AcquisitionKind::EI)), Error);
  EXPECT_THROW(acquisition_scores(one(0.0), one(0.0), 0.0, spec(AcquisitionKind::EI, -0.1)), Error);
  EXPECT_THROW(acquisition_kind_from_string("thompson"), Error);
}

TEST(SelectNext, UniqueMaximumTiesAndMasking) {
  const std::vector<GridIndex> cands = {{2, 2}, {2, 3}, {3, 2}, {3, 3}};
  const std::vector<char> none(4, 0);
  EXPECT_EQ(select_next((Vector(4) << 0.1, 0.9, 0.3, 0.2).finished(), cands, none), (GridIndex{2, 3}));
  EXPECT_EQ(select_next((Vector(4) << 0.1, 0.5, 0.3, 0.5).finished(), cands, none), (GridIndex{2, 3}));
  // Ties resolve by row-major order even when scores are listed out of order.
  const std::vector<GridIndex> shuffled = {{3, 3}, {2, 3}, {3, 2}, {2, 2}};
  EXPECT_EQ(select_next(Vector::Constant(4, 1.0), shuffled, none), (GridIndex{2, 2}));
  const std::vector<char> mask = {0, 1, 0, 0};
  EXPECT_EQ(select_next((Vector(4) << 0.1, 0.9, 0.3, 0.2).finished(), cands, mask), (GridIndex{3, 2}));
  EXPECT_THROW(select_next(Vector::Zero(4), cands, std::vector<char>(4, 1)), Error);
}

TEST(SelectNext, NeverPicksAnExploredIndex) {
  std::mt19937_64 rng(33);
  std::vector<GridIndex> cands;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) cands.push_back({r, c});
  std::vector<char> explored(100, 0);
  for (int step = 0; step < 100; ++step) {
    const Vector s = testing_support::random_vector(rng, 100);
    const std::size_t pos = select_next_position(s, cands, explored);
    ASSERT_FALSE(explored[pos]);
    for (std::size_t i = 0; i < 100; ++i)
      if (!explored[i]) ASSERT_LE(s[static_cast<Eigen::Index>(i)], s[static_cast<Eigen::Index>(pos)]);
    explored[pos] = 1;
  }
}
