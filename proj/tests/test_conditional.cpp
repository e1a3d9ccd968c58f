#include <gtest/gtest.h>

#include "elscreen/conditional.hpp"
#include "elscreen/evalkit.hpp"
#include "elscreen/simgen.hpp"
#include "oracles.hpp"

#include <random>

using namespace elscreen;

namespace {

Index rank_of(const IndexSet& ranking, Index j) {
  return static_cast<Index>(std::find(ranking.begin(), ranking.end(), j) - ranking.begin()) + 1;
}

Vector oracle_ael_ratio_rows(const Vector& rows) {
  const double level = std::max(1.0, std::log(static_cast<double>(rows.size())) / 2.0);
  Vector aug(rows.size() + 1);
  aug << rows, -level * rows.mean();
  return Vector::Constant(1, oracle::bisection_el(aug).ratio);
}

}  // namespace

TEST(Slices, BalancedQuantileBins) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  Vector t(103);
  for (auto& v : t) v = z(rng);
  Index used = 0;
  const auto labels = detail::slice_labels(t, 9, used);
  EXPECT_EQ(used, 9);
  std::vector<Index> counts(9, 0);
  for (Index l : labels) ++counts[l];
  EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1);
  // slices are ordered by the target
  for (Eigen::Index a = 0; a < t.size(); ++a)
    for (Eigen::Index b = 0; b < t.size(); ++b)
      if (labels[a] < labels[b]) ASSERT_LE(t[a], t[b]);
}

TEST(Slices, FewDistinctValuesAndDegenerate) {
  Vector t{{1, 2, 1, 2, 3, 3, 1}};
  Index used = 0;
  const auto labels = detail::slice_labels(t, 9, used);
  EXPECT_EQ(used, 3);
  EXPECT_EQ(labels, (std::vector<Index>{0, 1, 0, 1, 2, 2, 0}));
  EXPECT_THROW(detail::slice_labels(Vector::Constant(10, 4.0), 9, used), DegenerateSlices);
}

TEST(Sir, SingleConditioningColumn) {
  std::mt19937_64 rng(2);
  const Matrix xc = oracle::random_normal(100, 1, rng);
  const Vector xj = 0.5 * xc.col(0) + oracle::random_normal(100, 1, rng).col(0);
  const SirResult r = sir_directions(xc, xj);
  ASSERT_EQ(r.directions.cols(), 1);
  EXPECT_NEAR(r.directions(0, 0), 1.0, 1e-12);
}

TEST(Sir, RecoversLinearDirection) {
  std::mt19937_64 rng(3);
  const Matrix xc = oracle::random_normal(500, 3, rng);
  const Vector xj = 2.0 * xc.col(0) + 0.5 * oracle::random_normal(500, 1, rng).col(0);
  const SirResult r = sir_directions(xc, xj, 9, 0.8);
  EXPECT_GE(std::abs(r.directions(0, 0)), 0.95);
  EXPECT_EQ(r.n_slices, 9);
}

TEST(Sir, DirectionsOrthonormalAndBounded) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const Index c = 1 + t % 6;
    const Matrix xc = oracle::random_normal(120, c, rng);
    const Vector xj = xc.rowwise().sum() + oracle::random_normal(120, 1, rng).col(0);
    const SirResult r = sir_directions(xc, xj, 4, 0.8);
    const Matrix gram = r.directions.transpose() * r.directions;
    EXPECT_LE((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GE(r.directions.cols(), 1);
    EXPECT_LE(r.directions.cols(), std::min<Index>(c, 3));
  }
}

TEST(Sir, FullShareUsesAllDirections) {
  std::mt19937_64 rng(5);
  const Matrix xc = oracle::random_normal(300, 3, rng);
  const Vector xj = xc.col(0) + xc.col(1).cwiseAbs2() + oracle::random_normal(300, 1, rng).col(0);
  EXPECT_EQ(sir_directions(xc, xj, 9, 1.0).directions.cols(), 3);
}

TEST(Sir, InvalidInput) {
  Matrix xc = Matrix::Ones(10, 2);
  EXPECT_THROW(sir_directions(xc, Vector::Ones(9)), InvalidArgument);
  EXPECT_THROW(sir_directions(xc, Vector::LinSpaced(10, 0, 1), 1), InvalidArgument);
  EXPECT_THROW(sir_directions(xc, Vector::LinSpaced(10, 0, 1), 9, 0.0), InvalidArgument);
}

TEST(ConditionalFit, PerfectLinearFit) {
  std::mt19937_64 rng(6);
  const Matrix xc = oracle::random_normal(80, 1, rng);
  const ConditionalFit fit = conditional_expectation_fit(xc, Matrix::Identity(1, 1), xc.col(0));
  EXPECT_LE(fit.residual(xc, xc.col(0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ConditionalFit, ResidualOrthogonalToProjections) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const Matrix xc = oracle::random_normal(150, 4, rng);
    const Vector xj = xc * Vector::Random(4) + oracle::random_normal(150, 1, rng).col(0);
    const SirResult sir = sir_directions(xc, xj);
    const ConditionalFit fit = conditional_expectation_fit(xc, sir.directions, xj);
    const Vector res = fit.residual(xc, xj);
    const Matrix z = xc * sir.directions;
    for (Eigen::Index k = 0; k < z.cols(); ++k) EXPECT_LE(std::abs(oracle::covariance(res, z.col(k))), 1e-8);
  }
}

TEST(ConditionalFit, MatchesLeastSquaresOracle) {
  std::mt19937_64 rng(8);
  const Matrix xc = oracle::random_normal(60, 3, rng);
  const Matrix dirs = detail::orthonormalize(Matrix::Random(3, 2));
  const Vector xj = oracle::random_normal(60, 1, rng).col(0) + xc.col(1);
  const ConditionalFit fit = conditional_expectation_fit(xc, dirs, xj);
  Matrix design(60, 3);
  design << Vector::Ones(60), xc * dirs;
  const Vector b = oracle::normal_equations(design, xj);
  const Vector expected = xj - design * b;
  EXPECT_LE((fit.residual(xc, xj) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ConditionalFit, IndependentTargetHasSmallCoefficients) {
  std::mt19937_64 rng(9);
  const Matrix xc = oracle::random_normal(1000, 3, rng);
  const Vector xj = oracle::random_normal(1000, 1, rng).col(0);
  const SirResult sir = sir_directions(xc, xj);
  EXPECT_LE(conditional_expectation_fit(xc, sir.directions, xj).coefficients.norm(), 0.1);
}

TEST(Cmelsis, FullSpanMatchesOlsResidualOracle) {
  std::mt19937_64 rng(10);
  Dataset d;
  d.X = oracle::random_normal(70, 6, rng);
  d.Y = (d.X.col(0) + d.X.col(3) + oracle::random_normal(70, 1, rng).col(0)).eval();
  ConditioningSpec spec;
  spec.cond_set = {0, 1};
  spec.mode = DirectionMode::kFullSpan;
  const ScreeningResult r = conditional_screen(d, spec, Method::kCmelsis, HardRule{2});
  EXPECT_EQ(r.universe, (IndexSet{2, 3, 4, 5}));
  const Dataset s = standardized(d);
  Matrix design(70, 3);
  design << Vector::Ones(70), s.X.col(0), s.X.col(1);
  for (Index k = 0; k < r.universe.size(); ++k) {
    const Vector xj = s.X.col(static_cast<Eigen::Index>(r.universe[k]));
    const Vector res = xj - design * oracle::normal_equations(design, xj);
    EXPECT_NEAR(r.statistics[static_cast<Eigen::Index>(k)], oracle_ael_ratio_rows(res.cwiseProduct(d.Y.col(0)))[0], 1e-6);
  }
}

TEST(Cmelsis, NeverSelectsConditioningIndices) {
  const SimulationScenario s{ModelId::kEx43, 100, 200, 3, 0.0, ErrorCase::kA, 3};
  const Dataset d = generate(s);
  ConditioningSpec spec;
  spec.cond_set = {1, 2, 3};
  const ScreeningResult r = conditional_screen(d, spec, Method::kCmelsis, HardRule{50});
  for (Index j : r.ranking) EXPECT_TRUE(j != 1 && j != 2 && j != 3);
  EXPECT_EQ(r.ranking.size(), 197u);
  EXPECT_EQ(r.method, Method::kCmelsis);
}

TEST(Cmelsis, SpecValidation) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 50, 20, 3, 0.0, ErrorCase::kA, 4});
  ConditioningSpec spec;
  EXPECT_THROW(conditional_screen(d, spec, Method::kCmelsis, HardRule{2}), InvalidArgument);
  spec.cond_set = {1, 1};
  EXPECT_THROW(conditional_screen(d, spec, Method::kCmelsis, HardRule{2}), InvalidArgument);
  spec.cond_set = {25};
  EXPECT_THROW(conditional_screen(d, spec, Method::kCmelsis, HardRule{2}), InvalidArgument);
}

TEST(Cmelsis, ThreadCountIndependence) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 100, 300, 3, 0.0, ErrorCase::kA, 5});
  ConditioningSpec spec;
  spec.cond_set = {0, 8, 9};
  const ScreeningResult a = conditional_screen(d, spec, Method::kCmelsis, HardRule{21}, 1);
  const ScreeningResult b = conditional_screen(d, spec, Method::kCmelsis, HardRule{21}, 4);
  EXPECT_EQ(a.ranking, b.ranking);
  for (Eigen::Index j = 0; j < a.statistics.size(); ++j) EXPECT_EQ(a.statistics[j], b.statistics[j]);
}

TEST(Cmelsis, HiddenVariableRecovery) {
  // X5 is independent of the other predictors but active only in Y3.
  const SimulationScenario tmpl{ModelId::kEx43, 100, 1000, 3, 0.0, ErrorCase::kA, 0};
  ConditioningSpec spec;
  spec.cond_set = {1, 2, 3};
  int cond_ok = 0;
  const int runs = 40;
  for (int rep = 0; rep < runs; ++rep) {
    const Dataset d = generate(replicate_scenario(tmpl, 77, static_cast<std::uint64_t>(rep)));
    const ScreeningResult c = conditional_screen(d, spec, Method::kCmelsis, HardRule{21});
    if (rank_of(c.ranking, 4) <= 2) ++cond_ok;
  }
  EXPECT_GE(cond_ok, 0.95 * runs);
}

TEST(Cmelsis, Model6ConditioningRecoversMaskedPredictor) {
  // population E[X3 y] = 0, so the marginal screen ranks X3 low
  const SimulationScenario tmpl{ModelId::kCase1, 200, 500, 2, 0.0, ErrorCase::kA, 0};
  ConditioningSpec spec;
  spec.cond_set = {0, 1};
  int first = 0, marginal_low = 0;
  const int runs = 30;
  for (int rep = 0; rep < runs; ++rep) {
    const Dataset d = generate(replicate_scenario(tmpl, 5, static_cast<std::uint64_t>(rep)));
    const ScreeningResult c = conditional_screen(d, spec, Method::kCmelsis, HardRule{1});
    if (c.ranking.front() == 2) ++first;
    const ScreeningResult m = screen(d, Method::kMelsis, 21);
    if (rank_of(m.ranking, 2) > 21) ++marginal_low;
  }
  EXPECT_GE(first, 0.9 * runs);
  EXPECT_GE(marginal_low, 0.9 * runs);
}

TEST(Cmelsis, IndependentConditioningSetAgreesWithMelsis) {
  std::mt19937_64 rng(12);
  int agree = 0;
  const int runs = 20;
  for (int t = 0; t < runs; ++t) {
    Dataset d;
    d.X = oracle::random_normal(400, 60, rng);
    d.Y = Matrix(400, 2);
    const Matrix e = oracle::random_normal(400, 2, rng);
    d.Y.col(0) = 1.0 * d.X.col(0) + 0.8 * d.X.col(1) + e.col(0);
    d.Y.col(1) = 0.8 * d.X.col(1) + 1.0 * d.X.col(2) + e.col(1);
    ConditioningSpec spec;
    spec.cond_set = {57, 58, 59};  // pure noise columns
    const ScreeningResult c = conditional_screen(d, spec, Method::kCmelsis, HardRule{3});
    Dataset sub = d;
    sub.X = d.X.leftCols(57);
    sub.predictor_names.clear();
    const ScreeningResult m = screen(sub, Method::kMelsis, 3);
    IndexSet a = c.selected, b = m.selected;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a == b) ++agree;
  }
  EXPECT_GE(agree, 0.9 * runs);
}

TEST(Centralize, SoftRuleCentralizesOnce) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 100, 200, 3, 0.0, ErrorCase::kA, 13});
  ConditioningSpec spec;
  spec.cond_set = {1, 2, 3};
  const ScreeningResult a = conditional_screen_soft(d, spec, Method::kCmelsis, 0.99, 7);
  const ScreeningResult b = conditional_screen_soft(d, spec, Method::kCmelsis, 0.99, 7, 3);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.threshold.kind, "soft");
  for (Index j : a.selected) EXPECT_GE(a.statistics[static_cast<Eigen::Index>(std::find(a.universe.begin(), a.universe.end(), j) - a.universe.begin())], a.threshold.parameter);
}

TEST(TwoStep, DegenerateStages) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 60, 12, 3, 0.0, ErrorCase::kA, 14});
  const TwoStepResult none = two_step_screen(d, 4, 0);
  EXPECT_EQ(none.selected, screen(d, Method::kMelsis, 4).selected);
  const TwoStepResult all = two_step_screen(d, 12, 0);
  IndexSet sorted = all.selected;
  std::sort(sorted.begin(), sorted.end());
  IndexSet expected(12);
  std::iota(expected.begin(), expected.end(), Index{0});
  EXPECT_EQ(sorted, expected);
  EXPECT_THROW(two_step_screen(d, 0, 3), InvalidArgument);
  EXPECT_THROW(two_step_screen(d, 8, 5), InvalidArgument);
}

TEST(TwoStep, CombinedRankingStartsWithConditioningSet) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 100, 300, 3, 0.0, ErrorCase::kA, 15});
  const TwoStepResult r = two_step_screen(d, 3, 18);
  EXPECT_EQ(IndexSet(r.ranking.begin(), r.ranking.begin() + 3), r.cond_set);
  EXPECT_EQ(r.selected.size(), 21u);
  EXPECT_EQ(r.ranking.size(), 300u);
  IndexSet sorted = r.ranking;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_TRUE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST(Sequential, Examples) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 80, 40, 3, 0.0, ErrorCase::kA, 16});
  EXPECT_EQ(sequential_screen(d, 1), IndexSet{rank_predictors(melsis_statistics(d)).front()});
  Dataset two = d;
  two.X = d.X.leftCols(2);
  two.predictor_names.clear();
  const IndexSet both = sequential_screen(two, 2);
  EXPECT_EQ(both.front(), rank_predictors(melsis_statistics(two)).front());
  EXPECT_EQ(both.size(), 2u);
  EXPECT_NE(both[0], both[1]);
  EXPECT_EQ(default_sequential_steps(100), 21);
}

TEST(Sequential, RecoversActiveSetOnHiddenVariableModel) {
  const SimulationScenario tmpl{ModelId::kEx43, 100, 1000, 3, 0.0, ErrorCase::kA, 0};
  int hits = 0;
  const int runs = 20;
  for (int rep = 0; rep < runs; ++rep) {
    const Dataset d = generate(replicate_scenario(tmpl, 31, static_cast<std::uint64_t>(rep)));
    IndexSet got = sequential_screen(d, 5);
    std::sort(got.begin(), got.end());
    if (got == IndexSet{0, 1, 2, 3, 4}) ++hits;
  }
  EXPECT_GE(hits, 0.8 * runs);
}
