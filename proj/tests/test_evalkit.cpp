#include <gtest/gtest.h>

#include "elscreen/evalkit.hpp"
#include "elscreen/simgen.hpp"
#include "oracles.hpp"

#include <random>

using namespace elscreen;

namespace {

IndexSet shuffled(Index p, std::mt19937_64& rng) {
  IndexSet r(p);
  std::iota(r.begin(), r.end(), Index{0});
  std::shuffle(r.begin(), r.end(), rng);
  return r;
}

// Orthonormal columns with nonzero means.
Matrix orthogonal_rows(Index n, Index q, std::mt19937_64& rng) {
  const Matrix m = oracle::random_rows(n, q, 0.7, 0, rng);
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

}  // namespace

TEST(MinimalModelSize, Examples) {
  EXPECT_EQ(minimal_model_size({3, 1, 2, 0}, {1, 2}), 3);
  EXPECT_EQ(minimal_model_size({0, 1, 2}, {0}), 1);
  EXPECT_EQ(minimal_model_size({4, 3, 2, 1, 0}, {0, 4}), 5);
  EXPECT_THROW(minimal_model_size({0, 1}, {5}), MissingActive);
  EXPECT_THROW(minimal_model_size({0, 1}, {}), InvalidArgument);
}

TEST(MinimalModelSize, BoundsOnRandomRankings) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const IndexSet r = shuffled(50, rng);
    const IndexSet a{0, 7, 13};
    const Index m = minimal_model_size(r, a);
    EXPECT_GE(m, 3);
    EXPECT_LE(m, 50);
    // the top-m prefix holds every active index; the top-(m-1) prefix does not
    IndexSet top(r.begin(), r.begin() + m);
    for (Index j : a) EXPECT_NE(std::find(top.begin(), top.end(), j), top.end());
    top.pop_back();
    bool all = true;
    for (Index j : a) all = all && std::find(top.begin(), top.end(), j) != top.end();
    EXPECT_FALSE(all);
  }
}

TEST(UnionModelSize, Example) {
  const std::vector<IndexSet> rankings{{0, 5, 1, 2, 6, 3, 4}, {2, 6, 3, 0, 1, 5, 4}};
  EXPECT_EQ(union_model_size(rankings, {0, 1, 2}), 6);
  EXPECT_EQ(union_model_size(rankings, {0, 2}), 2);
  EXPECT_THROW(union_model_size(rankings, {9}), MissingActive);
}

TEST(UnionModelSize, SingleRankingEqualsMms) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const IndexSet r = shuffled(40, rng);
    EXPECT_EQ(union_model_size({r}, {1, 2, 3}), minimal_model_size(r, {1, 2, 3}));
  }
}

TEST(UnionModelSize, BruteForceOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<IndexSet> rs{shuffled(30, rng), shuffled(30, rng), shuffled(30, rng)};
    const IndexSet a{4, 9, 11, 20};
    // smallest common depth d such that the union of prefixes covers A
    Index expected = 0;
    for (Index d = 1; d <= 30; ++d) {
      std::vector<char> in(30, 0);
      for (const auto& r : rs)
        for (Index k = 0; k < d; ++k) in[r[k]] = 1;
      bool ok = true;
      for (Index j : a) ok = ok && in[j];
      if (ok) {
        expected = static_cast<Index>(std::count(in.begin(), in.end(), 1));
        break;
      }
    }
    EXPECT_EQ(union_model_size(rs, a), expected);
    EXPECT_GE(expected, a.size());
  }
}

TEST(Coverage, Proportions) {
  const std::vector<IndexSet> sel{{0, 1, 2}, {0, 2, 5}, {1, 3, 0}, {0, 1}};
  const Coverage c = coverage_proportions(sel, {0, 1});
  EXPECT_DOUBLE_EQ(c.p_j.at(0), 1.0);
  EXPECT_DOUBLE_EQ(c.p_j.at(1), 0.75);
  EXPECT_DOUBLE_EQ(c.p_a, 0.75);
  EXPECT_THROW(coverage_proportions({}, {0}), InvalidArgument);
}

TEST(Coverage, JointNeverExceedsMarginals) {
  std::mt19937_64 rng(4);
  std::vector<IndexSet> sel;
  for (int t = 0; t < 60; ++t) {
    IndexSet r = shuffled(20, rng);
    r.resize(6);
    sel.push_back(r);
  }
  const Coverage c = coverage_proportions(sel, {0, 1, 2});
  for (const auto& [j, v] : c.p_j) EXPECT_LE(c.p_a, v);
}

TEST(Quantiles, TypeSevenInterpolation) {
  const auto q = quantile_summary({5, 1, 4, 2, 3});
  EXPECT_EQ(q, (std::vector<double>{1.2, 2.0, 3.0, 4.0, 4.8}));
  const auto r = quantile_summary({1, 2, 3, 4}, {0.05, 0.5, 1.0, 0.0});
  EXPECT_NEAR(r[0], 1.15, 1e-12);
  EXPECT_DOUBLE_EQ(r[1], 2.5);
  EXPECT_DOUBLE_EQ(r[2], 4.0);
  EXPECT_DOUBLE_EQ(r[3], 1.0);
  EXPECT_EQ(quantile_summary({7}), std::vector<double>(5, 7.0));
  EXPECT_THROW(quantile_summary({}), InvalidArgument);
  EXPECT_THROW(quantile_summary({1, 2}, {1.5}), InvalidArgument);
}

TEST(Quantiles, MonotoneInProbability) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e;
  std::vector<double> v(37);
  for (auto& x : v) x = e(rng);
  const auto q = quantile_summary(v, {0.0, 0.1, 0.3, 0.5, 0.9, 1.0});
  EXPECT_TRUE(std::is_sorted(q.begin(), q.end()));
  EXPECT_DOUBLE_EQ(q.front(), *std::min_element(v.begin(), v.end()));
  EXPECT_DOUBLE_EQ(q.back(), *std::max_element(v.begin(), v.end()));
}

TEST(Report, SummarizeAndJson) {
  const EvaluationReport r = summarize("MELSIS", {5, 6, 7, 9}, {{0, 1, 4}, {0, 3}}, {0, 1}, 21, "hard");
  EXPECT_EQ(r.replications, 4);
  EXPECT_DOUBLE_EQ(r.p_j.at(1), 1.0);
  EXPECT_DOUBLE_EQ(r.p_j.at(2), 0.5);
  EXPECT_DOUBLE_EQ(r.p_a, 0.5);
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["method"], "MELSIS");
  EXPECT_EQ(j["model_size"], 21);
  EXPECT_DOUBLE_EQ(j["mms_quantiles"]["50%"].get<double>(), 6.5);
  EXPECT_TRUE(j["mms_quantiles"].contains("5%"));
  EXPECT_DOUBLE_EQ(j["p_j"]["P2"].get<double>(), 0.5);
  EXPECT_FALSE(j.contains("median_selected_size"));
}

TEST(Diagnostics, PopulationEquicorrelation) {
  const double rho = 0.4;
  const Index p = 12, s = 3, m = p - s;
  const Matrix cov = equicorrelation(p, rho);
  Matrix cov_xy = Matrix::Zero(p, 2);
  cov_xy(0, 0) = 2.0;
  cov_xy(1, 1) = 1.0;
  cov_xy(2, 0) = 0.5;
  cov_xy(2, 1) = 0.5;
  IndexSet a{0, 1, 2}, in;
  for (Index j = s; j < p; ++j) in.push_back(j);
  const PropositionDiagnostics d = proposition_diagnostics(cov, cov_xy, a, in);
  // C_AI C_IA = rho^2 m 1 1', largest eigenvalue rho^2 m s; lmin(C_AA) = 1 - rho
  EXPECT_NEAR(d.lhs_ratio, s * rho * rho * m * s / (1 - rho), 1e-10);
  EXPECT_NEAR(d.rhs_min, 0.5, 1e-12);
  EXPECT_NEAR(proposition_diagnostics(Matrix::Identity(p, p), cov_xy, a, in).lhs_ratio, 0.0, 1e-12);
}

TEST(Diagnostics, SampleVersionWithConditioning) {
  const Dataset d = generate(SimulationScenario{ModelId::kEx43, 200, 60, 3, 0.0, ErrorCase::kA, 9});
  IndexSet active{0, 1, 2, 3, 4}, inactive;
  for (Index j = 5; j < 60; ++j) inactive.push_back(j);
  ConditioningSpec spec;
  spec.cond_set = {1, 2, 3};
  const PropositionDiagnostics r = proposition_diagnostics(d, active, inactive, spec);
  EXPECT_GT(r.lhs_ratio, 0.0);
  EXPECT_GT(r.rhs_min, 0.0);
  ASSERT_TRUE(r.conditional_lhs_ratio.has_value());
  ASSERT_TRUE(r.conditional_rhs_min.has_value());
  EXPECT_TRUE(std::isfinite(*r.conditional_lhs_ratio));
  // centralizing the correlated design removes most of the cross-correlation with inactive predictors
  EXPECT_LT(*r.conditional_lhs_ratio, r.lhs_ratio);
  const PropositionDiagnostics u = proposition_diagnostics(d, active, inactive);
  EXPECT_FALSE(u.conditional_lhs_ratio.has_value());
  EXPECT_DOUBLE_EQ(u.lhs_ratio, r.lhs_ratio);
}

TEST(Taylor, HotellingMatchesProjectionOracle) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const Matrix v = oracle::random_rows(80, 1 + t % 5, 0.2, t % 3, rng);
    const TaylorComparison c = taylor_comparator(EstimatingMatrix(v));
    // n vbar' S^-1 vbar = ||P_V 1||^2 with S = V'V / n
    const Vector ones = Vector::Ones(80);
    const Vector fitted = v * oracle::normal_equations(v, ones);
    EXPECT_NEAR(c.hotelling, fitted.squaredNorm(), 1e-8 * std::max(1.0, c.hotelling));
    double mx = 0.0;
    for (Eigen::Index k = 0; k < v.cols(); ++k) mx = std::max(mx, std::pow(v.col(k).sum(), 2) / v.col(k).squaredNorm());
    EXPECT_NEAR(c.max_form, mx, 1e-10 * std::max(1.0, mx));
    EXPECT_LE(c.max_form, c.avg_form + 1e-12);
  }
}

TEST(Taylor, DiagonalCovarianceMakesFormsAgree) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const Index q = 1 + t % 6;
    Matrix v = orthogonal_rows(60, q, rng);
    for (Eigen::Index k = 0; k < v.cols(); ++k) v.col(k) *= 0.5 + k;
    const TaylorComparison c = taylor_comparator(EstimatingMatrix(v));
    EXPECT_NEAR(c.hotelling, c.avg_form, 1e-8);
  }
}

TEST(Taylor, ElCloseToHotellingNearNull) {
  std::mt19937_64 rng(8);
  int close = 0;
  const int draws = 200;
  for (int t = 0; t < draws; ++t) {
    const Matrix g = oracle::random_rows(500, 4, 0.0, 0, rng);
    const TaylorComparison c = taylor_comparator(EstimatingMatrix(g));
    EXPECT_FALSE(c.ael_used);
    if (std::abs(c.el_ratio - c.hotelling) <= 0.05 * std::max(1.0, c.hotelling)) ++close;
  }
  EXPECT_GE(close, 0.95 * draws);
}
