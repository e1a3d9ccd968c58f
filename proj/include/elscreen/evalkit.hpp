#pragma once

// Screening-quality metrics, eigenvalue-ratio diagnostics for the ranking
// conditions, and the quadratic (Hotelling-type) approximations of the EL
// statistics.

#include "elscreen/common.hpp"
#include "elscreen/conditional.hpp"
#include "elscreen/el_core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace elscreen {

// ---------------------------------------------------------------------------
// Minimal model size and coverage
// ---------------------------------------------------------------------------

/// 1 + the worst 0-based rank position among the active indices.
inline Index minimal_model_size(const IndexSet& ranking, const IndexSet& active) {
  require(!active.empty(), "active set must be nonempty");
  Index worst = 0;
  for (Index a : active) {
    const auto it = std::find(ranking.begin(), ranking.end(), a);
    if (it == ranking.end()) throw MissingActive("active index " + std::to_string(a) + " is not ranked");
    worst = std::max(worst, static_cast<Index>(it - ranking.begin()));
  }
  return worst + 1;
}

/// Size of the pooled per-response model: the union of every ranking's top-d
/// at the smallest d for which each active index appears in some top-d.
inline Index union_model_size(const std::vector<IndexSet>& rankings, const IndexSet& active) {
  require(!rankings.empty(), "need at least one ranking");
  Index worst = 0;
  for (Index a : active) {
    Index best = std::numeric_limits<Index>::max();
    for (const IndexSet& r : rankings) {
      const auto it = std::find(r.begin(), r.end(), a);
      if (it != r.end()) best = std::min(best, static_cast<Index>(it - r.begin()));
    }
    if (best == std::numeric_limits<Index>::max())
      throw MissingActive("active index " + std::to_string(a) + " is not ranked");
    worst = std::max(worst, best);
  }
  // smallest per-ranking depth covering A is worst+1; report the size of the pooled set at that depth
  std::vector<Index> pooled;
  for (const IndexSet& r : rankings) {
    const auto depth = std::min<std::size_t>(r.size(), static_cast<std::size_t>(worst + 1));
    pooled.insert(pooled.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(depth));
  }
  std::sort(pooled.begin(), pooled.end());
  return static_cast<Index>(std::unique(pooled.begin(), pooled.end()) - pooled.begin());
}

struct Coverage {
  std::map<Index, double> p_j;
  double p_a = 0.0;
};

inline Coverage coverage_proportions(const std::vector<IndexSet>& selections, const IndexSet& active) {
  require(!selections.empty(), "coverage needs at least one selection");
  Coverage out;
  for (Index a : active) out.p_j[a] = 0.0;
  Index all = 0;
  for (const IndexSet& sel : selections) {
    bool every = true;
    for (Index a : active) {
      if (std::find(sel.begin(), sel.end(), a) != sel.end())
        out.p_j[a] += 1.0;
      else
        every = false;
    }
    if (every) ++all;
  }
  const double r = static_cast<double>(selections.size());
  for (auto& [idx, v] : out.p_j) v /= r;
  out.p_a = static_cast<double>(all) / r;
  return out;
}

inline const std::vector<double>& default_probs() {
  static const std::vector<double> probs{0.05, 0.25, 0.50, 0.75, 0.95};
  return probs;
}

/// Type-7 (linear interpolation) empirical quantiles.
inline std::vector<double> quantile_summary(std::vector<double> values,
                                            const std::vector<double>& probs = default_probs()) {
  require(!values.empty(), "quantiles of an empty sample");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const double m = static_cast<double>(values.size());
  for (double prob : probs) {
    require(prob >= 0.0 && prob <= 1.0, "quantile probability outside [0, 1]");
    const double h = (m - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    out.push_back(values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::string method;
  std::vector<double> mms_quantiles;
  std::map<Index, double> p_j;  // keyed by 1-based predictor index
  double p_a = 0.0;
  Index replications = 0;
  Index model_size = 0;  // hard-rule size used for P_j / P_a (0 when soft)
  std::string model_size_rule;
  std::optional<double> median_selected_size;  // soft rule only
  std::optional<std::vector<double>> union_coverage;  // combined per-response MMS quantiles
};

/// Aggregates per-replication MMS values and selections into a report.
/// `active` is 0-based; P_j keys are stored 1-based.
inline EvaluationReport summarize(std::string method, const std::vector<double>& mms,
                                  const std::vector<IndexSet>& selections, const IndexSet& active,
                                  Index model_size, std::string rule) {
  EvaluationReport r;
  r.method = std::move(method);
  r.mms_quantiles = quantile_summary(mms);
  const Coverage cov = coverage_proportions(selections, active);
  for (const auto& [idx, v] : cov.p_j) r.p_j[idx + 1] = v;
  r.p_a = cov.p_a;
  r.replications = static_cast<Index>(mms.size());
  r.model_size = model_size;
  r.model_size_rule = std::move(rule);
  return r;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["replications"] = r.replications;
  j["model_size_rule"] = r.model_size_rule;
  j["model_size"] = r.model_size;
  nlohmann::json q = nlohmann::json::object();
  const auto& probs = default_probs();
  for (std::size_t k = 0; k < probs.size() && k < r.mms_quantiles.size(); ++k) {
    q[std::to_string(static_cast<int>(std::lround(probs[k] * 100))) + "%"] = r.mms_quantiles[k];
  }
  j["mms_quantiles"] = q;
  nlohmann::json pj = nlohmann::json::object();
  for (const auto& [idx, v] : r.p_j) pj["P" + std::to_string(idx)] = v;
  j["p_j"] = pj;
  j["p_a"] = r.p_a;
  if (r.median_selected_size) j["median_selected_size"] = *r.median_selected_size;
  if (r.union_coverage) j["union_coverage_mms_quantiles"] = *r.union_coverage;
  return j;
}

// ---------------------------------------------------------------------------
// Ranking-condition diagnostics
// ---------------------------------------------------------------------------

struct PropositionDiagnostics {
  double lhs_ratio = 0.0;  // K * lmax(C_AI C_IA) / lmin(C_AA)
  double rhs_min = 0.0;    // min_{j in A} ||E x_j y||^2
  std::optional<double> conditional_lhs_ratio;
  std::optional<double> conditional_rhs_min;
};

namespace detail {

inline double eigen_ratio(const Matrix& cross, const Matrix& within, double k) {
  const Matrix prod = cross * cross.transpose();
  const double lmax = prod.rows() == 0 ? 0.0 : Eigen::SelfAdjointEigenSolver<Matrix>(prod, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(within, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(lmin > 1e-12)) return std::numeric_limits<double>::infinity();
  return k * lmax / lmin;
}

inline Matrix sample_cross_cov(const Matrix& a, const Matrix& b) {
  const Matrix ac = a.rowwise() - a.colwise().mean();
  const Matrix bc = b.rowwise() - b.colwise().mean();
  return ac.transpose() * bc / static_cast<double>(a.rows());
}

inline double min_moment_norm2(const Matrix& xa, const Matrix& Y) {
  const Matrix moments = xa.transpose() * Y / static_cast<double>(xa.rows());  // |A| x q
  return moments.rowwise().squaredNorm().minCoeff();
}

}  // namespace detail

/// Population version: `cov_x` is the p x p covariance of X and `cov_xy`
/// the p x q matrix E[X y'] (zero-mean X).
inline PropositionDiagnostics proposition_diagnostics(const Matrix& cov_x, const Matrix& cov_xy,
                                                      const IndexSet& active, const IndexSet& inactive) {
  require(!active.empty(), "diagnostics need a nonempty active set");
  Matrix c_aa(active.size(), active.size()), c_ai(active.size(), inactive.size());
  for (Index a = 0; a < active.size(); ++a) {
    for (Index b = 0; b < active.size(); ++b)
      c_aa(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cov_x(static_cast<Eigen::Index>(active[a]), static_cast<Eigen::Index>(active[b]));
    for (Index b = 0; b < inactive.size(); ++b)
      c_ai(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cov_x(static_cast<Eigen::Index>(active[a]), static_cast<Eigen::Index>(inactive[b]));
  }
  PropositionDiagnostics out;
  out.lhs_ratio = detail::eigen_ratio(c_ai, c_aa, static_cast<double>(active.size()));
  double rhs = std::numeric_limits<double>::infinity();
  for (Index a : active) rhs = std::min(rhs, cov_xy.row(static_cast<Eigen::Index>(a)).squaredNorm());
  out.rhs_min = rhs;
  return out;
}

/// Sample version on a (standardized) dataset. With `cond`, the conditional
/// quantities use the centralized active predictors outside the conditioning
/// set and the inactive predictors outside the conditioning set.
inline PropositionDiagnostics proposition_diagnostics(const Dataset& data, const IndexSet& active,
                                                      const IndexSet& inactive,
                                                      const std::optional<ConditioningSpec>& cond = std::nullopt,
                                                      std::size_t threads = 1) {
  validate(data);
  require(!active.empty(), "diagnostics need a nonempty active set");
  require(data.n() > active.size(), "diagnostics need n > |A|");
  const Dataset d = standardized(data);
  const Matrix xa = take_columns(d.X, active);
  const Matrix xi = take_columns(d.X, inactive);
  PropositionDiagnostics out;
  out.lhs_ratio = detail::eigen_ratio(detail::sample_cross_cov(xa, xi), detail::sample_cross_cov(xa, xa),
                                      static_cast<double>(active.size()));
  out.rhs_min = detail::min_moment_norm2(xa, d.Y);

  if (cond) {
    validate_spec(*cond, d.p());
    std::vector<char> in_c(d.p(), 0);
    for (Index j : cond->cond_set) in_c[j] = 1;
    IndexSet a_d, i_d;
    for (Index j : active)
      if (!in_c[j]) a_d.push_back(j);
    for (Index j : inactive)
      if (!in_c[j]) i_d.push_back(j);
    if (!a_d.empty()) {
      const Matrix xa_tilde = centralized_columns(d.X, a_d, *cond, threads);
      const Matrix xi_d = take_columns(d.X, i_d);
      out.conditional_lhs_ratio = detail::eigen_ratio(detail::sample_cross_cov(xa_tilde, xi_d),
                                                      detail::sample_cross_cov(xa_tilde, xa_tilde),
                                                      static_cast<double>(a_d.size()));
      out.conditional_rhs_min = detail::min_moment_norm2(xa_tilde, d.Y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic approximations
// ---------------------------------------------------------------------------

struct TaylorComparison {
  double el_ratio = 0.0;
  double hotelling = 0.0;  // n Vbar' S^-1 Vbar
  double avg_form = 0.0;   // n Vbar' diag(S)^-1 Vbar
  double max_form = 0.0;   // max_k (sum V_k)^2 / sum V_k^2
  bool ael_used = false;
};

inline TaylorComparison taylor_comparator(const EstimatingMatrix& g) {
  const Matrix& v = g.rows();
  const double n = static_cast<double>(v.rows());
  const Vector mean = v.colwise().mean().transpose();
  Matrix s = v.transpose() * v / n;
  TaylorComparison out;

  const double trace = s.trace();
  Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-13 * std::max(trace, 1e-300))) {
    s.diagonal().array() += 1e-10 * std::max(trace, 1e-300);
    ldlt.compute(s);
  }
  out.hotelling = std::max(0.0, n * mean.dot(ldlt.solve(mean)));

  double avg = 0.0, mx = 0.0;
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    const double skk = s(k, k);
    if (skk <= 0.0) continue;
    const double term = n * mean[k] * mean[k] / skk;
    avg += term;
    mx = std::max(mx, term);
  }
  out.avg_form = avg;
  out.max_form = mx;

  try {
    out.el_ratio = solve_dual(g).ratio;
  } catch (const HullViolation&) {
    out.el_ratio = el_ratio_at_zero(g).ratio;
    out.ael_used = true;
  }
  return out;
}

}  // namespace elscreen
