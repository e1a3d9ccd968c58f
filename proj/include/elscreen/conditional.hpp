#pragma once

// Conditional screening (CMELSIS). Each target predictor x_j is centralized
// by its linear conditional expectation given a low-dimensional projection
// of the conditioning predictors X_C, where the projection directions are
// estimated by sliced inverse regression of X_C on x_j. The EL ratio is then
// evaluated on rows (x_ij - E[x_j | B'X_C]_i) * y_i.

#include "elscreen/common.hpp"
#include "elscreen/el_core.hpp"
#include "elscreen/parallel.hpp"
#include "elscreen/screening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace elscreen {

enum class DirectionMode {
  kPerTarget,  // SIR re-estimated for every target predictor
  kFullSpan,   // B_C = I: project on the whole span of X_C (fast approximation)
};

struct ConditioningSpec {
  IndexSet cond_set;  // 0-based
  Index n_slices = 9;
  double direction_share = 0.80;
  DirectionMode mode = DirectionMode::kPerTarget;
};

struct SirResult {
  Matrix directions;  // |C| x b, orthonormal columns
  Vector eigenvalues;  // all eigenvalues of the between-slice covariance, descending
  Index n_slices = 0;  // slices actually used
};

namespace detail {

inline Vector column_means(const Matrix& m) { return m.colwise().mean().transpose(); }

inline Matrix centered(const Matrix& m) { return m.rowwise() - m.colwise().mean(); }

// Orthonormal basis of span(cols) with a deterministic sign (largest-magnitude
// entry of each column positive).
inline Matrix orthonormalize(const Matrix& cols) {
  Eigen::HouseholderQR<Matrix> qr(cols);
  Matrix q = qr.householderQ() * Matrix::Identity(cols.rows(), cols.cols());
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    Eigen::Index arg = 0;
    q.col(k).cwiseAbs().maxCoeff(&arg);
    if (q(arg, k) < 0.0) q.col(k) = -q.col(k);
  }
  return q;
}

// Slice labels (0..H-1) for the target by empirical quantiles: observations
// are stably sorted by value and cut into H groups whose sizes differ by at
// most one. When the target has fewer than H distinct values every distinct
// value forms its own slice.
inline std::vector<Index> slice_labels(const Vector& target, Index requested, Index& used) {
  const auto n = static_cast<Index>(target.size());
  IndexSet order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return target[static_cast<Eigen::Index>(a)] < target[static_cast<Eigen::Index>(b)]; });
  Index distinct = n == 0 ? 0 : 1;
  for (Index i = 1; i < n; ++i)
    if (target[static_cast<Eigen::Index>(order[i])] != target[static_cast<Eigen::Index>(order[i - 1])]) ++distinct;
  if (distinct < 2) throw DegenerateSlices("slicing target has fewer than two distinct values");

  std::vector<Index> labels(n);
  if (distinct < requested) {
    used = distinct;
    Index label = 0;
    for (Index i = 0; i < n; ++i) {
      if (i > 0 && target[static_cast<Eigen::Index>(order[i])] != target[static_cast<Eigen::Index>(order[i - 1])]) ++label;
      labels[order[i]] = label;
    }
    return labels;
  }
  used = requested;
  const Index base = n / requested, extra = n % requested;
  Index pos = 0;
  for (Index h = 0; h < requested; ++h) {
    const Index size = base + (h < extra ? 1 : 0);
    for (Index k = 0; k < size; ++k) labels[order[pos++]] = h;
  }
  return labels;
}

}  // namespace detail

/// Sliced inverse regression of XC on the scalar target xj.
inline SirResult sir_directions(const Matrix& XC, const Vector& xj, Index n_slices = 9, double share = 0.80) {
  require(XC.rows() == xj.size(), "SIR: XC and target lengths differ");
  require(XC.cols() >= 1, "SIR: empty conditioning set");
  require(n_slices >= 2, "SIR: need at least two slices");
  require(share > 0.0 && share <= 1.0, "SIR: direction share must lie in (0, 1]");
  const Eigen::Index n = XC.rows();
  const Eigen::Index c = XC.cols();

  SirResult out;
  Index used = 0;
  const std::vector<Index> labels = detail::slice_labels(xj, n_slices, used);
  out.n_slices = used;

  // Whitening by the symmetric inverse square root of cov(XC).
  const Matrix xc = detail::centered(XC);
  Matrix cov = (xc.transpose() * xc) / static_cast<double>(n);
  const double ridge = 1e-8 * cov.trace();
  cov.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Matrix> cov_eig(cov);
  const Vector inv_sqrt = cov_eig.eigenvalues().cwiseMax(ridge > 0.0 ? ridge : 1e-300).cwiseSqrt().cwiseInverse();
  const Matrix whitener = cov_eig.eigenvectors() * inv_sqrt.asDiagonal() * cov_eig.eigenvectors().transpose();
  const Matrix z = xc * whitener;

  Matrix slice_sum = Matrix::Zero(static_cast<Eigen::Index>(used), c);
  std::vector<double> counts(used, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    slice_sum.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) += z.row(i);
    counts[labels[static_cast<std::size_t>(i)]] += 1.0;
  }
  Matrix between = Matrix::Zero(c, c);
  for (Index h = 0; h < used; ++h) {
    if (counts[h] == 0.0) continue;
    const Vector m = slice_sum.row(static_cast<Eigen::Index>(h)).transpose() / counts[h];
    between.noalias() += (counts[h] / static_cast<double>(n)) * m * m.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(between);
  const Vector values = eig.eigenvalues().reverse();
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  out.eigenvalues = values;

  const double total = values.cwiseMax(0.0).sum();
  const Index max_b = std::min<Index>(static_cast<Index>(c), used - 1);
  Index b = 1;
  if (total > 0.0) {
    double cumulative = 0.0;
    b = 0;
    while (b < static_cast<Index>(c)) {
      cumulative += std::max(0.0, values[static_cast<Eigen::Index>(b)]);
      ++b;
      if (cumulative >= share * total - 1e-12 * total) break;
    }
  }
  b = std::clamp<Index>(b, 1, std::max<Index>(1, max_b));
  out.directions = detail::orthonormalize(whitener * vectors.leftCols(static_cast<Eigen::Index>(b)));
  return out;
}

/// Linear conditional expectation of xj given Z = XC * directions.
struct ConditionalFit {
  Vector coefficients;  // cov(Z)^-1 cov(Z, xj)
  Vector z_mean;
  double x_mean = 0.0;
  Matrix directions;

  /// x - E[x | Z] for the rows of XC.
  Vector residual(const Matrix& XC, const Vector& x) const {
    const Matrix z = XC * directions;
    return (x.array() - x_mean).matrix() - (z.rowwise() - z_mean.transpose()) * coefficients;
  }
};

inline ConditionalFit conditional_expectation_fit(const Matrix& XC, const Matrix& directions, const Vector& xj) {
  require(XC.rows() == xj.size(), "conditional fit: XC and target lengths differ");
  require(directions.rows() == XC.cols(), "conditional fit: direction rows must equal |C|");
  const double n = static_cast<double>(XC.rows());
  ConditionalFit fit;
  fit.directions = directions;
  const Matrix z = XC * directions;
  fit.z_mean = detail::column_means(z);
  fit.x_mean = xj.mean();
  const Matrix zc = z.rowwise() - fit.z_mean.transpose();
  Matrix cov_z = (zc.transpose() * zc) / n;
  const Vector cov_zx = (zc.transpose() * (xj.array() - fit.x_mean).matrix()) / n;
  Eigen::LDLT<Matrix> ldlt(cov_z);
  const double trace = cov_z.trace();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-12 * std::max(trace, 1e-300))) {
    cov_z.diagonal().array() += 1e-8 * std::max(trace, 1e-300);
    ldlt.compute(cov_z);
  }
  fit.coefficients = ldlt.solve(cov_zx);
  return fit;
}

/// Centralized copy of predictor `target` given the conditioning columns.
inline Vector centralize(const Matrix& XC, const Vector& xj, const ConditioningSpec& spec) {
  if (spec.mode == DirectionMode::kFullSpan) {
    const Matrix basis = Matrix::Identity(XC.cols(), XC.cols());
    return conditional_expectation_fit(XC, basis, xj).residual(XC, xj);
  }
  const SirResult sir = sir_directions(XC, xj, spec.n_slices, spec.direction_share);
  return conditional_expectation_fit(XC, sir.directions, xj).residual(XC, xj);
}

/// Centralized predictor columns for every index in `targets`.
inline Matrix centralized_columns(const Matrix& X, const IndexSet& targets, const ConditioningSpec& spec,
                                  std::size_t threads = 1) {
  const Matrix XC = take_columns(X, spec.cond_set);
  Matrix out(X.rows(), static_cast<Eigen::Index>(targets.size()));
  parallel_for(targets.size(), threads, [&](std::size_t k) {
    out.col(static_cast<Eigen::Index>(k)) = centralize(XC, X.col(static_cast<Eigen::Index>(targets[k])), spec);
  });
  return out;
}

inline void validate_spec(const ConditioningSpec& spec, Index p) {
  require(!spec.cond_set.empty(), "conditioning set must be nonempty");
  std::vector<char> seen(p, 0);
  for (Index j : spec.cond_set) {
    require(j < p, "conditioning index out of range");
    require(!seen[j], "conditioning set has duplicate indices");
    seen[j] = 1;
  }
}

/// Conditional statistics over D = complement of the conditioning set.
/// `method` picks the joint (CMELSIS) or per-response aggregate.
inline ScreeningResult conditional_screen(const Dataset& data, const ConditioningSpec& spec, Method method,
                                          const ThresholdRule& rule, std::size_t threads = 1) {
  validate(data);
  validate_spec(spec, data.p());
  const Dataset d = standardized(data);
  IndexSet targets = complement(d.p(), spec.cond_set);
  const Matrix columns = centralized_columns(d.X, targets, spec, threads);
  const Method stat_method = method == Method::kCmelsis ? Method::kMelsis : method;
  StatisticVector stats = column_statistics(columns, d.Y, stat_method, threads);
  ScreeningResult r = detail::make_result(method, std::move(stats), std::move(targets), rule);
  r.method = method == Method::kMelsis ? Method::kCmelsis : method;
  return r;
}

/// CMELSIS statistics, one entry per index of D (ascending order).
inline Vector cmelsis_statistics(const Dataset& data, const ConditioningSpec& spec, std::size_t threads = 1) {
  return conditional_screen(data, spec, Method::kCmelsis, HardRule{0}, threads).statistics;
}

/// Conditional soft threshold: centralize once, then permute the rows of Y.
inline ScreeningResult conditional_screen_soft(const Dataset& data, const ConditioningSpec& spec, Method method,
                                               double tau, std::uint64_t seed, std::size_t threads = 1) {
  validate(data);
  validate_spec(spec, data.p());
  const Dataset d = standardized(data);
  IndexSet targets = complement(d.p(), spec.cond_set);
  const Matrix columns = centralized_columns(d.X, targets, spec, threads);
  const Method stat_method = method == Method::kCmelsis ? Method::kMelsis : method;
  StatisticVector stats = column_statistics(columns, d.Y, stat_method, threads);
  const SoftThreshold soft = soft_threshold(columns, d.Y, stats.values, stat_method, tau, seed, threads);
  ScreeningResult r = detail::make_result(method, std::move(stats), std::move(targets), SoftRule{soft.gamma});
  r.method = method == Method::kMelsis ? Method::kCmelsis : method;
  r.threshold.tau = tau;
  return r;
}

// ---------------------------------------------------------------------------
// Two-step and sequential drivers
// ---------------------------------------------------------------------------

struct TwoStepResult {
  ScreeningResult first;   // unconditional stage
  ScreeningResult second;  // conditional stage over D
  IndexSet cond_set;       // top-d1 of the first stage
  IndexSet ranking;        // cond_set followed by the second-stage ranking
  IndexSet selected;       // cond_set plus top-d2 of the second stage
};

/// Step 1 takes the top-d1 predictors of the unconditional screen as C; step 2
/// screens D conditionally on C. `method` is the unconditional method
/// (MELSIS pairs with CMELSIS; ELSIS_AVG/MAX pair with their conditional
/// aggregates).
inline TwoStepResult two_step_screen(const Dataset& data, Index d1, Index d2, Method method = Method::kMelsis,
                                     ConditioningSpec base = {}, std::size_t threads = 1) {
  validate(data);
  require(d1 >= 1, "two-step screening needs d1 >= 1");
  require(d1 + d2 <= data.p(), "two-step screening needs d1 + d2 <= p");
  require(method != Method::kCmelsis, "first stage must be unconditional");
  TwoStepResult out;
  out.first = screen(data, method, d1, threads);
  out.cond_set = out.first.selected;
  out.ranking = out.cond_set;
  out.selected = out.cond_set;
  if (d1 == data.p()) return out;
  base.cond_set = out.cond_set;
  const Method second = method == Method::kMelsis ? Method::kCmelsis : method;
  out.second = conditional_screen(data, base, second, HardRule{d2}, threads);
  out.ranking.insert(out.ranking.end(), out.second.ranking.begin(), out.second.ranking.end());
  out.selected.insert(out.selected.end(), out.second.selected.begin(), out.second.selected.end());
  return out;
}

/// Greedy forward conditional screening: start from the MELSIS argmax and add
/// the conditional argmax given the current set until max_steps indices.
inline IndexSet sequential_screen(const Dataset& data, Index max_steps, ConditioningSpec base = {},
                                  std::size_t threads = 1) {
  validate(data);
  require(max_steps >= 1 && max_steps <= data.p(), "sequential screening needs 1 <= max_steps <= p");
  const Dataset d = standardized(data);
  IndexSet chosen;
  chosen.push_back(rank_predictors(melsis_statistics(d, threads)).front());
  while (chosen.size() < max_steps) {
    base.cond_set = chosen;
    const ScreeningResult r = conditional_screen(d, base, Method::kCmelsis, HardRule{1}, threads);
    chosen.push_back(r.ranking.front());
  }
  return chosen;
}

inline Index default_sequential_steps(Index n) { return hard_threshold_size(n, 1.0); }

}  // namespace elscreen
