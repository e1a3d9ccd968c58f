#pragma once

// Empirical-likelihood ratio at zero for q-dimensional estimating rows.
//
// The log-EL ratio 2 * sum_i log(1 + a'g_i) is evaluated at the Lagrange
// multiplier a solving sum_i g_i / (1 + a'g_i) = 0. The multiplier maximizes
// the concave dual sum_i log(1 + a'g_i); we run damped Newton on that dual
// with a pseudo-logarithm below 1/n so that iterates never leave the
// domain. Columns are rescaled to unit RMS internally; the ratio is
// invariant to that rescaling.

#include "elscreen/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

namespace elscreen {

/// Row i holds g_i (n_rows x q). Always finite, n_rows >= 2, q >= 1.
class EstimatingMatrix {
 public:
  explicit EstimatingMatrix(Matrix rows) : rows_(std::move(rows)) {
    require(rows_.cols() >= 1, "estimating matrix needs q >= 1");
    require(rows_.rows() >= 2, "estimating matrix needs at least 2 rows");
    require(rows_.allFinite(), "estimating matrix has non-finite entries");
  }

  const Matrix& rows() const noexcept { return rows_; }
  Index n_rows() const noexcept { return static_cast<Index>(rows_.rows()); }
  Index q() const noexcept { return static_cast<Index>(rows_.cols()); }

 private:
  Matrix rows_;
};

struct ELSolution {
  double ratio = 0.0;
  Vector multiplier;
  Vector weights;
  int iterations = 0;
  bool converged = false;
  bool ael_used = false;
  double residual = 0.0;  // sup-norm of sum_i g_i / (1 + a'g_i)
};

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  double ridge = 1e-10;
};

/// Chen-Qin-Variyath default adjustment level max(1, log(n)/2).
inline double default_ael_level(Index n_rows) {
  return std::max(1.0, std::log(static_cast<double>(n_rows)) / 2.0);
}

/// Appends the pseudo-row -level * mean(G).
inline EstimatingMatrix ael_augment(const EstimatingMatrix& g, double level) {
  require(level > 0.0, "AEL level must be positive");
  const Matrix& rows = g.rows();
  Matrix out(rows.rows() + 1, rows.cols());
  out.topRows(rows.rows()) = rows;
  out.row(rows.rows()) = -level * rows.colwise().mean();
  return EstimatingMatrix(std::move(out));
}

inline EstimatingMatrix ael_augment(const EstimatingMatrix& g) {
  return ael_augment(g, default_ael_level(g.n_rows()));
}

namespace detail {

// Pseudo-logarithm: log(z) for z >= eps, quadratic continuation below.
struct PseudoLog {
  double eps;
  double log_eps;

  explicit PseudoLog(double n) : eps(1.0 / n), log_eps(std::log(1.0 / n)) {}

  double value(double z) const {
    if (z >= eps) return std::log(z);
    const double r = z / eps;
    return log_eps - 1.5 + 2.0 * r - 0.5 * r * r;
  }
  double d1(double z) const { return z >= eps ? 1.0 / z : (2.0 - z / eps) / eps; }
  // Negated second derivative (nonnegative).
  double neg_d2(double z) const { return z >= eps ? 1.0 / (z * z) : 1.0 / (eps * eps); }
};

constexpr double kDivergenceBound = 1e12;
constexpr double kPolish = 1e-3;    // iterate past the tolerance so the weights sum to 1 tightly
constexpr double kWeightGap = 1e-6;

inline double dual_objective(const Matrix& g, const Vector& alpha, const PseudoLog& plog) {
  const Vector z = (g * alpha).array() + 1.0;
  double f = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) f += plog.value(z[i]);
  return f;
}

// Scalar fast path for q == 1. `g` holds the n rows.
inline ELSolution solve_scalar(std::span<const double> g, const SolverOptions& opt) {
  const std::size_t n = g.size();
  const PseudoLog plog(static_cast<double>(n));
  double scale2 = 0.0;
  for (double v : g) scale2 += v * v;
  double scale = std::sqrt(scale2 / static_cast<double>(n));
  if (!(scale > 0.0)) scale = 1.0;
  const double inv_scale = 1.0 / scale;

  auto objective = [&](double a) {
    double f = 0.0;
    for (double v : g) f += plog.value(1.0 + a * v * inv_scale);
    return f;
  };

  ELSolution sol;
  double a = 0.0;  // multiplier in scaled coordinates
  double f = objective(a);
  for (int it = 0;; ++it) {
    double grad = 0.0, hess = 0.0;
    bool inside = true;
    for (double v : g) {
      const double gs = v * inv_scale;
      const double z = 1.0 + a * gs;
      if (z < plog.eps) inside = false;
      grad += plog.d1(z) * gs;
      hess += plog.neg_d2(z) * gs * gs;
    }
    sol.iterations = it;
    if (inside && std::abs(grad) * scale <= kPolish * opt.tolerance) break;
    if (it >= opt.max_iterations) break;
    if (!(hess > 0.0)) throw NumericalFailure("singular dual Hessian (all rows zero)");
    const double step = grad / hess;
    double t = 1.0;
    double a_new = a + step;
    double f_new = objective(a_new);
    const double slack = 1e-13 * (1.0 + std::abs(f));
    for (int halving = 0; halving < 60 && !(f_new >= f - slack); ++halving) {
      t *= 0.5;
      a_new = a + t * step;
      f_new = objective(a_new);
    }
    if (!(f_new >= f - slack)) break;  // no ascent possible: stationary to machine precision
    a = a_new;
    f = f_new;
    if (std::abs(a) > kDivergenceBound)
      throw HullViolation("zero lies outside the convex hull of the estimating rows");
  }

  double ratio = 0.0, residual = 0.0;
  bool inside = true;
  sol.weights.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 + a * g[i] * inv_scale;
    if (z < plog.eps) inside = false;
    ratio += std::log(std::max(z, plog.eps));
    residual += g[i] / z;
    sol.weights[static_cast<Eigen::Index>(i)] = 1.0 / (static_cast<double>(n) * z);
  }
  if (!inside) throw HullViolation("dual optimum left the empirical-likelihood domain");
  // sum_i w_i - 1 = -a * score / n; a nonvanishing gap means the multiplier ran off to infinity
  if (std::abs(a * inv_scale * residual) > kWeightGap * static_cast<double>(n))
    throw HullViolation("zero lies outside the convex hull of the estimating rows");
  sol.ratio = std::max(0.0, 2.0 * ratio);
  sol.multiplier = Vector::Constant(1, a * inv_scale);
  sol.residual = std::abs(residual);
  sol.converged = sol.residual <= opt.tolerance;
  return sol;
}

inline ELSolution solve_matrix(const Matrix& graw, const SolverOptions& opt) {
  const Eigen::Index n = graw.rows();
  const Eigen::Index q = graw.cols();
  const PseudoLog plog(static_cast<double>(n));

  Vector scale = (graw.colwise().squaredNorm() / static_cast<double>(n)).transpose().cwiseSqrt();
  for (Eigen::Index k = 0; k < q; ++k)
    if (!(scale[k] > 0.0)) scale[k] = 1.0;
  const Matrix g = graw * scale.cwiseInverse().asDiagonal();

  ELSolution sol;
  Vector alpha = Vector::Zero(q);
  double f = dual_objective(g, alpha, plog);
  Vector z(n), w1(n), w2(n);
  Matrix hess(q, q);
  Vector grad(q);
  Eigen::LDLT<Matrix> ldlt;

  for (int it = 0;; ++it) {
    z.noalias() = g * alpha;
    z.array() += 1.0;
    bool inside = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (z[i] < plog.eps) inside = false;
      w1[i] = plog.d1(z[i]);
      w2[i] = plog.neg_d2(z[i]);
    }
    grad.noalias() = g.transpose() * w1;
    sol.iterations = it;
    if (inside && grad.cwiseProduct(scale).cwiseAbs().maxCoeff() <= kPolish * opt.tolerance) break;
    if (it >= opt.max_iterations) break;

    hess.noalias() = g.transpose() * w2.asDiagonal() * g;
    const double trace = hess.trace();
    if (!(trace > 0.0)) throw NumericalFailure("singular dual Hessian (all rows zero)");
    ldlt.compute(hess);
    const double min_pivot = ldlt.vectorD().minCoeff();
    if (ldlt.info() != Eigen::Success || !(min_pivot > 1e-13 * trace)) {
      hess.diagonal().array() += opt.ridge * trace;
      ldlt.compute(hess);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw NumericalFailure("dual Hessian singular after ridge repair");
    }
    const Vector step = ldlt.solve(grad);
    if (!step.allFinite()) throw NumericalFailure("non-finite Newton step");

    double t = 1.0;
    Vector alpha_new = alpha + step;
    double f_new = dual_objective(g, alpha_new, plog);
    const double slack = 1e-13 * (1.0 + std::abs(f));
    for (int halving = 0; halving < 60 && !(f_new >= f - slack); ++halving) {
      t *= 0.5;
      alpha_new = alpha + t * step;
      f_new = dual_objective(g, alpha_new, plog);
    }
    if (!(f_new >= f - slack)) break;
    alpha = std::move(alpha_new);
    f = f_new;
    if (alpha.cwiseAbs().maxCoeff() > kDivergenceBound)
      throw HullViolation("zero lies outside the convex hull of the estimating rows");
  }

  z.noalias() = g * alpha;
  z.array() += 1.0;
  if (z.minCoeff() < plog.eps) {
    throw HullViolation("dual optimum left the empirical-likelihood domain");
  }
  sol.ratio = std::max(0.0, 2.0 * z.array().log().sum());
  sol.weights = (static_cast<double>(n) * z.array()).inverse().matrix();
  sol.multiplier = alpha.cwiseQuotient(scale);
  const Vector score = graw.transpose() * z.cwiseInverse();
  if (std::abs(sol.multiplier.dot(score)) > kWeightGap * static_cast<double>(n))
    throw HullViolation("zero lies outside the convex hull of the estimating rows");
  sol.residual = score.cwiseAbs().maxCoeff();
  sol.converged = sol.residual <= opt.tolerance;
  return sol;
}

}  // namespace detail

/// Solves the EL dual for the given rows as-is (no adjustment).
/// Throws HullViolation when zero is outside the convex hull of the rows and
/// NumericalFailure when the Newton system cannot be repaired.
inline ELSolution solve_dual(const EstimatingMatrix& g, const SolverOptions& opt = {}) {
  if (g.q() == 1) {
    const Matrix& rows = g.rows();
    return detail::solve_scalar(std::span<const double>(rows.data(), g.n_rows()), opt);
  }
  return detail::solve_matrix(g.rows(), opt);
}

/// AEL-augmented ratio at zero. Never throws HullViolation.
inline ELSolution el_ratio_at_zero(const EstimatingMatrix& g, const SolverOptions& opt = {}) {
  ELSolution sol = solve_dual(ael_augment(g), opt);
  sol.ael_used = true;
  return sol;
}

namespace detail {

// Ratio-only entry point used by the screeners for a single response column
// (rows are x_i * y_i). Avoids building an EstimatingMatrix per call.
inline double el_ratio_scalar_ael(std::span<const double> values, std::vector<double>& buffer,
                                  const SolverOptions& opt = {}) {
  const std::size_t n = values.size();
  buffer.assign(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  buffer.push_back(-default_ael_level(n) * mean);
  return solve_scalar(std::span<const double>(buffer), opt).ratio;
}

}  // namespace detail

}  // namespace elscreen
