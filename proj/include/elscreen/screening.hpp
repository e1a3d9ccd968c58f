#pragma once

// Marginal EL screening statistics (MELSIS and the per-response ELSIS
// aggregates), ranking, and hard/soft model selection.

#include "elscreen/common.hpp"
#include "elscreen/el_core.hpp"
#include "elscreen/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace elscreen {

enum class Method { kMelsis, kElsisAvg, kElsisMax, kCmelsis };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kMelsis: return "MELSIS";
    case Method::kElsisAvg: return "ELSIS_AVG";
    case Method::kElsisMax: return "ELSIS_MAX";
    case Method::kCmelsis: return "CMELSIS";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "melsis") return Method::kMelsis;
  if (lower == "elsis_avg" || lower == "avg") return Method::kElsisAvg;
  if (lower == "elsis_max" || lower == "max") return Method::kElsisMax;
  if (lower == "cmelsis") return Method::kCmelsis;
  throw InvalidArgument("unknown screening method '" + std::string(s) + "'");
}

/// Per-column statistics plus the indices whose solve failed numerically
/// (their statistic is reported as 0).
struct StatisticVector {
  Vector values;
  IndexSet failures;
};

namespace detail {

// How the q per-response univariate ratios are combined.
enum class Aggregate { kJoint, kAverage, kMaximum };

inline Aggregate aggregate_for(Method m) {
  switch (m) {
    case Method::kElsisAvg: return Aggregate::kAverage;
    case Method::kElsisMax: return Aggregate::kMaximum;
    default: return Aggregate::kJoint;
  }
}

inline double column_statistic(const Eigen::Ref<const Vector>& x, const Matrix& Y, Aggregate agg,
                               std::vector<double>& buffer) {
  if (agg == Aggregate::kJoint || Y.cols() == 1) {
    Matrix rows = x.asDiagonal() * Y;
    return el_ratio_at_zero(EstimatingMatrix(std::move(rows))).ratio;
  }
  std::vector<double> values(static_cast<std::size_t>(x.size()));
  double acc = agg == Aggregate::kAverage ? 0.0 : -1.0;
  for (Eigen::Index k = 0; k < Y.cols(); ++k) {
    for (Eigen::Index i = 0; i < x.size(); ++i) values[static_cast<std::size_t>(i)] = x[i] * Y(i, k);
    const double r = el_ratio_scalar_ael(values, buffer);
    acc = agg == Aggregate::kAverage ? acc + r : std::max(acc, r);
  }
  return agg == Aggregate::kAverage ? acc / static_cast<double>(Y.cols()) : acc;
}

}  // namespace detail

/// Statistic of `method` for every column of `columns` against responses Y.
/// Used with standardized predictors (unconditional) or centralized
/// predictors (conditional).
inline StatisticVector column_statistics(const Matrix& columns, const Matrix& Y, Method method,
                                         std::size_t threads = 1) {
  if (columns.rows() != Y.rows()) throw DimensionMismatch("predictor and response row counts differ");
  const auto agg = detail::aggregate_for(method);
  const auto p = static_cast<std::size_t>(columns.cols());
  StatisticVector out{Vector::Zero(static_cast<Eigen::Index>(p)), {}};
  std::vector<char> failed(p, 0);
  parallel_for(p, threads, [&](std::size_t j) {
    std::vector<double> buffer;
    try {
      out.values[static_cast<Eigen::Index>(j)] =
          detail::column_statistic(columns.col(static_cast<Eigen::Index>(j)), Y, agg, buffer);
    } catch (const NumericalFailure&) {
      failed[j] = 1;
    } catch (const HullViolation&) {
      failed[j] = 1;
    }
  });
  for (std::size_t j = 0; j < p; ++j)
    if (failed[j]) out.failures.push_back(j);
  return out;
}

/// Matrix of univariate AEL ratios, p x q, entry (j, k) for rows X_ij * Y_ik.
inline Matrix univariate_statistics(const Dataset& data, std::size_t threads = 1) {
  const Dataset d = standardized(data);
  const auto p = static_cast<std::size_t>(d.X.cols());
  Matrix out(d.X.cols(), d.Y.cols());
  parallel_for(p, threads, [&](std::size_t j) {
    std::vector<double> buffer, values(d.n());
    for (Eigen::Index k = 0; k < d.Y.cols(); ++k) {
      for (Index i = 0; i < d.n(); ++i)
        values[i] = d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                    d.Y(static_cast<Eigen::Index>(i), k);
      out(static_cast<Eigen::Index>(j), k) = detail::el_ratio_scalar_ael(values, buffer);
    }
  });
  return out;
}

inline StatisticVector screening_statistics(const Dataset& data, Method method, std::size_t threads = 1) {
  require(method != Method::kCmelsis, "CMELSIS statistics need a conditioning set");
  validate(data);
  const Dataset d = standardized(data);
  return column_statistics(d.X, d.Y, method, threads);
}

inline Vector melsis_statistics(const Dataset& data, std::size_t threads = 1) {
  return screening_statistics(data, Method::kMelsis, threads).values;
}

inline Vector elsis_avg_statistics(const Dataset& data, std::size_t threads = 1) {
  return screening_statistics(data, Method::kElsisAvg, threads).values;
}

inline Vector elsis_max_statistics(const Dataset& data, std::size_t threads = 1) {
  return screening_statistics(data, Method::kElsisMax, threads).values;
}

// ---------------------------------------------------------------------------
// Ranking and selection
// ---------------------------------------------------------------------------

/// Descending order of `statistics`; ties keep ascending index order.
inline IndexSet rank_predictors(std::span<const double> statistics) {
  for (double v : statistics) require(std::isfinite(v), "ranking requires finite statistics");
  IndexSet order(statistics.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return statistics[a] > statistics[b]; });
  return order;
}

inline IndexSet rank_predictors(const Vector& statistics) {
  return rank_predictors(std::span<const double>(statistics.data(), static_cast<std::size_t>(statistics.size())));
}

/// c * floor(n / ln n), floored.
inline Index hard_threshold_size(Index n, double c) {
  require(n >= 3, "hard threshold needs n >= 3");
  require(c > 0.0, "hard threshold multiplier must be positive");
  const double base = std::floor(static_cast<double>(n) / std::log(static_cast<double>(n)));
  return static_cast<Index>(std::floor(c * base + 1e-9));
}

struct HardRule {
  Index size;
};
struct SoftRule {
  double gamma;
};
using ThresholdRule = std::variant<HardRule, SoftRule>;

struct Selection {
  IndexSet indices;  // hard: in ranking order; soft: ascending
  bool clamped = false;
};

inline Selection select_model(const Vector& statistics, const IndexSet& ranking, const ThresholdRule& rule) {
  require(ranking.size() == static_cast<std::size_t>(statistics.size()), "ranking and statistics differ in length");
  Selection out;
  if (const auto* hard = std::get_if<HardRule>(&rule)) {
    Index d = hard->size;
    if (d > ranking.size()) {
      d = ranking.size();
      out.clamped = true;
    }
    out.indices.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(d));
  } else {
    const double gamma = std::get<SoftRule>(rule).gamma;
    for (Eigen::Index j = 0; j < statistics.size(); ++j)
      if (statistics[j] >= gamma) out.indices.push_back(static_cast<Index>(j));
  }
  return out;
}

inline Selection select_model(const Vector& statistics, const ThresholdRule& rule) {
  return select_model(statistics, rank_predictors(statistics), rule);
}

/// Nearest-rank empirical quantile (tau in (0, 1]).
inline double nearest_rank_quantile(std::vector<double> values, double tau) {
  require(!values.empty(), "quantile of an empty set");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(values.size()) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, values.size());
  return values[k - 1];
}

/// Uniformly random row permutation from `seed`.
inline IndexSet random_permutation(Index n, std::uint64_t seed) {
  IndexSet perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline Matrix permute_rows(const Matrix& m, const IndexSet& perm) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(perm[i]));
  return out;
}

struct SoftThreshold {
  double gamma = 0.0;
  IndexSet selected;
  Vector auxiliary;
};

/// Soft rule with an explicit row permutation of Y. `statistics` are the
/// statistics on the original data for the same columns.
inline SoftThreshold soft_threshold_with_permutation(const Matrix& columns, const Matrix& Y,
                                                     const Vector& statistics, Method method, double tau,
                                                     const IndexSet& perm, std::size_t threads = 1) {
  require(perm.size() == static_cast<std::size_t>(Y.rows()), "permutation length must equal n");
  SoftThreshold out;
  out.auxiliary = column_statistics(columns, permute_rows(Y, perm), method, threads).values;
  out.gamma = nearest_rank_quantile(std::vector<double>(out.auxiliary.begin(), out.auxiliary.end()), tau);
  out.selected = select_model(statistics, SoftRule{out.gamma}).indices;
  return out;
}

inline SoftThreshold soft_threshold(const Matrix& columns, const Matrix& Y, const Vector& statistics,
                                    Method method, double tau, std::uint64_t seed, std::size_t threads = 1) {
  return soft_threshold_with_permutation(columns, Y, statistics, method, tau,
                                         random_permutation(static_cast<Index>(Y.rows()), seed), threads);
}

/// One permutation draw of the rows of Y; gamma is the tau-quantile of the
/// p auxiliary statistics.
inline SoftThreshold soft_threshold(const Dataset& data, Method method, double tau, std::uint64_t seed,
                                    std::size_t threads = 1) {
  require(method != Method::kCmelsis, "use the conditional module for CMELSIS soft thresholds");
  validate(data);
  const Dataset d = standardized(data);
  const Vector stats = column_statistics(d.X, d.Y, method, threads).values;
  return soft_threshold(d.X, d.Y, stats, method, tau, seed, threads);
}

// ---------------------------------------------------------------------------
// Result record
// ---------------------------------------------------------------------------

struct ThresholdRecord {
  std::string kind;  // "hard" or "soft"
  double parameter = 0.0;  // d for hard, gamma for soft
  double tau = 0.0;        // soft only
  bool clamped = false;
};

struct ScreeningResult {
  Method method = Method::kMelsis;
  Vector statistics;
  IndexSet universe;  // original predictor index of each statistic entry
  IndexSet ranking;   // original predictor indices, best first
  IndexSet selected;  // original predictor indices
  ThresholdRecord threshold;
  IndexSet failures;  // original indices whose statistic was forced to 0
};

namespace detail {

inline IndexSet map_indices(const IndexSet& local, const IndexSet& universe) {
  IndexSet out;
  out.reserve(local.size());
  for (Index j : local) out.push_back(universe[j]);
  return out;
}

inline ScreeningResult make_result(Method method, StatisticVector stats, IndexSet universe,
                                   const ThresholdRule& rule) {
  ScreeningResult r;
  r.method = method;
  const IndexSet local_rank = rank_predictors(stats.values);
  const Selection sel = select_model(stats.values, local_rank, rule);
  r.ranking = map_indices(local_rank, universe);
  r.selected = map_indices(sel.indices, universe);
  r.failures = map_indices(stats.failures, universe);
  r.statistics = std::move(stats.values);
  r.universe = std::move(universe);
  if (const auto* hard = std::get_if<HardRule>(&rule)) {
    r.threshold = {"hard", static_cast<double>(hard->size), 0.0, sel.clamped};
  } else {
    r.threshold = {"soft", std::get<SoftRule>(rule).gamma, 0.0, false};
  }
  return r;
}

}  // namespace detail

/// Unconditional screen with a hard rule.
inline ScreeningResult screen(const Dataset& data, Method method, Index model_size, std::size_t threads = 1) {
  StatisticVector stats = screening_statistics(data, method, threads);
  IndexSet universe(data.p());
  std::iota(universe.begin(), universe.end(), Index{0});
  return detail::make_result(method, std::move(stats), std::move(universe), HardRule{model_size});
}

/// Unconditional screen with the permutation-based soft rule.
inline ScreeningResult screen_soft(const Dataset& data, Method method, double tau, std::uint64_t seed,
                                   std::size_t threads = 1) {
  validate(data);
  const Dataset d = standardized(data);
  StatisticVector stats = column_statistics(d.X, d.Y, method, threads);
  const SoftThreshold soft = soft_threshold(d.X, d.Y, stats.values, method, tau, seed, threads);
  IndexSet universe(data.p());
  std::iota(universe.begin(), universe.end(), Index{0});
  ScreeningResult r = detail::make_result(method, std::move(stats), std::move(universe), SoftRule{soft.gamma});
  r.threshold.tau = tau;
  return r;
}

/// Report form with 1-based predictor indices. `names` may be empty.
inline nlohmann::json to_json(const ScreeningResult& r, const std::vector<std::string>& names = {}) {
  auto one_based = [](const IndexSet& s) {
    std::vector<Index> out(s.begin(), s.end());
    for (Index& j : out) ++j;
    return out;
  };
  nlohmann::json j;
  j["method"] = std::string(to_string(r.method));
  j["threshold"] = {{"kind", r.threshold.kind}, {"parameter", r.threshold.parameter}, {"clamped", r.threshold.clamped}};
  if (r.threshold.kind == "soft") j["threshold"]["tau"] = r.threshold.tau;
  j["selected"] = one_based(r.selected);
  if (!names.empty()) {
    std::vector<std::string> sel;
    for (Index k : r.selected) sel.push_back(names[k]);
    j["selected_names"] = sel;
  }
  j["ranking"] = one_based(r.ranking);
  j["universe"] = one_based(r.universe);
  j["statistics"] = std::vector<double>(r.statistics.data(), r.statistics.data() + r.statistics.size());
  j["failures"] = one_based(r.failures);
  return j;
}

}  // namespace elscreen
