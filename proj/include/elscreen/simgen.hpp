#pragma once

// Seeded generators for the Monte Carlo designs.
//
// Scenario indices are 1-based in the public description (active sets,
// conditioning sets) and 0-based everywhere else.

#include "elscreen/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace elscreen {

enum class ModelId { kVariedQ, kEx41, kEx42, kEx43, kCase1 };
enum class ErrorCase { kA, kB };

inline std::string_view to_string(ModelId m) {
  switch (m) {
    case ModelId::kVariedQ: return "varied_q";
    case ModelId::kEx41: return "ex41";
    case ModelId::kEx42: return "ex42";
    case ModelId::kEx43: return "ex43";
    case ModelId::kCase1: return "case1";
  }
  return "?";
}

inline ModelId parse_model(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "varied_q" || lower == "variedq" || lower == "model1") return ModelId::kVariedQ;
  if (lower == "ex41") return ModelId::kEx41;
  if (lower == "ex42") return ModelId::kEx42;
  if (lower == "ex43" || lower == "ex44") return ModelId::kEx43;
  if (lower == "case1" || lower == "model6") return ModelId::kCase1;
  throw InvalidArgument("unknown model id '" + std::string(s) + "'");
}

inline std::string_view to_string(ErrorCase c) { return c == ErrorCase::kA ? "a" : "b"; }

inline ErrorCase parse_error_case(std::string_view s) {
  if (s == "a" || s == "A") return ErrorCase::kA;
  if (s == "b" || s == "B") return ErrorCase::kB;
  throw InvalidArgument("error case must be 'a' or 'b'");
}

struct SimulationScenario {
  ModelId model_id = ModelId::kEx41;
  Index n = 100;
  Index p = 1000;
  Index q = 4;
  double rho = 0.0;
  ErrorCase error_case = ErrorCase::kA;
  std::uint64_t seed = 1;
  // Clip |sigma_i(X)| at 1e3 for heteroscedastic designs. Off by default.
  bool clip_sigma = false;
};

/// Number of responses fixed by the design (VARIED_Q keeps the scenario's q).
inline Index design_q(const SimulationScenario& s) {
  switch (s.model_id) {
    case ModelId::kVariedQ: return s.q;
    case ModelId::kEx41: return 4;
    case ModelId::kEx42: return 5;
    case ModelId::kEx43: return 3;
    case ModelId::kCase1: return 2;
  }
  return s.q;
}

/// Active predictors, 1-based.
inline IndexSet active_set_one_based(const SimulationScenario& s) {
  Index count = 0;
  switch (s.model_id) {
    case ModelId::kVariedQ: count = s.q; break;
    case ModelId::kEx41:
    case ModelId::kEx42:
    case ModelId::kEx43: count = 5; break;
    case ModelId::kCase1: count = 3; break;
  }
  IndexSet out(count);
  for (Index k = 0; k < count; ++k) out[k] = k + 1;
  return out;
}

inline IndexSet active_set(const SimulationScenario& s) {
  IndexSet out = active_set_one_based(s);
  for (Index& j : out) --j;
  return out;
}

inline void validate(const SimulationScenario& s) {
  require(s.n >= 3, "scenario needs n >= 3");
  require(design_q(s) >= 1, "scenario needs q >= 1");
  const IndexSet active = active_set_one_based(s);
  require(s.p > active.back(), "scenario needs p > max(active set)");
  require(s.rho > -1.0 && s.rho < 1.0, "scenario rho must lie in (-1, 1)");
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replication `index` under `master`.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Stream `stream` of a given seed (independent sub-streams of one scenario).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
}

// ---------------------------------------------------------------------------
// Gaussian sampling
// ---------------------------------------------------------------------------

inline Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  // Row-major fill so the stream order does not depend on storage order.
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = normal(rng);
  return out;
}

/// n i.i.d. rows from N(0, cov) via Cholesky, with a small ridge for
/// semidefinite input.
inline Matrix mvn_sample(const Matrix& cov, Index n, std::uint64_t seed) {
  require(cov.rows() == cov.cols() && cov.rows() >= 1, "covariance must be square");
  const double trace = cov.trace();
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, std::abs(trace)),
          "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-8 * std::max(std::abs(trace), 1e-300) || (trace == 0.0 && min_eig < 0.0))
    throw NotPSD("covariance has eigenvalue " + std::to_string(min_eig));

  std::mt19937_64 rng(seed);
  const Matrix z = standard_normal(n, static_cast<Index>(cov.rows()), rng);
  if (trace == 0.0) return Matrix::Zero(z.rows(), z.cols());

  Eigen::LLT<Matrix> llt(cov);
  Matrix repaired = cov;
  double ridge = 1e-12 * trace;
  while (llt.info() != Eigen::Success) {
    repaired = cov;
    repaired.diagonal().array() += ridge;
    llt.compute(repaired);
    ridge *= 10.0;
    if (ridge > 1e-6 * trace) throw NotPSD("covariance could not be factorized");
  }
  const Matrix lower = llt.matrixL();
  return z * lower.transpose();
}

inline Matrix equicorrelation(Index d, double rho) {
  Matrix m = Matrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), rho);
  m.diagonal().setOnes();
  return m;
}

/// n x p standard normal predictors with common correlation rho >= 0, drawn
/// through the one-factor representation sqrt(rho) F + sqrt(1 - rho) e_j
/// (identical in distribution to Cholesky of the equicorrelation matrix).
inline Matrix equicorrelated_normal(Index n, Index p, double rho, std::mt19937_64& rng) {
  require(rho >= 0.0 && rho < 1.0, "equicorrelation must lie in [0, 1)");
  Matrix x = standard_normal(n, p, rng);
  if (rho == 0.0) return x;
  const Matrix f = standard_normal(n, 1, rng);
  x *= std::sqrt(1.0 - rho);
  x.colwise() += std::sqrt(rho) * f.col(0);
  return x;
}

// ---------------------------------------------------------------------------
// Designs
// ---------------------------------------------------------------------------

namespace detail {

inline double sigma_value(double v, bool clip) {
  if (clip) return std::clamp(v, -1e3, 1e3);
  return v;
}

}  // namespace detail

/// Coefficient matrix (q x 5) used for EX42: entries U * W with
/// P(U = +1) = P(U = -1) = 0.4, P(U = 0) = 0.2, W ~ Uniform(0, 1).
inline Matrix ex42_coefficients(std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, 2));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix b(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double u = unif(rng);
      const double sign = u < 0.4 ? 1.0 : (u < 0.8 ? -1.0 : 0.0);
      b(i, j) = sign * unif(rng);
    }
  return b;
}

/// Draws one dataset from the scenario. X is returned unstandardized.
inline Dataset generate(const SimulationScenario& s) {
  validate(s);
  const Index n = s.n, p = s.p, q = design_q(s);
  std::mt19937_64 x_rng(stream_seed(s.seed, 0));
  Dataset d;
  switch (s.model_id) {
    case ModelId::kVariedQ:
    case ModelId::kEx41: d.X = standard_normal(n, p, x_rng); break;
    case ModelId::kEx42: d.X = equicorrelated_normal(n, p, 0.3, x_rng); break;
    case ModelId::kEx43: {
      d.X = equicorrelated_normal(n, p, 0.5, x_rng);
      const Matrix x5 = standard_normal(n, 1, x_rng);
      d.X.col(4) = x5.col(0);
      break;
    }
    case ModelId::kCase1: d.X = equicorrelated_normal(n, p, 0.9, x_rng); break;
  }

  const double rho = (s.model_id == ModelId::kVariedQ || s.model_id == ModelId::kCase1) ? 0.0 : s.rho;
  Matrix eps = mvn_sample(equicorrelation(q, rho), n, stream_seed(s.seed, 1));

  const auto& X = d.X;
  auto x = [&](Index j) { return X.col(static_cast<Eigen::Index>(j - 1)); };
  Matrix Y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  const bool hetero = s.error_case == ErrorCase::kB;

  switch (s.model_id) {
    case ModelId::kVariedQ: {
      Vector acc = Vector::Zero(static_cast<Eigen::Index>(n));
      for (Index k = 1; k <= q; ++k) {
        acc += x(k);
        Y.col(static_cast<Eigen::Index>(k - 1)) = acc;
      }
      break;
    }
    case ModelId::kEx41: {
      Y.col(0) = 3 * x(1) + 2 * x(2);
      Y.col(1) = 4 * x(1) + x(3);
      Y.col(2) = 2 * x(2) + 4 * x(4);
      Y.col(3) = 3 * x(4) + x(5);
      if (hetero) {
        for (Eigen::Index i = 0; i < eps.rows(); ++i) {
          eps(i, 0) *= detail::sigma_value(1.0 / (X(i, 0) + X(i, 1)), s.clip_sigma);
          eps(i, 2) *= detail::sigma_value(1.0 / (X(i, 1) * X(i, 1) + X(i, 3) * X(i, 3)), s.clip_sigma);
        }
      }
      break;
    }
    case ModelId::kEx42: {
      const Matrix b = ex42_coefficients(s.seed);
      Y = X.leftCols(5) * b.transpose();
      if (hetero) {
        for (Eigen::Index i = 0; i < eps.rows(); ++i)
          for (Eigen::Index k : {0, 2, 4}) eps(i, k) *= detail::sigma_value(1.0 / X(i, k), s.clip_sigma);
      }
      break;
    }
    case ModelId::kEx43: {
      Y.col(0) = x(1) + 2 * x(2) + 3 * x(3) - 3 * x(4);
      Y.col(1) = 2 * x(1) - 2 * x(2) + 2 * x(3) - 3 * x(4);
      Y.col(2) = x(1) + 2 * x(2) + x(3) - 3 * x(4) + x(5);
      if (hetero) {
        for (Eigen::Index i = 0; i < eps.rows(); ++i) {
          eps(i, 0) *= detail::sigma_value(X(i, 0), s.clip_sigma);
          eps(i, 1) *= detail::sigma_value(X(i, 2), s.clip_sigma);
          eps(i, 2) *= detail::sigma_value(X(i, 4), s.clip_sigma);
        }
      }
      break;
    }
    case ModelId::kCase1: {
      Y.col(0) = 2 * x(1) - 2 * x(2);
      Y.col(1) = 4 * x(1) + 6 * x(2) - 9 * x(3);
      break;
    }
  }
  d.Y = Y + eps;
  d.predictor_names = default_names("X", p);
  d.response_names = default_names("Y", q);
  d.standardized = false;
  return d;
}

/// Scenario for replication `index` of a template (seed replaced by the
/// derived replication seed).
inline SimulationScenario replicate_scenario(SimulationScenario s, std::uint64_t master_seed, std::uint64_t index) {
  s.seed = replication_seed(master_seed, index);
  return s;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SimulationScenario& s) {
  return nlohmann::json{{"model_id", std::string(to_string(s.model_id))},
                        {"n", s.n},
                        {"p", s.p},
                        {"q", design_q(s)},
                        {"rho", s.rho},
                        {"error_case", std::string(to_string(s.error_case))},
                        {"seed", s.seed},
                        {"clip_sigma", s.clip_sigma}};
}

inline SimulationScenario scenario_from_json(const nlohmann::json& j) {
  SimulationScenario s;
  s.model_id = parse_model(j.at("model_id").get<std::string>());
  s.n = j.at("n").get<Index>();
  s.p = j.at("p").get<Index>();
  s.q = j.value("q", design_q(s));
  s.rho = j.value("rho", 0.0);
  s.error_case = parse_error_case(j.value("error_case", std::string("a")));
  s.seed = j.value("seed", std::uint64_t{1});
  s.clip_sigma = j.value("clip_sigma", false);
  validate(s);
  return s;
}

}  // namespace elscreen
