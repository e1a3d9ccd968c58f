#pragma once

// Shared types, error hierarchy and small numeric helpers used by every
// elscreen module.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace elscreen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;
using IndexSet = std::vector<Index>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define ELSCREEN_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    using Error::Error;                                               \
    const char* kind() const noexcept override { return #Name; }     \
  };

ELSCREEN_DEFINE_ERROR(InvalidArgument)
ELSCREEN_DEFINE_ERROR(HullViolation)
ELSCREEN_DEFINE_ERROR(NumericalFailure)
ELSCREEN_DEFINE_ERROR(DegenerateSlices)
ELSCREEN_DEFINE_ERROR(NotPSD)
ELSCREEN_DEFINE_ERROR(MissingActive)
ELSCREEN_DEFINE_ERROR(DimensionMismatch)

#undef ELSCREEN_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : Error(what), row_(row), col_(col) {}
  const char* kind() const noexcept override { return "ParseError"; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix X;  // n x p predictors
  Matrix Y;  // n x q responses
  std::vector<std::string> predictor_names;
  std::vector<std::string> response_names;
  bool standardized = false;

  Index n() const { return static_cast<Index>(X.rows()); }
  Index p() const { return static_cast<Index>(X.cols()); }
  Index q() const { return static_cast<Index>(Y.cols()); }
};

inline std::vector<std::string> default_names(const std::string& prefix, Index count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i + 1));
  return names;
}

inline void validate(const Dataset& d) {
  if (d.X.rows() != d.Y.rows())
    throw DimensionMismatch("X has " + std::to_string(d.X.rows()) + " rows but Y has " +
                            std::to_string(d.Y.rows()));
  require(d.n() >= 3, "dataset needs at least 3 observations");
  require(d.p() >= 1 && d.q() >= 1, "dataset needs at least one predictor and one response");
  require(d.X.allFinite() && d.Y.allFinite(), "dataset contains non-finite entries");
  if (!d.predictor_names.empty() && d.predictor_names.size() != d.p())
    throw DimensionMismatch("predictor name count does not match X columns");
  if (!d.response_names.empty() && d.response_names.size() != d.q())
    throw DimensionMismatch("response name count does not match Y columns");
}

/// Column-standardizes in place with the sample mean and the (n-1) sample
/// standard deviation. Constant columns are centered and left at zero.
inline void standardize_columns(Matrix& m) {
  const double n = static_cast<double>(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    auto col = m.col(j);
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
    if (sd > 0.0) col /= sd;
  }
}

inline Dataset standardized(Dataset d) {
  if (!d.standardized) {
    standardize_columns(d.X);
    d.standardized = true;
  }
  return d;
}

/// Selects columns `cols` of `m`.
inline Matrix take_columns(const Matrix& m, const IndexSet& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (Index k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

/// Indices 0..p-1 not in `excluded`, ascending.
inline IndexSet complement(Index p, const IndexSet& excluded) {
  std::vector<char> mask(p, 0);
  for (Index j : excluded) {
    require(j < p, "index out of range in complement");
    mask[j] = 1;
  }
  IndexSet out;
  out.reserve(p);
  for (Index j = 0; j < p; ++j)
    if (!mask[j]) out.push_back(j);
  return out;
}

}  // namespace elscreen
