#pragma once

// Screen-then-lasso analysis and numeric CSV ingestion.

#include "elscreen/common.hpp"
#include "elscreen/parallel.hpp"
#include "elscreen/screening.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace elscreen {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

enum class HeaderMode { kAuto, kPresent, kAbsent };

struct CsvOptions {
  HeaderMode header = HeaderMode::kAuto;
  bool standardize = false;
  char delimiter = ',';
};

struct CsvTable {
  Matrix values;
  std::vector<std::string> names;
  bool had_header = false;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a rectangular numeric CSV. Errors cite 1-based file line and column.
inline CsvTable read_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0, 0);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_line(line, opt.delimiter));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError("'" + path + "' contains no data", 0, 0);

  CsvTable table;
  bool header = opt.header == HeaderMode::kPresent;
  if (opt.header == HeaderMode::kAuto) {
    double tmp = 0.0;
    for (const auto& cell : rows.front())
      if (!detail::parse_number(cell, tmp)) header = true;
  }
  const std::size_t width = rows.front().size();
  std::size_t first = 0;
  if (header) {
    table.names = rows.front();
    table.had_header = true;
    first = 1;
  }
  const std::size_t n = rows.size() - first;
  if (n == 0) throw ParseError("'" + path + "' has a header but no data rows", line_numbers.front() + 1, 0);
  table.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw ParseError("row has " + std::to_string(rows[r].size()) + " fields, expected " + std::to_string(width) +
                           " (line " + std::to_string(line_numbers[r]) + ")",
                       line_numbers[r], std::min(rows[r].size(), width) + 1);
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!detail::parse_number(rows[r][c], v))
        throw ParseError("non-numeric or missing cell '" + rows[r][c] + "' at (" + std::to_string(line_numbers[r]) +
                             "," + std::to_string(c + 1) + ")",
                         line_numbers[r], c + 1);
      table.values(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return table;
}

inline Dataset load_csv(const std::string& x_path, const std::string& y_path, const CsvOptions& opt = {}) {
  CsvTable x = read_csv(x_path, opt);
  CsvTable y = read_csv(y_path, opt);
  if (x.values.rows() != y.values.rows())
    throw DimensionMismatch("X has " + std::to_string(x.values.rows()) + " rows but Y has " +
                            std::to_string(y.values.rows()));
  Dataset d;
  d.X = std::move(x.values);
  d.Y = std::move(y.values);
  d.predictor_names = x.had_header ? x.names : default_names("X", d.p());
  d.response_names = y.had_header ? y.names : default_names("Y", d.q());
  validate(d);
  if (opt.standardize) d = standardized(std::move(d));
  return d;
}

/// Writes a matrix with 17 significant digits so re-reading is exact.
inline void write_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& names = {}) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << std::setprecision(17);
  if (!names.empty()) {
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

struct LassoOptions {
  double tolerance = 1e-7;
  int max_sweeps = 100000;
};

inline double soft_threshold_value(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

/// Minimizes (1/2n)||y - X b||^2 + lambda ||b||_1 by cyclic coordinate
/// descent. `warm` seeds the iterate (path fitting).
inline Vector lasso_coordinate_descent(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opt = {},
                                       const Vector* warm = nullptr) {
  require(X.rows() == y.size(), "lasso: X and y lengths differ");
  require(lambda >= 0.0, "lasso: lambda must be nonnegative");
  const double n = static_cast<double>(X.rows());
  const Eigen::Index s = X.cols();
  Vector beta = warm ? *warm : Vector::Zero(s);
  Vector resid = y - X * beta;
  const Vector col_sq = X.colwise().squaredNorm().transpose() / n;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < s; ++j) {
      if (col_sq[j] <= 0.0) continue;
      const double old = beta[j];
      const double z = X.col(j).dot(resid) / n + col_sq[j] * old;
      const double updated = soft_threshold_value(z, lambda) / col_sq[j];
      if (updated != old) {
        resid.noalias() -= (updated - old) * X.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change <= opt.tolerance) break;
  }
  return beta;
}

struct LassoFit {
  std::vector<double> lambda_path;         // decreasing
  std::vector<Vector> coefficients;        // lasso coefficients per lambda
  std::vector<double> path_rss;            // lasso RSS / n per lambda
  std::vector<Index> path_df;              // nonzero count per lambda
  std::vector<double> path_bic;            // BIC of the least-squares refit on each support
  Index selected = 0;                      // index of the BIC minimizer
  double selected_lambda = 0.0;
  Vector refit;                            // least-squares coefficients on the selected support
  double intercept = 0.0;
  double rss = 0.0;                        // (1/n) sum (y - yhat)^2 at the selected model
  Index df = 0;
};

namespace detail {

inline double refit_rss(const Matrix& X, const Vector& yc, const Vector& beta, Vector& refit) {
  refit = Vector::Zero(X.cols());
  IndexSet support;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) support.push_back(static_cast<Index>(j));
  const double n = static_cast<double>(X.rows());
  if (support.empty()) return yc.squaredNorm() / n;
  const Matrix xs = take_columns(X, support);
  const Vector b = xs.colPivHouseholderQr().solve(yc);
  for (Index k = 0; k < support.size(); ++k) refit[static_cast<Eigen::Index>(support[k])] = b[static_cast<Eigen::Index>(k)];
  return (yc - xs * b).squaredNorm() / n;
}

}  // namespace detail

inline double lambda_max(const Matrix& X, const Vector& yc) {
  return (X.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

/// Geometric lambda path from lambda_max to ratio * lambda_max, lasso fits
/// along it, and BIC = n log(RSS) + df log(n) on the least-squares refit of
/// each support. X must be column-standardized; y is centered internally.
inline LassoFit lasso_bic_path(const Matrix& X, const Vector& y, Index n_lambda = 50, double min_ratio = 1e-3,
                               const LassoOptions& opt = {}) {
  require(X.rows() == y.size(), "lasso: X and y lengths differ");
  require(n_lambda >= 2, "lasso path needs at least two lambdas");
  const double n = static_cast<double>(X.rows());
  LassoFit fit;
  fit.intercept = y.mean();
  const Vector yc = y.array() - fit.intercept;
  const double tss = yc.squaredNorm() / n;
  const double lmax = X.cols() > 0 ? lambda_max(X, yc) : 0.0;
  // Floor for numerically exact fits so BIC prefers the smaller support.
  const double rss_floor = std::max(1e-24, 1e-20 * tss);

  Vector beta = Vector::Zero(X.cols());
  double best_bic = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n_lambda; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n_lambda - 1);
    const double lambda = lmax * std::pow(min_ratio, frac);
    beta = lmax > 0.0 ? lasso_coordinate_descent(X, yc, lambda, opt, &beta) : Vector::Zero(X.cols());
    Index df = 0;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      if (beta[j] != 0.0) ++df;
    Vector refit;
    const double rss_ls = detail::refit_rss(X, yc, beta, refit);
    const double bic = n * std::log(std::max(rss_ls, rss_floor)) + static_cast<double>(df) * std::log(n);
    fit.lambda_path.push_back(lambda);
    fit.coefficients.push_back(beta);
    fit.path_rss.push_back((yc - X * beta).squaredNorm() / n);
    fit.path_df.push_back(df);
    fit.path_bic.push_back(bic);
    if (k == 0 || bic < best_bic - 1e-12 * std::abs(best_bic)) {
      best_bic = bic;
      fit.selected = k;
      fit.selected_lambda = lambda;
      fit.refit = refit;
      fit.rss = rss_ls;
      fit.df = df;
    }
  }
  return fit;
}

struct TwoStageResult {
  ScreeningResult screen;
  IndexSet screened;              // top-s predictor indices
  std::vector<LassoFit> fits;     // one per response
};

/// Screens to the top-s predictors and fits a lasso-BIC model per response.
inline TwoStageResult two_stage(const Dataset& data, Method method, Index s, std::size_t threads = 1) {
  validate(data);
  require(s >= 1 && s <= data.p(), "two-stage needs 1 <= s <= p");
  require(method != Method::kCmelsis, "two-stage screens unconditionally");
  const Dataset d = standardized(data);
  TwoStageResult out;
  out.screen = screen(d, method, s, threads);
  out.screened = out.screen.selected;
  const Matrix xs = take_columns(d.X, out.screened);
  out.fits.resize(d.q());
  parallel_for(d.q(), threads, [&](std::size_t k) {
    out.fits[k] = lasso_bic_path(xs, d.Y.col(static_cast<Eigen::Index>(k)));
  });
  return out;
}

inline nlohmann::json to_json(const LassoFit& f, const IndexSet& screened, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["rss"] = f.rss;
  j["df"] = f.df;
  j["selected_lambda"] = f.selected_lambda;
  j["intercept"] = f.intercept;
  nlohmann::json coef = nlohmann::json::object();
  for (Eigen::Index k = 0; k < f.refit.size(); ++k)
    if (f.refit[k] != 0.0) {
      const Index idx = screened[static_cast<std::size_t>(k)];
      coef[idx < names.size() ? names[idx] : std::to_string(idx + 1)] = f.refit[k];
    }
  j["coefficients"] = coef;
  j["lambda_path"] = f.lambda_path;
  j["path_df"] = f.path_df;
  j["path_bic"] = f.path_bic;
  return j;
}

}  // namespace elscreen
