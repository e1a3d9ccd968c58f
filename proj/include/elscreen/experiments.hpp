#pragma once

// Seeded replication engine and the preconfigured simulation tables.

#include "elscreen/common.hpp"
#include "elscreen/conditional.hpp"
#include "elscreen/evalkit.hpp"
#include "elscreen/parallel.hpp"
#include "elscreen/screening.hpp"
#include "elscreen/simgen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace elscreen {

inline constexpr const char* kVersion = "elscreen 1.0.0";

/// One screening procedure evaluated inside a replication.
struct MethodRun {
  enum class Kind { kUnconditional, kConditional, kTwoStep, kUnion };
  std::string label;
  Kind kind = Kind::kUnconditional;
  Method method = Method::kMelsis;  // unconditional method, or conditional aggregate
  IndexSet cond_set;                // 0-based (kConditional)
  Index d1 = 0;                     // first-stage size (kTwoStep)

  static MethodRun unconditional(Method m) { return {std::string(to_string(m)), Kind::kUnconditional, m, {}, 0}; }
  static MethodRun union_coverage() { return {"ELSIS_COM", Kind::kUnion, Method::kElsisAvg, {}, 0}; }
  static MethodRun conditional(std::string label, Method m, IndexSet cond) {
    return {std::move(label), Kind::kConditional, m, std::move(cond), 0};
  }
  static MethodRun two_step(std::string label, Method m, Index d1) { return {std::move(label), Kind::kTwoStep, m, {}, d1}; }
};

struct HardSizes {
  std::vector<Index> sizes;  // first entry drives P_j / P_a
};
struct SoftTau {
  double tau = 0.99;
};
using ThresholdSpec = std::variant<HardSizes, SoftTau>;

struct SimulationReport {
  SimulationScenario scenario;  // template (seed = master seed)
  Index replications = 0;
  std::uint64_t master_seed = 0;
  std::vector<EvaluationReport> methods;
  std::vector<std::map<Index, double>> p_a_by_size;  // parallel to methods (hard rule)
  std::vector<std::vector<double>> selected_size_quantiles;  // parallel to methods (soft rule)
};

namespace detail {

struct ReplicationOutcome {
  double mms = 0.0;
  std::vector<IndexSet> selections;  // one per hard size, or the soft selection
  double selected_size = 0.0;
};

inline IndexSet prefix(const IndexSet& ranking, Index d) {
  return IndexSet(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(std::min<Index>(d, ranking.size())));
}

inline IndexSet active_outside(const IndexSet& active, const IndexSet& cond) {
  IndexSet out;
  for (Index a : active)
    if (std::find(cond.begin(), cond.end(), a) == cond.end()) out.push_back(a);
  return out;
}

// Ranking of an unconditional method, deriving ELSIS avg/max from a shared
// univariate matrix when available.
inline ScreeningResult unconditional_result(const Dataset& d, Method m, const Matrix* univariate) {
  StatisticVector stats;
  if (univariate && (m == Method::kElsisAvg || m == Method::kElsisMax) && univariate->cols() > 1) {
    stats.values.resize(univariate->rows());
    for (Eigen::Index j = 0; j < univariate->rows(); ++j) {
      double acc = m == Method::kElsisAvg ? 0.0 : -1.0;
      for (Eigen::Index k = 0; k < univariate->cols(); ++k)
        acc = m == Method::kElsisAvg ? acc + (*univariate)(j, k) : std::max(acc, (*univariate)(j, k));
      stats.values[j] = m == Method::kElsisAvg ? acc / static_cast<double>(univariate->cols()) : acc;
    }
  } else {
    stats = column_statistics(d.X, d.Y, m, 1);
  }
  IndexSet universe(d.p());
  std::iota(universe.begin(), universe.end(), Index{0});
  return make_result(m, std::move(stats), std::move(universe), HardRule{0});
}

inline ReplicationOutcome run_method(const Dataset& d, const MethodRun& run, const IndexSet& active,
                                     const ThresholdSpec& threshold, std::uint64_t rep_seed, const Matrix* univariate) {
  ReplicationOutcome out;
  const auto* hard = std::get_if<HardSizes>(&threshold);
  const std::uint64_t soft_seed = stream_seed(rep_seed, 7);

  if (run.kind == MethodRun::Kind::kUnion || run.kind == MethodRun::Kind::kTwoStep)
    require(hard != nullptr, run.label + " supports the hard rule only");

  if (run.kind == MethodRun::Kind::kUnion) {
    require(univariate != nullptr, "union coverage needs univariate statistics");
    std::vector<IndexSet> rankings;
    for (Eigen::Index k = 0; k < univariate->cols(); ++k) rankings.push_back(rank_predictors(Vector(univariate->col(k))));
    out.mms = static_cast<double>(union_model_size(rankings, active));
    if (hard) {
      for (Index size : hard->sizes) {
        std::vector<char> in(d.p(), 0);
        for (const IndexSet& r : rankings)
          for (Index j : prefix(r, size)) in[j] = 1;
        IndexSet sel;
        for (Index j = 0; j < d.p(); ++j)
          if (in[j]) sel.push_back(j);
        out.selections.push_back(std::move(sel));
      }
    }
    return out;
  }

  if (run.kind == MethodRun::Kind::kTwoStep) {
    const Index max_size = hard ? *std::max_element(hard->sizes.begin(), hard->sizes.end()) : run.d1;
    const Index d2 = max_size > run.d1 ? std::min<Index>(max_size - run.d1, d.p() - run.d1) : 0;
    const TwoStepResult ts = two_step_screen(d, run.d1, d2, run.method);
    out.mms = static_cast<double>(minimal_model_size(ts.ranking, active));
    if (hard)
      for (Index size : hard->sizes) out.selections.push_back(prefix(ts.ranking, size));
    return out;
  }

  if (run.kind == MethodRun::Kind::kConditional) {
    ConditioningSpec spec;
    spec.cond_set = run.cond_set;
    const IndexSet eval_active = active_outside(active, run.cond_set);
    const Method m = run.method == Method::kMelsis ? Method::kCmelsis : run.method;
    ScreeningResult r;
    if (hard) {
      r = conditional_screen(d, spec, m, HardRule{0});
    } else {
      r = conditional_screen_soft(d, spec, m, std::get<SoftTau>(threshold).tau, soft_seed);
      out.selections.push_back(r.selected);
      out.selected_size = static_cast<double>(r.selected.size());
    }
    out.mms = eval_active.empty() ? 0.0 : static_cast<double>(minimal_model_size(r.ranking, eval_active));
    if (hard)
      for (Index size : hard->sizes) out.selections.push_back(prefix(r.ranking, size));
    return out;
  }

  if (hard) {
    const ScreeningResult r = unconditional_result(d, run.method, univariate);
    out.mms = static_cast<double>(minimal_model_size(r.ranking, active));
    for (Index size : hard->sizes) out.selections.push_back(prefix(r.ranking, size));
  } else {
    const ScreeningResult r = screen_soft(d, run.method, std::get<SoftTau>(threshold).tau, soft_seed);
    out.mms = static_cast<double>(minimal_model_size(r.ranking, active));
    out.selections.push_back(r.selected);
    out.selected_size = static_cast<double>(r.selected.size());
  }
  return out;
}

inline bool needs_univariate(const std::vector<MethodRun>& methods) {
  for (const MethodRun& m : methods)
    if (m.kind == MethodRun::Kind::kUnion ||
        (m.kind == MethodRun::Kind::kUnconditional && (m.method == Method::kElsisAvg || m.method == Method::kElsisMax)))
      return true;
  return false;
}

}  // namespace detail

/// Runs `replications` seeded draws of the scenario and evaluates each method.
/// Replications run in parallel; results are merged by replication index so
/// the report does not depend on the worker count.
inline SimulationReport simulate(const SimulationScenario& scenario, const std::vector<MethodRun>& methods,
                                 Index replications, std::uint64_t master_seed, const ThresholdSpec& threshold,
                                 std::size_t threads = 1) {
  validate(scenario);
  require(replications >= 1, "need at least one replication");
  require(!methods.empty(), "need at least one method");
  if (const auto* hard = std::get_if<HardSizes>(&threshold)) require(!hard->sizes.empty(), "need a model size");
  const IndexSet active = active_set(scenario);
  const bool univariate_needed = std::holds_alternative<HardSizes>(threshold) && detail::needs_univariate(methods);

  std::vector<std::vector<detail::ReplicationOutcome>> outcomes(replications);
  parallel_for(replications, threads, [&](std::size_t rep) {
    const SimulationScenario s = replicate_scenario(scenario, master_seed, rep);
    const Dataset d = standardized(generate(s));
    std::optional<Matrix> uni;
    if (univariate_needed) uni = univariate_statistics(d, 1);
    outcomes[rep].reserve(methods.size());
    for (const MethodRun& m : methods)
      outcomes[rep].push_back(detail::run_method(d, m, active, threshold, s.seed, uni ? &*uni : nullptr));
  });

  SimulationReport report;
  report.scenario = scenario;
  report.scenario.seed = master_seed;
  report.replications = replications;
  report.master_seed = master_seed;
  const auto* hard = std::get_if<HardSizes>(&threshold);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const MethodRun& m = methods[k];
    const IndexSet eval_active =
        m.kind == MethodRun::Kind::kConditional ? detail::active_outside(active, m.cond_set) : active;
    std::vector<double> mms;
    std::vector<IndexSet> primary;
    std::vector<double> sizes;
    for (std::size_t rep = 0; rep < replications; ++rep) {
      mms.push_back(outcomes[rep][k].mms);
      primary.push_back(outcomes[rep][k].selections.front());
      sizes.push_back(outcomes[rep][k].selected_size);
    }
    const Index size = hard ? hard->sizes.front() : 0;
    const std::string rule = hard ? "hard" : "soft(tau=" + nlohmann::json(std::get<SoftTau>(threshold).tau).dump() + ")";
    EvaluationReport ev = summarize(m.label, mms, primary, eval_active.empty() ? active : eval_active, size, rule);
    if (m.kind == MethodRun::Kind::kUnion) ev.union_coverage = ev.mms_quantiles;
    std::map<Index, double> by_size;
    std::vector<double> size_q;
    if (hard) {
      for (std::size_t s = 0; s < hard->sizes.size(); ++s) {
        std::vector<IndexSet> sel;
        for (std::size_t rep = 0; rep < replications; ++rep) sel.push_back(outcomes[rep][k].selections[s]);
        by_size[hard->sizes[s]] = coverage_proportions(sel, eval_active.empty() ? active : eval_active).p_a;
      }
    } else {
      size_q = quantile_summary(sizes);
      ev.median_selected_size = size_q[2];
    }
    report.methods.push_back(std::move(ev));
    report.p_a_by_size.push_back(std::move(by_size));
    report.selected_size_quantiles.push_back(std::move(size_q));
  }
  return report;
}

inline nlohmann::json to_json(const SimulationReport& r) {
  nlohmann::json j;
  j["scenario"] = to_json(r.scenario);
  j["replications"] = r.replications;
  j["master_seed"] = r.master_seed;
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    nlohmann::json m = to_json(r.methods[k]);
    if (!r.p_a_by_size[k].empty()) {
      nlohmann::json by = nlohmann::json::object();
      for (const auto& [size, pa] : r.p_a_by_size[k]) by[std::to_string(size)] = pa;
      m["p_a_by_size"] = by;
    }
    if (!r.selected_size_quantiles[k].empty()) m["selected_size_quantiles"] = r.selected_size_quantiles[k];
    methods.push_back(std::move(m));
  }
  j["methods"] = methods;
  return j;
}

// ---------------------------------------------------------------------------
// Ranking-condition diagnostics study (hidden-variable model)
// ---------------------------------------------------------------------------

struct DiagnosticStudy {
  Index sims = 0;
  double mean_unconditional = 0.0;
  double mean_conditional = 0.0;
  Index conditional_count = 0;  // sims where some active predictor lies outside C
  std::vector<double> unconditional;
  std::vector<double> conditional;
};

/// Masking-design study (CASE1): per simulation, C = top-[n/log n] MELSIS predictors; the
/// unconditional ratio uses A = {1,2,3} against all inactive predictors and
/// the conditional ratio uses the centralized A \ C against I \ C.
inline DiagnosticStudy masking_study(Index n, Index p, Index sims, std::uint64_t master_seed,
                                          std::size_t threads = 1) {
  SimulationScenario tmpl;
  tmpl.model_id = ModelId::kCase1;
  tmpl.n = n;
  tmpl.p = p;
  const IndexSet active = active_set(tmpl);
  const IndexSet inactive = complement(p, active);
  const Index c_size = hard_threshold_size(n, 1.0);

  DiagnosticStudy out;
  out.sims = sims;
  out.unconditional.assign(sims, 0.0);
  out.conditional.assign(sims, std::numeric_limits<double>::quiet_NaN());
  parallel_for(sims, threads, [&](std::size_t rep) {
    const Dataset d = standardized(generate(replicate_scenario(tmpl, master_seed, rep)));
    const ScreeningResult r = screen(d, Method::kMelsis, c_size, 1);
    ConditioningSpec spec;
    spec.cond_set = r.selected;
    const PropositionDiagnostics diag = proposition_diagnostics(d, active, inactive, spec, 1);
    out.unconditional[rep] = diag.lhs_ratio;
    if (diag.conditional_lhs_ratio) out.conditional[rep] = *diag.conditional_lhs_ratio;
  });
  double su = 0.0, sc = 0.0;
  for (std::size_t k = 0; k < sims; ++k) {
    su += out.unconditional[k];
    if (!std::isnan(out.conditional[k])) {
      sc += out.conditional[k];
      ++out.conditional_count;
    }
  }
  out.mean_unconditional = su / static_cast<double>(sims);
  out.mean_conditional = out.conditional_count ? sc / static_cast<double>(out.conditional_count)
                                               : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// ---------------------------------------------------------------------------
// Preconfigured tables
// ---------------------------------------------------------------------------

struct TableRow {
  std::string setting;  // e.g. "q=5", "rho=0,case=a"
  SimulationReport report;
};

struct TableOptions {
  Index replications = 100;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  std::vector<Index> q_values{5, 10, 15};  // table1 only
};

inline std::vector<MethodRun> baseline_methods() {
  return {MethodRun::unconditional(Method::kMelsis), MethodRun::unconditional(Method::kElsisAvg),
          MethodRun::unconditional(Method::kElsisMax)};
}

/// Conditioning sets of the hidden-variable example (0-based).
inline std::vector<std::pair<std::string, IndexSet>> hidden_variable_cond_sets() {
  return {{"C1", {1, 2, 3}}, {"C2", {0, 1, 2}}, {"C3", {0, 1, 9}}, {"C4", {0, 8, 9}}};
}

inline std::vector<TableRow> run_table(const std::string& name, const TableOptions& opt) {
  std::vector<TableRow> rows;
  const HardSizes d21{{21}};
  if (name == "table1") {
    for (Index q : opt.q_values) {
      SimulationScenario s{ModelId::kVariedQ, 100, 1000, q, 0.0, ErrorCase::kA, opt.master_seed};
      std::vector<MethodRun> methods{MethodRun::unconditional(Method::kMelsis), MethodRun::union_coverage(),
                                     MethodRun::unconditional(Method::kElsisAvg),
                                     MethodRun::unconditional(Method::kElsisMax)};
      rows.push_back({"q=" + std::to_string(q),
                      simulate(s, methods, opt.replications, opt.master_seed, HardSizes{{hard_threshold_size(100, 1.0)}}, opt.threads)});
    }
  } else if (name == "table2" || name == "table3" || name == "table4") {
    const bool ex42 = name == "table4";
    for (double rho : {0.0, 0.5})
      for (ErrorCase c : {ErrorCase::kA, ErrorCase::kB}) {
        SimulationScenario s{ex42 ? ModelId::kEx42 : ModelId::kEx41, ex42 ? Index{200} : Index{100},
                             ex42 ? Index{1000} : Index{2000}, ex42 ? Index{5} : Index{4}, rho, c, opt.master_seed};
        const Index d = hard_threshold_size(s.n, 1.0);
        rows.push_back({"rho=" + nlohmann::json(rho).dump() + ",case=" + std::string(to_string(c)),
                        simulate(s, baseline_methods(), opt.replications, opt.master_seed, HardSizes{{d}}, opt.threads)});
      }
  } else if (name == "table5") {
    for (ErrorCase c : {ErrorCase::kA, ErrorCase::kB})
      for (double tau : {0.99, 0.98}) {
        for (double rho : {0.0, 0.5}) {
          SimulationScenario s{ModelId::kEx41, 100, 2000, 4, rho, c, opt.master_seed};
          rows.push_back({"MELSIS,rho=" + nlohmann::json(rho).dump() + ",case=" + std::string(to_string(c)) +
                              ",tau=" + nlohmann::json(tau).dump(),
                          simulate(s, {MethodRun::unconditional(Method::kMelsis)}, opt.replications, opt.master_seed,
                                   SoftTau{tau}, opt.threads)});
        }
        SimulationScenario s{ModelId::kEx43, 100, 1000, 3, 0.0, c, opt.master_seed};
        std::vector<MethodRun> methods;
        for (const auto& [label, set] : hidden_variable_cond_sets())
          methods.push_back(MethodRun::conditional("CMELSIS(" + label + ")", Method::kMelsis, set));
        rows.push_back({"CMELSIS,case=" + std::string(to_string(c)) + ",tau=" + nlohmann::json(tau).dump(),
                        simulate(s, methods, opt.replications, opt.master_seed, SoftTau{tau}, opt.threads)});
      }
  } else if (name == "table6") {
    for (ErrorCase c : {ErrorCase::kA, ErrorCase::kB}) {
      SimulationScenario s{ModelId::kEx43, 100, 1000, 3, 0.0, c, opt.master_seed};
      std::vector<MethodRun> methods{MethodRun::unconditional(Method::kMelsis)};
      for (const auto& [prefix_label, m] : {std::pair{std::string("CMELSIS"), Method::kMelsis},
                                            std::pair{std::string("CELSIS_AVG"), Method::kElsisAvg},
                                            std::pair{std::string("CELSIS_MAX"), Method::kElsisMax}})
        for (const auto& [label, set] : hidden_variable_cond_sets())
          methods.push_back(MethodRun::conditional(prefix_label + "(" + label + ")", m, set));
      rows.push_back({"case=" + std::string(to_string(c)),
                      simulate(s, methods, opt.replications, opt.master_seed, d21, opt.threads)});
    }
  } else if (name == "table8") {
    SimulationScenario s{ModelId::kEx43, 100, 1000, 3, 0.0, ErrorCase::kA, opt.master_seed};
    // the middle column is [1.5 n / log n], not 1.5 [n / log n]
    const auto moderate = static_cast<Index>(std::floor(1.5 * 100.0 / std::log(100.0)));
    const HardSizes sizes{{hard_threshold_size(100, 1.0), moderate, hard_threshold_size(100, 2.0)}};
    std::vector<MethodRun> methods;
    for (const auto& [label, m] : {std::pair{std::string("MELSIS-CMELSIS"), Method::kMelsis},
                                   std::pair{std::string("ELSIS_AVG-CELSIS_AVG"), Method::kElsisAvg},
                                   std::pair{std::string("ELSIS_MAX-CELSIS_MAX"), Method::kElsisMax}})
      for (Index d1 : {3, 5, 7, 9}) methods.push_back(MethodRun::two_step(label + "(" + std::to_string(d1) + ")", m, d1));
    rows.push_back({"case=a", simulate(s, methods, opt.replications, opt.master_seed, sizes, opt.threads)});
  } else {
    throw InvalidArgument("unknown table '" + name + "' (expected table1..table6 or table8)");
  }
  return rows;
}

inline std::string fmt_fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

/// Aligned CSV mirroring the printed table layout.
inline std::string table_csv(const std::string& name, const std::vector<TableRow>& rows) {
  std::ostringstream os;
  const bool coverage = name == "table2";
  const bool by_size = name == "table8";
  const bool soft = name == "table5";
  if (coverage) {
    os << "setting,method,P1,P2,P3,P4,P5,Pa\n";
  } else if (by_size) {
    os << "setting,method";
    if (!rows.empty() && !rows.front().report.p_a_by_size.empty())
      for (const auto& [size, pa] : rows.front().report.p_a_by_size.front()) os << ",d=" << size;
    os << '\n';
  } else if (soft) {
    os << "setting,method,Pa,median_size,iqr_size,median_mms\n";
  } else {
    os << "setting,method,5%,25%,50%,75%,95%\n";
  }
  for (const TableRow& row : rows) {
    for (std::size_t k = 0; k < row.report.methods.size(); ++k) {
      const EvaluationReport& ev = row.report.methods[k];
      os << row.setting << ',' << ev.method;
      if (coverage) {
        for (const auto& [idx, v] : ev.p_j) os << ',' << fmt_fixed(v);
        os << ',' << fmt_fixed(ev.p_a);
      } else if (by_size) {
        for (const auto& [size, pa] : row.report.p_a_by_size[k]) os << ',' << fmt_fixed(pa);
      } else if (soft) {
        const auto& sq = row.report.selected_size_quantiles[k];
        os << ',' << fmt_fixed(ev.p_a) << ',' << fmt_fixed(sq[2], 1) << ',' << fmt_fixed(sq[3] - sq[1], 1) << ','
           << fmt_fixed(ev.mms_quantiles[2], 1);
      } else {
        for (double v : ev.mms_quantiles) os << ',' << fmt_fixed(v, 1);
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace elscreen
