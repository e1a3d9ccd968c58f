// elscreen command-line driver: screen, simulate, replicate, diagnose,
// two-stage, generate.

#include "elscreen/elscreen.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using elscreen::Index;
using elscreen::IndexSet;
using json = nlohmann::json;

struct OutputOptions {
  std::string path = "-";
  std::string format = "json";
  std::size_t threads = 0;
};

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw elscreen::InvalidArgument("cannot open output file '" + path + "'");
  out << text;
}

json envelope(const std::string& command, const json& config) {
  return json{{"version", elscreen::kVersion}, {"command", command}, {"config", config}, {"partial", false}};
}

void emit_json(const json& j, const OutputOptions& out) { write_text(j.dump(2) + "\n", out.path); }

// "1,2,5" (1-based) -> 0-based, checked against p when p > 0.
IndexSet parse_index_list(const std::string& text, Index p = 0) {
  IndexSet out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (...) {
      throw elscreen::InvalidArgument("bad index '" + item + "' in list '" + text + "'");
    }
    if (used != item.size() || v < 1) throw elscreen::InvalidArgument("indices are 1-based positive integers: '" + item + "'");
    if (p > 0 && static_cast<Index>(v) > p)
      throw elscreen::InvalidArgument("index " + item + " exceeds the number of predictors (" + std::to_string(p) + ")");
    out.push_back(static_cast<Index>(v - 1));
  }
  return out;
}

std::vector<Index> one_based(const IndexSet& s) {
  std::vector<Index> out(s.begin(), s.end());
  for (Index& j : out) ++j;
  return out;
}

elscreen::HeaderMode parse_header(const std::string& s) {
  if (s == "auto") return elscreen::HeaderMode::kAuto;
  if (s == "yes") return elscreen::HeaderMode::kPresent;
  if (s == "no") return elscreen::HeaderMode::kAbsent;
  throw elscreen::InvalidArgument("--header must be auto, yes or no");
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

struct ScreenArgs {
  std::string x, y, method = "melsis", header = "auto", cond;
  std::optional<double> hard;
  std::optional<Index> size;
  std::optional<double> soft;
  std::uint64_t seed = 1;
  Index slices = 9;
  double share = 0.8;
  bool full_span = false;
};

std::string screening_csv(const elscreen::ScreeningResult& r, const std::vector<std::string>& names) {
  std::vector<char> selected(names.size(), 0);
  for (Index j : r.selected) selected[j] = 1;
  std::vector<double> stat(names.size(), 0.0);
  for (Index k = 0; k < r.universe.size(); ++k) stat[r.universe[k]] = r.statistics[static_cast<Eigen::Index>(k)];
  std::ostringstream os;
  os.precision(17);
  os << "rank,index,name,statistic,selected\n";
  for (Index k = 0; k < r.ranking.size(); ++k) {
    const Index j = r.ranking[k];
    os << k + 1 << ',' << j + 1 << ',' << names[j] << ',' << stat[j] << ',' << (selected[j] ? 1 : 0) << '\n';
  }
  return os.str();
}

void run_screen(const ScreenArgs& a, const OutputOptions& out) {
  elscreen::CsvOptions csv;
  csv.header = parse_header(a.header);
  const elscreen::Dataset data = elscreen::load_csv(a.x, a.y, csv);
  const std::size_t threads = elscreen::resolve_threads(out.threads);
  const elscreen::Method method = elscreen::parse_method(a.method);

  json config{{"x", a.x}, {"y", a.y}, {"method", std::string(elscreen::to_string(method))}, {"seed", a.seed}};
  elscreen::ScreeningResult result;
  const bool conditional = !a.cond.empty() || method == elscreen::Method::kCmelsis;
  std::optional<elscreen::ConditioningSpec> spec;
  if (conditional) {
    if (a.cond.empty()) throw elscreen::InvalidArgument("CMELSIS needs --cond");
    spec.emplace();
    spec->cond_set = parse_index_list(a.cond, data.p());
    spec->n_slices = a.slices;
    spec->direction_share = a.share;
    if (a.full_span) spec->mode = elscreen::DirectionMode::kFullSpan;
    config["cond"] = one_based(spec->cond_set);
    config["slices"] = a.slices;
    config["direction_share"] = a.share;
    config["full_span"] = a.full_span;
  }
  if (a.soft) {
    config["threshold"] = {{"kind", "soft"}, {"tau", *a.soft}};
    result = spec ? elscreen::conditional_screen_soft(data, *spec, method, *a.soft, a.seed, threads)
                  : elscreen::screen_soft(data, method, *a.soft, a.seed, threads);
  } else {
    const Index d = a.size ? *a.size : elscreen::hard_threshold_size(data.n(), a.hard.value_or(1.0));
    config["threshold"] = {{"kind", "hard"}, {"size", d}};
    if (!a.size) config["threshold"]["c"] = a.hard.value_or(1.0);
    result = spec ? elscreen::conditional_screen(data, *spec, method, elscreen::HardRule{d}, threads)
                  : elscreen::screen(data, method, d, threads);
  }

  if (out.format == "csv") {
    write_text(screening_csv(result, data.predictor_names), out.path);
    return;
  }
  json j = envelope("screen", config);
  j["data"] = {{"n", data.n()}, {"p", data.p()}, {"q", data.q()}};
  j["result"] = elscreen::to_json(result, data.predictor_names);
  emit_json(j, out);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct ScenarioArgs {
  std::string model = "ex41", error_case = "a";
  double rho = 0.0;
  std::optional<Index> n, p, q;
  bool clip_sigma = false;
};

elscreen::SimulationScenario build_scenario(const ScenarioArgs& a, std::uint64_t seed) {
  elscreen::SimulationScenario s;
  s.model_id = elscreen::parse_model(a.model);
  using elscreen::ModelId;
  switch (s.model_id) {
    case ModelId::kVariedQ: s.n = 100; s.p = 1000; s.q = 5; break;
    case ModelId::kEx41: s.n = 100; s.p = 2000; break;
    case ModelId::kEx42: s.n = 200; s.p = 1000; break;
    case ModelId::kEx43: s.n = 100; s.p = 1000; break;
    case ModelId::kCase1: s.n = 100; s.p = 500; break;
  }
  if (a.n) s.n = *a.n;
  if (a.p) s.p = *a.p;
  if (a.q) s.q = *a.q;
  s.q = elscreen::design_q(s);
  s.rho = a.rho;
  s.error_case = elscreen::parse_error_case(a.error_case);
  s.clip_sigma = a.clip_sigma;
  s.seed = seed;
  elscreen::validate(s);
  return s;
}

struct SimulateArgs {
  ScenarioArgs scenario;
  std::string methods = "melsis", cond, hard = "1.0", sizes;
  std::optional<double> soft;
  Index reps = 100;
  Index d1 = 3;
  std::uint64_t seed = 1;
};

std::vector<elscreen::MethodRun> parse_method_runs(const SimulateArgs& a, Index p) {
  using elscreen::Method;
  using elscreen::MethodRun;
  std::vector<MethodRun> runs;
  std::stringstream ss(a.methods);
  std::string tag;
  auto cond = [&]() {
    if (a.cond.empty()) throw elscreen::InvalidArgument("conditional methods need --cond");
    return parse_index_list(a.cond, p);
  };
  while (std::getline(ss, tag, ',')) {
    if (tag.empty()) continue;
    if (tag == "melsis") runs.push_back(MethodRun::unconditional(Method::kMelsis));
    else if (tag == "elsis_avg") runs.push_back(MethodRun::unconditional(Method::kElsisAvg));
    else if (tag == "elsis_max") runs.push_back(MethodRun::unconditional(Method::kElsisMax));
    else if (tag == "elsis_com") runs.push_back(MethodRun::union_coverage());
    else if (tag == "cmelsis") runs.push_back(MethodRun::conditional("CMELSIS", Method::kMelsis, cond()));
    else if (tag == "celsis_avg") runs.push_back(MethodRun::conditional("CELSIS_AVG", Method::kElsisAvg, cond()));
    else if (tag == "celsis_max") runs.push_back(MethodRun::conditional("CELSIS_MAX", Method::kElsisMax, cond()));
    else if (tag == "two_step")
      runs.push_back(MethodRun::two_step("MELSIS-CMELSIS(" + std::to_string(a.d1) + ")", Method::kMelsis, a.d1));
    else
      throw elscreen::InvalidArgument("unknown method '" + tag +
                                      "' (melsis, elsis_avg, elsis_max, elsis_com, cmelsis, celsis_avg, celsis_max, two_step)");
  }
  if (runs.empty()) throw elscreen::InvalidArgument("--methods is empty");
  return runs;
}

std::string simulation_csv(const elscreen::SimulationReport& r) {
  std::ostringstream os;
  os << "method,5%,25%,50%,75%,95%";
  const auto& first = r.methods.front();
  for (const auto& [idx, v] : first.p_j) os << ",P" << idx;
  os << ",Pa\n";
  for (const auto& ev : r.methods) {
    os << ev.method;
    for (double v : ev.mms_quantiles) os << ',' << elscreen::fmt_fixed(v, 1);
    for (const auto& [idx, v] : ev.p_j) os << ',' << elscreen::fmt_fixed(v);
    os << ',' << elscreen::fmt_fixed(ev.p_a) << '\n';
  }
  return os.str();
}

void run_simulate(const SimulateArgs& a, const OutputOptions& out) {
  const elscreen::SimulationScenario s = build_scenario(a.scenario, a.seed);
  const std::vector<elscreen::MethodRun> runs = parse_method_runs(a, s.p);
  elscreen::ThresholdSpec threshold;
  json tconf;
  if (a.soft) {
    threshold = elscreen::SoftTau{*a.soft};
    tconf = {{"kind", "soft"}, {"tau", *a.soft}};
  } else {
    elscreen::HardSizes hs;
    if (!a.sizes.empty()) {
      for (Index j : parse_index_list(a.sizes)) hs.sizes.push_back(j + 1);
    } else {
      std::stringstream ss(a.hard);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        double c = 0.0;
        try {
          c = std::stod(item);
        } catch (...) {
          throw elscreen::InvalidArgument("bad --hard value '" + item + "'");
        }
        hs.sizes.push_back(elscreen::hard_threshold_size(s.n, c));
      }
    }
    tconf = {{"kind", "hard"}, {"sizes", hs.sizes}};
    threshold = hs;
  }
  json config{{"scenario", elscreen::to_json(s)}, {"methods", a.methods}, {"replications", a.reps},
              {"master_seed", a.seed}, {"threshold", tconf}};
  if (!a.cond.empty()) config["cond"] = one_based(parse_index_list(a.cond, s.p));
  if (a.methods.find("two_step") != std::string::npos) config["d1"] = a.d1;

  const elscreen::SimulationReport report =
      elscreen::simulate(s, runs, a.reps, a.seed, threshold, elscreen::resolve_threads(out.threads));
  if (out.format == "csv") {
    write_text(simulation_csv(report), out.path);
    return;
  }
  json j = envelope("simulate", config);
  j["report"] = elscreen::to_json(report);
  emit_json(j, out);
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

struct ReplicateArgs {
  std::string table;
  Index reps = 100;
  std::uint64_t seed = 1;
  std::vector<Index> q_values{5, 10, 15};
};

void run_replicate(const ReplicateArgs& a, const OutputOptions& out) {
  elscreen::TableOptions opt;
  opt.replications = a.reps;
  opt.master_seed = a.seed;
  opt.threads = elscreen::resolve_threads(out.threads);
  opt.q_values = a.q_values;
  json config{{"table", a.table}, {"replications", a.reps}, {"master_seed", a.seed}};
  if (a.table == "table1") config["q"] = a.q_values;

  // table1 runs one q at a time so completed rows survive a later failure
  std::vector<std::vector<Index>> chunks;
  if (a.table == "table1")
    for (Index q : a.q_values) chunks.push_back({q});
  else
    chunks.push_back({});

  std::vector<elscreen::TableRow> rows;
  try {
    for (const auto& chunk : chunks) {
      if (!chunk.empty()) opt.q_values = chunk;
      for (auto& row : elscreen::run_table(a.table, opt)) rows.push_back(std::move(row));
    }
  } catch (const elscreen::Error& e) {
    json j = envelope("replicate", config);
    j["partial"] = true;
    j["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    json arr = json::array();
    for (const auto& row : rows) arr.push_back({{"setting", row.setting}, {"report", elscreen::to_json(row.report)}});
    j["rows"] = arr;
    if (!rows.empty()) emit_json(j, out);
    throw;
  }

  if (out.format == "csv") {
    write_text(elscreen::table_csv(a.table, rows), out.path);
    return;
  }
  json j = envelope("replicate", config);
  json arr = json::array();
  for (const auto& row : rows) arr.push_back({{"setting", row.setting}, {"report", elscreen::to_json(row.report)}});
  j["rows"] = arr;
  j["table_csv"] = elscreen::table_csv(a.table, rows);
  emit_json(j, out);
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string x, y, active, cond, header = "auto", predictors;
  bool study = false;
  Index n = 100, p = 500, sims = 100;
  std::uint64_t seed = 1;
};

json diagnostics_json(const elscreen::PropositionDiagnostics& d) {
  json j{{"lhs_ratio", d.lhs_ratio}, {"rhs_min", d.rhs_min}};
  if (d.conditional_lhs_ratio) j["conditional_lhs_ratio"] = *d.conditional_lhs_ratio;
  if (d.conditional_rhs_min) j["conditional_rhs_min"] = *d.conditional_rhs_min;
  return j;
}

void run_diagnose(const DiagnoseArgs& a, const OutputOptions& out) {
  const std::size_t threads = elscreen::resolve_threads(out.threads);
  if (a.study) {
    json config{{"mode", "study"}, {"n", a.n}, {"p", a.p}, {"sims", a.sims}, {"master_seed", a.seed}};
    const elscreen::DiagnosticStudy st = elscreen::masking_study(a.n, a.p, a.sims, a.seed, threads);
    json j = envelope("diagnose", config);
    j["study"] = {{"mean_unconditional", st.mean_unconditional},
                  {"mean_conditional", st.conditional_count ? json(st.mean_conditional) : json(nullptr)},
                  {"conditional_count", st.conditional_count},
                  {"unconditional", st.unconditional},
                  {"conditional", st.conditional}};
    for (auto& v : j["study"]["conditional"])
      if (v.is_number() && std::isnan(v.get<double>())) v = nullptr;
    emit_json(j, out);
    return;
  }
  if (a.x.empty() || a.y.empty() || a.active.empty())
    throw elscreen::InvalidArgument("diagnose needs --x, --y and --active (or --study)");
  elscreen::CsvOptions csv;
  csv.header = parse_header(a.header);
  const elscreen::Dataset data = elscreen::standardized(elscreen::load_csv(a.x, a.y, csv));
  const IndexSet active = parse_index_list(a.active, data.p());
  const IndexSet inactive = elscreen::complement(data.p(), active);
  std::optional<elscreen::ConditioningSpec> spec;
  json config{{"mode", "data"}, {"x", a.x}, {"y", a.y}, {"active", one_based(active)}};
  if (!a.cond.empty()) {
    spec.emplace();
    spec->cond_set = parse_index_list(a.cond, data.p());
    config["cond"] = one_based(spec->cond_set);
  }
  const elscreen::PropositionDiagnostics diag = elscreen::proposition_diagnostics(data, active, inactive, spec, threads);

  const IndexSet taylor_set = a.predictors.empty() ? active : parse_index_list(a.predictors, data.p());
  json taylor = json::array();
  for (Index j : taylor_set) {
    const elscreen::Matrix rows =
        data.Y.array().colwise() * data.X.col(static_cast<Eigen::Index>(j)).array();
    const elscreen::TaylorComparison t = elscreen::taylor_comparator(elscreen::EstimatingMatrix(rows));
    taylor.push_back({{"predictor", j + 1},
                      {"name", data.predictor_names[j]},
                      {"el_ratio", t.el_ratio},
                      {"hotelling", t.hotelling},
                      {"avg_form", t.avg_form},
                      {"max_form", t.max_form},
                      {"ael_used", t.ael_used}});
  }
  json j = envelope("diagnose", config);
  j["proposition"] = diagnostics_json(diag);
  j["taylor"] = taylor;
  emit_json(j, out);
}

// ---------------------------------------------------------------------------
// two-stage
// ---------------------------------------------------------------------------

struct TwoStageArgs {
  std::string x, y, method = "melsis", header = "auto";
  std::optional<double> hard;
  std::optional<Index> size;
};

void run_two_stage(const TwoStageArgs& a, const OutputOptions& out) {
  elscreen::CsvOptions csv;
  csv.header = parse_header(a.header);
  const elscreen::Dataset data = elscreen::load_csv(a.x, a.y, csv);
  const elscreen::Method method = elscreen::parse_method(a.method);
  const Index s = a.size ? *a.size : elscreen::hard_threshold_size(data.n(), a.hard.value_or(1.0));
  const elscreen::TwoStageResult r = elscreen::two_stage(data, method, s, elscreen::resolve_threads(out.threads));

  if (out.format == "csv") {
    std::ostringstream os;
    os.precision(17);
    os << "response,predictor,coefficient\n";
    for (Index k = 0; k < r.fits.size(); ++k) {
      const auto& f = r.fits[k];
      os << data.response_names[k] << ",(intercept)," << f.intercept << '\n';
      for (Eigen::Index t = 0; t < f.refit.size(); ++t)
        if (f.refit[t] != 0.0) os << data.response_names[k] << ',' << data.predictor_names[r.screened[t]] << ',' << f.refit[t] << '\n';
    }
    write_text(os.str(), out.path);
    return;
  }
  json config{{"x", a.x}, {"y", a.y}, {"method", std::string(elscreen::to_string(method))}, {"size", s}};
  json j = envelope("two-stage", config);
  j["screen"] = elscreen::to_json(r.screen, data.predictor_names);
  json fits = json::object();
  for (Index k = 0; k < r.fits.size(); ++k)
    fits[data.response_names[k]] = elscreen::to_json(r.fits[k], r.screened, data.predictor_names);
  j["fits"] = fits;
  j["note"] = "coefficients are on the standardized predictor scale";
  emit_json(j, out);
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  ScenarioArgs scenario;
  std::uint64_t seed = 1;
  std::string x_out, y_out;
};

void run_generate(const GenerateArgs& a, const OutputOptions& out) {
  const elscreen::SimulationScenario s = build_scenario(a.scenario, a.seed);
  const elscreen::Dataset d = elscreen::generate(s);
  elscreen::write_csv(a.x_out, d.X, d.predictor_names);
  elscreen::write_csv(a.y_out, d.Y, d.response_names);
  json j = envelope("generate", json{{"scenario", elscreen::to_json(s)}});
  j["active"] = elscreen::active_set_one_based(s);
  j["x"] = a.x_out;
  j["y"] = a.y_out;
  emit_json(j, out);
}

void add_output_options(CLI::App* cmd, OutputOptions& out, bool csv_allowed = true) {
  cmd->add_option("-o,--output", out.path, "Output path ('-' for stdout)");
  if (csv_allowed) cmd->add_option("--format", out.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--threads", out.threads, "Worker threads (0 = auto; ELSCREEN_THREADS overrides)");
}

void add_scenario_options(CLI::App* cmd, ScenarioArgs& s) {
  cmd->add_option("--model", s.model, "varied_q, ex41, ex42, ex43 (ex44), case1 (model6)")->required();
  cmd->add_option("--case", s.error_case, "Error case a or b");
  cmd->add_option("--rho", s.rho, "Error correlation");
  cmd->add_option("--n", s.n, "Sample size");
  cmd->add_option("--p", s.p, "Number of predictors");
  cmd->add_option("--q", s.q, "Number of responses (varied_q only)");
  cmd->add_flag("--clip-sigma", s.clip_sigma, "Clip heteroscedastic scale factors at 1e3");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-likelihood feature screening for multi-response regression"};
  app.set_version_flag("--version", std::string(elscreen::kVersion));
  app.require_subcommand(1);

  OutputOptions out;

  ScreenArgs screen_args;
  auto* screen = app.add_subcommand("screen", "Screen predictors of a CSV dataset");
  screen->add_option("--x", screen_args.x, "Predictor CSV")->required();
  screen->add_option("--y", screen_args.y, "Response CSV")->required();
  screen->add_option("--method", screen_args.method, "melsis, elsis_avg, elsis_max, cmelsis");
  auto* hard_opt = screen->add_option("--hard", screen_args.hard, "Hard rule: d = floor(c * floor(n / ln n))");
  auto* size_opt = screen->add_option("--size", screen_args.size, "Hard rule with explicit model size");
  auto* soft_opt = screen->add_option("--soft", screen_args.soft, "Soft rule quantile tau")->check(CLI::Range(0.0, 1.0));
  hard_opt->excludes(size_opt)->excludes(soft_opt);
  size_opt->excludes(soft_opt);
  screen->add_option("--seed", screen_args.seed, "Permutation seed for the soft rule");
  screen->add_option("--cond", screen_args.cond, "Conditioning set, 1-based comma list");
  screen->add_option("--slices", screen_args.slices, "SIR slices")->check(CLI::PositiveNumber);
  screen->add_option("--share", screen_args.share, "SIR cumulative eigenvalue share")->check(CLI::Range(0.0, 1.0));
  screen->add_flag("--full-span", screen_args.full_span, "Use all conditioning directions");
  screen->add_option("--header", screen_args.header, "CSV header: auto, yes, no");
  add_output_options(screen, out);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Seeded replications of a simulation scenario");
  add_scenario_options(sim, sim_args.scenario);
  sim->add_option("--methods", sim_args.methods, "Comma list of methods");
  sim->add_option("--cond", sim_args.cond, "Conditioning set for conditional methods, 1-based");
  sim->add_option("--d1", sim_args.d1, "First-stage size for two_step")->check(CLI::PositiveNumber);
  auto* sim_hard = sim->add_option("--hard", sim_args.hard, "Comma list of hard-rule constants c");
  auto* sim_sizes = sim->add_option("--sizes", sim_args.sizes, "Comma list of explicit model sizes");
  auto* sim_soft = sim->add_option("--soft", sim_args.soft, "Soft rule quantile tau")->check(CLI::Range(0.0, 1.0));
  sim_hard->excludes(sim_sizes)->excludes(sim_soft);
  sim_sizes->excludes(sim_soft);
  sim->add_option("--reps", sim_args.reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_args.seed, "Master seed");
  add_output_options(sim, out);

  ReplicateArgs rep_args;
  auto* rep = app.add_subcommand("replicate", "Run a preconfigured table");
  rep->add_option("table", rep_args.table, "table1..table6 or table8")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "table3", "table4", "table5", "table6", "table8"}));
  rep->add_option("--reps", rep_args.reps, "Replications")->check(CLI::PositiveNumber);
  rep->add_option("--seed", rep_args.seed, "Master seed");
  rep->add_option("--q", rep_args.q_values, "Response counts (table1)")->delimiter(',');
  add_output_options(rep, out);

  DiagnoseArgs diag_args;
  auto* diag = app.add_subcommand("diagnose", "Ranking-condition diagnostics and quadratic-form comparisons");
  diag->add_flag("--study", diag_args.study, "Run the simulated hidden-variable study");
  diag->add_option("--n", diag_args.n, "Sample size (--study)");
  diag->add_option("--p", diag_args.p, "Predictors (--study)");
  diag->add_option("--sims", diag_args.sims, "Simulations (--study)")->check(CLI::PositiveNumber);
  diag->add_option("--seed", diag_args.seed, "Master seed (--study)");
  diag->add_option("--x", diag_args.x, "Predictor CSV");
  diag->add_option("--y", diag_args.y, "Response CSV");
  diag->add_option("--active", diag_args.active, "Active set, 1-based comma list");
  diag->add_option("--cond", diag_args.cond, "Conditioning set, 1-based comma list");
  diag->add_option("--predictors", diag_args.predictors, "Predictors for the quadratic-form comparison");
  diag->add_option("--header", diag_args.header, "CSV header: auto, yes, no");
  add_output_options(diag, out, false);

  TwoStageArgs ts_args;
  auto* ts = app.add_subcommand("two-stage", "Screen, then lasso with BIC per response");
  ts->add_option("--x", ts_args.x, "Predictor CSV")->required();
  ts->add_option("--y", ts_args.y, "Response CSV")->required();
  ts->add_option("--method", ts_args.method, "melsis, elsis_avg, elsis_max");
  auto* ts_hard = ts->add_option("--hard", ts_args.hard, "Screening size constant c");
  ts_hard->excludes(ts->add_option("--size", ts_args.size, "Explicit screening size"));
  ts->add_option("--header", ts_args.header, "CSV header: auto, yes, no");
  add_output_options(ts, out);

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "Draw one dataset and export it as CSV");
  add_scenario_options(gen, gen_args.scenario);
  gen->add_option("--seed", gen_args.seed, "Scenario seed");
  gen->add_option("--x-out", gen_args.x_out, "Predictor CSV path")->required();
  gen->add_option("--y-out", gen_args.y_out, "Response CSV path")->required();
  add_output_options(gen, out, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*screen) run_screen(screen_args, out);
    else if (*sim) run_simulate(sim_args, out);
    else if (*rep) run_replicate(rep_args, out);
    else if (*diag) run_diagnose(diag_args, out);
    else if (*ts) run_two_stage(ts_args, out);
    else if (*gen) run_generate(gen_args, out);
  } catch (const elscreen::ParseError& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}, {"row", e.row()}, {"col", e.col()}}}}.dump()
              << '\n';
    return 2;
  } catch (const elscreen::Error& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "InternalError"}, {"message", e.what()}}}}.dump() << '\n';
    return 3;
  }
  return 0;
}
