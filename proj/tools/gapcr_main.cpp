#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gapcr/errors.hpp"
#include "gapcr/estimators.hpp"
#include "gapcr/inference.hpp"
#include "gapcr/sample.hpp"
#include "gapcr/simulation.hpp"
#include "gapcr/table_io.hpp"
#include "gapcr/version.hpp"

namespace fs = std::filesystem;
using namespace gapcr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;
constexpr int kExitUnidentifiable = 4;

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string field;
  while (std::getline(ss, field, ','))
    if (!field.empty()) out.push_back(parse_double(field, what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::pair<double, double> parse_range(const std::string& s, const std::string& what) {
  auto pos = s.find(':');
  if (pos == std::string::npos)
    throw ConfigError(what + ": expected t1:t2, got '" + s + "'");
  return {parse_double(s.substr(0, pos), what),
          parse_double(s.substr(pos + 1), what)};
}

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  throw ConfigError("format must be csv or json");
}

std::string ext(OutputFormat f) { return f == OutputFormat::Csv ? ".csv" : ".json"; }

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write output file '" + p.string() + "'");
  return out;
}

// "cif:2:1", "surv-pl:2", "csh-ipcw:3:1", "cond:2:1:2" -> EstimandSpec
EstimandSpec parse_target(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string field;
  while (std::getline(ss, field, ':')) parts.push_back(field);
  if (parts.empty()) throw ConfigError("empty target spec");
  EstimandSpec spec;
  std::string head = parts[0];
  auto need = [&](std::size_t n) {
    if (parts.size() != n + 1)
      throw ConfigError("target '" + s + "': expected " + std::to_string(n) +
                        " arguments after '" + head + "'");
  };
  if (head == "cif") {
    need(2);
    spec.kind = CurveKind::Cif;
    spec.stage = static_cast<int>(parse_double(parts[1], s));
    spec.cause = static_cast<int>(parse_double(parts[2], s));
    return spec;
  }
  if (head.rfind("surv-", 0) == 0) {
    need(1);
    auto v = surv_variant_from_string(head.substr(5));
    if (!v) throw ConfigError("target '" + s + "': unknown survival variant");
    spec.kind = CurveKind::Surv;
    spec.variant = *v;
    spec.stage = static_cast<int>(parse_double(parts[1], s));
    return spec;
  }
  if (head.rfind("csh-", 0) == 0) {
    need(2);
    auto v = surv_variant_from_string(head.substr(4));
    if (!v) throw ConfigError("target '" + s + "': unknown plug-in variant");
    spec.kind = CurveKind::CumCsh;
    spec.variant = *v;
    spec.stage = static_cast<int>(parse_double(parts[1], s));
    spec.cause = static_cast<int>(parse_double(parts[2], s));
    return spec;
  }
  if (head == "cond") {
    need(3);
    spec.kind = CurveKind::CondCif;
    spec.stage = static_cast<int>(parse_double(parts[1], s));
    spec.cause = static_cast<int>(parse_double(parts[2], s));
    spec.prev_cause = static_cast<int>(parse_double(parts[3], s));
    return spec;
  }
  throw ConfigError("unknown target spec '" + s + "'");
}

struct IoFlags {
  std::string input;
  std::string censor_file;
  SampleInputOptions opts;
  std::string delim = ",";
};

void add_io_flags(CLI::App* cmd, IoFlags& io) {
  cmd->add_option("--input", io.input, "events table (long format)")->required();
  cmd->add_option("--censor-file", io.censor_file,
                  "companion censor-time table; omit when cause-0 rows encode C");
  cmd->add_option("--id-col", io.opts.id_col, "subject id column name");
  cmd->add_option("--stage-col", io.opts.stage_col, "stage column name");
  cmd->add_option("--gap-col", io.opts.gap_col, "gap time column name");
  cmd->add_option("--cause-col", io.opts.cause_col, "cause column name");
  cmd->add_option("--censor-col", io.opts.censor_col, "censor time column name");
  cmd->add_option("--group-col", io.opts.group_col, "group label column name");
  cmd->add_option("--delim", io.delim, "field delimiter (default ,)");
  cmd->add_option("--num-causes", io.opts.num_causes, "number of causes K");
}

Sample load_from(IoFlags& io) {
  if (io.delim.size() != 1) throw ConfigError("--delim must be one character");
  io.opts.delimiter = io.delim[0];
  std::optional<std::string> censor;
  if (!io.censor_file.empty()) censor = io.censor_file;
  return load_sample(io.input, censor, io.opts);
}

// Pooled uncensored gap-time deciles over the requested stages, the
// model-free default grid.
std::vector<double> default_grid(const Sample& sample, const std::set<int>& stages) {
  std::vector<double> gaps;
  for (const auto& s : sample.subjects())
    for (const auto& r : s.records)
      if (r.cause != 0 && stages.count(r.stage)) gaps.push_back(r.gap_time);
  if (gaps.empty()) throw UnidentifiableError("no uncensored gaps for the default grid");
  std::sort(gaps.begin(), gaps.end());
  std::vector<double> grid;
  for (int d = 1; d <= 9; ++d) {
    std::size_t idx = static_cast<std::size_t>(
        (static_cast<double>(gaps.size()) * d) / 10.0);
    if (idx >= gaps.size()) idx = gaps.size() - 1;
    grid.push_back(gaps[idx]);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

int cmd_estimate(IoFlags& io, const std::vector<int>& stages,
                 const std::vector<int>& causes,
                 const std::vector<std::string>& variants,
                 const std::string& csh_plugin, int prev_cause,
                 const std::string& grid_str, int bootstrap, double alpha,
                 const std::string& band_str, std::uint64_t seed, int workers,
                 const std::string& out_dir, const std::string& format_str) {
  const OutputFormat format = parse_format(format_str);
  Sample sample = load_from(io);

  // Cross product of requested stages/causes and variants.
  std::vector<EstimandSpec> targets;
  auto plugin = surv_variant_from_string(csh_plugin);
  if (!plugin) throw ConfigError("--csh-plugin must be sum, ipcw, pl, or unc");
  for (const std::string& v : variants) {
    for (int j : stages) {
      if (v == "cif") {
        for (int k : causes) targets.push_back({CurveKind::Cif, j, k, *plugin, 0});
      } else if (v == "csh") {
        for (int k : causes)
          targets.push_back({CurveKind::CumCsh, j, k, *plugin, 0});
      } else if (v == "cond") {
        if (prev_cause < 1)
          throw ConfigError("--variant cond requires --prev-cause");
        for (int k : causes)
          targets.push_back({CurveKind::CondCif, j, k, *plugin, prev_cause});
      } else if (auto sv = surv_variant_from_string(v)) {
        targets.push_back({CurveKind::Surv, j, 0, *sv, 0});
      } else {
        throw ConfigError("--variant must be cif, sum, ipcw, pl, unc, csh, or cond");
      }
    }
  }
  if (targets.empty()) throw ConfigError("no targets requested");

  std::vector<double> user_grid;
  if (!grid_str.empty()) user_grid = parse_double_list(grid_str, "--grid");
  std::optional<std::pair<double, double>> band;
  if (!band_str.empty()) {
    if (bootstrap < 2) throw ConfigError("--band requires --bootstrap");
    band = parse_range(band_str, "--band");
  }

  StepCurve G = fit_censor_survival(sample);
  std::vector<EstimateCurve> curves;
  std::vector<BootstrapSummary> summaries;
  std::vector<std::string> failures;
  for (const auto& target : targets) {
    try {
      EstimateCurve curve = [&] {
        switch (target.kind) {
          case CurveKind::Cif:
            return estimate_cif(sample, target.stage, target.cause, G);
          case CurveKind::Surv:
            return estimate_surv(sample, target.stage, target.variant, G);
          case CurveKind::CumCsh: {
            StageEstimator est(sample, G, target.stage);
            return est.cum_csh(target.cause, target.variant);
          }
          case CurveKind::CondCif:
          default:
            return estimate_cond_cif(sample, target.stage, target.cause,
                                     target.prev_cause, G)
                .first;
        }
      }();
      if (bootstrap >= 2) {
        BootstrapPlan plan;
        plan.B = bootstrap;
        plan.alpha = alpha;
        plan.seed = seed;
        plan.workers = workers;
        plan.band_range = band;
        if (user_grid.empty()) {
          std::set<int> js{target.stage};
          plan.grid = default_grid(sample, js);
          // clip the model-free default grid to this target's range
          std::erase_if(plan.grid, [&](double t) { return curve.beyond_range(t); });
          if (plan.grid.empty())
            throw UnidentifiableError("default grid empty within the identifiable range");
        } else {
          plan.grid = user_grid;
        }
        summaries.push_back(bootstrap_summary(sample, target, plan));
      }
      curves.push_back(std::move(curve));
    } catch (const UnidentifiableError& e) {
      failures.push_back(target.label() + ": " + e.what());
    }
  }
  for (const auto& f : failures) std::cerr << "target " << f << "\n";
  if (curves.empty()) {
    std::cerr << "no estimable targets\n";
    return kExitUnidentifiable;
  }

  fs::path dir(out_dir);
  {
    auto out = open_out(dir, "curves" + ext(format));
    write_curve_table(out, curves, seed, format);
  }
  {
    auto out = open_out(dir, "targets.csv");
    out << "# gapcr " GAPCR_VERSION " seed=" << seed << "\n";
    out << "curve_id,stage,cause,variant,tau,truncated,truncated_at,all_censored\n";
    for (const auto& c : curves) {
      out << c.label() << "," << c.stage << ","
          << (c.cause ? std::to_string(*c.cause) : "") << ","
          << (c.variant ? to_string(*c.variant) : "") << ","
          << format_double(c.tau) << "," << (c.truncated ? "true" : "false")
          << "," << (c.truncated_at ? format_double(*c.truncated_at) : "")
          << "," << (c.all_censored ? "true" : "false") << "\n";
    }
  }
  if (!summaries.empty()) {
    auto out = open_out(dir, "summary" + ext(format));
    write_summary_table(out, summaries, seed, format);
  }
  return kExitOk;
}

int cmd_test(IoFlags& io, const std::string& kind, int stage, int stage2,
             int cause, int prev_cause, double at, const std::string& functional,
             const std::string& variant_str, const std::string& groups_str,
             int bootstrap, double alpha, std::uint64_t seed, int workers,
             const std::string& out_dir, const std::string& format_str) {
  const OutputFormat format = parse_format(format_str);
  Sample sample = load_from(io);

  BootstrapPlan plan;
  plan.B = bootstrap;
  plan.alpha = alpha;
  plan.seed = seed;
  plan.workers = workers;

  auto variant = surv_variant_from_string(variant_str);
  if (!variant) throw ConfigError("--variant must be sum, ipcw, pl, or unc");

  TestResult result;
  if (kind == "stage") {
    CurveKind f = CurveKind::Cif;
    if (functional == "cif") f = CurveKind::Cif;
    else if (functional == "surv") f = CurveKind::Surv;
    else if (functional == "csh") f = CurveKind::CumCsh;
    else throw ConfigError("--functional must be cif, surv, or csh");
    if (stage2 < 1) throw ConfigError("stage test requires --stage2");
    result = test_stage(sample, stage, stage2, cause, at, f, *variant, plan);
  } else if (kind == "group") {
    if (io.opts.group_col.empty())
      throw ConfigError("group test requires --group-col");
    std::string g1, g2;
    if (!groups_str.empty()) {
      auto pos = groups_str.find(':');
      if (pos == std::string::npos)
        throw ConfigError("--groups expects LABEL1:LABEL2");
      g1 = groups_str.substr(0, pos);
      g2 = groups_str.substr(pos + 1);
    } else {
      auto labels = sample.group_labels();
      if (labels.size() != 2)
        throw ConfigError("group column has " + std::to_string(labels.size()) +
                          " distinct labels; pick two with --groups");
      g1 = labels[0];
      g2 = labels[1];
    }
    Sample s1 = sample.group_subset(g1);
    Sample s2 = sample.group_subset(g2);
    result = test_group(s1, s2, stage, cause, at, plan);
    result.group1 = g1;
    result.group2 = g2;
  } else if (kind == "prevtype") {
    if (prev_cause < 1) throw ConfigError("prevtype test requires --prev-cause");
    result = test_prev_type(sample, stage, cause, prev_cause, at, plan);
  } else {
    throw ConfigError("--test must be stage, group, or prevtype");
  }

  auto out = open_out(fs::path(out_dir), "tests" + ext(format));
  write_tests_table(out, {result}, seed, format);
  return kExitOk;
}

void apply_config_file(const std::string& path, SimConfig& cfg,
                       std::string& targets_str, bool& with_tests) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto pos = line.find('=');
    if (pos == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    std::string key = line.substr(0, pos);
    std::string value = line.substr(pos + 1);
    const std::string where = "config key " + key;
    if (key == "theta") cfg.theta = parse_double(value, where);
    else if (key == "alpha") cfg.alpha_j = parse_double_list(value, where);
    else if (key == "censor_upper") cfg.censor_upper = parse_double(value, where);
    else if (key == "n") cfg.n = static_cast<int>(parse_double(value, where));
    else if (key == "reps") cfg.reps = static_cast<int>(parse_double(value, where));
    else if (key == "B") cfg.B = static_cast<int>(parse_double(value, where));
    else if (key == "grid") cfg.grid = parse_double_list(value, where);
    else if (key == "max_stage") cfg.max_stage = static_cast<int>(parse_double(value, where));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_double(value, where));
    else if (key == "workers") cfg.workers = static_cast<int>(parse_double(value, where));
    else if (key == "alpha_level") cfg.alpha_level = parse_double(value, where);
    else if (key == "targets") targets_str = value;
    else if (key == "tests") with_tests = value == "true" || value == "1";
    else throw ConfigError("config line " + std::to_string(line_no) +
                           ": unknown key '" + key + "'");
  }
}

int cmd_simulate(const SimConfig& cfg, const std::string& targets_str,
                 bool with_tests, const std::string& out_dir,
                 const std::string& format_str) {
  const OutputFormat format = parse_format(format_str);
  cfg.validate();

  std::vector<EstimandSpec> targets;
  if (targets_str.empty()) {
    targets = {{CurveKind::Cif, 2, 1, SurvVariant::ProductLimit, 0},
               {CurveKind::Cif, 3, 1, SurvVariant::ProductLimit, 0},
               {CurveKind::Surv, 2, 0, SurvVariant::ProductLimit, 0},
               {CurveKind::Surv, 3, 0, SurvVariant::ProductLimit, 0},
               {CurveKind::CumCsh, 2, 1, SurvVariant::ProductLimit, 0},
               {CurveKind::CumCsh, 3, 1, SurvVariant::ProductLimit, 0}};
  } else {
    std::stringstream ss(targets_str);
    std::string field;
    while (std::getline(ss, field, ','))
      if (!field.empty()) targets.push_back(parse_target(field));
  }

  std::vector<StageTestSpec> battery = default_test_battery();
  McStudyResult result =
      run_mc_study(cfg, targets, with_tests ? &battery : nullptr);

  fs::path dir(out_dir);
  {
    auto out = open_out(dir, "mc_summary" + ext(format));
    write_mc_summary(out, result, format);
  }
  if (result.has_rejections) {
    auto out = open_out(dir, "rejection" + ext(format));
    write_mc_rejections(out, result, format);
  }
  {
    auto out = open_out(dir, "manifest.json");
    write_mc_manifest(out, result);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonparametric marginal analysis of recurrent-events gap times "
               "under competing risks"};
  app.set_version_flag("--version", GAPCR_VERSION);
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate marginal curves with "
                                             "bootstrap intervals");
  IoFlags est_io;
  add_io_flags(est, est_io);
  std::vector<int> stages{1};
  std::vector<int> causes{1};
  std::vector<std::string> variants{"cif"};
  std::string csh_plugin = "pl";
  int est_prev_cause = 0;
  std::string grid_str, band_str;
  int est_bootstrap = 0;
  double est_alpha = 0.05;
  std::uint64_t est_seed = 0;
  int est_workers = 0;
  std::string est_out = ".";
  std::string est_format = "csv";
  est->add_option("--stage", stages, "stage(s) j")->delimiter(',');
  est->add_option("--cause", causes, "cause(s) k")->delimiter(',');
  est->add_option("--variant", variants,
                  "cif | sum | ipcw | pl | unc | csh | cond")->delimiter(',');
  est->add_option("--csh-plugin", csh_plugin, "survival plug-in for csh");
  est->add_option("--prev-cause", est_prev_cause, "previous cause l (cond)");
  est->add_option("--grid", grid_str, "evaluation times t1,t2,...");
  est->add_option("--bootstrap", est_bootstrap, "bootstrap replicates B");
  est->add_option("--alpha", est_alpha, "significance level");
  est->add_option("--band", band_str, "simultaneous band range t1:t2");
  est->add_option("--seed", est_seed, "RNG seed");
  est->add_option("--workers", est_workers, "worker threads (0 = all)");
  est->add_option("--out", est_out, "output directory");
  est->add_option("--format", est_format, "csv | json");

  // test
  auto* tst = app.add_subcommand("test", "bootstrap hypothesis tests");
  IoFlags tst_io;
  add_io_flags(tst, tst_io);
  std::string tst_kind;
  int tst_stage = 1, tst_stage2 = 0, tst_cause = 1, tst_prev_cause = 0;
  double tst_at = 0.0;
  std::string tst_functional = "cif", tst_variant = "pl", tst_groups;
  int tst_bootstrap = 1000;
  double tst_alpha = 0.05;
  std::uint64_t tst_seed = 0;
  int tst_workers = 0;
  std::string tst_out = ".";
  std::string tst_format = "csv";
  tst->add_option("--test", tst_kind, "stage | group | prevtype")->required();
  tst->add_option("--stage", tst_stage, "stage j");
  tst->add_option("--stage2", tst_stage2, "second stage j' (stage test)");
  tst->add_option("--cause", tst_cause, "cause k");
  tst->add_option("--prev-cause", tst_prev_cause, "previous cause l");
  tst->add_option("--at", tst_at, "evaluation time t")->required();
  tst->add_option("--functional", tst_functional, "cif | surv | csh (stage test)");
  tst->add_option("--variant", tst_variant, "survival variant / csh plug-in");
  tst->add_option("--groups", tst_groups, "group labels LABEL1:LABEL2");
  tst->add_option("--bootstrap", tst_bootstrap, "bootstrap replicates B");
  tst->add_option("--alpha", tst_alpha, "significance level");
  tst->add_option("--seed", tst_seed, "RNG seed");
  tst->add_option("--workers", tst_workers, "worker threads (0 = all)");
  tst->add_option("--out", tst_out, "output directory");
  tst->add_option("--format", tst_format, "csv | json");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run the Monte Carlo study");
  SimConfig cfg;
  std::string sim_config_file, sim_targets, sim_grid;
  std::string sim_alpha_rates;
  bool sim_tests = false;
  std::string sim_out = ".";
  std::string sim_format = "csv";
  sim->add_option("--config", sim_config_file, "key=value config file");
  auto* o_theta = sim->add_option("--theta", cfg.theta, "dependence parameter (>= 1)");
  auto* o_alpha_rates = sim->add_option("--alpha-rate", sim_alpha_rates,
                                        "per-stage rates a1[,a2,...]");
  auto* o_censor = sim->add_option("--censor-upper", cfg.censor_upper,
                                   "C ~ Uniform(0, bound)");
  auto* o_n = sim->add_option("--n", cfg.n, "sample size");
  auto* o_reps = sim->add_option("--reps", cfg.reps, "Monte Carlo replications");
  auto* o_B = sim->add_option("--bootstrap", cfg.B, "bootstrap replicates B");
  auto* o_grid = sim->add_option("--grid", sim_grid, "evaluation times t1,t2,...");
  auto* o_max_stage = sim->add_option("--max-stage", cfg.max_stage, "generation cap");
  auto* o_seed = sim->add_option("--seed", cfg.seed, "RNG seed");
  auto* o_workers = sim->add_option("--workers", cfg.workers, "worker threads (0 = all)");
  auto* o_alpha_level = sim->add_option("--alpha", cfg.alpha_level, "CI/test level");
  auto* o_targets = sim->add_option("--targets", sim_targets,
                                    "targets, e.g. cif:2:1,surv-pl:3,csh-pl:2:1");
  sim->add_flag("--tests", sim_tests, "also run the stage-test battery");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--format", sim_format, "csv | json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) {
      return cmd_estimate(est_io, stages, causes, variants, csh_plugin,
                          est_prev_cause, grid_str, est_bootstrap, est_alpha,
                          band_str, est_seed, est_workers, est_out, est_format);
    }
    if (tst->parsed()) {
      return cmd_test(tst_io, tst_kind, tst_stage, tst_stage2, tst_cause,
                      tst_prev_cause, tst_at, tst_functional, tst_variant,
                      tst_groups, tst_bootstrap, tst_alpha, tst_seed,
                      tst_workers, tst_out, tst_format);
    }
    if (sim->parsed()) {
      SimConfig run_cfg;  // config file first, explicit flags override
      std::string targets = sim_targets;
      bool with_tests = sim_tests;
      if (!sim_config_file.empty())
        apply_config_file(sim_config_file, run_cfg, targets, with_tests);
      if (o_theta->count()) run_cfg.theta = cfg.theta;
      if (o_alpha_rates->count())
        run_cfg.alpha_j = parse_double_list(sim_alpha_rates, "--alpha-rate");
      if (o_censor->count()) run_cfg.censor_upper = cfg.censor_upper;
      if (o_n->count()) run_cfg.n = cfg.n;
      if (o_reps->count()) run_cfg.reps = cfg.reps;
      if (o_B->count()) run_cfg.B = cfg.B;
      if (o_grid->count()) run_cfg.grid = parse_double_list(sim_grid, "--grid");
      if (o_max_stage->count()) run_cfg.max_stage = cfg.max_stage;
      if (o_seed->count()) run_cfg.seed = cfg.seed;
      if (o_workers->count()) run_cfg.workers = cfg.workers;
      if (o_alpha_level->count()) run_cfg.alpha_level = cfg.alpha_level;
      if (o_targets->count()) targets = sim_targets;
      return cmd_simulate(run_cfg, targets, with_tests, sim_out, sim_format);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const UnidentifiableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnidentifiable;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
