#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gapcr/estimators.hpp"
#include "gapcr/rng.hpp"
#include "gapcr/sample.hpp"

namespace gapcr {

// Generator and study parameters.  alpha_j holds per-stage rates; stages
// past the end reuse the last entry (default 5/4 everywhere).
struct SimConfig {
  double theta = 1.0;               // across-stage dependence, >= 1
  std::vector<double> alpha_j = {1.25};
  double censor_upper = 10.0;       // C ~ Uniform(0, censor_upper)
  int n = 200;
  int reps = 500;
  int B = 100;
  std::vector<double> grid;         // empty: seven survival-quantile points
  int max_stage = 64;               // generation cap; terminal record still closes at C
  std::uint64_t seed = 0;
  int workers = 0;
  double alpha_level = 0.05;
  int num_causes = 2;

  double alpha_for_stage(int stage) const;
  std::vector<double> effective_grid() const;
  void validate() const;
};

struct TrueFunctionals {
  double f1 = 0.0, f2 = 0.0, s = 1.0, lambda1 = 0.0, lambda2 = 0.0;
};

// Closed forms of the generator's marginals:
// F1 = a^-1 (1 - e^{-a t}), F2 = (1 - a^-1)(1 - e^{-a t}), S = e^{-a t},
// Lambda1 = t, Lambda2 = (a - 1) t.
TrueFunctionals true_functionals(double alpha_j, double t);
double true_value(const SimConfig& cfg, const EstimandSpec& spec, double t);

// W ~ gamma(1/(theta-1), 1) for theta > 1; the theta = 1 independence
// limit is the degenerate W = 1.
double sample_frailty(double theta, Rng& rng);

// Conditional type-1 CIF given the frailty, its total mass, and its exact
// inverse x = (1 - ln(u)/w)^{1/(1-theta)}, t = -a^-1 ln(1 - a x).
double conditional_cif1(double t, double w, double alpha_j, double theta);
double conditional_cif1_mass(double w, double alpha_j, double theta);
double conditional_cif1_inv(double u, double w, double alpha_j, double theta);

SubjectRecord gen_subject(const SimConfig& cfg, Rng& rng,
                          const std::string& subject_id);

// Deterministic sample for repetition `rep` of the study seed.
Sample gen_sample(const SimConfig& cfg, std::uint64_t rep);

struct McSummaryRow {
  double t = 0.0;
  double truth = 0.0;
  double bias = 0.0;
  double ese = 0.0;
  double bse = 0.0;
  double cp = 0.0;
  int reps_used = 0;
  bool ese_defined = true;  // false when only one usable repetition
};

struct McTable {
  EstimandSpec target;
  std::vector<McSummaryRow> rows;
};

// One Test-1 statistic of the battery: the chosen functional compared
// between two stages.
struct StageTestSpec {
  CurveKind functional = CurveKind::Cif;
  SurvVariant variant = SurvVariant::ProductLimit;  // Surv / CumCsh plug-in
  int cause = 1;
  int stage_a = 2;
  int stage_b = 3;
  std::string label() const;
};

// The nine-statistic battery: CIF, the four survival variants, and the
// four cumulative-CSH plug-ins, stages 2 vs 3, cause 1.
std::vector<StageTestSpec> default_test_battery();

struct RejectionTable {
  std::vector<StageTestSpec> tests;
  std::vector<double> grid;
  // rates[test][grid point]
  std::vector<std::vector<double>> rates;
  std::vector<std::vector<int>> reps_used;
};

struct McStudyResult {
  SimConfig config;
  std::vector<McTable> tables;
  bool has_rejections = false;
  RejectionTable rejections;
  int failed_reps = 0;
  double wall_seconds = 0.0;
};

// Full Monte Carlo protocol: per repetition, generate a sample, evaluate
// every target on the grid, bootstrap B replicates for BSE and
// log-transformed 95% CI coverage against the analytic truth, and (when a
// battery is given) run the stage tests on the same replicates.
McStudyResult run_mc_study(const SimConfig& cfg,
                           const std::vector<EstimandSpec>& targets,
                           const std::vector<StageTestSpec>* battery = nullptr);

}  // namespace gapcr
