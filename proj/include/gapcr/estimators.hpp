#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gapcr/sample.hpp"
#include "gapcr/step_curve.hpp"

namespace gapcr {

// Survival-function estimator variants: the CIF-complement sum, the
// direct IPCW form, the weighted product-limit form, and the
// uncensored-records-only form.
enum class SurvVariant { Sum, Ipcw, ProductLimit, Uncensored };

enum class CurveKind { Cif, Surv, CumCsh, CondCif };

const char* to_string(SurvVariant v);
const char* to_string(CurveKind k);
std::optional<SurvVariant> surv_variant_from_string(const std::string& name);

// A StepCurve tagged with what it estimates.  Curves are total functions:
// evaluation past tau (or past a cumulative-hazard truncation point)
// returns the last value; beyond_range() reports that the value is outside
// the identifiable range.
struct EstimateCurve {
  StepCurve curve;
  CurveKind kind = CurveKind::Cif;
  int stage = 0;
  std::optional<int> cause;
  std::optional<SurvVariant> variant;
  double tau = 0.0;
  std::optional<int> prev_cause;
  bool truncated = false;  // CumCsh only: S(u-) <= 0 reached
  std::optional<double> truncated_at;
  bool all_censored = false;  // Uncensored variant with empty numerator

  double value(double t) const { return curve.value(t); }
  double left_value(double t) const { return curve.left_value(t); }
  bool beyond_range(double t) const {
    if (t > tau) return true;
    return truncated && truncated_at && t >= *truncated_at;
  }
  std::string label() const;
};

// pi_l^(j-1) estimated as F_l^(j-1)(t_max), with t_max the largest
// observed type-l gap at stage j-1.
struct PrevTypeMass {
  int stage = 0;
  int cause = 0;
  double mass = 0.0;
  double t_max = 0.0;
};

namespace detail {

struct StageObs {
  double gap = 0.0;
  double prev_cum = 0.0;
  double cum = 0.0;
  int cause = 0;
  int prev_cause = 0;  // 0 at stage 1
};

// Records at one stage; n_total stays the full sample size (subjects
// without a stage-j record contribute zero terms but count in n).
struct StageData {
  int n_total = 0;
  int stage = 0;
  std::vector<StageObs> obs;
};

StageData collect_stage(const Sample& sample, int stage);

}  // namespace detail

// Marginal type-k cumulative incidence of the stage-j gap time:
// F_k^(j)(t) = n^-1 sum_i I(T_ij <= t, cause k) / G(Y_ij).
EstimateCurve estimate_cif(const Sample& sample, int stage, int cause,
                           const StepCurve& G);

// S^(j) as 1 - sum_k F_k^(j), floored at 0 unless floor_at_zero is false.
EstimateCurve estimate_surv_sum(const Sample& sample, int stage,
                                const StepCurve& G, bool floor_at_zero = true);

// S^(j)(t) = n^-1 sum_i I(T_ij > t) / G(Y_{i(j-1)} + t); returned raw (may
// exceed 1 or be locally non-monotone in finite samples).
EstimateCurve estimate_surv_ipcw(const Sample& sample, int stage,
                                 const StepCurve& G);

// Product-limit form over the weighted cumulative conditional hazard.
EstimateCurve estimate_surv_pl(const Sample& sample, int stage,
                               const StepCurve& G);

// Uncensored-records-only form: n^-1 sum_i I(T_ij > t, cause != 0) / G(Y_ij).
EstimateCurve estimate_surv_uncensored(const Sample& sample, int stage,
                                       const StepCurve& G);

EstimateCurve estimate_surv(const Sample& sample, int stage, SurvVariant v,
                            const StepCurve& G);

// Plug-in cumulative cause-specific hazard: sums dF/S(u-) over the CIF's
// jump points.  Truncates with a flag at the first u with S(u-) <= 0.
EstimateCurve estimate_cum_csh(const EstimateCurve& cif,
                               const EstimateCurve& surv);

// Conditional CIF given the previous failure type (stage >= 2):
// F_{k|l}^(j)(t) = F_{k,l}^(j)(t) / pi_l^(j-1).
std::pair<EstimateCurve, PrevTypeMass> estimate_cond_cif(const Sample& sample,
                                                         int stage, int cause,
                                                         int prev_cause,
                                                         const StepCurve& G);

// Descriptor for one estimand; used by the bootstrap, the Monte Carlo
// study, and the CLI.
struct EstimandSpec {
  CurveKind kind = CurveKind::Cif;
  int stage = 1;
  int cause = 1;                                    // Cif, CumCsh, CondCif
  SurvVariant variant = SurvVariant::ProductLimit;  // Surv; plug-in for CumCsh
  int prev_cause = 0;                               // CondCif
  std::string label() const;
};

// Values of one estimand on a grid, plus per-point identifiability (a
// point is not ok past tau or past a truncation).
struct GridEval {
  std::vector<double> values;
  std::vector<char> ok;
};

// Per-(sample, stage) estimator workspace.  Curves are built lazily and
// cached.  t_cap limits how far curves are materialized; evaluation is
// exact only at t <= t_cap (callers that cap must not look past it).
class StageEstimator {
public:
  StageEstimator(const Sample& sample, const StepCurve& G, int stage,
                 double t_cap = std::numeric_limits<double>::infinity());

  const detail::StageData& data() const { return data_; }
  double tau_any() const { return tau_any_; }
  double tau_cause(int cause) const;  // throws when unidentifiable

  const EstimateCurve& cif(int cause);
  const EstimateCurve& surv(SurvVariant v);
  EstimateCurve cum_csh(int cause, SurvVariant plugin);

private:
  void build_sweep();  // materializes Ipcw and ProductLimit together

  const Sample& sample_;
  const StepCurve& G_;
  int stage_;
  double t_cap_;
  detail::StageData data_;
  double tau_any_ = -1.0;
  std::map<int, EstimateCurve> cifs_;
  std::map<SurvVariant, EstimateCurve> survs_;
  bool sweep_done_ = false;
};

// Evaluates one estimand at the given points.  Throws when the estimand is
// not identifiable at all; per-point flags mark values beyond tau.
GridEval evaluate_on_grid(const Sample& sample, const StepCurve& G,
                          const EstimandSpec& spec,
                          std::span<const double> grid);

// Computes G once and shares StageEstimators across estimands of one
// sample; the workhorse behind bootstrap replicates and the Monte Carlo
// runner.  Grid points must not exceed t_cap.
class SampleEvaluator {
public:
  explicit SampleEvaluator(
      const Sample& sample,
      double t_cap = std::numeric_limits<double>::infinity());

  GridEval eval(const EstimandSpec& spec, std::span<const double> grid);
  const StepCurve& censor_survival() const { return G_; }
  StageEstimator& stage(int j);

private:
  const Sample* sample_;
  double t_cap_;
  StepCurve G_;
  std::map<int, std::unique_ptr<StageEstimator>> stages_;
};

}  // namespace gapcr
