#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gapcr/estimators.hpp"
#include "gapcr/rng.hpp"
#include "gapcr/sample.hpp"

namespace gapcr {

enum class TestKind { Stage, Group, PrevType };
enum class CiTransform { Plain, Log };

const char* to_string(TestKind k);

struct BootstrapPlan {
  int B = 200;
  std::vector<double> grid;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = all hardware threads
  // Band interval [t1, t2]; when set, the point estimate's jump times
  // inside the interval are inserted into the evaluation grid so the sup
  // statistic over the grid is exact.
  std::optional<std::pair<double, double>> band_range;
};

// Point estimate and bootstrap replicate values on a common grid.
// Replicate values where the estimand was unidentifiable are flagged.
struct BootstrapRun {
  EstimandSpec target;
  std::vector<double> grid;
  std::vector<char> from_band_augmentation;  // grid point added for the band
  std::optional<std::pair<double, double>> band_range;  // after clipping
  std::vector<double> point;
  std::vector<char> point_ok;
  int B = 0;
  std::vector<double> rep_values;  // [b * grid.size() + i]
  std::vector<char> rep_ok;
};

struct BootstrapSummary {
  EstimandSpec target;
  std::vector<double> grid;
  std::vector<char> from_band_augmentation;
  std::vector<double> point;
  std::vector<double> se;
  std::vector<int> dropped;  // replicates excluded per grid point
  int B = 0;
  double alpha = 0.05;
  // Pointwise intervals.
  std::vector<double> ci_plain_lo, ci_plain_hi;
  std::vector<double> ci_log_lo, ci_log_hi;
  std::vector<char> ci_log_degenerate;  // point estimate was 0
  // Simultaneous band (only inside band_range).
  bool has_band = false;
  double v_quantile = 0.0;
  std::vector<double> band_plain_lo, band_plain_hi;
  std::vector<double> band_log_lo, band_log_hi;
  std::vector<char> in_band;        // grid point participates in the band
  std::vector<char> band_excluded;  // se == 0: excluded from the sup
};

struct TestResult {
  TestKind kind = TestKind::Stage;
  CurveKind functional = CurveKind::Cif;
  std::optional<SurvVariant> variant;  // Surv variant or CumCsh plug-in
  int stage = 0;
  int stage2 = 0;      // Stage test
  int cause = 0;
  int prev_cause = 0;  // PrevType test
  std::string group1, group2;
  double t = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  bool inconclusive = false;  // bootstrap SE was zero
  double alpha = 0.05;
  int B = 0;
  int dropped = 0;
};

// Draws n subjects uniformly with replacement; whole trajectories are
// copied intact so within-subject dependence is preserved.  Indices are
// drawn against the subject_id-sorted order, which makes results invariant
// to the input ordering of subjects.
Sample resample(const Sample& sample, Rng& rng);

// Steps 1-2 of the bootstrap: resample B times and evaluate the target on
// the grid (augmented for the band when requested).
BootstrapRun run_bootstrap(const Sample& sample, const EstimandSpec& target,
                           const BootstrapPlan& plan);

// Step 3: per-point sample standard deviation over identifiable
// replicates.  More than 50% unidentifiable replicates at a grid point is
// a hard error naming the point.
BootstrapSummary bootstrap_se(const BootstrapRun& run, double alpha);

// Convenience wrapper: run_bootstrap + bootstrap_se + both CI transforms
// (+ band when plan.band_range is set, using the same replicates).
BootstrapSummary bootstrap_summary(const Sample& sample,
                                   const EstimandSpec& target,
                                   const BootstrapPlan& plan);

// Fills the pointwise interval columns for one transform.
void ci_pointwise(BootstrapSummary& summary, double alpha, CiTransform transform);

// Fills the band columns from the replicate values; returns v_quantile.
double confidence_band(const BootstrapRun& run, BootstrapSummary& summary,
                       double alpha);

// Test 1: H0: E^(j)(t) = E^(j')(t) for the chosen functional, with joint
// resampling of whole trajectories.
TestResult test_stage(const Sample& sample, int stage, int stage2, int cause,
                      double t, CurveKind functional, SurvVariant variant,
                      const BootstrapPlan& plan);

// Test 2: H0: F_k^(j)(t|G1) = F_k^(j)(t|G2), resampling each group
// independently.
TestResult test_group(const Sample& group1, const Sample& group2, int stage,
                      int cause, double t, const BootstrapPlan& plan);

// Test 3: H0: F_{k|k}^(j)(t) = F_{k|l}^(j)(t), k != l.
TestResult test_prev_type(const Sample& sample, int stage, int cause,
                          int prev_cause, double t, const BootstrapPlan& plan);

}  // namespace gapcr
