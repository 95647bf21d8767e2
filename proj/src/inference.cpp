#include "gapcr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gapcr/errors.hpp"
#include "gapcr/parallel.hpp"
#include "gapcr/stats.hpp"

namespace gapcr {

const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::Stage: return "stage";
    case TestKind::Group: return "group";
    case TestKind::PrevType: return "prevtype";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kBootTag = 0xb007;
constexpr std::uint64_t kGroup1Tag = 0x6701;
constexpr std::uint64_t kGroup2Tag = 0x6702;

std::vector<int> sorted_subject_order(const Sample& sample) {
  std::vector<int> order(static_cast<std::size_t>(sample.n()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& sa = sample.subjects()[static_cast<std::size_t>(a)];
    const auto& sb = sample.subjects()[static_cast<std::size_t>(b)];
    if (sa.subject_id != sb.subject_id) return sa.subject_id < sb.subject_id;
    return a < b;
  });
  return order;
}

Sample resample_with_order(const Sample& sample, const std::vector<int>& order,
                           Rng& rng) {
  const int n = sample.n();
  Sample out(sample.num_causes());
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::uint64_t pick = rng.below(static_cast<std::uint64_t>(n));
    out.add(sample.subjects()[static_cast<std::size_t>(
        order[static_cast<std::size_t>(pick)])]);
  }
  return out;
}

void validate_plan(const BootstrapPlan& plan) {
  if (plan.B < 2) throw ConfigError("bootstrap replicate count B must be >= 2");
  if (!(plan.alpha > 0.0) || !(plan.alpha < 1.0))
    throw ConfigError("alpha must be in (0, 1)");
}

// Point-estimate curve for one estimand (for jump locations and tau).
EstimateCurve point_curve(const Sample& sample, const StepCurve& G,
                          const EstimandSpec& spec) {
  switch (spec.kind) {
    case CurveKind::Cif:
      return estimate_cif(sample, spec.stage, spec.cause, G);
    case CurveKind::Surv:
      return estimate_surv(sample, spec.stage, spec.variant, G);
    case CurveKind::CumCsh: {
      StageEstimator est(sample, G, spec.stage);
      return est.cum_csh(spec.cause, spec.variant);
    }
    case CurveKind::CondCif:
      return estimate_cond_cif(sample, spec.stage, spec.cause, spec.prev_cause, G)
          .first;
  }
  throw ConfigError("unknown estimand kind");
}

std::string fmt_t(double t) { return std::to_string(t); }

}  // namespace

Sample resample(const Sample& sample, Rng& rng) {
  if (sample.n() < 1) throw ConfigError("cannot resample an empty sample");
  return resample_with_order(sample, sorted_subject_order(sample), rng);
}

BootstrapRun run_bootstrap(const Sample& sample, const EstimandSpec& target,
                           const BootstrapPlan& plan) {
  validate_plan(plan);
  if (plan.grid.empty()) throw ConfigError("bootstrap grid is empty");

  BootstrapRun run;
  run.target = target;
  run.B = plan.B;

  StepCurve G = fit_censor_survival(sample);
  EstimateCurve point = point_curve(sample, G, target);

  // Assemble the evaluation grid; band requests pull in the point
  // estimate's jump locations so the sup over the grid is exact.
  std::vector<std::pair<double, char>> pts;
  for (double t : plan.grid) pts.emplace_back(t, 0);
  if (plan.band_range) {
    double t1 = plan.band_range->first;
    double t2 = plan.band_range->second;
    if (!(t1 <= t2)) throw ConfigError("band range must satisfy t1 <= t2");
    if (t1 > point.tau)
      throw UnidentifiableError("band range starts beyond the identifiable range");
    t2 = std::min(t2, point.tau);  // clip to the identifiable range
    run.band_range = {t1, t2};
    pts.emplace_back(t1, 1);
    pts.emplace_back(t2, 1);
    for (double u : point.curve.jump_times())
      if (u >= t1 && u <= t2) pts.emplace_back(u, 1);
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && pts[i].first == run.grid.back()) {
      // keep the user-point marking when duplicated
      if (!pts[i].second) run.from_band_augmentation.back() = 0;
      continue;
    }
    run.grid.push_back(pts[i].first);
    run.from_band_augmentation.push_back(pts[i].second);
  }

  const std::size_t m = run.grid.size();
  run.point.resize(m);
  run.point_ok.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    run.point[i] = point.value(run.grid[i]);
    run.point_ok[i] = point.beyond_range(run.grid[i]) ? 0 : 1;
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!run.point_ok[i] && !run.from_band_augmentation[i])
      throw UnidentifiableError(
          "target not estimable on the original sample at t=" +
          fmt_t(run.grid[i]));

  const double t_cap = run.grid.back();
  const std::vector<int> order = sorted_subject_order(sample);
  run.rep_values.assign(static_cast<std::size_t>(plan.B) * m, 0.0);
  run.rep_ok.assign(static_cast<std::size_t>(plan.B) * m, 0);

  parallel_for(plan.B, plan.workers, [&](int b) {
    Rng rng(stream_seed(plan.seed, kBootTag, static_cast<std::uint64_t>(b)));
    Sample rs = resample_with_order(sample, order, rng);
    const std::size_t base = static_cast<std::size_t>(b) * m;
    try {
      SampleEvaluator ev(rs, t_cap);
      GridEval ge = ev.eval(target, run.grid);
      for (std::size_t i = 0; i < m; ++i) {
        run.rep_values[base + i] = ge.values[i];
        run.rep_ok[base + i] = ge.ok[i];
      }
    } catch (const UnidentifiableError&) {
      // whole replicate unidentifiable; all points stay flagged
    }
  });
  return run;
}

BootstrapSummary bootstrap_se(const BootstrapRun& run, double alpha) {
  BootstrapSummary s;
  s.target = run.target;
  s.grid = run.grid;
  s.from_band_augmentation = run.from_band_augmentation;
  s.point = run.point;
  s.B = run.B;
  s.alpha = alpha;
  const std::size_t m = run.grid.size();
  s.se.resize(m, 0.0);
  s.dropped.resize(m, 0);
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(run.B));
  for (std::size_t i = 0; i < m; ++i) {
    vals.clear();
    for (int b = 0; b < run.B; ++b) {
      const std::size_t idx = static_cast<std::size_t>(b) * m + i;
      if (run.rep_ok[idx]) vals.push_back(run.rep_values[idx]);
    }
    s.dropped[i] = run.B - static_cast<int>(vals.size());
    if (run.point_ok[i] && 2 * s.dropped[i] > run.B)
      throw UnidentifiableError(
          "more than 50% of bootstrap replicates unidentifiable at t=" +
          fmt_t(run.grid[i]));
    s.se[i] = sample_sd(vals);
  }
  return s;
}

void ci_pointwise(BootstrapSummary& s, double alpha, CiTransform transform) {
  const double z = z_alpha_half(alpha);
  const std::size_t m = s.grid.size();
  if (transform == CiTransform::Plain) {
    s.ci_plain_lo.resize(m);
    s.ci_plain_hi.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      s.ci_plain_lo[i] = s.point[i] - z * s.se[i];
      s.ci_plain_hi[i] = s.point[i] + z * s.se[i];
    }
  } else {
    s.ci_log_lo.resize(m);
    s.ci_log_hi.resize(m);
    s.ci_log_degenerate.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      if (s.point[i] > 0.0) {
        const double shift = std::exp(z * s.se[i] / s.point[i]);
        s.ci_log_lo[i] = s.point[i] / shift;
        s.ci_log_hi[i] = s.point[i] * shift;
      } else {
        s.ci_log_lo[i] = 0.0;
        s.ci_log_hi[i] = 0.0;
        s.ci_log_degenerate[i] = 1;
      }
    }
  }
}

double confidence_band(const BootstrapRun& run, BootstrapSummary& s,
                       double alpha) {
  const std::size_t m = run.grid.size();
  s.in_band.assign(m, 0);
  s.band_excluded.assign(m, 0);
  // The sup runs over grid points inside the band interval; a missing
  // interval means the whole grid.
  bool any = false;
  for (std::size_t i = 0; i < m; ++i) {
    s.in_band[i] = !run.band_range || (run.grid[i] >= run.band_range->first &&
                                       run.grid[i] <= run.band_range->second);
    if (s.se[i] <= 0.0) s.band_excluded[i] = 1;
    any = any || (s.in_band[i] && !s.band_excluded[i]);
  }
  if (!any) throw UnidentifiableError("no usable grid points for the band");

  std::vector<double> sups;
  sups.reserve(static_cast<std::size_t>(run.B));
  for (int b = 0; b < run.B; ++b) {
    double sup = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!s.in_band[i] || s.band_excluded[i]) continue;
      const std::size_t idx = static_cast<std::size_t>(b) * m + i;
      if (!run.rep_ok[idx]) continue;
      sup = std::max(sup,
                     std::abs(run.rep_values[idx] - run.point[i]) / s.se[i]);
    }
    if (sup >= 0.0) sups.push_back(sup);
  }
  if (sups.empty()) throw UnidentifiableError("all band replicates dropped");
  const double v = quantile_inf(std::move(sups), 1.0 - alpha);

  s.has_band = true;
  s.v_quantile = v;
  s.band_plain_lo.resize(m);
  s.band_plain_hi.resize(m);
  s.band_log_lo.resize(m);
  s.band_log_hi.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    s.band_plain_lo[i] = s.point[i] - v * s.se[i];
    s.band_plain_hi[i] = s.point[i] + v * s.se[i];
    if (s.point[i] > 0.0) {
      const double shift = std::exp(v * s.se[i] / s.point[i]);
      s.band_log_lo[i] = s.point[i] / shift;
      s.band_log_hi[i] = s.point[i] * shift;
    } else {
      s.band_log_lo[i] = 0.0;
      s.band_log_hi[i] = 0.0;
    }
  }
  return v;
}

BootstrapSummary bootstrap_summary(const Sample& sample,
                                   const EstimandSpec& target,
                                   const BootstrapPlan& plan) {
  BootstrapRun run = run_bootstrap(sample, target, plan);
  BootstrapSummary s = bootstrap_se(run, plan.alpha);
  ci_pointwise(s, plan.alpha, CiTransform::Plain);
  ci_pointwise(s, plan.alpha, CiTransform::Log);
  if (plan.band_range) confidence_band(run, s, plan.alpha);
  return s;
}

namespace {

// Shared engine for the three tests: |A - B| / sd(A*b - B*b).
TestResult difference_test(const Sample& sample, const EstimandSpec& a,
                           const EstimandSpec& b, double t,
                           const BootstrapPlan& plan) {
  validate_plan(plan);
  const double grid[1] = {t};

  SampleEvaluator point_ev(sample);
  GridEval pa = point_ev.eval(a, grid);
  GridEval pb = point_ev.eval(b, grid);
  if (!pa.ok[0])
    throw UnidentifiableError("functional " + a.label() +
                              " not estimable at t=" + fmt_t(t));
  if (!pb.ok[0])
    throw UnidentifiableError("functional " + b.label() +
                              " not estimable at t=" + fmt_t(t));
  const double point_diff = pa.values[0] - pb.values[0];

  const std::vector<int> order = sorted_subject_order(sample);
  std::vector<double> diffs(static_cast<std::size_t>(plan.B), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(plan.B), 0);
  parallel_for(plan.B, plan.workers, [&](int bi) {
    Rng rng(stream_seed(plan.seed, kBootTag, static_cast<std::uint64_t>(bi)));
    Sample rs = resample_with_order(sample, order, rng);
    try {
      SampleEvaluator ev(rs, t);
      GridEval ra = ev.eval(a, grid);
      GridEval rb = ev.eval(b, grid);
      if (ra.ok[0] && rb.ok[0]) {
        diffs[static_cast<std::size_t>(bi)] = ra.values[0] - rb.values[0];
        ok[static_cast<std::size_t>(bi)] = 1;
      }
    } catch (const UnidentifiableError&) {
    }
  });

  std::vector<double> used;
  used.reserve(static_cast<std::size_t>(plan.B));
  for (int bi = 0; bi < plan.B; ++bi)
    if (ok[static_cast<std::size_t>(bi)])
      used.push_back(diffs[static_cast<std::size_t>(bi)]);
  const int dropped = plan.B - static_cast<int>(used.size());
  if (2 * dropped > plan.B)
    throw UnidentifiableError(
        "more than 50% of bootstrap replicates unidentifiable at t=" + fmt_t(t));

  TestResult r;
  r.t = t;
  r.alpha = plan.alpha;
  r.B = plan.B;
  r.dropped = dropped;
  const double sd = sample_sd(used);
  if (sd <= 0.0) {
    r.statistic = 0.0;
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    r.reject = false;
    r.inconclusive = true;
    return r;
  }
  r.statistic = std::abs(point_diff) / sd;
  r.p_value = two_sided_p(r.statistic);
  r.reject = r.statistic > z_alpha_half(plan.alpha);
  return r;
}

}  // namespace

TestResult test_stage(const Sample& sample, int stage, int stage2, int cause,
                      double t, CurveKind functional, SurvVariant variant,
                      const BootstrapPlan& plan) {
  if (stage == stage2)
    throw ConfigError("stage test requires two distinct stages");
  if (functional == CurveKind::CondCif)
    throw ConfigError("stage test supports cif, surv, or csh functionals");
  EstimandSpec a{functional, stage, cause, variant, 0};
  EstimandSpec b{functional, stage2, cause, variant, 0};
  TestResult r = difference_test(sample, a, b, t, plan);
  r.kind = TestKind::Stage;
  r.functional = functional;
  if (functional != CurveKind::Cif) r.variant = variant;
  r.stage = stage;
  r.stage2 = stage2;
  r.cause = functional == CurveKind::Surv ? 0 : cause;
  return r;
}

TestResult test_group(const Sample& group1, const Sample& group2, int stage,
                      int cause, double t, const BootstrapPlan& plan) {
  validate_plan(plan);
  if (group1.n() < 1 || group2.n() < 1)
    throw UnidentifiableError("group test requires two non-empty groups");
  EstimandSpec spec{CurveKind::Cif, stage, cause, SurvVariant::ProductLimit, 0};
  const double grid[1] = {t};

  SampleEvaluator ev1(group1), ev2(group2);
  GridEval p1 = ev1.eval(spec, grid);
  GridEval p2 = ev2.eval(spec, grid);
  if (!p1.ok[0] || !p2.ok[0])
    throw UnidentifiableError("CIF not estimable at t=" + fmt_t(t) +
                              " in one of the groups");
  const double point_diff = p1.values[0] - p2.values[0];

  const std::vector<int> order1 = sorted_subject_order(group1);
  const std::vector<int> order2 = sorted_subject_order(group2);
  std::vector<double> diffs(static_cast<std::size_t>(plan.B), 0.0);
  std::vector<char> ok(static_cast<std::size_t>(plan.B), 0);
  parallel_for(plan.B, plan.workers, [&](int bi) {
    Rng rng1(stream_seed(plan.seed, kGroup1Tag, static_cast<std::uint64_t>(bi)));
    Rng rng2(stream_seed(plan.seed, kGroup2Tag, static_cast<std::uint64_t>(bi)));
    Sample rs1 = resample_with_order(group1, order1, rng1);
    Sample rs2 = resample_with_order(group2, order2, rng2);
    try {
      SampleEvaluator e1(rs1, t), e2(rs2, t);
      GridEval r1 = e1.eval(spec, grid);
      GridEval r2 = e2.eval(spec, grid);
      if (r1.ok[0] && r2.ok[0]) {
        diffs[static_cast<std::size_t>(bi)] = r1.values[0] - r2.values[0];
        ok[static_cast<std::size_t>(bi)] = 1;
      }
    } catch (const UnidentifiableError&) {
    }
  });

  std::vector<double> used;
  for (int bi = 0; bi < plan.B; ++bi)
    if (ok[static_cast<std::size_t>(bi)])
      used.push_back(diffs[static_cast<std::size_t>(bi)]);
  const int dropped = plan.B - static_cast<int>(used.size());
  if (2 * dropped > plan.B)
    throw UnidentifiableError(
        "more than 50% of bootstrap replicates unidentifiable at t=" + fmt_t(t));

  TestResult r;
  r.kind = TestKind::Group;
  r.functional = CurveKind::Cif;
  r.stage = stage;
  r.cause = cause;
  r.t = t;
  r.alpha = plan.alpha;
  r.B = plan.B;
  r.dropped = dropped;
  const double sd = sample_sd(used);
  if (sd <= 0.0) {
    r.statistic = 0.0;
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    r.inconclusive = true;
    return r;
  }
  r.statistic = std::abs(point_diff) / sd;
  r.p_value = two_sided_p(r.statistic);
  r.reject = r.statistic > z_alpha_half(plan.alpha);
  return r;
}

TestResult test_prev_type(const Sample& sample, int stage, int cause,
                          int prev_cause, double t, const BootstrapPlan& plan) {
  if (cause == prev_cause)
    throw ConfigError("previous-type test requires k != l");
  EstimandSpec a{CurveKind::CondCif, stage, cause, SurvVariant::ProductLimit,
                 cause};
  EstimandSpec b{CurveKind::CondCif, stage, cause, SurvVariant::ProductLimit,
                 prev_cause};
  TestResult r = difference_test(sample, a, b, t, plan);
  r.kind = TestKind::PrevType;
  r.functional = CurveKind::CondCif;
  r.stage = stage;
  r.cause = cause;
  r.prev_cause = prev_cause;
  return r;
}

}  // namespace gapcr
