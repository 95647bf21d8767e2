#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "gapcr/errors.hpp"
#include "gapcr/estimators.hpp"
#include "gapcr/sample.hpp"
#include "gapcr/simulation.hpp"
#include "oracles.hpp"

using namespace gapcr;

namespace {

// The four-subject worked fixture: stage-1 observations
// (1.5, cause 1), (3, cause 2), (6, censored), (5, cause 1)
// with censor times (2, 4, 6, 8).
Sample four_subject_fixture() {
  std::vector<RawEventRow> rows{
      {"a", 1, 1.5, 1}, {"b", 1, 3.0, 2}, {"d", 1, 5.0, 1}};
  std::map<std::string, double> censor{
      {"a", 2.0}, {"b", 4.0}, {"c", 6.0}, {"d", 8.0}};
  return build_sample(rows, censor);
}

Sample sim_sample(double theta, int n, std::uint64_t seed, double censor_upper = 10.0,
                  int max_stage = 64) {
  SimConfig cfg;
  cfg.theta = theta;
  cfg.n = n;
  cfg.seed = seed;
  cfg.censor_upper = censor_upper;
  cfg.max_stage = max_stage;
  return gen_sample(cfg, 0);
}

}  // namespace

TEST_CASE("four-subject fixture: hand and oracle values") {
  Sample s = four_subject_fixture();
  StepCurve G = fit_censor_survival(s);
  auto subs = oracle::from_sample(s);

  EstimateCurve f1 = estimate_cif(s, 1, 1, G);
  CHECK(f1.value(5.0) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(f1.value(1.5) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(f1.value(4.999) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(f1.value(1.0) == 0.0);  // below the first type-1 gap
  CHECK(f1.tau == 5.0);
  CHECK(f1.value(5.0) == doctest::Approx(oracle::cif(subs, 1, 1, 5.0)).epsilon(1e-14));

  EstimateCurve f2 = estimate_cif(s, 1, 2, G);
  CHECK(f2.value(3.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(f2.tau == 3.0);

  // (6a): F1 + F2 = 13/12 > 1 at t = 5, so the floored curve is 0 there
  EstimateCurve s6a = estimate_surv_sum(s, 1, G);
  CHECK(s6a.value(0.0) == 1.0);
  CHECK(s6a.value(5.0) == 0.0);
  EstimateCurve s6a_raw = estimate_surv_sum(s, 1, G, false);
  CHECK(s6a_raw.value(5.0) == doctest::Approx(-1.0 / 12.0).epsilon(1e-12));

  // (6b) at t = 2: weight 1/G(2) = 4/3 for all, three gaps exceed 2
  EstimateCurve s6b = estimate_surv_ipcw(s, 1, G);
  CHECK(s6b.value(2.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(s6b.value(0.0) == doctest::Approx(1.0).epsilon(1e-13));

  // (6c) product limit: 3/4, 1/2, 1/4 at the three event times
  EstimateCurve s6c = estimate_surv_pl(s, 1, G);
  CHECK(s6c.value(1.4999) == 1.0);
  CHECK(s6c.value(1.5) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(s6c.value(3.0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(s6c.value(5.0) == doctest::Approx(0.25).epsilon(1e-13));

  // (6d) at t = 2: qualifying subjects have weights 1/G(3) = 4/3 and
  // 1/G(5) = 2, giving (4/3 + 2)/4 = 5/6 by direct evaluation of the
  // definitional sum (the brute-force oracle agrees).
  EstimateCurve s6d = estimate_surv_uncensored(s, 1, G);
  CHECK(oracle::surv6d(subs, 1, 2.0) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
  CHECK(s6d.value(2.0) == doctest::Approx(5.0 / 6.0).epsilon(1e-13));

  // cumulative CSH with the (6c) plug-in: 0.25/1 + 0.5/0.5 = 1.25 at t = 5
  EstimateCurve l1 = estimate_cum_csh(f1, s6c);
  CHECK(l1.value(1.5) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(l1.value(5.0) == doctest::Approx(1.25).epsilon(1e-13));
  CHECK_FALSE(l1.truncated);
  CHECK(l1.tau == 5.0);
}

TEST_CASE("estimator errors and flags") {
  Sample s = four_subject_fixture();
  StepCurve G = fit_censor_survival(s);
  CHECK_THROWS_AS(estimate_cif(s, 3, 1, G), UnidentifiableError);  // no stage-3 data
  CHECK_THROWS_AS(estimate_cif(s, 1, 3, G), ConfigError);
  CHECK_THROWS_AS(estimate_cond_cif(s, 1, 1, 2, G), ConfigError);  // no previous stage

  // beyond-tau evaluation returns the last value with a flag
  EstimateCurve f1 = estimate_cif(s, 1, 1, G);
  CHECK(f1.value(100.0) == f1.curve.final_value());
  CHECK(f1.beyond_range(100.0));
  CHECK_FALSE(f1.beyond_range(5.0));

  // all stage-j records censored: (6d) is the zero curve with a warning
  Sample cens = build_sample({}, {{"a", 1.0}, {"b", 2.0}});
  StepCurve Gc = fit_censor_survival(cens);
  EstimateCurve s6d = estimate_surv_uncensored(cens, 1, Gc);
  CHECK(s6d.all_censored);
  CHECK(s6d.value(0.5) == 0.0);
  CHECK(s6d.tau == 0.0);
}

TEST_CASE("stage mismatch rejected by the hazard plug-in") {
  SimConfig cfg;
  cfg.theta = 1.0;
  cfg.n = 40;
  Sample s = gen_sample(cfg, 2);
  StepCurve G = fit_censor_survival(s);
  EstimateCurve f1 = estimate_cif(s, 1, 1, G);
  EstimateCurve s2 = estimate_surv_pl(s, 2, G);
  CHECK_THROWS_AS(estimate_cum_csh(f1, s2), ConfigError);
  CHECK_THROWS_AS(estimate_cum_csh(s2, f1), ConfigError);
}

TEST_CASE("cumulative hazard truncates when the survival curve hits zero") {
  // single cause; each subject censored shortly after its own event, so
  // the IPCW weights grow: F1 jumps 1/4, 1/3, 1/2.  The floored (6a)
  // survival hits 0 at 2.5, which blocks the event at 3.
  std::vector<RawEventRow> rows{
      {"a", 1, 1.0, 1}, {"b", 1, 2.0, 1}, {"c", 1, 2.5, 1}, {"d", 1, 3.0, 1}};
  std::map<std::string, double> censor{
      {"a", 1.05}, {"b", 2.05}, {"c", 2.6}, {"d", 3.5}};
  Sample s = build_sample(rows, censor, 1);
  StepCurve G = fit_censor_survival(s);
  EstimateCurve f1 = estimate_cif(s, 1, 1, G);
  CHECK(f1.value(2.5) == doctest::Approx(13.0 / 12.0).epsilon(1e-12));
  EstimateCurve s6a = estimate_surv_sum(s, 1, G);
  CHECK(s6a.value(2.5) == 0.0);
  EstimateCurve l1 = estimate_cum_csh(f1, s6a);
  CHECK(l1.truncated);
  CHECK(*l1.truncated_at == 3.0);
  // 1/4 / 1 + 1/3 / (3/4) + 1/2 / (5/12)
  CHECK(l1.value(2.5) ==
        doctest::Approx(0.25 + (1.0 / 3.0) / 0.75 + 0.5 / (5.0 / 12.0))
            .epsilon(1e-12));
  CHECK(l1.beyond_range(3.0));
  CHECK_FALSE(l1.beyond_range(2.5));
}

TEST_CASE("event tied to the maximum censor atom carries no usable weight") {
  // cum == C == max C makes G(Y) = 0 with an indicator of 1; the curve
  // skips the term rather than dividing by zero.
  std::vector<RawEventRow> rows{{"a", 1, 2.0, 1}};
  Sample s = build_sample(rows, {{"a", 2.0}, {"b", 1.0}});
  StepCurve G = fit_censor_survival(s);
  EstimateCurve f1 = estimate_cif(s, 1, 1, G);
  CHECK(f1.tau == 2.0);
  CHECK(f1.value(2.0) == 0.0);
}

TEST_CASE("random samples agree with the brute-force oracles") {
  for (auto [theta, n, seed] : std::vector<std::tuple<double, int, int>>{
           {1.0, 37, 101}, {1.5, 60, 202}, {2.0, 45, 303}}) {
    Sample s = sim_sample(theta, n, static_cast<std::uint64_t>(seed));
    StepCurve G = fit_censor_survival(s);
    auto subs = oracle::from_sample(s);
    Rng tr(static_cast<std::uint64_t>(seed) + 7);

    for (int j = 1; j <= 3; ++j) {
      StageEstimator est(s, G, j);
      const EstimateCurve& f1 = est.cif(1);
      const EstimateCurve& f2 = est.cif(2);
      const EstimateCurve& sa = est.surv(SurvVariant::Sum);
      const EstimateCurve& sb = est.surv(SurvVariant::Ipcw);
      const EstimateCurve& sc = est.surv(SurvVariant::ProductLimit);
      const EstimateCurve& sd = est.surv(SurvVariant::Uncensored);
      for (int q = 0; q < 60; ++q) {
        const double t = tr.uniform(0.0, 4.0);
        CHECK(f1.value(t) == doctest::Approx(oracle::cif(subs, j, 1, t)).epsilon(1e-9));
        CHECK(f2.value(t) == doctest::Approx(oracle::cif(subs, j, 2, t)).epsilon(1e-9));
        CHECK(sa.value(t) ==
              doctest::Approx(oracle::surv6a(subs, j, t, 2, true)).epsilon(1e-9));
        CHECK(sb.value(t) == doctest::Approx(oracle::surv6b(subs, j, t)).epsilon(1e-9));
        CHECK(sc.value(t) == doctest::Approx(oracle::surv6c(subs, j, t)).epsilon(1e-9));
        CHECK(sd.value(t) == doctest::Approx(oracle::surv6d(subs, j, t)).epsilon(1e-9));
      }
      // left limits at the jump points feed Eq.-style plug-ins; check at
      // the exact event gaps and just after
      for (double v : oracle::event_gaps(subs, j, 0)) {
        CHECK(sb.left_value(v) ==
              doctest::Approx(oracle::surv6b_left(subs, j, v)).epsilon(1e-9));
        CHECK(sc.left_value(v) ==
              doctest::Approx(oracle::surv6c_left(subs, j, v)).epsilon(1e-9));
        CHECK(sd.left_value(v) ==
              doctest::Approx(oracle::surv6d_left(subs, j, v)).epsilon(1e-9));
        CHECK(sb.value(v) == doctest::Approx(oracle::surv6b(subs, j, v)).epsilon(1e-9));
      }
      // cumulative hazards, all four plug-ins
      for (SurvVariant pv : {SurvVariant::Sum, SurvVariant::Ipcw,
                             SurvVariant::ProductLimit, SurvVariant::Uncensored}) {
        EstimateCurve l1 = est.cum_csh(1, pv);
        oracle::SurvKind ok = pv == SurvVariant::Sum         ? oracle::SurvKind::A
                              : pv == SurvVariant::Ipcw      ? oracle::SurvKind::B
                              : pv == SurvVariant::ProductLimit
                                  ? oracle::SurvKind::C
                                  : oracle::SurvKind::D;
        for (int q = 0; q < 20; ++q) {
          const double t = tr.uniform(0.0, 2.0);
          if (l1.beyond_range(t)) continue;
          CHECK(l1.value(t) ==
                doctest::Approx(oracle::cumcsh(subs, j, 1, t, ok, 2)).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("tied data agrees with the oracles") {
  // integer-valued gaps and censor times force exact ties between event
  // gaps, censored gaps, and censor atoms
  Rng rng(17);
  for (int rep = 0; rep < 8; ++rep) {
    std::vector<RawEventRow> rows;
    std::map<std::string, double> censor;
    // anchor subject with the strictly largest censor time: no event can
    // then sit on the last censor atom, where the IPCW weight is undefined
    censor["zz"] = 10.0;
    const int n = 24;
    for (int i = 0; i < n; ++i) {
      std::string id = "s" + std::to_string(100 + i);
      const double c = 1.0 + static_cast<double>(rng.below(8));
      censor[id] = c;
      double y = 0.0;
      for (int j = 1; j <= 4; ++j) {
        const double gap = 1.0 + static_cast<double>(rng.below(5));
        if (y + gap > c) break;
        y += gap;
        rows.push_back({id, j, gap, rng.below(2) == 0 ? 1 : 2});
      }
    }
    Sample s = build_sample(rows, censor);
    StepCurve G = fit_censor_survival(s);
    auto subs = oracle::from_sample(s);
    for (int j = 1; j <= 2; ++j) {
      bool has_events = true;
      try {
        identifiable_tau(s, j);
      } catch (const UnidentifiableError&) {
        has_events = false;
      }
      if (!has_events) continue;
      StageEstimator est(s, G, j);
      for (double t = 0.0; t <= 8.0; t += 0.5) {
        CHECK(est.surv(SurvVariant::Ipcw).value(t) ==
              doctest::Approx(oracle::surv6b(subs, j, t)).epsilon(1e-11));
        CHECK(est.surv(SurvVariant::ProductLimit).value(t) ==
              doctest::Approx(oracle::surv6c(subs, j, t)).epsilon(1e-11));
        CHECK(est.surv(SurvVariant::Uncensored).value(t) ==
              doctest::Approx(oracle::surv6d(subs, j, t)).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("survival identity: F1 + F2 + S_(6a,unfloored) == 1") {
  Sample s = sim_sample(1.5, 80, 55);
  StepCurve G = fit_censor_survival(s);
  Rng tr(1);
  for (int j = 1; j <= 3; ++j) {
    EstimateCurve f1 = estimate_cif(s, j, 1, G);
    EstimateCurve f2 = estimate_cif(s, j, 2, G);
    EstimateCurve sa = estimate_surv_sum(s, j, G, false);
    for (int q = 0; q < 100; ++q) {
      const double t = tr.uniform(0.0, 6.0);
      CHECK(f1.value(t) + f2.value(t) + sa.value(t) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("no censoring: estimators equal their empirical plug-ins exactly") {
  // n = 64 keeps every weight and increment a dyadic rational, so the
  // comparisons below are exact floating-point equalities.
  Sample s = sim_sample(1.5, 64, 77, 1e9, 3);
  StepCurve G = fit_censor_survival(s);
  auto subs = oracle::from_sample(s);
  const double n = 64.0;
  Rng tr(9);
  for (int j = 1; j <= 3; ++j) {
    EstimateCurve f1 = estimate_cif(s, j, 1, G);
    EstimateCurve sa = estimate_surv_sum(s, j, G);
    EstimateCurve sb = estimate_surv_ipcw(s, j, G);
    EstimateCurve sc = estimate_surv_pl(s, j, G);
    EstimateCurve sd = estimate_surv_uncensored(s, j, G);
    for (int q = 0; q < 80; ++q) {
      const double t = tr.uniform(0.0, 5.0);
      int cnt_le_1 = 0, cnt_gt = 0;
      for (const auto& x : subs) {
        if (x.stages() < j) continue;
        const std::size_t qq = static_cast<std::size_t>(j - 1);
        if (x.cause[qq] == 0) continue;  // the single terminal record at C=1e9
        if (x.cause[qq] == 1 && x.gap[qq] <= t) ++cnt_le_1;
        if (x.gap[qq] > t) ++cnt_gt;
      }
      const double emp_f1 = cnt_le_1 / n;
      const double emp_s = cnt_gt / n;
      CHECK(f1.value(t) == emp_f1);
      CHECK(sa.value(t) == emp_s);
      CHECK(sb.value(t) == emp_s);
      CHECK(sd.value(t) == emp_s);
      CHECK(sc.value(t) == doctest::Approx(emp_s).epsilon(1e-12));
    }
  }
}

TEST_CASE("single cause, j = 1: reductions to Kaplan-Meier") {
  // (6c) equals Kaplan-Meier on any fixture because the common weight
  // cancels from the hazard increments.
  std::vector<RawEventRow> rows{{"a", 1, 1.0, 1}, {"c", 1, 3.0, 1}, {"e", 1, 4.0, 1}};
  std::map<std::string, double> censor{
      {"a", 9.0}, {"b", 2.0}, {"c", 7.0}, {"d", 3.5}, {"e", 8.0}};
  Sample s = build_sample(rows, censor, 1);
  StepCurve G = fit_censor_survival(s);
  EstimateCurve sc = estimate_surv_pl(s, 1, G);
  std::vector<std::pair<double, int>> km_data;
  for (const auto& subj : s.subjects()) {
    const auto& r = subj.records[0];
    km_data.emplace_back(r.gap_time, r.cause == 0 ? 0 : 1);
  }
  for (double t : {0.5, 1.0, 2.0, 2.5, 3.0, 3.7, 4.0})
    CHECK(sc.value(t) == doctest::Approx(oracle::km(km_data, t)).epsilon(1e-12));

  // With every censor time beyond the last event, the empirical censor
  // survival is 1 on the identifiable range and (6a), (6b), (6c) all
  // collapse to Kaplan-Meier exactly.
  std::vector<RawEventRow> rows2{{"a", 1, 1.0, 1}, {"b", 1, 2.0, 1}};
  std::map<std::string, double> censor2{
      {"a", 9.0}, {"b", 9.5}, {"c", 5.0}, {"d", 7.0}};
  Sample s2 = build_sample(rows2, censor2, 1);
  StepCurve G2 = fit_censor_survival(s2);
  EstimateCurve sa2 = estimate_surv_sum(s2, 1, G2);
  EstimateCurve sb2 = estimate_surv_ipcw(s2, 1, G2);
  EstimateCurve sc2 = estimate_surv_pl(s2, 1, G2);
  std::vector<std::pair<double, int>> km2;
  for (const auto& subj : s2.subjects())
    km2.emplace_back(subj.records[0].gap_time, subj.records[0].cause == 0 ? 0 : 1);
  for (double t : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    const double ref = oracle::km(km2, t);
    CHECK(sa2.value(t) == ref);
    CHECK(sb2.value(t) == ref);
    CHECK(sc2.value(t) == ref);
  }
}

TEST_CASE("scale equivariance: powers of two are exact") {
  Sample s = sim_sample(1.5, 48, 5);
  const double c = 2.0;
  Sample scaled(s.num_causes());
  for (const auto& subj : s.subjects()) {
    SubjectRecord r = subj;
    r.censor_time *= c;
    for (auto& rec : r.records) {
      rec.gap_time *= c;
      rec.cum_time *= c;
    }
    scaled.add(std::move(r));
  }
  StepCurve G = fit_censor_survival(s);
  StepCurve Gs = fit_censor_survival(scaled);
  Rng tr(2);
  for (int j = 1; j <= 2; ++j) {
    StageEstimator a(s, G, j), b(scaled, Gs, j);
    for (int q = 0; q < 40; ++q) {
      const double t = tr.uniform(0.0, 5.0);
      CHECK(a.cif(1).value(t) == b.cif(1).value(c * t));
      CHECK(a.surv(SurvVariant::Ipcw).value(t) ==
            b.surv(SurvVariant::Ipcw).value(c * t));
      CHECK(a.surv(SurvVariant::ProductLimit).value(t) ==
            b.surv(SurvVariant::ProductLimit).value(c * t));
      CHECK(a.surv(SurvVariant::Uncensored).value(t) ==
            b.surv(SurvVariant::Uncensored).value(c * t));
    }
  }
}

TEST_CASE("curve shape invariants") {
  Sample s = sim_sample(1.5, 120, 23);
  StepCurve G = fit_censor_survival(s);
  for (int j = 1; j <= 3; ++j) {
    StageEstimator est(s, G, j);
    for (int k = 1; k <= 2; ++k) {
      const auto& f = est.cif(k);
      CHECK(f.curve.initial_value() == 0.0);
      double prev = 0.0;
      for (double v : f.curve.values()) {
        CHECK(v >= prev);
        prev = v;
      }
    }
    const auto& pl = est.surv(SurvVariant::ProductLimit);
    CHECK(pl.curve.initial_value() == 1.0);
    double prev = 1.0;
    for (double v : pl.curve.values()) {
      CHECK(v <= prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
    EstimateCurve l1 = est.cum_csh(1, SurvVariant::ProductLimit);
    prev = 0.0;
    for (double v : l1.curve.values()) {
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("conditional CIF against the brute-force oracle") {
  // small two-stage fixture with both causes at both stages
  std::vector<RawEventRow> rows{
      {"a", 1, 1.0, 1}, {"a", 2, 2.0, 1},
      {"b", 1, 2.0, 1}, {"b", 2, 1.0, 2},
      {"c", 1, 1.5, 2}, {"c", 2, 2.5, 1},
      {"d", 1, 3.0, 2},
      {"e", 1, 1.0, 1}, {"e", 2, 4.0, 2},
      {"f", 1, 2.5, 2},
      {"g", 1, 1.2, 2}, {"g", 2, 0.8, 2}};
  std::map<std::string, double> censor{{"a", 7.0},  {"b", 6.0}, {"c", 9.0},
                                       {"d", 3.5},  {"e", 8.0}, {"f", 10.0},
                                       {"g", 9.5}};
  Sample s = build_sample(rows, censor);
  StepCurve G = fit_censor_survival(s);
  auto subs = oracle::from_sample(s);
  for (int k = 1; k <= 2; ++k) {
    for (int l = 1; l <= 2; ++l) {
      auto [curve, pi] = estimate_cond_cif(s, 2, k, l, G);
      CHECK(pi.stage == 1);
      CHECK(pi.cause == l);
      CHECK(pi.mass > 0.0);
      CHECK(pi.mass <= 1.0 + 1e-12);
      CHECK(pi.t_max == identifiable_tau(s, 1, l));
      for (double t : {0.5, 1.0, 2.0, 2.5, 4.0, 5.0})
        CHECK(curve.value(t) ==
              doctest::Approx(oracle::cond_cif(subs, 2, k, l, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("conditional CIF edge cases") {
  // cause 2 never observed at stage 1
  std::vector<RawEventRow> rows{{"a", 1, 1.0, 1}, {"a", 2, 1.0, 1}, {"b", 1, 2.0, 1}};
  Sample s = build_sample(rows, {{"a", 9.0}, {"b", 8.0}});
  StepCurve G = fit_censor_survival(s);
  CHECK_THROWS_AS(estimate_cond_cif(s, 2, 1, 2, G), UnidentifiableError);
  CHECK_NOTHROW(estimate_cond_cif(s, 2, 1, 1, G));

  // no censoring: equals the empirical conditional fraction
  SimConfig cfg;
  cfg.theta = 1.5;
  cfg.n = 64;
  cfg.censor_upper = 1e9;
  cfg.max_stage = 2;
  cfg.seed = 31;
  Sample big = gen_sample(cfg, 0);
  StepCurve Gb = fit_censor_survival(big);
  auto [curve, pi] = estimate_cond_cif(big, 2, 1, 2, Gb);
  for (double t : {0.3, 0.7, 1.4}) {
    int num = 0, den = 0;
    for (const auto& subj : big.subjects()) {
      if (subj.records[0].cause != 2) continue;
      ++den;
      if (subj.records.size() >= 2 && subj.records[1].cause == 1 &&
          subj.records[1].gap_time <= t)
        ++num;
    }
    CHECK(curve.value(t) ==
          doctest::Approx(static_cast<double>(num) / den).epsilon(1e-12));
  }
}

TEST_CASE("previous-type masses: sum bounded by one") {
  // no censoring: sum over l of pi_l is the fraction of subjects with a
  // stage-1 event, which cannot exceed 1
  SimConfig cfg;
  cfg.theta = 1.5;
  cfg.n = 100;
  cfg.censor_upper = 1e9;
  cfg.max_stage = 2;
  cfg.seed = 12;
  Sample s = gen_sample(cfg, 0);
  StepCurve G = fit_censor_survival(s);
  double total = 0.0;
  for (int l = 1; l <= 2; ++l)
    total += estimate_cond_cif(s, 2, 1, l, G).second.mass;
  CHECK(total <= 1.0 + 1e-12);
  CHECK(total > 0.9);  // light censoring: near equality

  // Default censoring, fixed seed: the IPCW masses can overshoot 1 in
  // finite samples (same mechanism that lets (6a) go negative), so only
  // near-equality is checked here.
  Sample s2 = sim_sample(1.5, 200, 44);
  StepCurve G2 = fit_censor_survival(s2);
  double total2 = 0.0;
  for (int l = 1; l <= 2; ++l)
    total2 += estimate_cond_cif(s2, 2, 1, l, G2).second.mass;
  CHECK(total2 > 0.9);
  CHECK(total2 < 1.08);
}

TEST_CASE("evaluate_on_grid matches direct estimator calls") {
  Sample s = sim_sample(1.5, 70, 91);
  StepCurve G = fit_censor_survival(s);
  std::vector<double> grid{0.2, 0.5, 1.0, 2.0};
  EstimandSpec spec{CurveKind::CumCsh, 2, 1, SurvVariant::Ipcw, 0};
  GridEval ge = evaluate_on_grid(s, G, spec, grid);
  StageEstimator est(s, G, 2);
  EstimateCurve l1 = est.cum_csh(1, SurvVariant::Ipcw);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(ge.values[i] == l1.value(grid[i]));
    CHECK(static_cast<bool>(ge.ok[i]) == !l1.beyond_range(grid[i]));
  }

  SampleEvaluator ev(s, 1.0);
  CHECK_THROWS_AS(ev.eval(spec, std::vector<double>{2.0}), ConfigError);
}
