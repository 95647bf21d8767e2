#include "gapcr/estimators.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "gapcr/errors.hpp"

namespace gapcr {

const char* to_string(SurvVariant v) {
  switch (v) {
    case SurvVariant::Sum: return "sum";
    case SurvVariant::Ipcw: return "ipcw";
    case SurvVariant::ProductLimit: return "pl";
    case SurvVariant::Uncensored: return "unc";
  }
  return "?";
}

const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::Cif: return "cif";
    case CurveKind::Surv: return "surv";
    case CurveKind::CumCsh: return "csh";
    case CurveKind::CondCif: return "cond";
  }
  return "?";
}

std::optional<SurvVariant> surv_variant_from_string(const std::string& name) {
  if (name == "sum") return SurvVariant::Sum;
  if (name == "ipcw") return SurvVariant::Ipcw;
  if (name == "pl") return SurvVariant::ProductLimit;
  if (name == "unc") return SurvVariant::Uncensored;
  return std::nullopt;
}

std::string EstimateCurve::label() const {
  std::string out = to_string(kind);
  if ((kind == CurveKind::Surv || kind == CurveKind::CumCsh) && variant)
    out += std::string("-") + to_string(*variant);
  out += ":j" + std::to_string(stage);
  if (cause) out += ":k" + std::to_string(*cause);
  if (prev_cause) out += ":l" + std::to_string(*prev_cause);
  return out;
}

std::string EstimandSpec::label() const {
  std::string out = to_string(kind);
  if (kind == CurveKind::Surv || kind == CurveKind::CumCsh)
    out += std::string("-") + to_string(variant);
  out += ":j" + std::to_string(stage);
  if (kind != CurveKind::Surv) out += ":k" + std::to_string(cause);
  if (kind == CurveKind::CondCif) out += ":l" + std::to_string(prev_cause);
  return out;
}

namespace detail {

StageData collect_stage(const Sample& sample, int stage) {
  if (stage < 1) throw ConfigError("stage must be >= 1");
  StageData out;
  out.n_total = sample.n();
  out.stage = stage;
  for (const auto& s : sample.subjects()) {
    const GapRecord* r = s.record_at(stage);
    if (r == nullptr) continue;
    StageObs obs;
    obs.gap = r->gap_time;
    obs.cum = r->cum_time;
    obs.cause = r->cause;
    if (stage >= 2) {
      const GapRecord* prev = s.record_at(stage - 1);
      obs.prev_cum = prev->cum_time;
      obs.prev_cause = prev->cause;
    }
    out.obs.push_back(obs);
  }
  if (out.obs.empty())
    throw UnidentifiableError("no stage-" + std::to_string(stage) + " data");
  return out;
}

}  // namespace detail

namespace {

double stage_tau_any(const detail::StageData& d) {
  double tau = -1.0;
  for (const auto& o : d.obs)
    if (o.cause != 0) tau = std::max(tau, o.gap);
  return tau;
}

EstimateCurve make_cif(const detail::StageData& d, int cause,
                       const StepCurve& G) {
  const double inv_n = 1.0 / static_cast<double>(d.n_total);
  std::vector<std::pair<double, double>> incs;
  double tau = -1.0;
  for (const auto& o : d.obs) {
    if (o.cause != cause) continue;
    tau = std::max(tau, o.gap);
    double g = G.value(o.cum);
    if (g <= 0.0) continue;  // 0/0 convention
    incs.emplace_back(o.gap, inv_n / g);
  }
  if (tau < 0.0)
    throw UnidentifiableError("estimand unidentifiable at stage " +
                              std::to_string(d.stage) + " for cause " +
                              std::to_string(cause) +
                              ": no uncensored observation");
  EstimateCurve out;
  out.curve = StepCurve::from_increments(0.0, std::move(incs));
  out.kind = CurveKind::Cif;
  out.stage = d.stage;
  out.cause = cause;
  out.tau = tau;
  return out;
}

EstimateCurve make_surv_sum(const detail::StageData& d,
                            const std::vector<const EstimateCurve*>& cifs,
                            double tau_any, bool floor_at_zero) {
  std::vector<std::pair<double, double>> incs;
  for (const EstimateCurve* cif : cifs) {
    const auto& times = cif->curve.jump_times();
    const auto& values = cif->curve.values();
    double prev = cif->curve.initial_value();
    for (std::size_t k = 0; k < times.size(); ++k) {
      incs.emplace_back(times[k], -(values[k] - prev));
      prev = values[k];
    }
  }
  StepCurve curve = StepCurve::from_increments(1.0, std::move(incs));
  if (floor_at_zero) {
    std::vector<double> vals = curve.values();
    for (double& v : vals) v = std::max(v, 0.0);
    curve = StepCurve(1.0, curve.jump_times(), std::move(vals));
  }
  EstimateCurve out;
  out.curve = std::move(curve);
  out.kind = CurveKind::Surv;
  out.stage = d.stage;
  out.variant = SurvVariant::Sum;
  out.tau = std::max(tau_any, 0.0);
  out.all_censored = tau_any < 0.0;
  return out;
}

EstimateCurve make_surv_uncensored(const detail::StageData& d,
                                   const StepCurve& G, double tau_any) {
  const double inv_n = 1.0 / static_cast<double>(d.n_total);
  double initial = 0.0;
  std::vector<std::pair<double, double>> incs;
  for (const auto& o : d.obs) {
    if (o.cause == 0) continue;
    double g = G.value(o.cum);
    if (g <= 0.0) continue;  // cannot occur for observed events with C > Y
    double w = inv_n / g;
    initial += w;
    incs.emplace_back(o.gap, -w);
  }
  EstimateCurve out;
  out.curve = StepCurve::from_increments(initial, std::move(incs));
  out.kind = CurveKind::Surv;
  out.stage = d.stage;
  out.variant = SurvVariant::Uncensored;
  out.tau = std::max(tau_any, 0.0);
  out.all_censored = tau_any < 0.0;
  return out;
}

// Event sweep shared by the Ipcw and ProductLimit variants.  Both need the
// weighted sums sum_i I(T_ij {>,>=} u) / G(prev_cum_i + u); the weight of a
// term changes whenever prev_cum_i + u crosses a jump of G, so the sweep
// walks all gap endpoints and weight crossings in one pass.
struct SweepResult {
  StepCurve ipcw;
  StepCurve pl;
};

SweepResult run_stage_sweep(const detail::StageData& d, const StepCurve& G,
                            double t_cap) {
  struct Event {
    double u = 0.0;
    int type = 0;  // 0 = weight crossing, 1 = gap endpoint
    int idx = 0;
    double g_new = 0.0;  // crossing only: G value from this point on
  };

  const double n = static_cast<double>(d.n_total);
  const int m = static_cast<int>(d.obs.size());
  const auto& g_times = G.jump_times();
  const auto& g_values = G.values();

  std::vector<double> weight(static_cast<std::size_t>(m), 0.0);
  std::vector<char> infinite(static_cast<std::size_t>(m), 0);
  std::vector<Event> events;
  events.reserve(d.obs.size() * 2);

  double sum_active = 0.0;  // finite-weight terms with gap >= current u
  int inf_count = 0;
  for (int i = 0; i < m; ++i) {
    const auto& o = d.obs[static_cast<std::size_t>(i)];
    if (!(o.gap > 0.0)) continue;  // zero-gap terminal record: never at risk
    double g0 = G.value(o.prev_cum);
    assert(g0 > 0.0);
    weight[static_cast<std::size_t>(i)] = 1.0 / g0;
    sum_active += weight[static_cast<std::size_t>(i)];

    const double cap_i = std::min(o.gap, t_cap);
    if (o.gap <= t_cap) events.push_back({o.gap, 1, i, 0.0});
    // G jumps in (prev_cum, prev_cum + cap_i] change this term's weight.
    auto it = std::upper_bound(g_times.begin(), g_times.end(), o.prev_cum);
    for (; it != g_times.end(); ++it) {
      const double c = *it;
      const double u = c - o.prev_cum;
      if (!(u > 0.0)) continue;
      if (u > cap_i) break;
      std::size_t k = static_cast<std::size_t>(it - g_times.begin());
      events.push_back({u, 0, i, g_values[k]});
    }
  }

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.u != b.u) return a.u < b.u;
    return a.type < b.type;
  });

  std::vector<double> ipcw_times, ipcw_values, pl_times, pl_values;
  const double ipcw_initial = sum_active / n;
  double ipcw_last = ipcw_initial;
  double pl = 1.0;

  std::size_t e = 0;
  while (e < events.size()) {
    const double u = events[e].u;
    std::size_t group_end = e;
    while (group_end < events.size() && events[group_end].u == u) ++group_end;

    // 1. apply weight crossings at u
    for (std::size_t q = e; q < group_end && events[q].type == 0; ++q) {
      const int i = events[q].idx;
      if (infinite[static_cast<std::size_t>(i)]) continue;
      sum_active -= weight[static_cast<std::size_t>(i)];
      if (events[q].g_new > 0.0) {
        weight[static_cast<std::size_t>(i)] = 1.0 / events[q].g_new;
        sum_active += weight[static_cast<std::size_t>(i)];
      } else {
        infinite[static_cast<std::size_t>(i)] = 1;
        ++inf_count;
      }
    }

    // 2. hazard increment at u over the tied uncensored gaps; the risk set
    //    still contains every term with gap == u.
    double num = 0.0;
    bool any_gap_here = false;
    for (std::size_t q = e; q < group_end; ++q) {
      if (events[q].type != 1) continue;
      any_gap_here = true;
      const auto& o = d.obs[static_cast<std::size_t>(events[q].idx)];
      if (o.cause != 0 && !infinite[static_cast<std::size_t>(events[q].idx)])
        num += weight[static_cast<std::size_t>(events[q].idx)];
    }
    if (num > 0.0) {
      // num <= den holds termwise; the clamp only counters accumulated
      // float drift in the running denominator.
      double increment = 1.0;
      if (inf_count > 0)
        increment = 0.0;
      else if (num < sum_active)
        increment = num / sum_active;
      pl *= 1.0 - increment;
      pl_times.push_back(u);
      pl_values.push_back(pl);
    }

    // 3. remove terms whose gap ends at u
    for (std::size_t q = e; q < group_end; ++q) {
      if (events[q].type != 1) continue;
      const int i = events[q].idx;
      if (infinite[static_cast<std::size_t>(i)]) {
        infinite[static_cast<std::size_t>(i)] = 0;
        --inf_count;
      } else {
        sum_active -= weight[static_cast<std::size_t>(i)];
      }
    }
    // 4. record the ipcw value that holds on [u, next u)
    double ipcw_value = inf_count > 0
                            ? std::numeric_limits<double>::infinity()
                            : std::max(sum_active, 0.0) / n;
    if (ipcw_value != ipcw_last || any_gap_here) {
      ipcw_times.push_back(u);
      ipcw_values.push_back(ipcw_value);
      ipcw_last = ipcw_value;
    }
    e = group_end;
  }

  SweepResult out;
  out.ipcw = StepCurve(ipcw_initial, std::move(ipcw_times), std::move(ipcw_values));
  out.pl = StepCurve(1.0, std::move(pl_times), std::move(pl_values));
  return out;
}

EstimateCurve cum_csh_from(const EstimateCurve& cif, const EstimateCurve& surv,
                           double t_cap) {
  if (cif.kind != CurveKind::Cif)
    throw ConfigError("estimate_cum_csh: first argument must be a CIF curve");
  if (surv.kind != CurveKind::Surv)
    throw ConfigError("estimate_cum_csh: second argument must be a survival curve");
  if (cif.stage != surv.stage)
    throw ConfigError("estimate_cum_csh: mismatched stages");

  EstimateCurve out;
  out.kind = CurveKind::CumCsh;
  out.stage = cif.stage;
  out.cause = cif.cause;
  out.variant = surv.variant;
  out.tau = std::min(cif.tau, surv.tau);

  const auto& times = cif.curve.jump_times();
  const auto& values = cif.curve.values();
  std::vector<double> out_times, out_values;
  out_times.reserve(times.size());
  out_values.reserve(times.size());
  double acc = 0.0;
  double prev = cif.curve.initial_value();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double u = times[k];
    if (u > t_cap) break;
    const double df = values[k] - prev;
    prev = values[k];
    const double s_left = surv.curve.left_value(u);
    if (s_left <= 0.0) {
      out.truncated = true;
      out.truncated_at = u;
      break;
    }
    acc += df / s_left;
    out_times.push_back(u);
    out_values.push_back(acc);
  }
  out.curve = StepCurve(0.0, std::move(out_times), std::move(out_values));
  return out;
}

}  // namespace

StageEstimator::StageEstimator(const Sample& sample, const StepCurve& G,
                               int stage, double t_cap)
    : sample_(sample), G_(G), stage_(stage), t_cap_(t_cap) {
  data_ = detail::collect_stage(sample, stage);
  tau_any_ = stage_tau_any(data_);
}

double StageEstimator::tau_cause(int cause) const {
  double tau = -1.0;
  for (const auto& o : data_.obs)
    if (o.cause == cause) tau = std::max(tau, o.gap);
  if (tau < 0.0)
    throw UnidentifiableError("estimand unidentifiable at stage " +
                              std::to_string(stage_) + " for cause " +
                              std::to_string(cause) +
                              ": no uncensored observation");
  return tau;
}

const EstimateCurve& StageEstimator::cif(int cause) {
  if (cause < 1 || cause > sample_.num_causes())
    throw ConfigError("cause must be in 1.." +
                      std::to_string(sample_.num_causes()));
  auto it = cifs_.find(cause);
  if (it == cifs_.end())
    it = cifs_.emplace(cause, make_cif(data_, cause, G_)).first;
  return it->second;
}

void StageEstimator::build_sweep() {
  if (sweep_done_) return;
  SweepResult sw = run_stage_sweep(data_, G_, t_cap_);
  EstimateCurve ipcw;
  ipcw.curve = std::move(sw.ipcw);
  ipcw.kind = CurveKind::Surv;
  ipcw.stage = stage_;
  ipcw.variant = SurvVariant::Ipcw;
  ipcw.tau = std::max(tau_any_, 0.0);
  ipcw.all_censored = tau_any_ < 0.0;
  EstimateCurve pl;
  pl.curve = std::move(sw.pl);
  pl.kind = CurveKind::Surv;
  pl.stage = stage_;
  pl.variant = SurvVariant::ProductLimit;
  pl.tau = std::max(tau_any_, 0.0);
  pl.all_censored = tau_any_ < 0.0;
  survs_.emplace(SurvVariant::Ipcw, std::move(ipcw));
  survs_.emplace(SurvVariant::ProductLimit, std::move(pl));
  sweep_done_ = true;
}

const EstimateCurve& StageEstimator::surv(SurvVariant v) {
  auto it = survs_.find(v);
  if (it != survs_.end()) return it->second;
  switch (v) {
    case SurvVariant::Ipcw:
    case SurvVariant::ProductLimit:
      build_sweep();
      return survs_.at(v);
    case SurvVariant::Sum: {
      std::vector<const EstimateCurve*> cifs;
      for (int k = 1; k <= sample_.num_causes(); ++k) cifs.push_back(&cif(k));
      it = survs_.emplace(v, make_surv_sum(data_, cifs, tau_any_, true)).first;
      return it->second;
    }
    case SurvVariant::Uncensored:
      it = survs_.emplace(v, make_surv_uncensored(data_, G_, tau_any_)).first;
      return it->second;
  }
  throw ConfigError("unknown survival variant");
}

EstimateCurve StageEstimator::cum_csh(int cause, SurvVariant plugin) {
  return cum_csh_from(cif(cause), surv(plugin), t_cap_);
}

EstimateCurve estimate_cif(const Sample& sample, int stage, int cause,
                           const StepCurve& G) {
  if (cause < 1 || cause > sample.num_causes())
    throw ConfigError("cause must be in 1.." + std::to_string(sample.num_causes()));
  return make_cif(detail::collect_stage(sample, stage), cause, G);
}

EstimateCurve estimate_surv_sum(const Sample& sample, int stage,
                                const StepCurve& G, bool floor_at_zero) {
  auto d = detail::collect_stage(sample, stage);
  std::vector<EstimateCurve> owned;
  std::vector<const EstimateCurve*> cifs;
  for (int k = 1; k <= sample.num_causes(); ++k)
    owned.push_back(make_cif(d, k, G));
  for (const auto& c : owned) cifs.push_back(&c);
  return make_surv_sum(d, cifs, stage_tau_any(d), floor_at_zero);
}

EstimateCurve estimate_surv_ipcw(const Sample& sample, int stage,
                                 const StepCurve& G) {
  StageEstimator est(sample, G, stage);
  return est.surv(SurvVariant::Ipcw);
}

EstimateCurve estimate_surv_pl(const Sample& sample, int stage,
                               const StepCurve& G) {
  StageEstimator est(sample, G, stage);
  return est.surv(SurvVariant::ProductLimit);
}

EstimateCurve estimate_surv_uncensored(const Sample& sample, int stage,
                                       const StepCurve& G) {
  auto d = detail::collect_stage(sample, stage);
  return make_surv_uncensored(d, G, stage_tau_any(d));
}

EstimateCurve estimate_surv(const Sample& sample, int stage, SurvVariant v,
                            const StepCurve& G) {
  switch (v) {
    case SurvVariant::Sum: return estimate_surv_sum(sample, stage, G);
    case SurvVariant::Ipcw: return estimate_surv_ipcw(sample, stage, G);
    case SurvVariant::ProductLimit: return estimate_surv_pl(sample, stage, G);
    case SurvVariant::Uncensored:
      return estimate_surv_uncensored(sample, stage, G);
  }
  throw ConfigError("unknown survival variant");
}

EstimateCurve estimate_cum_csh(const EstimateCurve& cif,
                               const EstimateCurve& surv) {
  return cum_csh_from(cif, surv, std::numeric_limits<double>::infinity());
}

std::pair<EstimateCurve, PrevTypeMass> estimate_cond_cif(const Sample& sample,
                                                         int stage, int cause,
                                                         int prev_cause,
                                                         const StepCurve& G) {
  if (stage < 2)
    throw ConfigError("conditional CIF requires stage >= 2 (no previous stage)");
  if (cause < 1 || cause > sample.num_causes() || prev_cause < 1 ||
      prev_cause > sample.num_causes())
    throw ConfigError("cause and prev_cause must be in 1.." +
                      std::to_string(sample.num_causes()));

  const double t_max = identifiable_tau(sample, stage - 1, prev_cause);
  EstimateCurve prev_cif = estimate_cif(sample, stage - 1, prev_cause, G);
  PrevTypeMass pi;
  pi.stage = stage - 1;
  pi.cause = prev_cause;
  pi.t_max = t_max;
  pi.mass = prev_cif.value(t_max);
  if (!(pi.mass > 0.0))
    throw UnidentifiableError("pi estimate is zero at stage " +
                              std::to_string(stage - 1) + " for cause " +
                              std::to_string(prev_cause));

  auto d = detail::collect_stage(sample, stage);
  const double inv_n = 1.0 / static_cast<double>(d.n_total);
  std::vector<std::pair<double, double>> incs;
  double tau = -1.0;
  for (const auto& o : d.obs) {
    if (o.cause != cause || o.prev_cause != prev_cause) continue;
    tau = std::max(tau, o.gap);
    double g = G.value(o.cum);
    if (g <= 0.0) continue;
    incs.emplace_back(o.gap, inv_n / (g * pi.mass));
  }
  if (tau < 0.0)
    throw UnidentifiableError(
        "conditional CIF unidentifiable at stage " + std::to_string(stage) +
        " for cause " + std::to_string(cause) + " given previous cause " +
        std::to_string(prev_cause));

  EstimateCurve out;
  out.curve = StepCurve::from_increments(0.0, std::move(incs));
  out.kind = CurveKind::CondCif;
  out.stage = stage;
  out.cause = cause;
  out.prev_cause = prev_cause;
  out.tau = tau;
  return {std::move(out), pi};
}

namespace {

GridEval eval_with(const Sample& sample, const StepCurve& G,
                   StageEstimator& est, const EstimandSpec& spec,
                   std::span<const double> grid) {
  GridEval out;
  out.values.reserve(grid.size());
  out.ok.reserve(grid.size());
  const EstimateCurve* curve = nullptr;
  EstimateCurve owned;
  switch (spec.kind) {
    case CurveKind::Cif:
      curve = &est.cif(spec.cause);
      break;
    case CurveKind::Surv:
      curve = &est.surv(spec.variant);
      break;
    case CurveKind::CumCsh:
      owned = est.cum_csh(spec.cause, spec.variant);
      curve = &owned;
      break;
    case CurveKind::CondCif:
      owned = estimate_cond_cif(sample, spec.stage, spec.cause,
                                spec.prev_cause, G)
                  .first;
      curve = &owned;
      break;
  }
  for (double t : grid) {
    out.values.push_back(curve->value(t));
    out.ok.push_back(curve->beyond_range(t) ? 0 : 1);
  }
  return out;
}

}  // namespace

GridEval evaluate_on_grid(const Sample& sample, const StepCurve& G,
                          const EstimandSpec& spec,
                          std::span<const double> grid) {
  StageEstimator est(sample, G, spec.stage);
  return eval_with(sample, G, est, spec, grid);
}

SampleEvaluator::SampleEvaluator(const Sample& sample, double t_cap)
    : sample_(&sample), t_cap_(t_cap), G_(fit_censor_survival(sample)) {}

StageEstimator& SampleEvaluator::stage(int j) {
  auto it = stages_.find(j);
  if (it == stages_.end())
    it = stages_
             .emplace(j, std::make_unique<StageEstimator>(*sample_, G_, j, t_cap_))
             .first;
  return *it->second;
}

GridEval SampleEvaluator::eval(const EstimandSpec& spec,
                               std::span<const double> grid) {
  for (double t : grid)
    if (t > t_cap_)
      throw ConfigError("evaluation point beyond the evaluator's t_cap");
  return eval_with(*sample_, G_, stage(spec.stage), spec, grid);
}

}  // namespace gapcr
