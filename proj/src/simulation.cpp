#include "gapcr/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "gapcr/errors.hpp"
#include "gapcr/inference.hpp"
#include "gapcr/parallel.hpp"
#include "gapcr/stats.hpp"

namespace gapcr {

namespace {
constexpr std::uint64_t kGenTag = 0x6e47;
constexpr std::uint64_t kMcBootTag = 0x6e48;
}  // namespace

double SimConfig::alpha_for_stage(int stage) const {
  if (alpha_j.empty()) throw ConfigError("alpha_j must not be empty");
  std::size_t idx = static_cast<std::size_t>(stage - 1);
  if (idx >= alpha_j.size()) idx = alpha_j.size() - 1;
  return alpha_j[idx];
}

std::vector<double> SimConfig::effective_grid() const {
  if (!grid.empty()) {
    std::vector<double> g = grid;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }
  // Seven points with S^(j)(t) = 0.8, ..., 0.2 at the table stages.
  const double a = alpha_for_stage(2);
  std::vector<double> g;
  for (double s : {0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2})
    g.push_back(-std::log(s) / a);
  return g;
}

void SimConfig::validate() const {
  if (!(theta >= 1.0)) throw ConfigError("theta must be >= 1");
  if (alpha_j.empty()) throw ConfigError("alpha_j must not be empty");
  for (double a : alpha_j)
    if (!(a > 1.0)) throw ConfigError("alpha_j must be > 1");
  if (!(censor_upper > 0.0)) throw ConfigError("censor_upper must be positive");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (B < 2) throw ConfigError("B must be >= 2");
  if (max_stage < 1) throw ConfigError("max_stage must be >= 1");
  if (!(alpha_level > 0.0) || !(alpha_level < 1.0))
    throw ConfigError("alpha_level must be in (0, 1)");
  if (num_causes != 2)
    throw ConfigError("the generator produces exactly two causes");
}

TrueFunctionals true_functionals(double alpha_j, double t) {
  TrueFunctionals f;
  const double e = std::exp(-alpha_j * t);
  f.f1 = (1.0 - e) / alpha_j;
  f.f2 = (1.0 - 1.0 / alpha_j) * (1.0 - e);
  f.s = e;
  f.lambda1 = t;
  f.lambda2 = (alpha_j - 1.0) * t;
  return f;
}

double true_value(const SimConfig& cfg, const EstimandSpec& spec, double t) {
  TrueFunctionals f = true_functionals(cfg.alpha_for_stage(spec.stage), t);
  switch (spec.kind) {
    case CurveKind::Cif:
      if (spec.cause == 1) return f.f1;
      if (spec.cause == 2) return f.f2;
      throw ConfigError("true_value: cause must be 1 or 2");
    case CurveKind::Surv:
      return f.s;
    case CurveKind::CumCsh:
      if (spec.cause == 1) return f.lambda1;
      if (spec.cause == 2) return f.lambda2;
      throw ConfigError("true_value: cause must be 1 or 2");
    case CurveKind::CondCif:
      throw ConfigError("true_value: no closed form for conditional CIFs");
  }
  throw ConfigError("true_value: unknown estimand kind");
}

double sample_frailty(double theta, Rng& rng) {
  if (!(theta >= 1.0)) throw ConfigError("theta must be >= 1");
  if (theta == 1.0) return 1.0;  // independence limit
  return rng.gamma(1.0 / (theta - 1.0), 1.0);
}

double conditional_cif1_mass(double w, double alpha_j, double theta) {
  if (theta == 1.0) return 1.0 / alpha_j;
  return std::exp(w * (1.0 - std::pow(alpha_j, theta - 1.0)));
}

double conditional_cif1(double t, double w, double alpha_j, double theta) {
  if (t <= 0.0) return 0.0;
  const double x = (1.0 - std::exp(-alpha_j * t)) / alpha_j;
  if (theta == 1.0) return x;
  return std::exp(w * (1.0 - std::pow(x, 1.0 - theta)));
}

double conditional_cif1_inv(double u, double w, double alpha_j, double theta) {
  if (!(u > 0.0) || !(u < conditional_cif1_mass(w, alpha_j, theta)))
    throw std::domain_error("conditional_cif1_inv: u outside (0, F(inf|w))");
  double x;
  if (theta == 1.0) {
    x = u;
  } else {
    x = std::pow(1.0 - std::log(u) / w, 1.0 / (1.0 - theta));
  }
  return -std::log1p(-alpha_j * x) / alpha_j;
}

SubjectRecord gen_subject(const SimConfig& cfg, Rng& rng,
                          const std::string& subject_id) {
  SubjectRecord s;
  s.subject_id = subject_id;
  const double w = sample_frailty(cfg.theta, rng);
  const double c = cfg.censor_upper * rng.uniform_open();
  s.censor_time = c;
  double y = 0.0;
  int stage = 1;
  for (; stage <= cfg.max_stage; ++stage) {
    const double a = cfg.alpha_for_stage(stage);
    const double mass = conditional_cif1_mass(w, a, cfg.theta);
    const double u = rng.uniform_open();
    double gap;
    int cause;
    if (u < mass) {
      cause = 1;
      gap = conditional_cif1_inv(u, w, a, cfg.theta);
    } else {
      cause = 2;
      gap = rng.exponential(a);
    }
    if (y + gap <= c) {
      y += gap;
      s.records.push_back({stage, gap, y, cause});
    } else {
      break;
    }
  }
  s.records.push_back({stage, c - y, c, 0});
  return s;
}

Sample gen_sample(const SimConfig& cfg, std::uint64_t rep) {
  Rng rng(stream_seed(cfg.seed, kGenTag, rep));
  Sample out(cfg.num_causes);
  out.reserve(static_cast<std::size_t>(cfg.n));
  char id[16];
  for (int i = 0; i < cfg.n; ++i) {
    std::snprintf(id, sizeof(id), "s%06d", i + 1);
    out.add(gen_subject(cfg, rng, id));
  }
  return out;
}

std::string StageTestSpec::label() const {
  switch (functional) {
    case CurveKind::Cif: return "phi_F";
    case CurveKind::Surv: return std::string("phi_S_") + to_string(variant);
    case CurveKind::CumCsh: return std::string("phi_L_") + to_string(variant);
    default: break;
  }
  return "phi_?";
}

std::vector<StageTestSpec> default_test_battery() {
  std::vector<StageTestSpec> out;
  out.push_back({CurveKind::Cif, SurvVariant::ProductLimit, 1, 2, 3});
  for (SurvVariant v : {SurvVariant::Sum, SurvVariant::Ipcw,
                        SurvVariant::ProductLimit, SurvVariant::Uncensored})
    out.push_back({CurveKind::Surv, v, 1, 2, 3});
  for (SurvVariant v : {SurvVariant::Sum, SurvVariant::Ipcw,
                        SurvVariant::ProductLimit, SurvVariant::Uncensored})
    out.push_back({CurveKind::CumCsh, v, 1, 2, 3});
  return out;
}

McStudyResult run_mc_study(const SimConfig& cfg,
                           const std::vector<EstimandSpec>& targets,
                           const std::vector<StageTestSpec>* battery) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  for (const auto& t : targets)
    if (t.kind == CurveKind::CondCif)
      throw ConfigError("conditional CIFs have no analytic truth in the study");

  const std::vector<double> grid = cfg.effective_grid();
  const std::size_t m = grid.size();
  const std::size_t nt = targets.size();
  const double z = z_alpha_half(cfg.alpha_level);

  // Union of estimands to evaluate per (sample, replicate): the targets
  // plus both sides of every battery test.
  std::vector<EstimandSpec> specs = targets;
  std::map<std::string, std::size_t> spec_index;
  for (std::size_t i = 0; i < specs.size(); ++i)
    spec_index.emplace(specs[i].label(), i);
  auto intern = [&](const EstimandSpec& e) {
    auto [it, inserted] = spec_index.emplace(e.label(), specs.size());
    if (inserted) specs.push_back(e);
    return it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> test_specs;
  const std::size_t nk = battery ? battery->size() : 0;
  if (battery) {
    for (const auto& ts : *battery) {
      EstimandSpec a{ts.functional, ts.stage_a, ts.cause, ts.variant, 0};
      EstimandSpec b{ts.functional, ts.stage_b, ts.cause, ts.variant, 0};
      test_specs.emplace_back(intern(a), intern(b));
    }
  }
  const std::size_t ns = specs.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);

  // Per-repetition slots; aggregation happens after the join in index
  // order, so the worker count cannot affect the result.
  std::vector<double> est(reps * nt * m, 0.0), bse(reps * nt * m, 0.0);
  std::vector<char> est_ok(reps * nt * m, 0), bse_ok(reps * nt * m, 0);
  std::vector<char> cover(reps * nt * m, 0), cover_ok(reps * nt * m, 0);
  std::vector<char> rej(reps * nk * m, 0), rej_ok(reps * nk * m, 0);
  std::vector<char> failed(reps, 0);

  parallel_for(cfg.reps, cfg.workers, [&](int rep) {
    const std::size_t r = static_cast<std::size_t>(rep);
    try {
      Sample sample = gen_sample(cfg, r);
      SampleEvaluator ev(sample, grid.back());
      std::vector<GridEval> point(ns);
      for (std::size_t s = 0; s < ns; ++s) point[s] = ev.eval(specs[s], grid);

      std::vector<double> rv(static_cast<std::size_t>(cfg.B) * ns * m, 0.0);
      std::vector<char> rok(static_cast<std::size_t>(cfg.B) * ns * m, 0);
      for (int b = 0; b < cfg.B; ++b) {
        Rng rng(stream_seed(cfg.seed, kMcBootTag, r, static_cast<std::uint64_t>(b)));
        Sample rs = resample(sample, rng);
        SampleEvaluator bev(rs, grid.back());
        const std::size_t base = static_cast<std::size_t>(b) * ns * m;
        for (std::size_t s = 0; s < ns; ++s) {
          try {
            GridEval ge = bev.eval(specs[s], grid);
            for (std::size_t i = 0; i < m; ++i) {
              rv[base + s * m + i] = ge.values[i];
              rok[base + s * m + i] = ge.ok[i];
            }
          } catch (const UnidentifiableError&) {
          }
        }
      }

      std::vector<double> vals;
      vals.reserve(static_cast<std::size_t>(cfg.B));
      for (std::size_t ti = 0; ti < nt; ++ti) {
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t slot = (r * nt + ti) * m + i;
          if (!point[ti].ok[i]) continue;
          est[slot] = point[ti].values[i];
          est_ok[slot] = 1;
          vals.clear();
          for (int b = 0; b < cfg.B; ++b) {
            const std::size_t idx =
                static_cast<std::size_t>(b) * ns * m + ti * m + i;
            if (rok[idx]) vals.push_back(rv[idx]);
          }
          if (vals.size() < 2) continue;
          const double se = sample_sd(vals);
          bse[slot] = se;
          bse_ok[slot] = 1;
          // log-transformed Wald CI coverage against the analytic truth
          const double truth = true_value(cfg, targets[ti], grid[i]);
          const double p = point[ti].values[i];
          bool covered;
          if (p > 0.0) {
            const double shift = std::exp(z * se / p);
            covered = (p / shift <= truth) && (truth <= p * shift);
          } else {
            covered = truth == 0.0;
          }
          cover[slot] = covered ? 1 : 0;
          cover_ok[slot] = 1;
        }
      }

      for (std::size_t k = 0; k < nk; ++k) {
        const auto [sa, sb] = test_specs[k];
        for (std::size_t i = 0; i < m; ++i) {
          if (!point[sa].ok[i] || !point[sb].ok[i]) continue;
          vals.clear();
          for (int b = 0; b < cfg.B; ++b) {
            const std::size_t base = static_cast<std::size_t>(b) * ns * m;
            if (rok[base + sa * m + i] && rok[base + sb * m + i])
              vals.push_back(rv[base + sa * m + i] - rv[base + sb * m + i]);
          }
          if (2 * (cfg.B - static_cast<int>(vals.size())) > cfg.B) continue;
          const double sd = sample_sd(vals);
          if (!(sd > 0.0)) continue;
          const double phi =
              std::abs(point[sa].values[i] - point[sb].values[i]) / sd;
          const std::size_t slot = (r * nk + k) * m + i;
          rej[slot] = phi > z ? 1 : 0;
          rej_ok[slot] = 1;
        }
      }
    } catch (const std::exception&) {
      failed[r] = 1;
    }
  });

  int n_failed = 0;
  for (char f : failed) n_failed += f;
  if (20 * n_failed > cfg.reps)
    throw UnidentifiableError("more than 5% of replications failed (" +
                              std::to_string(n_failed) + " of " +
                              std::to_string(cfg.reps) + ")");

  McStudyResult out;
  out.config = cfg;
  out.failed_reps = n_failed;
  std::vector<double> col;
  col.reserve(reps);
  for (std::size_t ti = 0; ti < nt; ++ti) {
    McTable table;
    table.target = targets[ti];
    for (std::size_t i = 0; i < m; ++i) {
      McSummaryRow row;
      row.t = grid[i];
      row.truth = true_value(cfg, targets[ti], grid[i]);
      col.clear();
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t slot = (r * nt + ti) * m + i;
        if (!failed[r] && est_ok[slot]) col.push_back(est[slot]);
      }
      row.reps_used = static_cast<int>(col.size());
      row.bias = col.empty() ? 0.0 : mean(col) - row.truth;
      row.ese_defined = col.size() >= 2;
      row.ese = sample_sd(col);
      col.clear();
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t slot = (r * nt + ti) * m + i;
        if (!failed[r] && bse_ok[slot]) col.push_back(bse[slot]);
      }
      row.bse = col.empty() ? 0.0 : mean(col);
      int cov_n = 0, cov_y = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t slot = (r * nt + ti) * m + i;
        if (!failed[r] && cover_ok[slot]) {
          ++cov_n;
          cov_y += cover[slot];
        }
      }
      row.cp = cov_n > 0 ? static_cast<double>(cov_y) / cov_n : 0.0;
      table.rows.push_back(row);
    }
    out.tables.push_back(std::move(table));
  }

  if (battery) {
    out.has_rejections = true;
    out.rejections.tests = *battery;
    out.rejections.grid = grid;
    out.rejections.rates.assign(nk, std::vector<double>(m, 0.0));
    out.rejections.reps_used.assign(nk, std::vector<int>(m, 0));
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        int n_ok = 0, n_rej = 0;
        for (std::size_t r = 0; r < reps; ++r) {
          const std::size_t slot = (r * nk + k) * m + i;
          if (!failed[r] && rej_ok[slot]) {
            ++n_ok;
            n_rej += rej[slot];
          }
        }
        out.rejections.reps_used[k][i] = n_ok;
        out.rejections.rates[k][i] =
            n_ok > 0 ? static_cast<double>(n_rej) / n_ok : 0.0;
      }
    }
  }

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

}  // namespace gapcr
