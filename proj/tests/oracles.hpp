#pragma once

// Brute-force reference implementations used as oracles.  Everything here
// recomputes the estimators directly from the definitional sums over raw
// observation tuples and must stay independent of the library's estimator
// code paths.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gapcr/sample.hpp"

namespace oracle {

struct Subj {
  double censor = 0.0;
  std::vector<double> gap;
  std::vector<double> cum;
  std::vector<int> cause;
  int stages() const { return static_cast<int>(gap.size()); }
};

inline Subj from(const gapcr::SubjectRecord& s) {
  Subj out;
  out.censor = s.censor_time;
  for (const auto& r : s.records) {
    out.gap.push_back(r.gap_time);
    out.cum.push_back(r.cum_time);
    out.cause.push_back(r.cause);
  }
  return out;
}

inline std::vector<Subj> from_sample(const gapcr::Sample& sample) {
  std::vector<Subj> out;
  for (const auto& s : sample.subjects()) out.push_back(from(s));
  return out;
}

inline double ghat(const std::vector<Subj>& s, double t) {
  int c = 0;
  for (const auto& x : s)
    if (x.censor > t) ++c;
  return static_cast<double>(c) / static_cast<double>(s.size());
}

inline double ghat_left(const std::vector<Subj>& s, double t) {
  int c = 0;
  for (const auto& x : s)
    if (x.censor >= t) ++c;
  return static_cast<double>(c) / static_cast<double>(s.size());
}

inline double prev_cum(const Subj& x, int j) {
  return j >= 2 ? x.cum[static_cast<std::size_t>(j - 2)] : 0.0;
}

// F_k^(j)(t) = n^-1 sum_i I(T_ij <= t, cause k) / G(Y_ij)
inline double cif(const std::vector<Subj>& s, int j, int k, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] == k && x.gap[q] <= t) acc += 1.0 / ghat(s, x.cum[q]);
  }
  return acc / static_cast<double>(s.size());
}

inline double cif_left(const std::vector<Subj>& s, int j, int k, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] == k && x.gap[q] < t) acc += 1.0 / ghat(s, x.cum[q]);
  }
  return acc / static_cast<double>(s.size());
}

inline double surv6a(const std::vector<Subj>& s, int j, double t, int K,
                     bool floor_at_zero) {
  double v = 1.0;
  for (int k = 1; k <= K; ++k) v -= cif(s, j, k, t);
  return floor_at_zero ? std::max(v, 0.0) : v;
}

inline double surv6a_left(const std::vector<Subj>& s, int j, double t, int K) {
  double v = 1.0;
  for (int k = 1; k <= K; ++k) v -= cif_left(s, j, k, t);
  return v;
}

// S^(j)(t) = n^-1 sum_i I(T_ij > t) / G(Y_{i(j-1)} + t)
inline double surv6b(const std::vector<Subj>& s, int j, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.gap[q] > t) acc += 1.0 / ghat(s, prev_cum(x, j) + t);
  }
  return acc / static_cast<double>(s.size());
}

inline double surv6b_left(const std::vector<Subj>& s, int j, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.gap[q] >= t) acc += 1.0 / ghat_left(s, prev_cum(x, j) + t);
  }
  return acc / static_cast<double>(s.size());
}

// S^(j)(t) = n^-1 sum_i I(T_ij > t, cause != 0) / G(Y_ij)
inline double surv6d(const std::vector<Subj>& s, int j, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] != 0 && x.gap[q] > t) acc += 1.0 / ghat(s, x.cum[q]);
  }
  return acc / static_cast<double>(s.size());
}

inline double surv6d_left(const std::vector<Subj>& s, int j, double t) {
  double acc = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] != 0 && x.gap[q] >= t) acc += 1.0 / ghat(s, x.cum[q]);
  }
  return acc / static_cast<double>(s.size());
}

inline std::vector<double> event_gaps(const std::vector<Subj>& s, int j,
                                      int k /* 0 = any nonzero cause */) {
  std::set<double> vs;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] != 0 && (k == 0 || x.cause[q] == k)) vs.insert(x.gap[q]);
  }
  return {vs.begin(), vs.end()};
}

// Product-limit over the weighted conditional hazard increments.
inline double surv6c(const std::vector<Subj>& s, int j, double t) {
  double prod = 1.0;
  for (double v : event_gaps(s, j, 0)) {
    if (v > t) break;
    double num = 0.0, den = 0.0;
    for (const auto& x : s) {
      if (x.stages() < j) continue;
      const std::size_t q = static_cast<std::size_t>(j - 1);
      if (x.gap[q] >= v) {
        const double w = 1.0 / ghat(s, prev_cum(x, j) + v);
        den += w;
        if (x.gap[q] == v && x.cause[q] != 0) num += w;
      }
    }
    prod *= 1.0 - num / den;
  }
  return prod;
}

inline double surv6c_left(const std::vector<Subj>& s, int j, double t) {
  double prod = 1.0;
  for (double v : event_gaps(s, j, 0)) {
    if (v >= t) break;
    double num = 0.0, den = 0.0;
    for (const auto& x : s) {
      if (x.stages() < j) continue;
      const std::size_t q = static_cast<std::size_t>(j - 1);
      if (x.gap[q] >= v) {
        const double w = 1.0 / ghat(s, prev_cum(x, j) + v);
        den += w;
        if (x.gap[q] == v && x.cause[q] != 0) num += w;
      }
    }
    prod *= 1.0 - num / den;
  }
  return prod;
}

enum class SurvKind { A, B, C, D };

inline double surv(const std::vector<Subj>& s, int j, double t, SurvKind v, int K) {
  switch (v) {
    case SurvKind::A: return surv6a(s, j, t, K, true);
    case SurvKind::B: return surv6b(s, j, t);
    case SurvKind::C: return surv6c(s, j, t);
    case SurvKind::D: return surv6d(s, j, t);
  }
  return 0.0;
}

inline double surv_left(const std::vector<Subj>& s, int j, double t, SurvKind v,
                        int K) {
  switch (v) {
    case SurvKind::A: return std::max(surv6a_left(s, j, t, K), 0.0);
    case SurvKind::B: return surv6b_left(s, j, t);
    case SurvKind::C: return surv6c_left(s, j, t);
    case SurvKind::D: return surv6d_left(s, j, t);
  }
  return 0.0;
}

// Lambda_k^(j)(t) = sum_{u <= t} dF_k(u) / S(u-)
inline double cumcsh(const std::vector<Subj>& s, int j, int k, double t,
                     SurvKind v, int K) {
  double acc = 0.0;
  for (double u : event_gaps(s, j, k)) {
    if (u > t) break;
    double df = 0.0;
    for (const auto& x : s) {
      if (x.stages() < j) continue;
      const std::size_t q = static_cast<std::size_t>(j - 1);
      if (x.cause[q] == k && x.gap[q] == u) df += 1.0 / ghat(s, x.cum[q]);
    }
    df /= static_cast<double>(s.size());
    const double s_left = surv_left(s, j, u, v, K);
    if (s_left <= 0.0) break;
    acc += df / s_left;
  }
  return acc;
}

// F_{k|l}^(j)(t) = [n^-1 sum I(T_ij <= t, cause k, prev cause l)/G(Y_ij)] / pi_l
inline double cond_cif(const std::vector<Subj>& s, int j, int k, int l, double t) {
  double num = 0.0;
  for (const auto& x : s) {
    if (x.stages() < j) continue;
    const std::size_t q = static_cast<std::size_t>(j - 1);
    if (x.cause[q] == k && x.cause[q - 1] == l && x.gap[q] <= t)
      num += 1.0 / ghat(s, x.cum[q]);
  }
  num /= static_cast<double>(s.size());
  double t_max = -1.0;
  for (const auto& x : s) {
    if (x.stages() < j - 1) continue;
    const std::size_t q = static_cast<std::size_t>(j - 2);
    if (x.cause[q] == l) t_max = std::max(t_max, x.gap[q]);
  }
  const double pi = cif(s, j - 1, l, t_max);
  return num / pi;
}

// Standard Kaplan-Meier on (time, event) pairs; reference for the
// single-cause reductions.
inline double km(std::vector<std::pair<double, int>> data, double t) {
  std::sort(data.begin(), data.end());
  double prod = 1.0;
  std::size_t i = 0;
  while (i < data.size()) {
    const double v = data[i].first;
    if (v > t) break;
    int d = 0, r = 0;
    for (const auto& [u, e] : data)
      if (u >= v) {
        ++r;
        if (u == v && e != 0) ++d;
      }
    if (d > 0) prod *= 1.0 - static_cast<double>(d) / static_cast<double>(r);
    while (i < data.size() && data[i].first == v) ++i;
  }
  return prod;
}

}  // namespace oracle
