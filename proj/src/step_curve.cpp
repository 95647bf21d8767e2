#include "gapcr/step_curve.hpp"

#include <algorithm>

#include "gapcr/errors.hpp"

namespace gapcr {

StepCurve::StepCurve(double initial_value, std::vector<double> jump_times,
                     std::vector<double> values)
    : initial_(initial_value),
      times_(std::move(jump_times)),
      values_(std::move(values)) {
  if (times_.size() != values_.size())
    throw ConfigError("StepCurve: jump_times and values differ in length");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k - 1] < times_[k]))
      throw ConfigError("StepCurve: jump times must be strictly increasing");
}

StepCurve StepCurve::from_increments(
    double initial_value, std::vector<std::pair<double, double>> increments) {
  std::sort(increments.begin(), increments.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> times;
  std::vector<double> values;
  times.reserve(increments.size());
  values.reserve(increments.size());
  double level = initial_value;
  std::size_t i = 0;
  while (i < increments.size()) {
    const double t = increments[i].first;
    double delta = 0.0;
    while (i < increments.size() && increments[i].first == t) {
      delta += increments[i].second;
      ++i;
    }
    level += delta;
    times.push_back(t);
    values.push_back(level);
  }
  StepCurve out;
  out.initial_ = initial_value;
  out.times_ = std::move(times);
  out.values_ = std::move(values);
  return out;
}

double StepCurve::value(double t) const {
  // number of jumps at or before t
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::left_value(double t) const {
  // number of jumps strictly before t
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::final_value() const {
  return values_.empty() ? initial_ : values_.back();
}

}  // namespace gapcr
