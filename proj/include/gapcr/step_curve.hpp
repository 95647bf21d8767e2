#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace gapcr {

// Right-continuous piecewise-constant function.  value(t) equals
// values()[k] for the largest k with jump_times()[k] <= t, and
// initial_value() before the first jump.  left_value(t) is the limit from
// the left, needed for the S(u-) terms of the cumulative hazard.
class StepCurve {
public:
  StepCurve() = default;
  StepCurve(double initial_value, std::vector<double> jump_times,
            std::vector<double> values);

  // Builds a curve from (time, increment) pairs; increments at equal times
  // are summed, so the result is independent of input order.
  static StepCurve from_increments(
      double initial_value, std::vector<std::pair<double, double>> increments);

  double value(double t) const;
  double left_value(double t) const;
  double final_value() const;

  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }

private:
  double initial_ = 0.0;
  std::vector<double> times_;   // strictly increasing
  std::vector<double> values_;  // value on [times_[k], times_[k+1])
};

}  // namespace gapcr
