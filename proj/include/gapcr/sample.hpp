#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapcr/step_curve.hpp"

namespace gapcr {

// One observed stage of a subject.  cum_time is the prefix sum of gap
// times; cause 0 marks the terminal censored record.
struct GapRecord {
  int stage = 0;
  double gap_time = 0.0;
  double cum_time = 0.0;
  int cause = 0;
};

// A subject's censoring time and its ordered stage records.  Exactly the
// last record has cause 0 and cum_time == censor_time.
struct SubjectRecord {
  std::string subject_id;
  double censor_time = 0.0;
  std::vector<GapRecord> records;
  std::string group;  // opaque label, used only by the group test

  int m_stage() const { return static_cast<int>(records.size()); }
  const GapRecord* record_at(int stage) const {
    if (stage < 1 || stage > m_stage()) return nullptr;
    return &records[static_cast<std::size_t>(stage - 1)];
  }
};

class Sample {
public:
  explicit Sample(int num_causes = 2) : num_causes_(num_causes) {}

  void add(SubjectRecord subject);
  void reserve(std::size_t n) { subjects_.reserve(n); }

  int n() const { return static_cast<int>(subjects_.size()); }
  int num_causes() const { return num_causes_; }
  const std::vector<SubjectRecord>& subjects() const { return subjects_; }

  int max_stage() const;
  std::vector<double> censor_times() const;

  // Subsample holding the subjects whose group label equals `label`.
  Sample group_subset(const std::string& label) const;
  std::vector<std::string> group_labels() const;

private:
  std::vector<SubjectRecord> subjects_;
  int num_causes_;
};

struct RawEventRow {
  std::string subject_id;
  int stage = 0;
  double gap_time = 0.0;
  int cause = 0;
};

// Assembles a Sample from long-format rows and a censor-time table.
// cum_time is computed by prefix sum; a terminal censored record is
// appended when not supplied.  Violations are rejected with a diagnostic
// naming subject and stage.  Subjects present only in censor_times yield a
// single censored record.
Sample build_sample(const std::vector<RawEventRow>& rows,
                    const std::map<std::string, double>& censor_times,
                    int num_causes = 2,
                    const std::map<std::string, std::string>& groups = {});

// Empirical censoring survival G(t) = n^-1 sum I(C_i > t).
StepCurve fit_censor_survival(const Sample& sample);

// tau_k^(j): the largest uncensored type-k gap at stage j, or the largest
// uncensored gap of any cause when `cause` is absent.  Throws
// UnidentifiableError when no qualifying observation exists.
double identifiable_tau(const Sample& sample, int stage,
                        std::optional<int> cause = std::nullopt);

}  // namespace gapcr
