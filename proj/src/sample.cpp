#include "gapcr/sample.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gapcr/errors.hpp"

namespace gapcr {

namespace {

std::string subject_stage(const std::string& id, int stage) {
  return "subject '" + id + "', stage " + std::to_string(stage);
}

}  // namespace

void Sample::add(SubjectRecord subject) {
  if (subject.records.empty())
    throw ParseError("subject '" + subject.subject_id + "' has no records");
  for (const auto& r : subject.records)
    if (r.cause < 0 || r.cause > num_causes_)
      throw ParseError(subject_stage(subject.subject_id, r.stage) +
                       ": cause " + std::to_string(r.cause) +
                       " exceeds num_causes " + std::to_string(num_causes_));
  subjects_.push_back(std::move(subject));
}

int Sample::max_stage() const {
  int m = 0;
  for (const auto& s : subjects_) m = std::max(m, s.m_stage());
  return m;
}

std::vector<double> Sample::censor_times() const {
  std::vector<double> out;
  out.reserve(subjects_.size());
  for (const auto& s : subjects_) out.push_back(s.censor_time);
  return out;
}

Sample Sample::group_subset(const std::string& label) const {
  Sample out(num_causes_);
  for (const auto& s : subjects_)
    if (s.group == label) out.add(s);
  return out;
}

std::vector<std::string> Sample::group_labels() const {
  std::set<std::string> labels;
  for (const auto& s : subjects_) labels.insert(s.group);
  return {labels.begin(), labels.end()};
}

Sample build_sample(const std::vector<RawEventRow>& rows,
                    const std::map<std::string, double>& censor_times,
                    int num_causes,
                    const std::map<std::string, std::string>& groups) {
  if (num_causes < 1) throw ConfigError("num_causes must be >= 1");

  std::map<std::string, std::vector<RawEventRow>> by_subject;
  for (const auto& row : rows) {
    if (censor_times.find(row.subject_id) == censor_times.end())
      throw ParseError("missing censor time for subject '" + row.subject_id + "'");
    by_subject[row.subject_id].push_back(row);
  }
  // Subjects with a censor time but no event rows contribute a single
  // censored record.
  for (const auto& [id, c] : censor_times) {
    (void)c;
    by_subject.insert({id, {}});
  }

  Sample sample(num_causes);
  sample.reserve(by_subject.size());
  for (auto& [id, subject_rows] : by_subject) {
    const double censor = censor_times.at(id);
    if (!(censor > 0.0))
      throw ParseError("subject '" + id + "': censor time must be positive");

    std::sort(subject_rows.begin(), subject_rows.end(),
              [](const RawEventRow& a, const RawEventRow& b) {
                return a.stage < b.stage;
              });

    SubjectRecord subject;
    subject.subject_id = id;
    subject.censor_time = censor;
    if (auto it = groups.find(id); it != groups.end()) subject.group = it->second;

    double cum = 0.0;
    bool saw_censored = false;
    int expected_stage = 1;
    for (const auto& row : subject_rows) {
      if (saw_censored)
        throw ParseError(subject_stage(id, row.stage) +
                         ": rows after the cause-0 record");
      if (row.stage != expected_stage)
        throw ParseError(subject_stage(id, row.stage) +
                         ": stages must be contiguous from 1 (expected " +
                         std::to_string(expected_stage) + ")");
      if (row.gap_time < 0.0)
        throw ParseError(subject_stage(id, row.stage) + ": negative gap time");
      if (row.cause < 0 || row.cause > num_causes)
        throw ParseError(subject_stage(id, row.stage) + ": cause " +
                         std::to_string(row.cause) + " out of range");
      if (row.cause == 0) {
        // Supplied terminal record; must land on the censor time.
        saw_censored = true;
        double implied = cum + row.gap_time;
        double tol = 1e-9 * std::max(1.0, std::abs(censor));
        if (std::abs(implied - censor) > tol)
          throw ParseError(subject_stage(id, row.stage) +
                           ": cause-0 record ends at " + std::to_string(implied) +
                           " but censor time is " + std::to_string(censor));
        subject.records.push_back({row.stage, censor - cum, censor, 0});
        cum = censor;
      } else {
        if (row.gap_time == 0.0)
          throw ParseError(subject_stage(id, row.stage) +
                           ": event record with zero gap time");
        cum += row.gap_time;
        if (cum > censor)
          throw ParseError(subject_stage(id, row.stage) +
                           ": cumulative time " + std::to_string(cum) +
                           " exceeds censor time " + std::to_string(censor));
        subject.records.push_back({row.stage, row.gap_time, cum, row.cause});
      }
      ++expected_stage;
    }
    if (!saw_censored)
      subject.records.push_back({expected_stage, censor - cum, censor, 0});
    sample.add(std::move(subject));
  }
  if (sample.n() < 1) throw ParseError("no subjects parsed");
  return sample;
}

StepCurve fit_censor_survival(const Sample& sample) {
  if (sample.n() < 1) throw ParseError("empty sample");
  std::vector<double> c = sample.censor_times();
  std::sort(c.begin(), c.end());
  const double n = static_cast<double>(c.size());
  std::vector<double> times, values;
  times.reserve(c.size());
  values.reserve(c.size());
  std::size_t i = 0;
  while (i < c.size()) {
    std::size_t j = i;
    while (j < c.size() && c[j] == c[i]) ++j;
    // value after the atom is the exact count ratio #{C > c_i}/n; strict
    // '>' per the definition of G
    times.push_back(c[i]);
    values.push_back(static_cast<double>(c.size() - j) / n);
    i = j;
  }
  return StepCurve(1.0, std::move(times), std::move(values));
}

double identifiable_tau(const Sample& sample, int stage,
                        std::optional<int> cause) {
  double tau = -1.0;
  for (const auto& s : sample.subjects()) {
    const GapRecord* r = s.record_at(stage);
    if (r == nullptr || r->cause == 0) continue;
    if (cause && r->cause != *cause) continue;
    tau = std::max(tau, r->gap_time);
  }
  if (tau < 0.0) {
    std::string what = "estimand unidentifiable at stage " + std::to_string(stage);
    if (cause) what += " for cause " + std::to_string(*cause);
    what += ": no uncensored observation";
    throw UnidentifiableError(what);
  }
  return tau;
}

}  // namespace gapcr
