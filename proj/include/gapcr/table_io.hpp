#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gapcr/inference.hpp"
#include "gapcr/sample.hpp"
#include "gapcr/simulation.hpp"

namespace gapcr {

enum class OutputFormat { Csv, Json };

// Column-name mapping for long-format input (one row per subject-stage).
struct SampleInputOptions {
  std::string id_col = "subject_id";
  std::string stage_col = "stage";
  std::string gap_col = "gap_time";
  std::string cause_col = "cause";
  std::string censor_col = "censor_time";
  std::string group_col;  // optional
  char delimiter = ',';
  int num_causes = 2;
};

// Loads a sample from a delimiter-separated events table.  When
// censor_path is absent, each subject's terminal cause-0 row encodes the
// censor time; otherwise the companion table (id_col, censor_col) supplies
// it.  Parse failures carry line numbers.
Sample load_sample(const std::string& events_path,
                   const std::optional<std::string>& censor_path,
                   const SampleInputOptions& opts);

Sample load_sample_stream(std::istream& events, std::istream* censor,
                          const SampleInputOptions& opts);

// Locale-independent shortest round-trip formatting.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);

// Serializes a sample back to the long format (terminal cause-0 rows
// encode the censor times).
void write_sample(std::ostream& out, const Sample& sample,
                  const SampleInputOptions& opts);

// Writers; every file starts with a line naming artifact version and seed
// (a comment line for CSV, a metadata object for JSON).
void write_curve_table(std::ostream& out, const std::vector<EstimateCurve>& curves,
                       std::uint64_t seed, OutputFormat fmt);
void write_summary_table(std::ostream& out,
                         const std::vector<BootstrapSummary>& summaries,
                         std::uint64_t seed, OutputFormat fmt);
void write_tests_table(std::ostream& out, const std::vector<TestResult>& results,
                       std::uint64_t seed, OutputFormat fmt);
void write_mc_summary(std::ostream& out, const McStudyResult& result,
                      OutputFormat fmt);
void write_mc_rejections(std::ostream& out, const McStudyResult& result,
                         OutputFormat fmt);
void write_mc_manifest(std::ostream& out, const McStudyResult& result);

}  // namespace gapcr
