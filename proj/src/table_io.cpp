#include "gapcr/table_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gapcr/errors.hpp"
#include "gapcr/version.hpp"

namespace gapcr {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ParseError(context + ": cannot parse number '" + s + "'");
  return v;
}

namespace {

long parse_long(const std::string& s, const std::string& context) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(context + ": cannot parse integer '" + s + "'");
  return v;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t col(const std::string& name, const std::string& what) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ParseError(what + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(std::istream& in, char delim, const std::string& what) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_line(line, delim);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(what + " line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ParseError(what + ": empty input");
  return t;
}

std::string csv_header_line(std::uint64_t seed) {
  return "# gapcr " GAPCR_VERSION " seed=" + std::to_string(seed);
}

json meta_object(std::uint64_t seed) {
  return json{{"artifact", "gapcr"}, {"version", GAPCR_VERSION}, {"seed", seed}};
}

}  // namespace

Sample load_sample_stream(std::istream& events, std::istream* censor,
                          const SampleInputOptions& opts) {
  Table t = read_table(events, opts.delimiter, "events");
  const std::size_t c_id = t.col(opts.id_col, "events");
  const std::size_t c_stage = t.col(opts.stage_col, "events");
  const std::size_t c_gap = t.col(opts.gap_col, "events");
  const std::size_t c_cause = t.col(opts.cause_col, "events");
  std::optional<std::size_t> c_group;
  if (!opts.group_col.empty())
    c_group = t.col(opts.group_col, "events");

  std::vector<RawEventRow> rows;
  rows.reserve(t.rows.size());
  std::map<std::string, std::string> groups;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::string where = "events line " + std::to_string(t.line_numbers[r]);
    RawEventRow row;
    row.subject_id = f[c_id];
    if (row.subject_id.empty()) throw ParseError(where + ": empty subject id");
    row.stage = static_cast<int>(parse_long(f[c_stage], where));
    row.gap_time = parse_double(f[c_gap], where);
    row.cause = static_cast<int>(parse_long(f[c_cause], where));
    if (c_group) groups[row.subject_id] = f[*c_group];
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no subjects parsed");

  std::map<std::string, double> censor_times;
  if (censor != nullptr) {
    Table ct = read_table(*censor, opts.delimiter, "censor table");
    const std::size_t cc_id = ct.col(opts.id_col, "censor table");
    const std::size_t cc_c = ct.col(opts.censor_col, "censor table");
    for (std::size_t r = 0; r < ct.rows.size(); ++r) {
      const std::string where =
          "censor table line " + std::to_string(ct.line_numbers[r]);
      censor_times[ct.rows[r][cc_id]] = parse_double(ct.rows[r][cc_c], where);
    }
  } else {
    // Single long format: the terminal cause-0 row encodes C.
    std::map<std::string, double> cum;
    std::sort(rows.begin(), rows.end(), [](const RawEventRow& a, const RawEventRow& b) {
      if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
      return a.stage < b.stage;
    });
    for (const auto& row : rows) {
      cum[row.subject_id] += row.gap_time;
      if (row.cause == 0) censor_times[row.subject_id] = cum[row.subject_id];
    }
    for (const auto& row : rows)
      if (censor_times.find(row.subject_id) == censor_times.end())
        throw ParseError("subject '" + row.subject_id +
                         "': no cause-0 row and no censor table");
  }
  return build_sample(rows, censor_times, opts.num_causes, groups);
}

Sample load_sample(const std::string& events_path,
                   const std::optional<std::string>& censor_path,
                   const SampleInputOptions& opts) {
  std::ifstream events(events_path);
  if (!events) throw ParseError("cannot open input file '" + events_path + "'");
  if (censor_path) {
    std::ifstream censor(*censor_path);
    if (!censor)
      throw ParseError("cannot open censor file '" + *censor_path + "'");
    return load_sample_stream(events, &censor, opts);
  }
  return load_sample_stream(events, nullptr, opts);
}

void write_sample(std::ostream& out, const Sample& sample,
                  const SampleInputOptions& opts) {
  const char d = opts.delimiter;
  out << opts.id_col << d << opts.stage_col << d << opts.gap_col << d
      << opts.cause_col;
  const bool groups = !opts.group_col.empty();
  if (groups) out << d << opts.group_col;
  out << "\n";
  for (const auto& s : sample.subjects()) {
    for (const auto& r : s.records) {
      out << s.subject_id << d << r.stage << d << format_double(r.gap_time) << d
          << r.cause;
      if (groups) out << d << s.group;
      out << "\n";
    }
  }
}

void write_curve_table(std::ostream& out, const std::vector<EstimateCurve>& curves,
                       std::uint64_t seed, OutputFormat fmt) {
  if (fmt == OutputFormat::Json) {
    json j;
    j["meta"] = meta_object(seed);
    j["curves"] = json::array();
    for (const auto& c : curves) {
      json jc;
      jc["curve_id"] = c.label();
      jc["tau"] = c.tau;
      jc["truncated"] = c.truncated;
      if (c.truncated_at) jc["truncated_at"] = *c.truncated_at;
      jc["all_censored"] = c.all_censored;
      jc["initial_value"] = c.curve.initial_value();
      jc["t"] = c.curve.jump_times();
      jc["value"] = c.curve.values();
      j["curves"].push_back(std::move(jc));
    }
    out << j.dump(2) << "\n";
    return;
  }
  out << csv_header_line(seed) << "\n";
  out << "curve_id,t,value,flag\n";
  for (const auto& c : curves) {
    out << c.label() << ",0," << format_double(c.curve.initial_value()) << ",";
    out << (c.beyond_range(0.0) ? "beyond_tau" : "") << "\n";
    const auto& times = c.curve.jump_times();
    const auto& values = c.curve.values();
    for (std::size_t k = 0; k < times.size(); ++k) {
      out << c.label() << "," << format_double(times[k]) << ","
          << format_double(values[k]) << ","
          << (c.beyond_range(times[k]) ? "beyond_tau" : "") << "\n";
    }
  }
}

namespace {

void summary_row_json(json& arr, const BootstrapSummary& s, std::size_t i) {
  json row;
  row["curve_id"] = s.target.label();
  row["t"] = s.grid[i];
  row["estimate"] = s.point[i];
  row["se"] = s.se[i];
  row["dropped"] = s.dropped[i];
  if (!s.ci_plain_lo.empty()) {
    row["ci_plain_lo"] = s.ci_plain_lo[i];
    row["ci_plain_hi"] = s.ci_plain_hi[i];
  }
  if (!s.ci_log_lo.empty()) {
    row["ci_log_lo"] = s.ci_log_lo[i];
    row["ci_log_hi"] = s.ci_log_hi[i];
    row["ci_log_degenerate"] = s.ci_log_degenerate[i] != 0;
  }
  if (s.has_band && s.in_band[i] && !s.band_excluded[i]) {
    row["band_plain_lo"] = s.band_plain_lo[i];
    row["band_plain_hi"] = s.band_plain_hi[i];
    row["band_log_lo"] = s.band_log_lo[i];
    row["band_log_hi"] = s.band_log_hi[i];
  }
  row["band_point"] = s.from_band_augmentation[i] != 0;
  arr.push_back(std::move(row));
}

}  // namespace

void write_summary_table(std::ostream& out,
                         const std::vector<BootstrapSummary>& summaries,
                         std::uint64_t seed, OutputFormat fmt) {
  if (fmt == OutputFormat::Json) {
    json j;
    j["meta"] = meta_object(seed);
    for (const auto& s : summaries) {
      j["v_quantile"][s.target.label()] = s.has_band ? json(s.v_quantile) : json();
      if (!j.contains("rows")) j["rows"] = json::array();
      for (std::size_t i = 0; i < s.grid.size(); ++i)
        summary_row_json(j["rows"], s, i);
    }
    out << j.dump(2) << "\n";
    return;
  }
  out << csv_header_line(seed) << "\n";
  out << "curve_id,t,estimate,se,ci_plain_lo,ci_plain_hi,ci_log_lo,ci_log_hi,"
         "band_lo,band_hi,band_log_lo,band_log_hi,v_quantile,dropped,flag\n";
  for (const auto& s : summaries) {
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      out << s.target.label() << "," << format_double(s.grid[i]) << ","
          << format_double(s.point[i]) << "," << format_double(s.se[i]) << ",";
      if (!s.ci_plain_lo.empty())
        out << format_double(s.ci_plain_lo[i]) << ","
            << format_double(s.ci_plain_hi[i]) << ",";
      else
        out << ",,";
      if (!s.ci_log_lo.empty())
        out << format_double(s.ci_log_lo[i]) << ","
            << format_double(s.ci_log_hi[i]) << ",";
      else
        out << ",,";
      const bool banded = s.has_band && s.in_band[i] && !s.band_excluded[i];
      if (banded)
        out << format_double(s.band_plain_lo[i]) << ","
            << format_double(s.band_plain_hi[i]) << ","
            << format_double(s.band_log_lo[i]) << ","
            << format_double(s.band_log_hi[i]) << ","
            << format_double(s.v_quantile) << ",";
      else
        out << ",,,,,";
      out << s.dropped[i] << ",";
      std::string flag;
      if (!s.ci_log_degenerate.empty() && s.ci_log_degenerate[i])
        flag = "log_degenerate";
      if (s.has_band && s.in_band[i] && s.band_excluded[i])
        flag += flag.empty() ? "band_excluded" : ";band_excluded";
      if (s.from_band_augmentation[i])
        flag += flag.empty() ? "band_point" : ";band_point";
      out << flag << "\n";
    }
  }
}

void write_tests_table(std::ostream& out, const std::vector<TestResult>& results,
                       std::uint64_t seed, OutputFormat fmt) {
  if (fmt == OutputFormat::Json) {
    json j;
    j["meta"] = meta_object(seed);
    j["tests"] = json::array();
    for (const auto& r : results) {
      json row;
      row["kind"] = to_string(r.kind);
      row["functional"] = to_string(r.functional);
      if (r.variant) row["variant"] = to_string(*r.variant);
      row["stage"] = r.stage;
      if (r.kind == TestKind::Stage) row["stage2"] = r.stage2;
      if (r.cause) row["cause"] = r.cause;
      if (r.prev_cause) row["prev_cause"] = r.prev_cause;
      if (!r.group1.empty()) row["group1"] = r.group1;
      if (!r.group2.empty()) row["group2"] = r.group2;
      row["t"] = r.t;
      row["statistic"] = r.inconclusive ? json() : json(r.statistic);
      row["p_value"] = r.inconclusive ? json() : json(r.p_value);
      row["reject"] = r.reject;
      row["inconclusive"] = r.inconclusive;
      row["alpha"] = r.alpha;
      row["B"] = r.B;
      row["dropped"] = r.dropped;
      j["tests"].push_back(std::move(row));
    }
    out << j.dump(2) << "\n";
    return;
  }
  out << csv_header_line(seed) << "\n";
  out << "kind,functional,variant,stage,stage2,cause,prev_cause,group1,group2,"
         "t,statistic,p_value,reject,alpha,B,dropped,flag\n";
  for (const auto& r : results) {
    out << to_string(r.kind) << "," << to_string(r.functional) << ","
        << (r.variant ? to_string(*r.variant) : "") << "," << r.stage << ","
        << (r.kind == TestKind::Stage ? std::to_string(r.stage2) : "") << ","
        << (r.cause ? std::to_string(r.cause) : "") << ","
        << (r.prev_cause ? std::to_string(r.prev_cause) : "") << ","
        << r.group1 << "," << r.group2 << "," << format_double(r.t) << ",";
    if (r.inconclusive)
      out << ",,false," ;
    else
      out << format_double(r.statistic) << "," << format_double(r.p_value)
          << "," << (r.reject ? "true" : "false") << ",";
    out << format_double(r.alpha) << "," << r.B << "," << r.dropped << ","
        << (r.inconclusive ? "inconclusive" : "") << "\n";
  }
}

void write_mc_summary(std::ostream& out, const McStudyResult& result,
                      OutputFormat fmt) {
  const SimConfig& cfg = result.config;
  if (fmt == OutputFormat::Json) {
    json j;
    j["meta"] = meta_object(cfg.seed);
    j["rows"] = json::array();
    for (const auto& table : result.tables) {
      for (const auto& row : table.rows) {
        json r;
        r["target"] = table.target.label();
        r["n"] = cfg.n;
        r["theta"] = cfg.theta;
        r["t"] = row.t;
        r["truth"] = row.truth;
        r["bias"] = row.bias;
        r["ese"] = row.ese_defined ? json(row.ese) : json();
        r["bse"] = row.bse;
        r["cp"] = row.cp;
        r["reps_used"] = row.reps_used;
        j["rows"].push_back(std::move(r));
      }
    }
    out << j.dump(2) << "\n";
    return;
  }
  out << csv_header_line(cfg.seed) << "\n";
  out << "target,n,theta,t,truth,bias,ese,bse,cp,reps_used\n";
  for (const auto& table : result.tables) {
    for (const auto& row : table.rows) {
      out << table.target.label() << "," << cfg.n << ","
          << format_double(cfg.theta) << "," << format_double(row.t) << ","
          << format_double(row.truth) << "," << format_double(row.bias) << ","
          << (row.ese_defined ? format_double(row.ese) : std::string()) << ","
          << format_double(row.bse) << "," << format_double(row.cp) << ","
          << row.reps_used << "\n";
    }
  }
}

void write_mc_rejections(std::ostream& out, const McStudyResult& result,
                         OutputFormat fmt) {
  const SimConfig& cfg = result.config;
  const RejectionTable& rt = result.rejections;
  if (fmt == OutputFormat::Json) {
    json j;
    j["meta"] = meta_object(cfg.seed);
    j["rows"] = json::array();
    for (std::size_t i = 0; i < rt.grid.size(); ++i) {
      json r;
      r["n"] = cfg.n;
      r["theta"] = cfg.theta;
      r["t"] = rt.grid[i];
      for (std::size_t k = 0; k < rt.tests.size(); ++k)
        r[rt.tests[k].label()] = rt.rates[k][i];
      j["rows"].push_back(std::move(r));
    }
    out << j.dump(2) << "\n";
    return;
  }
  out << csv_header_line(cfg.seed) << "\n";
  out << "n,theta,t";
  for (const auto& t : rt.tests) out << "," << t.label();
  out << "\n";
  for (std::size_t i = 0; i < rt.grid.size(); ++i) {
    out << cfg.n << "," << format_double(cfg.theta) << ","
        << format_double(rt.grid[i]);
    for (std::size_t k = 0; k < rt.tests.size(); ++k)
      out << "," << format_double(rt.rates[k][i]);
    out << "\n";
  }
}

void write_mc_manifest(std::ostream& out, const McStudyResult& result) {
  const SimConfig& cfg = result.config;
  json j;
  j["meta"] = meta_object(cfg.seed);
  j["config"] = {{"theta", cfg.theta},
                 {"alpha_j", cfg.alpha_j},
                 {"censor_upper", cfg.censor_upper},
                 {"n", cfg.n},
                 {"reps", cfg.reps},
                 {"B", cfg.B},
                 {"grid", cfg.effective_grid()},
                 {"max_stage", cfg.max_stage},
                 {"alpha_level", cfg.alpha_level}};
  j["failed_reps"] = result.failed_reps;
  j["wall_seconds"] = result.wall_seconds;
  out << j.dump(2) << "\n";
}

}  // namespace gapcr
