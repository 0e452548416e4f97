#include "cablewatch/snr.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cablewatch/kernels.hpp"

namespace cablewatch::snr {

namespace {

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t row,
                       const std::string& what) {
  throw ParseError(file.string() + ": row " + std::to_string(row) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
  }
  return out;
}

double to_double(const std::string& tok, const std::filesystem::path& file, std::size_t row) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    fail(file, row, "bad number '" + tok + "'");
  }
  return v;
}

long to_long(const std::string& tok, const std::filesystem::path& file, std::size_t row) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    fail(file, row, "bad integer '" + tok + "'");
  }
  return v;
}

}  // namespace

void SnrTrace::validate() const {
  if (carrier_hz.empty()) throw ValidationError("snr trace is empty");
  if (carrier_hz.size() != snr_db.size()) {
    throw ValidationError("snr trace columns disagree in length");
  }
  for (std::size_t i = 1; i < carrier_hz.size(); ++i) {
    if (!(carrier_hz[i] > carrier_hz[i - 1])) {
      throw ValidationError("carriers must be strictly increasing");
    }
  }
  if (end_tag != "near" && end_tag != "far") {
    throw ValidationError("end tag must be 'near' or 'far'");
  }
}

std::vector<SnrTrace> parse_snr_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());

  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) fail(file, 1, "empty file");
  ++row;
  const auto header = split_csv(line);
  const std::vector<std::string> expect = {"carrier_hz", "snr_db", "end", "instant", "load_w"};
  if (header != expect) {
    fail(file, 1, "header must be carrier_hz,snr_db,end,instant,load_w");
  }

  // Traces keyed by (end, instant), assembled in first-seen order.
  std::vector<SnrTrace> traces;
  std::map<std::pair<std::string, long>, std::size_t> index;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cols = split_csv(line);
    if (cols.size() != 5) fail(file, row, "expected 5 columns");
    const double carrier = to_double(cols[0], file, row);
    const double snr_v = to_double(cols[1], file, row);
    const std::string& end = cols[2];
    if (end != "near" && end != "far") fail(file, row, "end must be 'near' or 'far'");
    const long instant = to_long(cols[3], file, row);
    const double load = to_double(cols[4], file, row);

    const auto key = std::make_pair(end, instant);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, traces.size());
      SnrTrace t;
      t.end_tag = end;
      t.instant_id = static_cast<int>(instant);
      t.load_w = load;
      traces.push_back(std::move(t));
      it = index.find(key);
    }
    SnrTrace& t = traces[it->second];
    if (!t.carrier_hz.empty() && carrier <= t.carrier_hz.back()) {
      fail(file, row, "carriers within a trace must be strictly increasing");
    }
    if (load != t.load_w) fail(file, row, "load changed within one trace");
    t.carrier_hz.push_back(carrier);
    t.snr_db.push_back(snr_v);
  }
  if (traces.empty()) fail(file, row, "file has no data rows");
  for (auto& t : traces) t.validate();
  return traces;
}

void write_snr_csv(const std::vector<SnrTrace>& traces, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << "carrier_hz,snr_db,end,instant,load_w\n";
  char buf[256];
  for (const auto& t : traces) {
    t.validate();
    for (std::size_t i = 0; i < t.carrier_hz.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%d,%.17g\n", t.carrier_hz[i],
                    t.snr_db[i], t.end_tag.c_str(), t.instant_id, t.load_w);
      out << buf;
    }
  }
  if (!out) throw IoError("short write to " + file.string());
}

SnrSummary summarize_snr(const SnrTrace& trace) {
  trace.validate();
  SnrSummary s;
  s.carriers = trace.snr_db.size();
  s.psi = kernels::sum_f64(trace.snr_db.data(), trace.snr_db.size()) /
          static_cast<double>(trace.snr_db.size());
  return s;
}

thresholds::DeviationModel derive_snr_thresholds(const dvec& healthy_psi,
                                                 const dvec& small_psi,
                                                 const dvec& large_psi) {
  return thresholds::calibrate_deviation_model(healthy_psi, small_psi, large_psi,
                                               thresholds::DeviationSense::drop_is_bad);
}

SnrClassification classify_snr(double psi, const thresholds::DeviationModel& model) {
  SnrClassification c;
  c.psi = psi;
  c.deviation = model.deviation(psi);
  c.verdict = thresholds::classify_deviation(c.deviation, model.thresholds);
  c.flag = thresholds::flag_for(c.verdict);
  return c;
}

}  // namespace cablewatch::snr
