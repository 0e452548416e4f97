#include "cablewatch/sparam.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cablewatch/kernels.hpp"

namespace cablewatch::sparam {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t line,
                       const std::string& what) {
  throw ParseError(file.string() + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& tok, const std::filesystem::path& file,
                 std::size_t line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end) fail(file, line, "bad number '" + tok + "'");
  return v;
}

}  // namespace

void SParamRecord::validate() const {
  if (freq_hz.empty()) throw ValidationError("s-parameter record is empty");
  for (std::size_t i = 1; i < freq_hz.size(); ++i) {
    if (!(freq_hz[i] > freq_hz[i - 1])) {
      throw ValidationError("s-parameter grid must be strictly increasing");
    }
  }
  const std::size_t n = freq_hz.size();
  if (s11.size() != n || s21.size() != n || s12.size() != n || s22.size() != n) {
    throw ValidationError("s-parameter vectors must match the grid");
  }
}

SParamRecord parse_touchstone(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());

  double freq_scale = 1.0e9;  // touchstone default unit is GHz
  enum class Fmt { ma, db, ri } fmt = Fmt::ma;
  bool saw_options = false;

  SParamRecord rec;
  std::vector<double> pending;  // numeric backlog; 9 values complete a row
  std::size_t row_start_line = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto bang = raw.find('!');
    if (bang != std::string::npos) raw.erase(bang);

    std::istringstream ls(raw);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank or comment-only

    if (tok == "#") {
      if (saw_options) fail(file, line_no, "duplicate option line");
      saw_options = true;
      bool saw_param = false;
      std::string opt;
      while (ls >> opt) {
        const std::string o = lower(opt);
        if (o == "hz") freq_scale = 1.0;
        else if (o == "khz") freq_scale = 1.0e3;
        else if (o == "mhz") freq_scale = 1.0e6;
        else if (o == "ghz") freq_scale = 1.0e9;
        else if (o == "ma") fmt = Fmt::ma;
        else if (o == "db") fmt = Fmt::db;
        else if (o == "ri") fmt = Fmt::ri;
        else if (o == "s") saw_param = true;
        else if (o == "r") { if (!(ls >> opt)) fail(file, line_no, "option R needs a value"); }
        else fail(file, line_no, "unknown option '" + opt + "'");
      }
      if (!saw_param) fail(file, line_no, "only S-parameter files are supported");
      continue;
    }

    if (!saw_options) fail(file, line_no, "data before the option line");
    if (pending.empty()) row_start_line = line_no;
    // First token is already consumed; parse it and the rest of the line.
    pending.push_back(to_double(tok, file, line_no));
    while (ls >> tok) pending.push_back(to_double(tok, file, line_no));

    while (pending.size() >= 9) {
      const double f = pending[0] * freq_scale;
      if (!rec.freq_hz.empty() && f <= rec.freq_hz.back()) {
        fail(file, row_start_line, "frequencies must be strictly increasing");
      }
      rec.freq_hz.push_back(f);
      auto pair_at = [&](std::size_t i) -> cplx {
        const double a = pending[1 + 2 * i], b = pending[2 + 2 * i];
        switch (fmt) {
          case Fmt::ri: return {a, b};
          case Fmt::ma:
            return std::polar(a, b * std::numbers::pi / 180.0);
          case Fmt::db:
            return std::polar(std::pow(10.0, a / 20.0), b * std::numbers::pi / 180.0);
        }
        return {};
      };
      // Two-port column order: S11 S21 S12 S22.
      rec.s11.push_back(pair_at(0));
      rec.s21.push_back(pair_at(1));
      rec.s12.push_back(pair_at(2));
      rec.s22.push_back(pair_at(3));
      pending.erase(pending.begin(), pending.begin() + 9);
    }
  }

  if (!pending.empty()) {
    fail(file, row_start_line, "incomplete record: a two-port row needs 9 numbers");
  }
  if (rec.freq_hz.empty()) {
    fail(file, line_no == 0 ? 1 : line_no, "file has no data rows");
  }
  rec.validate();
  return rec;
}

void write_touchstone(const SParamRecord& rec, const std::filesystem::path& file) {
  rec.validate();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << "! two-port capture";
  if (!rec.load_tag.empty()) out << " (load: " << rec.load_tag << ")";
  out << "\n# HZ S RI R 50\n";
  char buf[512];
  for (std::size_t i = 0; i < rec.freq_hz.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  rec.freq_hz[i],
                  rec.s11[i].real(), rec.s11[i].imag(),
                  rec.s21[i].real(), rec.s21[i].imag(),
                  rec.s12[i].real(), rec.s12[i].imag(),
                  rec.s22[i].real(), rec.s22[i].imag());
    out << buf;
  }
  if (!out) throw IoError("short write to " + file.string());
}

void CfrTrace::validate() const {
  if (freq_hz.size() != h.size() || freq_hz.empty()) {
    throw ValidationError("cfr trace is empty or inconsistent");
  }
}

CfrTrace cfr_from_sparams(const SParamRecord& rec) {
  rec.validate();
  CfrTrace t;
  t.freq_hz = rec.freq_hz;
  t.h = rec.s21;
  t.psi = kernels::sum_abs_c128(t.h.data(), t.h.size()) / static_cast<double>(t.h.size());
  return t;
}

CfrTrace average_cfr(const std::vector<CfrTrace>& traces) {
  if (traces.empty()) throw ValidationError("no traces to average");
  traces.front().validate();
  const dvec& grid = traces.front().freq_hz;
  CfrTrace avg;
  avg.freq_hz = grid;
  avg.h.assign(grid.size(), cplx(0.0, 0.0));
  for (const auto& t : traces) {
    t.validate();
    if (t.freq_hz != grid) throw ValidationError("traces use different grids");
    for (std::size_t i = 0; i < grid.size(); ++i) avg.h[i] += t.h[i];
  }
  const double inv = 1.0 / static_cast<double>(traces.size());
  for (auto& v : avg.h) v *= inv;
  avg.psi =
      kernels::sum_abs_c128(avg.h.data(), avg.h.size()) / static_cast<double>(avg.h.size());
  return avg;
}

thresholds::DeviationModel derive_thresholds(const dvec& healthy_psi,
                                             const dvec& small_psi,
                                             const dvec& large_psi) {
  return thresholds::calibrate_deviation_model(healthy_psi, small_psi, large_psi,
                                               thresholds::DeviationSense::drop_is_bad);
}

SparamClassification classify_sparam(double psi, const thresholds::DeviationModel& model) {
  SparamClassification c;
  c.psi = psi;
  c.deviation = model.deviation(psi);
  c.verdict = thresholds::classify_deviation(c.deviation, model.thresholds);
  c.flag = thresholds::flag_for(c.verdict);
  return c;
}

}  // namespace cablewatch::sparam
