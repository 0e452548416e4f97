#include "cablewatch/waveform_io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

namespace cablewatch::wio {

namespace {

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t line,
                       const std::string& msg) {
  throw ParseError(file.string() + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  return out;
}

double parse_double(const std::filesystem::path& file, std::size_t line,
                    std::string_view tok) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    fail(file, line, "not a number: '" + std::string(tok) + "'");
  }
  return v;
}

// Little-endian scalar framing for the packed format.
void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ofstream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void write_reflectogram_csv(const dvec& values, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "sample_index,value\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, values[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + file.string());
}

dvec read_reflectogram_csv(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != "sample_index,value") {
    fail(file, 1, "expected header 'sample_index,value'");
  }
  dvec values;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(file, lineno, "expected two columns");
    values.push_back(parse_double(file, lineno, std::string_view(line).substr(comma + 1)));
  }
  return values;
}

void write_waveform_csv(const Waveform& w, const std::filesystem::path& file) {
  auto out = open_out(file);
  char buf[96];
  std::snprintf(buf, sizeof buf, "# sample_rate_hz=%.17g\n", w.sample_rate_hz);
  out << buf << "sample_index,i_value,q_value\n";
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, w.samples[i].real(),
                  w.samples[i].imag());
    out << buf;
  }
  if (!out) throw IoError("write failed: " + file.string());
}

Waveform read_waveform_csv(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# sample_rate_hz=", 0) != 0) {
    fail(file, 1, "expected '# sample_rate_hz=' comment");
  }
  Waveform w;
  w.sample_rate_hz = parse_double(file, 1, std::string_view(line).substr(17));
  std::size_t lineno = 2;
  if (!std::getline(in, line) || line != "sample_index,i_value,q_value") {
    fail(file, 2, "expected header 'sample_index,i_value,q_value'");
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = (c1 == std::string::npos) ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) fail(file, lineno, "expected three columns");
    const std::string_view sv(line);
    const double re = parse_double(file, lineno, sv.substr(c1 + 1, c2 - c1 - 1));
    const double im = parse_double(file, lineno, sv.substr(c2 + 1));
    w.samples.emplace_back(re, im);
  }
  return w;
}

void write_waveform_cwf(const Waveform& w, std::uint32_t oversampling,
                        const std::filesystem::path& file) {
  auto out = open_out(file);
  out.write("CWF1", 4);
  put_u32(out, oversampling);
  put_f64(out, w.sample_rate_hz);
  put_u64(out, w.samples.size());
  for (const cplx& s : w.samples) {
    put_f64(out, s.real());
    put_f64(out, s.imag());
  }
  if (!out) throw IoError("write failed: " + file.string());
}

CwfData read_waveform_cwf(const std::filesystem::path& file) {
  auto in = open_in(file);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CWF1", 4) != 0) {
    throw ParseError(file.string() + ": not a CWF1 waveform file");
  }
  CwfData d;
  d.oversampling = get_u32(in);
  d.wave.sample_rate_hz = get_f64(in);
  const std::uint64_t n = get_u64(in);
  if (!in) throw ParseError(file.string() + ": truncated header");
  d.wave.samples.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const double re = get_f64(in);
    const double im = get_f64(in);
    d.wave.samples[i] = cplx(re, im);
  }
  if (!in) throw ParseError(file.string() + ": truncated sample data");
  return d;
}

void write_waveform(const Waveform& w, std::uint32_t oversampling,
                    const std::filesystem::path& file) {
  if (file.extension() == ".cwf") {
    write_waveform_cwf(w, oversampling, file);
  } else if (file.extension() == ".csv") {
    write_waveform_csv(w, file);
  } else {
    throw ValidationError("unknown waveform format: " + file.string());
  }
}

Waveform read_waveform(const std::filesystem::path& file) {
  if (file.extension() == ".cwf") return read_waveform_cwf(file).wave;
  if (file.extension() == ".csv") return read_waveform_csv(file);
  throw ValidationError("unknown waveform format: " + file.string());
}

}  // namespace cablewatch::wio
