#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "cablewatch/snr.hpp"
#include "cablewatch/types.hpp"

using namespace cablewatch;
using namespace cablewatch::snr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cw-snr-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

fs::path write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
  return file;
}

SnrTrace demo_trace(const std::string& end, int instant, double load) {
  SnrTrace t;
  t.end_tag = end;
  t.instant_id = instant;
  t.load_w = load;
  t.carrier_hz = {2.0e6, 3.0e6, 4.0e6};
  t.snr_db = {40.0, 42.0, 44.0};
  return t;
}

}  // namespace

TEST_CASE("csv parsing groups rows into traces per end and instant") {
  TempDir tmp;
  const auto f = write_text(tmp.path / "mix.csv",
                            "carrier_hz,snr_db,end,instant,load_w\n"
                            "2e6,40.5,near,0,121\n"
                            "2e6,39.5,far,0,121\n"
                            "3e6,41.5,near,0,121\n"
                            "\n"
                            "3e6,38.5,far,0,121\n"
                            "2e6,37.0,near,1,150\n");
  const auto traces = parse_snr_csv(f);
  REQUIRE(traces.size() == 3);  // (near,0), (far,0), (near,1) in first-seen order

  CHECK(traces[0].end_tag == "near");
  CHECK(traces[0].instant_id == 0);
  CHECK(traces[0].load_w == doctest::Approx(121.0));
  CHECK(traces[0].carrier_hz == dvec{2.0e6, 3.0e6});
  CHECK(traces[0].snr_db == dvec{40.5, 41.5});

  CHECK(traces[1].end_tag == "far");
  CHECK(traces[1].snr_db == dvec{39.5, 38.5});

  CHECK(traces[2].instant_id == 1);
  CHECK(traces[2].load_w == doctest::Approx(150.0));
}

TEST_CASE("csv writer round-trips exactly") {
  TempDir tmp;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(45.0, 3.0);
  std::vector<SnrTrace> traces;
  for (int inst = 0; inst < 3; ++inst) {
    for (const char* end : {"near", "far"}) {
      SnrTrace t;
      t.end_tag = end;
      t.instant_id = inst;
      t.load_w = 100.0 + inst;
      for (int i = 0; i < 29; ++i) {
        t.carrier_hz.push_back(2.0e6 + 28368.4 * i);
        t.snr_db.push_back(g(rng));
      }
      traces.push_back(std::move(t));
    }
  }
  const auto f = tmp.path / "rt.csv";
  write_snr_csv(traces, f);
  const auto back = parse_snr_csv(f);
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(back[i].carrier_hz == traces[i].carrier_hz);
    CHECK(back[i].snr_db == traces[i].snr_db);
    CHECK(back[i].end_tag == traces[i].end_tag);
    CHECK(back[i].instant_id == traces[i].instant_id);
    CHECK(back[i].load_w == traces[i].load_w);
  }
}

TEST_CASE("csv errors carry the row index") {
  TempDir tmp;

  auto f = write_text(tmp.path / "hdr.csv", "freq,snr\n");
  CHECK_THROWS_WITH_AS(parse_snr_csv(f), doctest::Contains("row 1"), ParseError);

  f = write_text(tmp.path / "cols.csv",
                 "carrier_hz,snr_db,end,instant,load_w\n"
                 "2e6,40,near,0,121\n"
                 "2e6,40,near\n");
  CHECK_THROWS_WITH_AS(parse_snr_csv(f), doctest::Contains("row 3"), ParseError);

  f = write_text(tmp.path / "num.csv",
                 "carrier_hz,snr_db,end,instant,load_w\n"
                 "2e6,forty,near,0,121\n");
  try {
    parse_snr_csv(f);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("forty") != std::string::npos);
  }

  f = write_text(tmp.path / "end.csv",
                 "carrier_hz,snr_db,end,instant,load_w\n"
                 "2e6,40,middle,0,121\n");
  CHECK_THROWS_WITH_AS(parse_snr_csv(f), doctest::Contains("row 2"), ParseError);

  f = write_text(tmp.path / "order.csv",
                 "carrier_hz,snr_db,end,instant,load_w\n"
                 "3e6,40,near,0,121\n"
                 "2e6,41,near,0,121\n");
  CHECK_THROWS_WITH_AS(parse_snr_csv(f), doctest::Contains("row 3"), ParseError);

  f = write_text(tmp.path / "load.csv",
                 "carrier_hz,snr_db,end,instant,load_w\n"
                 "2e6,40,near,0,121\n"
                 "3e6,41,near,0,150\n");
  CHECK_THROWS_WITH_AS(parse_snr_csv(f), doctest::Contains("row 3"), ParseError);

  f = write_text(tmp.path / "nodata.csv", "carrier_hz,snr_db,end,instant,load_w\n");
  CHECK_THROWS_AS(parse_snr_csv(f), ParseError);

  CHECK_THROWS_AS(parse_snr_csv(tmp.path / "missing.csv"), IoError);
}

TEST_CASE("trace validation") {
  auto t = demo_trace("near", 0, 121.0);
  CHECK_NOTHROW(t.validate());
  t.end_tag = "center";
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = demo_trace("far", 0, 121.0);
  t.snr_db.pop_back();
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = demo_trace("far", 0, 121.0);
  t.carrier_hz[2] = t.carrier_hz[1];
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t.carrier_hz.clear();
  t.snr_db.clear();
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("summary is the carrier mean and shifts with the trace") {
  const auto t = demo_trace("near", 0, 121.0);
  const auto s = summarize_snr(t);
  CHECK(s.carriers == 3);
  CHECK(s.psi == doctest::Approx(42.0));

  // Adding a constant in dB moves the summary by exactly that constant.
  auto shifted = t;
  for (auto& v : shifted.snr_db) v += 2.5;
  CHECK(summarize_snr(shifted).psi == doctest::Approx(44.5));
}

TEST_CASE("snr thresholds and classification") {
  const auto model = derive_snr_thresholds({47.0, 48.0}, {46.0}, {44.0});
  CHECK(model.healthy_ref == doctest::Approx(47.5));
  CHECK(model.sense == thresholds::DeviationSense::drop_is_bad);
  CHECK(model.thresholds.th_small == doctest::Approx(0.75));
  CHECK(model.thresholds.th_large == doctest::Approx(2.5));

  CHECK(classify_snr(47.2, model).verdict == CableState::Healthy);
  CHECK(classify_snr(46.0, model).verdict == CableState::SmallFault);
  CHECK(classify_snr(44.9, model).verdict == CableState::LargeFault);
  CHECK(classify_snr(44.9, model).flag == 1);
  CHECK(classify_snr(46.0, model).flag == 0);
  CHECK(classify_snr(45.0, model).verdict == CableState::LargeFault);  // boundary

  CHECK_THROWS_AS(derive_snr_thresholds({47.0}, {47.5}, {44.0}), CalibrationError);
}
