// Release gate: one self-checking scenario per guaranteed behavior, each
// printing a single PASS/FAIL line. The binary exits nonzero if any gate
// fails, so CI treats this file as the contract.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cablewatch/channel.hpp"
#include "cablewatch/dsp.hpp"
#include "cablewatch/fusion.hpp"
#include "cablewatch/pipeline.hpp"
#include "cablewatch/reflectometry.hpp"
#include "cablewatch/scenario.hpp"
#include "cablewatch/thresholds.hpp"

using namespace cablewatch;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

bool g_all_ok = true;

void gate(int idx, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", idx, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) g_all_ok = false;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// ---------------------------------------------------------------- localization

struct LocalizationStudy {
  double mean_m = 0.0;
  int misses = 0;
};

// Mean estimated fault distance over repeated noisy captures of the
// large-fault class, against a noise-free healthy baseline.
LocalizationStudy run_localization(const fs::path& scenario_file, int n_seeds) {
  const auto sc = scenario::load_scenario(scenario_file);
  const Waveform probe = reflect::generate_probe(sc.probe);
  const chansim::LoadSpec load{sc.load_schedule_w.front()};
  const std::size_t n_fft = chansim::echo_fft_size(probe.samples.size());
  const double fs = sc.probe.effective_rate_hz();

  const auto healthy = chansim::build_line_model(sc.cable, {}, load);
  const auto base_real =
      chansim::realize_echo_channel(healthy, sc.probe.center_freq_hz, fs, n_fft, 0);
  const double inf = std::numeric_limits<double>::infinity();
  Waveform base_echo = chansim::synthesize_echo(probe, base_real, inf, 0);
  const Waveform base_cap = reflect::receiver_capture(probe, std::move(base_echo));
  const auto base = reflect::correlate(probe, base_cap, sc.probe, sc.cable.velocity_factor);

  const auto faulted = chansim::build_line_model(
      sc.cable, sc.class_faults[static_cast<std::size_t>(CableState::LargeFault)], load);
  const auto fault_real =
      chansim::realize_echo_channel(faulted, sc.probe.center_freq_hz, fs, n_fft, 0);

  LocalizationStudy study;
  double sum = 0.0;
  int hits = 0;
  for (int seed = 1; seed <= n_seeds; ++seed) {
    Waveform echo = chansim::synthesize_echo(probe, fault_real, sc.noise.echo_snr_db,
                                             static_cast<std::uint64_t>(seed));
    const Waveform cap = reflect::receiver_capture(probe, std::move(echo));
    const auto r = reflect::correlate(probe, cap, sc.probe, sc.cable.velocity_factor);
    const auto det = reflect::detect_peaks(r, &base, sc.effective_peak_threshold());
    if (det.peaks.empty()) {
      ++study.misses;
      continue;
    }
    const auto strongest = std::max_element(
        det.peaks.begin(), det.peaks.end(),
        [](const auto& a, const auto& b) { return a.magnitude < b.magnitude; });
    sum += strongest->distance_m;
    ++hits;
  }
  study.mean_m = hits > 0 ? sum / hits : std::numeric_limits<double>::quiet_NaN();
  return study;
}

// ----------------------------------------------------------- fusion utilities

fusion::Row3 counting_row(const dvec& devs, const thresholds::ThresholdPair& th) {
  std::array<std::size_t, 3> n{};
  for (double d : devs) {
    if (d >= th.th_large) {
      ++n[2];
    } else if (d >= th.th_small) {
      ++n[1];
    } else {
      ++n[0];
    }
  }
  const double total = static_cast<double>(devs.size());
  return {static_cast<double>(n[0]) / total, static_cast<double>(n[1]) / total,
          static_cast<double>(n[2]) / total};
}

fusion::Row3 random_simplex3(dsp::Rng& rng) {
  double a = -std::log(1.0 - rng.uniform());
  double b = -std::log(1.0 - rng.uniform());
  double c = -std::log(1.0 - rng.uniform());
  const double s = a + b + c;
  return {a / s, b / s, c / s};
}

// ----------------------------------------------------------------- filesystem

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree_map(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

int run_cli(const fs::path& workdir, const std::string& args) {
  const std::string cmd = "cd '" + workdir.string() + "' && " + std::string(CW_CLI_BIN) +
                          " " + args + " > cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cablewatch-acc-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

int main() {
  const fs::path scenarios(CW_SCENARIO_DIR);

  // 1. Localization accuracy on the two reference lines, within budget.
  try {
    const auto t0 = clock_type::now();
    const auto long_line = run_localization(scenarios / "pijf-24m.json", 50);
    const auto short_line = run_localization(scenarios / "pijf-7m2.json", 50);
    const double elapsed = seconds_since(t0);
    const double err_long = std::fabs(long_line.mean_m - 21.0);
    const double err_short = std::fabs(short_line.mean_m - 5.79);
    const bool ok = long_line.misses == 0 && short_line.misses == 0 &&
                    err_long <= 0.5 && err_short <= 0.2 && elapsed < 60.0;
    gate(1, ok,
         "24m line mean " + fmt(long_line.mean_m) + "m (target 21 +/- 0.5), 7.2m line mean " +
             fmt(short_line.mean_m) + "m (target 5.79 +/- 0.2), 2x50 seeds in " +
             fmt(elapsed) + "s");
  } catch (const std::exception& e) {
    gate(1, false, e.what());
  }

  // 2. Multi-fault separation on the 70 m line: three echoes plus the
  // direct-coupling reference and the line-end echo, nothing else.
  try {
    const auto sc = scenario::load_scenario(scenarios / "threefault-70m.json");
    const Waveform probe = reflect::generate_probe(sc.probe);
    const chansim::LoadSpec load{sc.load_schedule_w.front()};
    const std::size_t n_fft = chansim::echo_fft_size(probe.samples.size());
    const double fs = sc.probe.effective_rate_hz();
    const double inf = std::numeric_limits<double>::infinity();

    const auto healthy = chansim::build_line_model(sc.cable, {}, load);
    Waveform be = chansim::synthesize_echo(
        probe, chansim::realize_echo_channel(healthy, sc.probe.center_freq_hz, fs, n_fft, 0),
        inf, 0);
    const auto base = reflect::correlate(probe, reflect::receiver_capture(probe, std::move(be)),
                                         sc.probe, sc.cable.velocity_factor);

    auto faults = sc.monitored_faults;
    std::sort(faults.begin(), faults.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    const auto model = chansim::build_line_model(sc.cable, faults, load);
    Waveform fe = chansim::synthesize_echo(
        probe, chansim::realize_echo_channel(model, sc.probe.center_freq_hz, fs, n_fft, 0),
        inf, 0);
    const auto r = reflect::correlate(probe, reflect::receiver_capture(probe, std::move(fe)),
                                      sc.probe, sc.cable.velocity_factor);
    const auto det = reflect::detect_peaks(r, &base, sc.effective_peak_threshold());

    const double mps = r.meters_per_sample;
    double f2 = std::numeric_limits<double>::quiet_NaN();
    for (const auto& p : det.peaks) {
      if (std::fabs(p.distance_m - 35.0) < std::fabs(f2 - 35.0) || std::isnan(f2)) {
        f2 = p.distance_m;
      }
    }
    const double eol_m =
        (static_cast<double>(det.end_of_line_index) - static_cast<double>(r.tx_peak_index)) *
        mps;
    const bool ok = det.peaks.size() == 3 && r.tx_peak_index < sc.probe.oversampling &&
                    std::fabs(f2 - 35.0) <= mps && std::fabs(eol_m - 70.0) <= 2.0 * mps;
    gate(2, ok,
         std::to_string(det.peaks.size()) + " fault peaks, middle echo at " + fmt(f2) +
             "m (35 +/- " + fmt(mps) + "), line end at " + fmt(eol_m) + "m");
  } catch (const std::exception& e) {
    gate(2, false, e.what());
  }

  // 3. Empirical likelihood rows equal brute-force counting exactly.
  try {
    dsp::Rng rng(20260816);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      thresholds::ThresholdPair th;
      th.th_small = rng.uniform() * 2.0 - 0.5;
      th.th_large = th.th_small + 0.05 + rng.uniform();
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 50.0);
      dvec devs(n);
      for (auto& d : devs) d = rng.uniform() * 4.0 - 1.0;
      if (n > 2) {
        devs[0] = th.th_small;  // boundary values must land in the worse band
        devs[1] = th.th_large;
      }
      const auto got = fusion::estimate_conditionals(devs, th);
      const auto want = counting_row(devs, th);
      ok = got == want;
    }
    gate(3, ok, "1000 randomized deviation lists, exact equality with counting");
  } catch (const std::exception& e) {
    gate(3, false, e.what());
  }

  // 4. Bayes inversion: posterior * marginal reproduces likelihood * prior.
  try {
    dsp::Rng rng(424242);
    bool ok = true;
    double worst = 0.0;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      fusion::ConfusionModel cm;
      for (auto& row : cm.likelihood) row = random_simplex3(rng);
      fusion::Priors priors;
      priors.p = random_simplex3(rng);
      const auto table = fusion::marginal_and_posterior(cm, priors);
      double closure = 0.0;
      for (std::size_t y = 0; y < 3; ++y) {
        double col = 0.0;
        for (std::size_t s = 0; s < 3; ++s) {
          const double lhs = table.posterior[s][y] * table.marginal[y];
          const double rhs = cm.likelihood[s][y] * priors.p[s];
          worst = std::max(worst, std::fabs(lhs - rhs));
          col += table.posterior[s][y];
        }
        if (table.defined[y]) closure = std::max(closure, std::fabs(col - 1.0));
      }
      double msum = 0.0;
      for (double m : table.marginal) msum += m;
      ok = worst <= 1e-12 && closure <= 1e-12 && std::fabs(msum - 1.0) <= 1e-12;
    }
    gate(4, ok, "1000 random models, worst factorization residual " + fmt(worst));
  } catch (const std::exception& e) {
    gate(4, false, e.what());
  }

  // 5. Composite index arithmetic: the pinned case is bit-exact and fuzzed
  // cases stay inside the convex hull of the individual indices.
  try {
    std::vector<fusion::MethodStream> streams;
    streams.push_back({"a", {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 1.0});
    streams.push_back({"b", {1, 0, 0, 0, 0}, 1.0});
    streams.push_back({"c", {1, 1, 0, 0, 0}, 2.0});
    const auto pinned = fusion::compute_health_index(streams);
    bool ok = pinned.hi == 72.5;

    dsp::Rng rng(555);
    for (int trial = 0; trial < 10000 && ok; ++trial) {
      const std::size_t n_methods = 1 + static_cast<std::size_t>(rng.uniform() * 5.0);
      std::vector<fusion::MethodStream> ss(n_methods);
      double lo = 100.0, hi_ind = 0.0;
      for (auto& s : ss) {
        s.name = "m";
        s.weight = 1e-6 + rng.uniform() * (1.0 - 1e-6);
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 40.0);
        s.flags.resize(n);
        for (auto& f : s.flags) f = rng.uniform();
        const double ihl = fusion::individual_hi(s.flags);
        lo = std::min(lo, ihl);
        hi_ind = std::max(hi_ind, ihl);
      }
      const auto rep = fusion::compute_health_index(ss);
      ok = rep.hi >= 0.0 && rep.hi <= 100.0 && rep.hi >= lo - 1e-9 && rep.hi <= hi_ind + 1e-9;
    }
    gate(5, ok,
         "rates (0.1, 0.2, 0.4) with weights (1, 1, 2) give " + fmt(pinned.hi) +
             " exactly; 10000 fuzzed cases stay within the individual hull");
  } catch (const std::exception& e) {
    gate(5, false, e.what());
  }

  // Criteria 6-8 share one full pipeline run at production scale.
  TempDir tmp;
  const fs::path run_cfg = scenarios / "run-default.json";
  double pipeline_seconds = -1.0;
  bool pipeline_ok = false;
  std::string pipeline_err;
  try {
    const auto t0 = clock_type::now();
    pipeline_ok =
        run_cli(tmp.path, "--config '" + run_cfg.string() + "' simulate --out outA") == 0 &&
        run_cli(tmp.path, "--config '" + run_cfg.string() + "' calibrate --out outA") == 0;
    if (pipeline_ok) {
      const int rc =
          run_cli(tmp.path, "--config '" + run_cfg.string() + "' assess --out outA");
      pipeline_ok = rc >= 0 && rc <= 2;
    }
    pipeline_ok = pipeline_ok &&
                  run_cli(tmp.path, "--config '" + run_cfg.string() + "' report --out outA") == 0;
    pipeline_seconds = seconds_since(t0);
    if (!pipeline_ok) pipeline_err = "pipeline stage failed: " + slurp(tmp.path / "cli.log");
  } catch (const std::exception& e) {
    pipeline_ok = false;
    pipeline_err = e.what();
  }

  // 6. Reference operating mixes resampled from the calibration pools: the
  // mostly-healthy, degraded and recovering plateaus keep their order, and
  // the composite never leaves the band set by the worst individual method.
  try {
    if (!pipeline_ok) throw ValidationError(pipeline_err);
    const auto cfg = scenario::load_run_config(run_cfg);
    const auto cal =
        pipeline::load_calibration(tmp.path / "outA" / "calibration.json");

    std::vector<fusion::StatePools> pools(pipeline::kMethods);
    std::vector<thresholds::ThresholdPair> th(pipeline::kMethods);
    for (std::size_t m = 0; m < pipeline::kMethods; ++m) {
      pools[m].pool = cal.methods[m].train_deviations;
      th[m] = cal.methods[m].model.thresholds;
    }
    const std::array<fusion::CaseMix, 3> mixes{fusion::CaseMix{{0.90, 0.08, 0.02}},
                                               fusion::CaseMix{{0.17, 0.58, 0.25}},
                                               fusion::CaseMix{{0.70, 0.25, 0.05}}};
    const std::array<std::size_t, 3> case_len{50, 50, 80};

    std::array<double, 3> plateau{};
    bool bounded = true;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto em = fusion::emulate_case(pools, th, mixes[c], case_len[c],
                                           dsp::Rng::derive(cfg.seed, 0xca5e0000ULL + c));
      std::vector<fusion::MethodStream> streams;
      double worst_ind = 0.0;
      for (std::size_t m = 0; m < pipeline::kMethods; ++m) {
        std::vector<double> flags(em.flags[m].begin(), em.flags[m].end());
        worst_ind = std::max(
            worst_ind, std::fabs(fusion::individual_hi(flags) - em.ground_truth_hi));
        streams.push_back({pipeline::kMethodNames[m], std::move(flags),
                           cal.methods[m].weight});
      }
      plateau[c] = fusion::compute_health_index(streams).hi;
      bounded = bounded &&
                std::fabs(plateau[c] - em.ground_truth_hi) <= worst_ind + 1e-9;
    }
    const bool ok = bounded && plateau[0] > plateau[2] && plateau[2] > plateau[1];
    gate(6, ok,
         "plateaus " + fmt(plateau[0]) + " / " + fmt(plateau[1]) + " / " + fmt(plateau[2]) +
             ", healthy > recovering > degraded, composite error within the worst method");
  } catch (const std::exception& e) {
    gate(6, false, e.what());
  }

  // 7. Held-out classification: every modality reaches 0.8 per-class
  // accuracy under detect-first, and low-fp never flags more healthy lines.
  try {
    if (!pipeline_ok) throw ValidationError(pipeline_err);
    const auto cfg = scenario::load_run_config(run_cfg);
    const auto cal = pipeline::load_calibration(tmp.path / "outA" / "calibration.json");
    const fs::path dataset = tmp.path / "outA" / "dataset";
    const auto detect = pipeline::assess(cfg, dataset, cal, "detect-first");
    const auto lowfp = pipeline::assess(cfg, dataset, cal, "low-fp");

    double worst_acc = 1.0;
    bool fp_ok = true;
    for (std::size_t m = 0; m < pipeline::kMethods; ++m) {
      for (std::size_t s = 0; s < fusion::kStates; ++s) {
        worst_acc = std::min(worst_acc, detect.methods[m].class_accuracy(s));
      }
      fp_ok = fp_ok && lowfp.methods[m].healthy_false_positives <=
                           detect.methods[m].healthy_false_positives;
    }
    const bool ok = worst_acc >= 0.8 && fp_ok;
    gate(7, ok,
         "worst held-out class accuracy " + fmt(worst_acc) +
             " (floor 0.8), low-fp healthy false positives never exceed detect-first");
  } catch (const std::exception& e) {
    gate(7, false, e.what());
  }

  // 8. The production-scale run finishes in budget and a rerun under the
  // same seed reproduces the dataset byte for byte.
  try {
    if (!pipeline_ok) throw ValidationError(pipeline_err);
    const bool rerun_ok =
        run_cli(tmp.path, "--config '" + run_cfg.string() + "' simulate --out outB") == 0 &&
        run_cli(tmp.path, "--config '" + run_cfg.string() + "' calibrate --out outB") == 0;
    if (!rerun_ok) throw ValidationError("rerun failed: " + slurp(tmp.path / "cli.log"));
    const bool same_tree =
        tree_map(tmp.path / "outA" / "dataset") == tree_map(tmp.path / "outB" / "dataset");
    const bool same_cal = slurp(tmp.path / "outA" / "calibration.json") ==
                          slurp(tmp.path / "outB" / "calibration.json");
    const bool ok = pipeline_seconds < 300.0 && same_tree && same_cal;
    gate(8, ok,
         "100-instant pipeline in " + fmt(pipeline_seconds) +
             "s (budget 300), rerun byte-identical: " +
             (same_tree && same_cal ? "yes" : "no"));
  } catch (const std::exception& e) {
    gate(8, false, e.what());
  }

  return g_all_ok ? 0 : 1;
}
