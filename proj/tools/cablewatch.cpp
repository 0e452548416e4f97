// cablewatch: simulated cable-diagnostics workbench. Drives the full chain
// from scenario simulation through calibration, held-out assessment,
// periodic monitoring, and plot-data emission.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cablewatch/pipeline.hpp"
#include "cablewatch/scenario.hpp"
#include "cablewatch/types.hpp"

namespace fs = std::filesystem;
using namespace cablewatch;

namespace {

// sysexits-style process results, plus the health bands 0/1/2 from assess.
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitInternal = 70;
constexpr int kExitIo = 74;

struct GlobalArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
};

scenario::RunConfig load_config(const GlobalArgs& g) {
  auto cfg = scenario::load_run_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

fs::path resolve_out(const scenario::RunConfig& cfg, const GlobalArgs& g) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("CABLEWATCH_OUT"); env && *env) return env;
  return cfg.out_dir;
}

std::string effective_profile(const scenario::RunConfig& cfg, const GlobalArgs& g) {
  return g.profile.empty() ? cfg.profile : g.profile;
}

std::array<bool, fusion::kStates> parse_state_filter(const std::vector<std::string>& names) {
  if (names.empty()) return {true, true, true};
  std::array<bool, fusion::kStates> filter{false, false, false};
  for (const auto& n : names) {
    filter[static_cast<std::size_t>(state_from_string(n))] = true;
  }
  return filter;
}

int cmd_simulate(const GlobalArgs& g, const std::string& format) {
  const auto cfg = load_config(g);
  const fs::path out = resolve_out(cfg, g);
  const auto man = pipeline::simulate_dataset(cfg, out / "dataset", format);
  std::size_t files = 0;
  for (const auto& pm : man.instants) {
    for (const auto& cell : pm) files += cell.size();
  }
  std::printf("simulated %zu captures for scenario '%s' under %s (config %s)\n", files,
              man.scenario_label.c_str(), (out / "dataset").c_str(),
              man.config_hash.c_str());
  return 0;
}

int cmd_calibrate(const GlobalArgs& g) {
  const auto cfg = load_config(g);
  const fs::path out = resolve_out(cfg, g);
  const auto cal = pipeline::calibrate(cfg, out / "dataset", effective_profile(cfg, g));
  pipeline::save_calibration(cal, out / "calibration.json");
  std::printf("calibrated profile '%s' (config %s)\n", cal.profile.c_str(),
              cal.config_hash.c_str());
  for (std::size_t m = 0; m < pipeline::kMethods; ++m) {
    const auto& mc = cal.methods[m];
    std::printf("  %-7s weight %.4f  thresholds %.6g / %.6g\n", pipeline::kMethodNames[m],
                mc.weight, mc.model.thresholds.th_small, mc.model.thresholds.th_large);
  }
  return 0;
}

int cmd_assess(const GlobalArgs& g, const std::vector<std::string>& states) {
  const auto cfg = load_config(g);
  const fs::path out = resolve_out(cfg, g);
  const auto cal = pipeline::load_calibration(out / "calibration.json");
  const auto a = pipeline::assess(cfg, out / "dataset", cal, effective_profile(cfg, g),
                                  parse_state_filter(states));
  pipeline::save_assessment(a, out / "assessment.json");
  std::printf("health index %.2f (profile '%s')\n", a.report.hi, a.profile.c_str());
  for (std::size_t m = 0; m < pipeline::kMethods; ++m) {
    std::printf("  %-7s hi %.2f  flag rate %.3f  weight %.4f\n",
                pipeline::kMethodNames[m], a.report.individual_hi[m],
                a.methods[m].flag_rate, a.methods[m].weight);
  }
  return pipeline::exit_band(a.report.hi);
}

int cmd_monitor(const GlobalArgs& g, std::size_t iterations, double interval_s) {
  // The config path is handed down: each iteration reloads it so fault
  // layout edits show up while the loop runs.
  auto cfg = load_config(g);
  const fs::path out = resolve_out(cfg, g);
  const auto cal = pipeline::load_calibration(out / "calibration.json");
  const auto records = pipeline::run_monitor(g.config, cal, effective_profile(cfg, g),
                                             out / "monitor.jsonl", iterations, interval_s);
  for (const auto& r : records) {
    std::printf("iteration %zu  hi %.2f  verdict %s\n", r.iteration, r.hi,
                r.verdict.c_str());
  }
  return 0;
}

int cmd_report(const GlobalArgs& g) {
  const auto cfg = load_config(g);
  const fs::path out = resolve_out(cfg, g);
  const auto cal = pipeline::load_calibration(out / "calibration.json");
  pipeline::write_reports(cfg, cal, out / "report");
  std::printf("reports written under %s\n", (out / "report").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cable diagnostics workbench"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config, "run configuration file")->required();
  app.add_option("--seed", g.seed, "override the run seed");
  app.add_option("--out", g.out, "override the output directory");
  app.add_option("--profile", g.profile, "fusion profile: detect-first or low-fp");

  auto* simulate = app.add_subcommand("simulate", "synthesize the labeled dataset");
  std::string format = "cwf";
  simulate->add_option("--waveform-format", format, "echo capture format: cwf or csv")
      ->check(CLI::IsMember({"cwf", "csv"}));

  auto* calibrate =
      app.add_subcommand("calibrate", "fit thresholds and likelihoods on the train split");
  auto* assess = app.add_subcommand("assess", "score the held-out split");
  std::vector<std::string> states;
  assess->add_option("--states", states,
                     "restrict assessment to these true states (healthy, small, large)")
      ->delimiter(',');
  auto* monitor = app.add_subcommand("monitor", "append periodic health records");
  std::size_t iterations = 1;
  double interval_s = 0.0;
  monitor->add_option("--iterations", iterations, "number of monitoring passes");
  monitor->add_option("--interval", interval_s, "seconds between passes");
  auto* report = app.add_subcommand("report", "emit plot-ready CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(g, format);
    if (calibrate->parsed()) return cmd_calibrate(g);
    if (assess->parsed()) return cmd_assess(g, states);
    if (monitor->parsed()) return cmd_monitor(g, iterations, interval_s);
    if (report->parsed()) return cmd_report(g);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const CalibrationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}
