#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cablewatch/channel.hpp"
#include "cablewatch/fusion.hpp"
#include "cablewatch/reflectometry.hpp"
#include "cablewatch/types.hpp"

// Scenario and run-configuration files. A scenario fixes the physics: one
// cable, its probe, noise levels, sweep grids, the fault layout of each
// condition class, and the cable's current condition for monitoring. A run
// config points at a scenario and fixes seeds, counts, split and profile.

namespace cablewatch::scenario {

struct GridSpec {
  double start_hz = 0.0;
  double stop_hz = 0.0;
  std::size_t points = 0;

  void validate() const;
  dvec grid() const;  // uniform, inclusive of both ends
};

struct NoiseSpec {
  double echo_snr_db = 45.0;   // capture noise relative to probe power
  double snr_sigma_db = 0.5;   // per-carrier jitter on modem SNR readings
  double sparam_sigma = 1e-4;  // complex noise on network-analyzer points

  void validate() const;
};

struct PlcSpec {
  double tx_psd = 1.0;
  double noise_psd = 1e-5;

  void validate() const;
};

struct CableScenario {
  std::string label;
  chansim::CableSpec cable;
  dvec load_schedule_w;  // cycled across instants
  reflect::MultitoneConfig probe;
  NoiseSpec noise;
  PlcSpec plc;
  GridSpec sparam_grid{1.0e6, 3.0e7, 200};
  GridSpec snr_carriers{2.0e6, 2.8e7, 917};
  // Fault layout per condition class: healthy, small, large.
  std::array<std::vector<chansim::FaultSpec>, 3> class_faults;
  // The cable's current condition, read by the monitor loop.
  std::vector<chansim::FaultSpec> monitored_faults;
  double peak_threshold = 0.0;  // 0 means derive from the echo noise floor

  void validate() const;
  /// Detection threshold: explicit value, or six times the correlation-lag
  /// noise deviation implied by echo_snr_db and the probe length.
  double effective_peak_threshold() const;
  double load_at(std::size_t instant) const;
};

CableScenario load_scenario(const std::filesystem::path& file);
void save_scenario(const CableScenario& s, const std::filesystem::path& file);

struct MethodCounts {
  std::size_t sparam = 100;
  std::size_t snr = 100;
  std::size_t omtdr = 100;

  void validate() const;  // every count >= 5
};

struct RunConfig {
  std::filesystem::path scenario_path;
  CableScenario scenario;  // loaded copy
  std::uint64_t seed = 1;
  double split_fraction = 0.6;  // calibration share, rest is held out
  std::string profile = "detect-first";
  std::filesystem::path out_dir = "out";
  MethodCounts counts;
  fusion::Priors priors;
  // Alternative alarm rule counting small-fault verdicts as half an alarm.
  // Off by default: the standard rule flags large verdicts only.
  bool small_flag_half = false;

  void validate() const;
};

/// Reads the run config and the scenario it points to (scenario path
/// resolved relative to the config file's directory).
RunConfig load_run_config(const std::filesystem::path& file);

/// Data lineage fingerprint: scenario content, seed, split, counts and
/// priors. Calibration artifacts carry it; assessment refuses a mismatch.
std::string config_hash(const RunConfig& cfg);

}  // namespace cablewatch::scenario
