#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cablewatch/fusion.hpp"
#include "cablewatch/reflectometry.hpp"
#include "cablewatch/scenario.hpp"
#include "cablewatch/thresholds.hpp"
#include "cablewatch/types.hpp"

// Orchestration: dataset synthesis, threshold/likelihood calibration on a
// train split, held-out assessment, the periodic monitor loop, and plot CSV
// emission. Every stage reads its inputs back through the public file
// parsers, so the formats stay honest, and every stage is deterministic
// per (scenario, seed): rerunning a command reproduces its outputs byte
// for byte.

namespace cablewatch::pipeline {

enum class Method : int { Sparam = 0, Snr = 1, Omtdr = 2 };
inline constexpr std::size_t kMethods = 3;
inline constexpr std::array<const char*, kMethods> kMethodNames{"sparam", "snr", "omtdr"};

/// Independent noise stream per (method, state, instant).
std::uint64_t instant_seed(std::uint64_t run_seed, Method m, CableState s, std::size_t id);

/// One simulated capture file and the conditions it was taken under.
struct InstantRef {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  double load_w = 0.0;
  std::string file;  // relative to the dataset root
};

struct DatasetManifest {
  std::string scenario_label;
  std::string config_hash;
  std::string waveform_format = "cwf";  // "cwf" or "csv"
  // instants[method][state], ids dense from 0 per cell. The state axis is
  // the ground truth label.
  std::array<std::array<std::vector<InstantRef>, fusion::kStates>, kMethods> instants;

  void validate() const;
};

void save_manifest(const DatasetManifest& man, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

/// Synthesizes the labeled dataset under out_dir: echo waveforms under
/// omtdr/, Touchstone sweeps under sparam/, modem SNR CSVs under snr/, and
/// manifest.json. waveform_format selects the echo file format.
DatasetManifest simulate_dataset(const scenario::RunConfig& cfg,
                                 const std::filesystem::path& out_dir,
                                 const std::string& waveform_format = "cwf");

/// Reads capture files back and reduces them to the per-method scalar
/// summary psi. Reflectometry baselines are re-synthesized per load from
/// the scenario (noise-free), so imports need only the capture itself.
class PsiExtractor {
 public:
  PsiExtractor(const scenario::CableScenario& sc, std::filesystem::path dataset_root);

  double psi(Method m, const InstantRef& ref);
  /// Reference reflectogram for a load (cached; noise-free healthy line).
  const reflect::Reflectogram& baseline(double load_w);
  const Waveform& probe() const { return probe_; }

 private:
  scenario::CableScenario sc_;
  std::filesystem::path root_;
  Waveform probe_;
  std::vector<std::pair<double, reflect::Reflectogram>> baselines_;
};

struct MethodCalibration {
  thresholds::DeviationModel model;
  fusion::ConfusionModel confusion;
  fusion::PosteriorTable posterior;
  double weight = 0.0;  // under the artifact's profile
  std::array<std::vector<std::size_t>, fusion::kStates> train_ids;
  std::array<std::vector<std::size_t>, fusion::kStates> holdout_ids;
  // Train deviations per state; the report stage resamples these pools.
  std::array<dvec, fusion::kStates> train_deviations;
};

struct CalibrationArtifact {
  std::string config_hash;
  std::uint64_t seed = 0;
  double split_fraction = 0.0;
  std::string profile;
  fusion::Priors priors;
  std::array<MethodCalibration, kMethods> methods;
};

/// Seeded stratified split per method and state; thresholds, likelihoods,
/// posteriors and weights are fitted on the train share only.
CalibrationArtifact calibrate(const scenario::RunConfig& cfg,
                              const std::filesystem::path& dataset_dir,
                              const std::string& profile);

void save_calibration(const CalibrationArtifact& cal, const std::filesystem::path& file);
CalibrationArtifact load_calibration(const std::filesystem::path& file);

struct MethodAssessment {
  std::string name;
  double weight = 0.0;
  double flag_rate = 0.0;
  std::array<std::size_t, fusion::kStates> class_counts{};
  std::array<std::size_t, fusion::kStates> class_correct{};
  std::size_t healthy_false_positives = 0;  // healthy instants flagged

  double class_accuracy(std::size_t s) const;
};

struct Assessment {
  std::string profile;
  fusion::HealthReport report;
  std::array<MethodAssessment, kMethods> methods;
};

/// Evaluates the calibrated models on the held-out instants (optionally
/// restricted to a subset of true states). The profile may differ from the
/// calibration artifact's; weights are then re-derived from the stored
/// posteriors. Refuses a dataset/calibration config_hash mismatch.
Assessment assess(const scenario::RunConfig& cfg, const std::filesystem::path& dataset_dir,
                  const CalibrationArtifact& cal, const std::string& profile,
                  const std::array<bool, fusion::kStates>& state_filter = {true, true, true});

void save_assessment(const Assessment& a, const std::filesystem::path& file);

/// Exit-code bands over the composite index: 0 for HI >= 80, 1 for
/// 50 <= HI < 80, 2 below.
int exit_band(double hi);

struct MonitorRecord {
  std::int64_t ts_ms = 0;  // strictly increasing across a record file
  std::size_t iteration = 0;
  double hi = 0.0;
  std::array<double, kMethods> psi{};
  std::array<int, kMethods> flags{};
  std::string verdict;  // worst per-method band this instant

  std::string to_json_line() const;
};

/// Parses an existing record file. A malformed line aborts with a ParseError
/// naming it; the monitor refuses to append to such a file.
std::vector<MonitorRecord> read_monitor_records(const std::filesystem::path& file);

/// One monitoring pass: re-reads the run config (the monitored fault layout
/// may have changed on disk), simulates one instant per method under it,
/// classifies against the calibration, and appends one record under an
/// exclusive lock. iteration seeds derive from the record index so a
/// restarted monitor continues the noise sequence.
MonitorRecord monitor_step(const std::filesystem::path& config_path,
                           const CalibrationArtifact& cal, const std::string& profile,
                           const std::filesystem::path& record_file);

std::vector<MonitorRecord> run_monitor(const std::filesystem::path& config_path,
                                       const CalibrationArtifact& cal,
                                       const std::string& profile,
                                       const std::filesystem::path& record_file,
                                       std::size_t iterations, double interval_s);

/// Plot-ready CSVs under report_dir: per-class clean reflectograms, SNR and
/// CFR spectra, and the three-case health-index timeline (samples 0-50,
/// 50-100, 100-180) resampled from the calibration pools.
void write_reports(const scenario::RunConfig& cfg, const CalibrationArtifact& cal,
                   const std::filesystem::path& report_dir);

}  // namespace cablewatch::pipeline
