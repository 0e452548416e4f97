#include "cablewatch/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "cablewatch/channel.hpp"
#include "cablewatch/dsp.hpp"
#include "cablewatch/snr.hpp"
#include "cablewatch/sparam.hpp"
#include "cablewatch/waveform_io.hpp"
#include "json.hpp"

namespace cablewatch::pipeline {

using nlohmann::json;

namespace {

constexpr double kCleanSnrDb = std::numeric_limits<double>::infinity();

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string instant_file(Method m, CableState s, std::size_t id, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%s_%04zu.%s", kMethodNames[static_cast<int>(m)],
                to_string(s), id, ext.c_str());
  return buf;
}

std::vector<chansim::FaultSpec> by_position(std::vector<chansim::FaultSpec> faults) {
  std::sort(faults.begin(), faults.end(),
            [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
  return faults;
}

chansim::TwoPortModel class_model(const scenario::CableScenario& sc, CableState s,
                                  double load_w) {
  return chansim::build_line_model(
      sc.cable, by_position(sc.class_faults[static_cast<std::size_t>(s)]),
      chansim::LoadSpec{load_w});
}

sparam::SParamRecord noisy_sparams(const chansim::SMatrixTrace& clean, double sigma,
                                   double load_w, std::uint64_t seed) {
  sparam::SParamRecord rec;
  rec.freq_hz = clean.freq_hz;
  rec.s11 = clean.s11;
  rec.s21 = clean.s21;
  rec.s12 = clean.s12;
  rec.s22 = clean.s22;
  rec.load_tag = "load_w=" + fmt17(load_w);
  dsp::Rng rng(seed);
  const double var = sigma * sigma;
  for (std::size_t i = 0; i < rec.freq_hz.size(); ++i) {
    rec.s11[i] += rng.cgaussian(var);
    rec.s21[i] += rng.cgaussian(var);
    rec.s12[i] += rng.cgaussian(var);
    rec.s22[i] += rng.cgaussian(var);
  }
  return rec;
}

std::vector<snr::SnrTrace> synthesize_snr_pair(const scenario::CableScenario& sc,
                                               const chansim::TwoPortModel& model,
                                               const dvec& carriers, int instant_id,
                                               double load_w, std::uint64_t seed) {
  snr::SnrTrace near_end, far_end;
  near_end.carrier_hz = carriers;
  near_end.snr_db = chansim::synthesize_snr_trace(model, carriers, sc.plc.tx_psd,
                                                  sc.plc.noise_psd, sc.noise.snr_sigma_db,
                                                  seed);
  near_end.end_tag = "near";
  near_end.instant_id = instant_id;
  near_end.load_w = load_w;
  far_end = near_end;
  // The line is reciprocal, so the far modem sees the same transfer with its
  // own measurement noise.
  far_end.snr_db = chansim::synthesize_snr_trace(model, carriers, sc.plc.tx_psd,
                                                 sc.plc.noise_psd, sc.noise.snr_sigma_db,
                                                 dsp::Rng::derive(seed, 1));
  far_end.end_tag = "far";
  return {near_end, far_end};
}

double snr_psi(const std::vector<snr::SnrTrace>& traces) {
  if (traces.empty()) throw ValidationError("no SNR traces in capture");
  double acc = 0.0;
  for (const auto& t : traces) acc += snr::summarize_snr(t).psi;
  return acc / static_cast<double>(traces.size());
}

json ids_to_json(const std::array<std::vector<std::size_t>, fusion::kStates>& ids) {
  json j;
  for (std::size_t s = 0; s < fusion::kStates; ++s) {
    j[to_string(static_cast<CableState>(s))] = ids[s];
  }
  return j;
}

std::array<std::vector<std::size_t>, fusion::kStates> ids_from_json(const json& j) {
  std::array<std::vector<std::size_t>, fusion::kStates> ids;
  for (std::size_t s = 0; s < fusion::kStates; ++s) {
    ids[s] = j.at(to_string(static_cast<CableState>(s))).get<std::vector<std::size_t>>();
  }
  return ids;
}

json parse_json_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

/// Deterministic Fisher-Yates over indices 0..n-1.
std::vector<std::size_t> shuffled_ids(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  dsp::Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
  }
  return ids;
}

double flag_value(CableState verdict, bool small_half) {
  if (verdict == CableState::LargeFault) return 1.0;
  if (small_half && verdict == CableState::SmallFault) return 0.5;
  return 0.0;
}

thresholds::DeviationSense method_sense(Method m) {
  // Reflectometry reads a residual-peak magnitude that grows with damage;
  // the transfer summaries drop.
  return m == Method::Omtdr ? thresholds::DeviationSense::rise_is_bad
                            : thresholds::DeviationSense::drop_is_bad;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void append_line_locked(const std::filesystem::path& file, const std::string& line) {
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open " + file.string() + " for append");
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw IoError("cannot lock " + file.string());
  }
  const std::string data = line + "\n";
  const ssize_t n = ::write(fd, data.data(), data.size());
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (n != static_cast<ssize_t>(data.size())) {
    throw IoError("short append to " + file.string());
  }
}

}  // namespace

std::uint64_t instant_seed(std::uint64_t run_seed, Method m, CableState s, std::size_t id) {
  const auto cell = static_cast<std::uint64_t>(static_cast<int>(m) * 3 + static_cast<int>(s));
  return dsp::Rng::derive(run_seed, (cell << 32) | static_cast<std::uint64_t>(id));
}

void DatasetManifest::validate() const {
  if (scenario_label.empty()) throw ValidationError("manifest lacks a scenario label");
  if (config_hash.empty()) throw ValidationError("manifest lacks a config hash");
  if (waveform_format != "cwf" && waveform_format != "csv") {
    throw ValidationError("unknown waveform format '" + waveform_format + "'");
  }
  for (const auto& per_method : instants) {
    for (const auto& cell : per_method) {
      for (std::size_t i = 0; i < cell.size(); ++i) {
        if (cell[i].id != i) throw ValidationError("manifest instant ids must be dense");
        if (cell[i].file.empty()) throw ValidationError("manifest entry lacks a file");
      }
    }
  }
}

void save_manifest(const DatasetManifest& man, const std::filesystem::path& file) {
  man.validate();
  json j;
  j["scenario_label"] = man.scenario_label;
  j["config_hash"] = man.config_hash;
  j["waveform_format"] = man.waveform_format;
  json methods;
  for (std::size_t m = 0; m < kMethods; ++m) {
    json states;
    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      json arr = json::array();
      for (const auto& ref : man.instants[m][s]) {
        arr.push_back({{"id", ref.id},
                       {"seed", ref.seed},
                       {"load_w", ref.load_w},
                       {"file", ref.file}});
      }
      states[to_string(static_cast<CableState>(s))] = arr;
    }
    methods[kMethodNames[m]] = states;
  }
  j["instants"] = methods;
  write_json_file(j, file);
}

DatasetManifest load_manifest(const std::filesystem::path& file) {
  const json j = parse_json_file(file);
  DatasetManifest man;
  try {
    man.scenario_label = j.at("scenario_label").get<std::string>();
    man.config_hash = j.at("config_hash").get<std::string>();
    man.waveform_format = j.at("waveform_format").get<std::string>();
    for (std::size_t m = 0; m < kMethods; ++m) {
      const json& states = j.at("instants").at(kMethodNames[m]);
      for (std::size_t s = 0; s < fusion::kStates; ++s) {
        for (const auto& e : states.at(to_string(static_cast<CableState>(s)))) {
          InstantRef ref;
          ref.id = e.at("id").get<std::size_t>();
          ref.seed = e.at("seed").get<std::uint64_t>();
          ref.load_w = e.at("load_w").get<double>();
          ref.file = e.at("file").get<std::string>();
          man.instants[m][s].push_back(ref);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  man.validate();
  return man;
}

DatasetManifest simulate_dataset(const scenario::RunConfig& cfg,
                                 const std::filesystem::path& out_dir,
                                 const std::string& waveform_format) {
  cfg.validate();
  if (waveform_format != "cwf" && waveform_format != "csv") {
    throw ValidationError("unknown waveform format '" + waveform_format + "'");
  }
  const auto& sc = cfg.scenario;

  namespace fs = std::filesystem;
  for (const char* name : kMethodNames) fs::create_directories(out_dir / name);

  DatasetManifest man;
  man.scenario_label = sc.label;
  man.config_hash = scenario::config_hash(cfg);
  man.waveform_format = waveform_format;

  const Waveform probe = reflect::generate_probe(sc.probe);
  const std::size_t n_fft = chansim::echo_fft_size(probe.samples.size());
  const dvec sparam_grid = sc.sparam_grid.grid();
  const dvec carriers = sc.snr_carriers.grid();
  const std::array<std::size_t, kMethods> counts{cfg.counts.sparam, cfg.counts.snr,
                                                 cfg.counts.omtdr};

  for (std::size_t si = 0; si < fusion::kStates; ++si) {
    const auto state = static_cast<CableState>(si);

    // The cascade's scattering and transfer responses do not depend on the
    // ac load behind the far coupler, so one sweep per state serves every
    // instant; only measurement noise varies.
    const auto ref_model = class_model(sc, state, sc.load_at(0));
    const auto strace = chansim::scattering_response(ref_model, sparam_grid);

    for (std::size_t id = 0; id < counts[0]; ++id) {
      const auto seed = instant_seed(cfg.seed, Method::Sparam, state, id);
      const double load = sc.load_at(id);
      const auto rec = noisy_sparams(strace, sc.noise.sparam_sigma, load, seed);
      const std::string file = instant_file(Method::Sparam, state, id, "s2p");
      sparam::write_touchstone(rec, out_dir / file);
      man.instants[0][si].push_back({id, seed, load, file});
    }

    for (std::size_t id = 0; id < counts[1]; ++id) {
      const auto seed = instant_seed(cfg.seed, Method::Snr, state, id);
      const double load = sc.load_at(id);
      const auto traces =
          synthesize_snr_pair(sc, ref_model, carriers, static_cast<int>(id), load, seed);
      const std::string file = instant_file(Method::Snr, state, id, "csv");
      snr::write_snr_csv(traces, out_dir / file);
      man.instants[1][si].push_back({id, seed, load, file});
    }

    // Echoes do see the load box; realizations are cached per load value.
    std::vector<std::pair<double, chansim::ChannelRealization>> echo_cache;
    for (std::size_t id = 0; id < counts[2]; ++id) {
      const auto seed = instant_seed(cfg.seed, Method::Omtdr, state, id);
      const double load = sc.load_at(id);
      const chansim::ChannelRealization* realization = nullptr;
      for (const auto& [w, r] : echo_cache) {
        if (w == load) realization = &r;
      }
      if (!realization) {
        auto model = class_model(sc, state, load);
        echo_cache.emplace_back(load, chansim::realize_echo_channel(
                                          model, sc.probe.center_freq_hz,
                                          sc.probe.effective_rate_hz(), n_fft, 0));
        realization = &echo_cache.back().second;
      }
      Waveform echo = chansim::synthesize_echo(probe, *realization, sc.noise.echo_snr_db, seed);
      const Waveform capture = reflect::receiver_capture(probe, std::move(echo));
      const std::string file = instant_file(Method::Omtdr, state, id, waveform_format);
      wio::write_waveform(capture, sc.probe.oversampling, out_dir / file);
      man.instants[2][si].push_back({id, seed, load, file});
    }
  }

  save_manifest(man, out_dir / "manifest.json");
  return man;
}

PsiExtractor::PsiExtractor(const scenario::CableScenario& sc, std::filesystem::path dataset_root)
    : sc_(sc), root_(std::move(dataset_root)), probe_(reflect::generate_probe(sc.probe)) {
  baselines_.reserve(sc_.load_schedule_w.size());
}

const reflect::Reflectogram& PsiExtractor::baseline(double load_w) {
  for (const auto& [w, r] : baselines_) {
    if (w == load_w) return r;
  }
  auto model = chansim::build_line_model(sc_.cable, {}, chansim::LoadSpec{load_w});
  const std::size_t n_fft = chansim::echo_fft_size(probe_.samples.size());
  const auto realization = chansim::realize_echo_channel(
      model, sc_.probe.center_freq_hz, sc_.probe.effective_rate_hz(), n_fft, 0);
  Waveform echo = chansim::synthesize_echo(probe_, realization, kCleanSnrDb, 0);
  const Waveform capture = reflect::receiver_capture(probe_, std::move(echo));
  baselines_.emplace_back(
      load_w, reflect::correlate(probe_, capture, sc_.probe, sc_.cable.velocity_factor));
  return baselines_.back().second;
}

double PsiExtractor::psi(Method m, const InstantRef& ref) {
  const auto path = root_ / ref.file;
  switch (m) {
    case Method::Sparam:
      return sparam::cfr_from_sparams(sparam::parse_touchstone(path)).psi;
    case Method::Snr:
      return snr_psi(snr::parse_snr_csv(path));
    case Method::Omtdr: {
      const Waveform capture = wio::read_waveform(path);
      const auto r = reflect::correlate(probe_, capture, sc_.probe, sc_.cable.velocity_factor);
      const auto& base = baseline(ref.load_w);
      const auto peaks = reflect::detect_peaks(r, &base, sc_.effective_peak_threshold());
      double psi = 0.0;
      for (const auto& p : peaks.peaks) psi = std::max(psi, p.magnitude);
      return psi;
    }
  }
  throw ValidationError("unknown method");
}

CalibrationArtifact calibrate(const scenario::RunConfig& cfg,
                              const std::filesystem::path& dataset_dir,
                              const std::string& profile) {
  cfg.validate();
  const auto prof = fusion::FusionProfile::by_name(profile);
  const auto man = load_manifest(dataset_dir / "manifest.json");
  const std::string hash = scenario::config_hash(cfg);
  if (man.config_hash != hash) {
    throw CalibrationError("dataset " + dataset_dir.string() +
                           " was simulated under a different configuration");
  }

  CalibrationArtifact cal;
  cal.config_hash = hash;
  cal.seed = cfg.seed;
  cal.split_fraction = cfg.split_fraction;
  cal.profile = prof.name;
  cal.priors = cfg.priors;

  PsiExtractor extractor(cfg.scenario, dataset_dir);

  for (std::size_t m = 0; m < kMethods; ++m) {
    auto& mc = cal.methods[m];
    std::array<dvec, fusion::kStates> raw;

    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      const auto& cell = man.instants[m][s];
      if (cell.size() < 2) {
        throw CalibrationError("state '" + std::string(to_string(static_cast<CableState>(s))) +
                               "' has too few instants to split");
      }
      const auto split_stream = (static_cast<std::uint64_t>(32 + m * 3 + s) << 32);
      auto order = shuffled_ids(cell.size(), dsp::Rng::derive(cfg.seed, split_stream));
      auto n_train = static_cast<std::size_t>(
          std::lround(cfg.split_fraction * static_cast<double>(cell.size())));
      n_train = std::clamp<std::size_t>(n_train, 1, cell.size() - 1);
      mc.train_ids[s].assign(order.begin(), order.begin() + static_cast<long>(n_train));
      mc.holdout_ids[s].assign(order.begin() + static_cast<long>(n_train), order.end());
      std::sort(mc.train_ids[s].begin(), mc.train_ids[s].end());
      std::sort(mc.holdout_ids[s].begin(), mc.holdout_ids[s].end());

      for (std::size_t id : mc.train_ids[s]) {
        raw[s].push_back(extractor.psi(static_cast<Method>(m), cell[id]));
      }
    }

    mc.model = thresholds::calibrate_deviation_model(raw[0], raw[1], raw[2],
                                                     method_sense(static_cast<Method>(m)));
    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      for (double v : raw[s]) mc.train_deviations[s].push_back(mc.model.deviation(v));
      mc.confusion.likelihood[s] =
          fusion::estimate_conditionals(mc.train_deviations[s], mc.model.thresholds);
    }
    mc.confusion.validate();
    mc.posterior = fusion::marginal_and_posterior(mc.confusion, cal.priors);
    mc.weight = fusion::compute_weight(mc.posterior, prof);
  }
  return cal;
}

void save_calibration(const CalibrationArtifact& cal, const std::filesystem::path& file) {
  json j;
  j["config_hash"] = cal.config_hash;
  j["seed"] = cal.seed;
  j["split_fraction"] = cal.split_fraction;
  j["profile"] = cal.profile;
  j["priors"] = cal.priors.p;
  json methods;
  for (std::size_t m = 0; m < kMethods; ++m) {
    const auto& mc = cal.methods[m];
    json mj;
    mj["sense"] = mc.model.sense == thresholds::DeviationSense::drop_is_bad ? "drop_is_bad"
                                                                            : "rise_is_bad";
    mj["healthy_ref"] = mc.model.healthy_ref;
    mj["th_small"] = mc.model.thresholds.th_small;
    mj["th_large"] = mc.model.thresholds.th_large;
    mj["likelihood"] = mc.confusion.likelihood;
    mj["marginal"] = mc.posterior.marginal;
    mj["posterior"] = mc.posterior.posterior;
    mj["verdict_defined"] = mc.posterior.defined;
    mj["weight"] = mc.weight;
    mj["train_ids"] = ids_to_json(mc.train_ids);
    mj["holdout_ids"] = ids_to_json(mc.holdout_ids);
    json pools;
    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      pools[to_string(static_cast<CableState>(s))] = mc.train_deviations[s];
    }
    mj["train_deviations"] = pools;
    methods[kMethodNames[m]] = mj;
  }
  j["methods"] = methods;
  write_json_file(j, file);
}

CalibrationArtifact load_calibration(const std::filesystem::path& file) {
  const json j = parse_json_file(file);
  CalibrationArtifact cal;
  try {
    cal.config_hash = j.at("config_hash").get<std::string>();
    cal.seed = j.at("seed").get<std::uint64_t>();
    cal.split_fraction = j.at("split_fraction").get<double>();
    cal.profile = j.at("profile").get<std::string>();
    cal.priors.p = j.at("priors").get<fusion::Row3>();
    for (std::size_t m = 0; m < kMethods; ++m) {
      const json& mj = j.at("methods").at(kMethodNames[m]);
      auto& mc = cal.methods[m];
      const auto sense = mj.at("sense").get<std::string>();
      if (sense != "drop_is_bad" && sense != "rise_is_bad") {
        throw ParseError(file.string() + ": unknown sense '" + sense + "'");
      }
      mc.model.sense = sense == "drop_is_bad" ? thresholds::DeviationSense::drop_is_bad
                                              : thresholds::DeviationSense::rise_is_bad;
      mc.model.healthy_ref = mj.at("healthy_ref").get<double>();
      mc.model.thresholds.th_small = mj.at("th_small").get<double>();
      mc.model.thresholds.th_large = mj.at("th_large").get<double>();
      mc.confusion.likelihood = mj.at("likelihood").get<fusion::Mat3>();
      mc.posterior.marginal = mj.at("marginal").get<fusion::Row3>();
      mc.posterior.posterior = mj.at("posterior").get<fusion::Mat3>();
      mc.posterior.defined = mj.at("verdict_defined").get<std::array<bool, fusion::kStates>>();
      mc.weight = mj.at("weight").get<double>();
      mc.train_ids = ids_from_json(mj.at("train_ids"));
      mc.holdout_ids = ids_from_json(mj.at("holdout_ids"));
      for (std::size_t s = 0; s < fusion::kStates; ++s) {
        mc.train_deviations[s] =
            mj.at("train_deviations").at(to_string(static_cast<CableState>(s))).get<dvec>();
      }
      mc.model.thresholds.validate();
      mc.confusion.validate();
    }
  } catch (const json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  return cal;
}

double MethodAssessment::class_accuracy(std::size_t s) const {
  if (class_counts[s] == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(class_correct[s]) / static_cast<double>(class_counts[s]);
}

Assessment assess(const scenario::RunConfig& cfg, const std::filesystem::path& dataset_dir,
                  const CalibrationArtifact& cal, const std::string& profile,
                  const std::array<bool, fusion::kStates>& state_filter) {
  cfg.validate();
  const auto prof = fusion::FusionProfile::by_name(profile);
  const auto man = load_manifest(dataset_dir / "manifest.json");
  const std::string hash = scenario::config_hash(cfg);
  if (hash != cal.config_hash || man.config_hash != cal.config_hash) {
    throw CalibrationError("calibration, dataset and configuration fingerprints disagree");
  }

  PsiExtractor extractor(cfg.scenario, dataset_dir);

  Assessment a;
  a.profile = prof.name;
  std::vector<fusion::MethodStream> streams;
  for (std::size_t m = 0; m < kMethods; ++m) {
    const auto& mc = cal.methods[m];
    auto& ma = a.methods[m];
    ma.name = kMethodNames[m];
    ma.weight = prof.name == cal.profile ? mc.weight : fusion::compute_weight(mc.posterior, prof);

    fusion::MethodStream stream;
    stream.name = ma.name;
    stream.weight = ma.weight;
    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      if (!state_filter[s]) continue;
      for (std::size_t id : mc.holdout_ids[s]) {
        if (id >= man.instants[m][s].size()) {
          throw CalibrationError("calibration holdout id outside the dataset");
        }
        const double psi = extractor.psi(static_cast<Method>(m), man.instants[m][s][id]);
        const CableState verdict = mc.model.classify(psi);
        stream.flags.push_back(flag_value(verdict, cfg.small_flag_half));
        ma.class_counts[s] += 1;
        if (verdict == static_cast<CableState>(s)) ma.class_correct[s] += 1;
        if (static_cast<CableState>(s) == CableState::Healthy &&
            verdict == CableState::LargeFault) {
          ma.healthy_false_positives += 1;
        }
      }
    }
    if (stream.flags.empty()) {
      throw ValidationError("state filter leaves no held-out instants to assess");
    }
    double sum = 0.0;
    for (double f : stream.flags) sum += f;
    ma.flag_rate = sum / static_cast<double>(stream.flags.size());
    streams.push_back(std::move(stream));
  }

  a.report = fusion::compute_health_index(streams);
  return a;
}

void save_assessment(const Assessment& a, const std::filesystem::path& file) {
  json j;
  j["profile"] = a.profile;
  j["hi"] = a.report.hi;
  j["ncfd"] = a.report.ncfd;
  j["cfd"] = a.report.cfd;
  json methods;
  for (std::size_t m = 0; m < kMethods; ++m) {
    const auto& ma = a.methods[m];
    json mj;
    mj["weight"] = ma.weight;
    mj["flag_rate"] = ma.flag_rate;
    mj["hi"] = a.report.individual_hi[m];
    json per_class;
    for (std::size_t s = 0; s < fusion::kStates; ++s) {
      json cj;
      cj["count"] = ma.class_counts[s];
      cj["correct"] = ma.class_correct[s];
      if (ma.class_counts[s] > 0) cj["accuracy"] = ma.class_accuracy(s);
      per_class[to_string(static_cast<CableState>(s))] = cj;
    }
    mj["per_class"] = per_class;
    mj["healthy_false_positives"] = ma.healthy_false_positives;
    methods[ma.name] = mj;
  }
  j["methods"] = methods;
  write_json_file(j, file);
}

int exit_band(double hi) {
  if (hi >= 80.0) return 0;
  if (hi >= 50.0) return 1;
  return 2;
}

std::string MonitorRecord::to_json_line() const {
  json j;
  j["ts_ms"] = ts_ms;
  j["iteration"] = iteration;
  j["hi"] = hi;
  json pj, fj;
  for (std::size_t m = 0; m < kMethods; ++m) {
    pj[kMethodNames[m]] = psi[m];
    fj[kMethodNames[m]] = flags[m];
  }
  j["psi"] = pj;
  j["flags"] = fj;
  j["verdict"] = verdict;
  return j.dump();
}

std::vector<MonitorRecord> read_monitor_records(const std::filesystem::path& file) {
  std::vector<MonitorRecord> records;
  std::ifstream in(file, std::ios::binary);
  if (!in) return records;  // nothing recorded yet
  std::string line;
  std::size_t line_no = 0;
  std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = file.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
      MonitorRecord rec;
      rec.ts_ms = j.at("ts_ms").get<std::int64_t>();
      rec.iteration = j.at("iteration").get<std::size_t>();
      rec.hi = j.at("hi").get<double>();
      for (std::size_t m = 0; m < kMethods; ++m) {
        rec.psi[m] = j.at("psi").at(kMethodNames[m]).get<double>();
        rec.flags[m] = j.at("flags").at(kMethodNames[m]).get<int>();
      }
      rec.verdict = j.at("verdict").get<std::string>();
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(where + ": corrupt monitor record (" + e.what() + ")");
    }
    if (records.back().ts_ms <= prev_ts) {
      throw ParseError(where + ": monitor timestamps must increase");
    }
    prev_ts = records.back().ts_ms;
  }
  return records;
}

MonitorRecord monitor_step(const std::filesystem::path& config_path,
                           const CalibrationArtifact& cal, const std::string& profile,
                           const std::filesystem::path& record_file) {
  // Reload so layout edits made while the monitor runs take effect.
  const auto cfg = scenario::load_run_config(config_path);
  if (scenario::config_hash(cfg) != cal.config_hash) {
    throw CalibrationError("run configuration no longer matches the calibration");
  }
  const auto prof = fusion::FusionProfile::by_name(profile);
  const auto existing = read_monitor_records(record_file);
  const std::size_t k = existing.size();

  const auto& sc = cfg.scenario;
  const double load = sc.load_at(k);
  const auto faults = by_position(sc.monitored_faults);
  const auto model = chansim::build_line_model(sc.cable, faults, chansim::LoadSpec{load});

  MonitorRecord rec;
  rec.iteration = k;

  PsiExtractor extractor(sc, config_path.parent_path());
  const auto stream_seed = [&](std::size_t m) {
    return dsp::Rng::derive(cfg.seed, (static_cast<std::uint64_t>(16 + m) << 32) |
                                          static_cast<std::uint64_t>(k));
  };

  {
    const auto strace = chansim::scattering_response(model, sc.sparam_grid.grid());
    const auto srec = noisy_sparams(strace, sc.noise.sparam_sigma, load, stream_seed(0));
    rec.psi[0] = sparam::cfr_from_sparams(srec).psi;
  }
  {
    const auto traces = synthesize_snr_pair(sc, model, sc.snr_carriers.grid(),
                                            static_cast<int>(k), load, stream_seed(1));
    rec.psi[1] = snr_psi(traces);
  }
  {
    const Waveform& probe = extractor.probe();
    const std::size_t n_fft = chansim::echo_fft_size(probe.samples.size());
    const auto realization = chansim::realize_echo_channel(
        model, sc.probe.center_freq_hz, sc.probe.effective_rate_hz(), n_fft, 0);
    Waveform echo = chansim::synthesize_echo(probe, realization, sc.noise.echo_snr_db,
                                             stream_seed(2));
    const Waveform capture = reflect::receiver_capture(probe, std::move(echo));
    const auto r = reflect::correlate(probe, capture, sc.probe, sc.cable.velocity_factor);
    const auto peaks =
        reflect::detect_peaks(r, &extractor.baseline(load), sc.effective_peak_threshold());
    double psi = 0.0;
    for (const auto& p : peaks.peaks) psi = std::max(psi, p.magnitude);
    rec.psi[2] = psi;
  }

  CableState worst = CableState::Healthy;
  std::vector<fusion::MethodStream> streams;
  for (std::size_t m = 0; m < kMethods; ++m) {
    const auto& mc = cal.methods[m];
    const CableState verdict = mc.model.classify(rec.psi[m]);
    worst = std::max(worst, verdict);
    rec.flags[m] = thresholds::flag_for(verdict);
    const double w =
        prof.name == cal.profile ? mc.weight : fusion::compute_weight(mc.posterior, prof);
    streams.push_back({kMethodNames[m], {flag_value(verdict, cfg.small_flag_half)}, w});
  }
  rec.verdict = to_string(worst);
  rec.hi = fusion::compute_health_index(streams).hi;

  rec.ts_ms = now_ms();
  if (!existing.empty()) rec.ts_ms = std::max(rec.ts_ms, existing.back().ts_ms + 1);
  append_line_locked(record_file, rec.to_json_line());
  return rec;
}

std::vector<MonitorRecord> run_monitor(const std::filesystem::path& config_path,
                                       const CalibrationArtifact& cal,
                                       const std::string& profile,
                                       const std::filesystem::path& record_file,
                                       std::size_t iterations, double interval_s) {
  if (iterations == 0) throw ValidationError("monitor needs at least one iteration");
  if (!(interval_s >= 0.0)) throw ValidationError("monitor interval must be >= 0");
  std::vector<MonitorRecord> out;
  for (std::size_t i = 0; i < iterations; ++i) {
    if (i > 0 && interval_s > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(interval_s));
    }
    out.push_back(monitor_step(config_path, cal, profile, record_file));
  }
  return out;
}

void write_reports(const scenario::RunConfig& cfg, const CalibrationArtifact& cal,
                   const std::filesystem::path& report_dir) {
  cfg.validate();
  if (scenario::config_hash(cfg) != cal.config_hash) {
    throw CalibrationError("calibration does not belong to this configuration");
  }
  const auto& sc = cfg.scenario;
  std::filesystem::create_directories(report_dir);

  const Waveform probe = reflect::generate_probe(sc.probe);
  const std::size_t n_fft = chansim::echo_fft_size(probe.samples.size());
  const double load = sc.load_at(0);
  const dvec sparam_grid = sc.sparam_grid.grid();
  const dvec carriers = sc.snr_carriers.grid();

  std::array<dvec, fusion::kStates> cfr_mag, snr_db;
  for (std::size_t s = 0; s < fusion::kStates; ++s) {
    const auto state = static_cast<CableState>(s);
    const auto model = class_model(sc, state, load);

    const auto realization = chansim::realize_echo_channel(
        model, sc.probe.center_freq_hz, sc.probe.effective_rate_hz(), n_fft, 0);
    Waveform echo = chansim::synthesize_echo(probe, realization, kCleanSnrDb, 0);
    const Waveform capture = reflect::receiver_capture(probe, std::move(echo));
    const auto r = reflect::correlate(probe, capture, sc.probe, sc.cable.velocity_factor);
    wio::write_reflectogram_csv(
        r.values, report_dir / ("reflectogram_" + std::string(to_string(state)) + ".csv"));

    const auto strace = chansim::scattering_response(model, sparam_grid);
    cfr_mag[s].reserve(strace.s21.size());
    for (const auto& v : strace.s21) cfr_mag[s].push_back(std::abs(v));
    snr_db[s] = chansim::synthesize_snr_trace(model, carriers, sc.plc.tx_psd, sc.plc.noise_psd,
                                              0.0, 0);
  }

  {
    std::ofstream out(report_dir / "cfr_spectrum.csv", std::ios::binary);
    if (!out) throw IoError("cannot write cfr_spectrum.csv");
    out << "freq_hz,healthy_mag,small_mag,large_mag\n";
    for (std::size_t i = 0; i < sparam_grid.size(); ++i) {
      out << fmt17(sparam_grid[i]) << ',' << fmt17(cfr_mag[0][i]) << ',' << fmt17(cfr_mag[1][i])
          << ',' << fmt17(cfr_mag[2][i]) << '\n';
    }
  }
  {
    std::ofstream out(report_dir / "snr_spectrum.csv", std::ios::binary);
    if (!out) throw IoError("cannot write snr_spectrum.csv");
    out << "carrier_hz,healthy_db,small_db,large_db\n";
    for (std::size_t i = 0; i < carriers.size(); ++i) {
      out << fmt17(carriers[i]) << ',' << fmt17(snr_db[0][i]) << ',' << fmt17(snr_db[1][i])
          << ',' << fmt17(snr_db[2][i]) << '\n';
    }
  }

  // Health-index timeline over the three reference operating mixes, drawn
  // from the calibration pools: mostly-healthy, degraded, and recovering
  // segments form three plateaus.
  const std::array<fusion::CaseMix, 3> mixes{fusion::CaseMix{{0.90, 0.08, 0.02}},
                                             fusion::CaseMix{{0.17, 0.58, 0.25}},
                                             fusion::CaseMix{{0.70, 0.25, 0.05}}};
  const std::array<std::size_t, 3> case_len{50, 50, 80};

  std::vector<fusion::StatePools> pools(kMethods);
  std::vector<thresholds::ThresholdPair> th(kMethods);
  for (std::size_t m = 0; m < kMethods; ++m) {
    pools[m].pool = cal.methods[m].train_deviations;
    th[m] = cal.methods[m].model.thresholds;
  }

  std::ofstream out(report_dir / "hi_timeline.csv", std::ios::binary);
  if (!out) throw IoError("cannot write hi_timeline.csv");
  out << "time_sample,hi_sparam,hi_snr,hi_omtdr,hi_composite\n";
  std::size_t t = 0;
  for (std::size_t c = 0; c < mixes.size(); ++c) {
    const auto em = fusion::emulate_case(pools, th, mixes[c], case_len[c],
                                         dsp::Rng::derive(cfg.seed, 0xca5e0000ULL + c));
    std::vector<fusion::MethodStream> streams;
    std::array<double, kMethods> hi_m{};
    for (std::size_t m = 0; m < kMethods; ++m) {
      std::vector<double> flags(em.flags[m].begin(), em.flags[m].end());
      hi_m[m] = fusion::individual_hi(flags);
      streams.push_back({kMethodNames[m], std::move(flags), cal.methods[m].weight});
    }
    const double hi = fusion::compute_health_index(streams).hi;
    for (std::size_t i = 0; i < case_len[c]; ++i, ++t) {
      out << t << ',' << fmt17(hi_m[0]) << ',' << fmt17(hi_m[1]) << ',' << fmt17(hi_m[2]) << ','
          << fmt17(hi) << '\n';
    }
  }
  if (!out) throw IoError("write failed: hi_timeline.csv");
}

}  // namespace cablewatch::pipeline
