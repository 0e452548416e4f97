#include "cablewatch/scenario.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace cablewatch::scenario {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

const json& require(const json& j, const char* key, const std::filesystem::path& file) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(file.string() + ": missing field '" + key + "'");
  }
  return *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

chansim::FaultSpec fault_from_json(const json& j, double z0_ohm,
                                   const std::filesystem::path& file) {
  const double position = require(j, "position_m", file).get<double>();
  const double extent = require(j, "extent_m", file).get<double>();
  std::optional<double> zp;
  if (j.contains("z_perturbation_ohm")) zp = j["z_perturbation_ohm"].get<double>();
  return chansim::FaultSpec::make(position, extent, z0_ohm, zp);
}

json fault_to_json(const chansim::FaultSpec& f) {
  return json{{"position_m", f.position_m},
              {"extent_m", f.extent_m},
              {"z_perturbation_ohm", f.z_perturbation_ohm}};
}

GridSpec grid_from_json(const json& j, const std::filesystem::path& file) {
  GridSpec g;
  g.start_hz = require(j, "start_hz", file).get<double>();
  g.stop_hz = require(j, "stop_hz", file).get<double>();
  g.points = require(j, "points", file).get<std::size_t>();
  return g;
}

json grid_to_json(const GridSpec& g) {
  return json{{"start_hz", g.start_hz}, {"stop_hz", g.stop_hz}, {"points", g.points}};
}

json scenario_to_json(const CableScenario& s) {
  json j;
  j["label"] = s.label;
  j["cable"] = {{"length_m", s.cable.length_m},
                {"z0_ohm", s.cable.z0_ohm},
                {"velocity_factor", s.cable.velocity_factor},
                {"attenuation_db_per_m_at_1mhz", s.cable.attenuation_db_per_m_at_1mhz},
                {"attenuation_freq_exponent", s.cable.attenuation_freq_exponent},
                {"label", s.cable.label}};
  j["load_schedule_w"] = s.load_schedule_w;
  json probe{{"center_freq_hz", s.probe.center_freq_hz},
             {"sample_rate_hz", s.probe.sample_rate_hz},
             {"oversampling", s.probe.oversampling},
             {"n_tones", s.probe.n_tones},
             {"seed", s.probe.seed}};
  if (!s.probe.active_tone_mask.empty()) {
    std::vector<int> mask;
    for (bool b : s.probe.active_tone_mask) mask.push_back(b ? 1 : 0);
    probe["active_tone_mask"] = mask;
  }
  j["probe"] = probe;
  j["noise"] = {{"echo_snr_db", s.noise.echo_snr_db},
                {"snr_sigma_db", s.noise.snr_sigma_db},
                {"sparam_sigma", s.noise.sparam_sigma}};
  j["plc"] = {{"tx_psd", s.plc.tx_psd}, {"noise_psd", s.plc.noise_psd}};
  j["sparam_grid_hz"] = grid_to_json(s.sparam_grid);
  j["snr_carriers_hz"] = grid_to_json(s.snr_carriers);
  json classes;
  const char* names[3] = {"healthy", "small", "large"};
  for (std::size_t c = 0; c < 3; ++c) {
    json arr = json::array();
    for (const auto& f : s.class_faults[c]) arr.push_back(fault_to_json(f));
    classes[names[c]] = arr;
  }
  j["classes"] = classes;
  json monitored = json::array();
  for (const auto& f : s.monitored_faults) monitored.push_back(fault_to_json(f));
  j["monitored"] = monitored;
  j["peak_threshold"] = s.peak_threshold;
  return j;
}

CableScenario scenario_from_json(const json& j, const std::filesystem::path& file) {
  CableScenario s;
  s.label = require(j, "label", file).get<std::string>();

  const json& c = require(j, "cable", file);
  s.cable.length_m = require(c, "length_m", file).get<double>();
  s.cable.z0_ohm = get_or(c, "z0_ohm", 100.0);
  s.cable.velocity_factor = get_or(c, "velocity_factor", 0.66);
  s.cable.attenuation_db_per_m_at_1mhz = get_or(c, "attenuation_db_per_m_at_1mhz", 0.01);
  s.cable.attenuation_freq_exponent = get_or(c, "attenuation_freq_exponent", 0.5);
  s.cable.label = get_or<std::string>(c, "label", "");

  s.load_schedule_w = require(j, "load_schedule_w", file).get<dvec>();

  if (j.contains("probe")) {
    const json& p = j["probe"];
    s.probe.center_freq_hz = get_or(p, "center_freq_hz", 3.0e7);
    s.probe.sample_rate_hz = get_or(p, "sample_rate_hz", 5.0e6);
    s.probe.oversampling = get_or(p, "oversampling", 32u);
    s.probe.n_tones = get_or(p, "n_tones", 64u);
    s.probe.seed = get_or<std::uint64_t>(p, "seed", 1);
    if (p.contains("active_tone_mask")) {
      for (int v : p["active_tone_mask"].get<std::vector<int>>()) {
        s.probe.active_tone_mask.push_back(v != 0);
      }
    }
    if (p.contains("masked_bands_hz")) {
      for (const auto& band : p["masked_bands_hz"]) {
        if (!band.is_array() || band.size() != 2) {
          throw ParseError(file.string() + ": masked_bands_hz entries are [lo, hi]");
        }
        reflect::mask_band(s.probe, band[0].get<double>(), band[1].get<double>());
      }
    }
  }

  if (j.contains("noise")) {
    const json& n = j["noise"];
    s.noise.echo_snr_db = get_or(n, "echo_snr_db", 45.0);
    s.noise.snr_sigma_db = get_or(n, "snr_sigma_db", 0.5);
    s.noise.sparam_sigma = get_or(n, "sparam_sigma", 1e-4);
  }
  if (j.contains("plc")) {
    const json& p = j["plc"];
    s.plc.tx_psd = get_or(p, "tx_psd", 1.0);
    s.plc.noise_psd = get_or(p, "noise_psd", 1e-5);
  }
  if (j.contains("sparam_grid_hz")) s.sparam_grid = grid_from_json(j["sparam_grid_hz"], file);
  if (j.contains("snr_carriers_hz")) s.snr_carriers = grid_from_json(j["snr_carriers_hz"], file);

  const json& classes = require(j, "classes", file);
  const char* names[3] = {"healthy", "small", "large"};
  for (std::size_t c = 0; c < 3; ++c) {
    for (const auto& f : require(classes, names[c], file)) {
      s.class_faults[c].push_back(fault_from_json(f, s.cable.z0_ohm, file));
    }
  }
  if (j.contains("monitored")) {
    for (const auto& f : j["monitored"]) {
      s.monitored_faults.push_back(fault_from_json(f, s.cable.z0_ohm, file));
    }
  }
  s.peak_threshold = get_or(j, "peak_threshold", 0.0);
  s.validate();
  return s;
}

/// 64-bit FNV-1a.
std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void GridSpec::validate() const {
  if (points < 2) throw ValidationError("grid needs at least two points");
  if (!(start_hz > 0.0) || !(stop_hz > start_hz)) {
    throw ValidationError("grid bounds must satisfy 0 < start < stop");
  }
}

dvec GridSpec::grid() const {
  validate();
  dvec g(points);
  const double step = (stop_hz - start_hz) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = start_hz + step * static_cast<double>(i);
  }
  g.back() = stop_hz;
  return g;
}

void NoiseSpec::validate() const {
  if (!std::isfinite(echo_snr_db)) throw ValidationError("echo SNR must be finite");
  if (!(snr_sigma_db >= 0.0)) throw ValidationError("SNR jitter must be non-negative");
  if (!(sparam_sigma >= 0.0)) throw ValidationError("S-parameter noise must be non-negative");
}

void PlcSpec::validate() const {
  if (!(tx_psd > 0.0) || !(noise_psd > 0.0)) {
    throw ValidationError("PLC spectral densities must be positive");
  }
}

void CableScenario::validate() const {
  if (label.empty()) throw ValidationError("scenario needs a label");
  cable.validate();
  if (load_schedule_w.empty()) throw ValidationError("load schedule is empty");
  for (double w : load_schedule_w) {
    chansim::LoadSpec{w}.validate();
  }
  probe.validate();
  noise.validate();
  plc.validate();
  sparam_grid.validate();
  snr_carriers.validate();
  for (const auto& faults : class_faults) {
    for (const auto& f : faults) f.validate(cable.length_m);
  }
  for (const auto& f : monitored_faults) f.validate(cable.length_m);
  if (!(peak_threshold >= 0.0)) throw ValidationError("peak threshold must be >= 0");
}

double CableScenario::effective_peak_threshold() const {
  if (peak_threshold > 0.0) return peak_threshold;
  const double noise_var = std::pow(10.0, -noise.echo_snr_db / 10.0);
  const double sigma_lag =
      std::sqrt(noise_var / static_cast<double>(probe.symbol_length()));
  return 6.0 * sigma_lag;
}

double CableScenario::load_at(std::size_t instant) const {
  return load_schedule_w[instant % load_schedule_w.size()];
}

CableScenario load_scenario(const std::filesystem::path& file) {
  return scenario_from_json(parse_file(file), file);
}

void save_scenario(const CableScenario& s, const std::filesystem::path& file) {
  s.validate();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << scenario_to_json(s).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + file.string());
}

void MethodCounts::validate() const {
  if (sparam < 5 || snr < 5 || omtdr < 5) {
    throw ValidationError("instance counts must be at least 5");
  }
}

void RunConfig::validate() const {
  scenario.validate();
  if (!(split_fraction > 0.0) || !(split_fraction < 1.0)) {
    throw ValidationError("split fraction must lie in (0, 1)");
  }
  fusion::FusionProfile::by_name(profile);  // throws on unknown names
  counts.validate();
  priors.validate();
  if (out_dir.empty()) throw ValidationError("output directory is empty");
}

RunConfig load_run_config(const std::filesystem::path& file) {
  const json j = parse_file(file);
  RunConfig cfg;
  std::filesystem::path sp(require(j, "scenario", file).get<std::string>());
  if (sp.is_relative()) sp = file.parent_path() / sp;
  cfg.scenario_path = sp;
  cfg.scenario = load_scenario(sp);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.split_fraction = get_or(j, "split_fraction", 0.6);
  cfg.profile = get_or<std::string>(j, "profile", "detect-first");
  cfg.out_dir = get_or<std::string>(j, "out_dir", "out");
  if (j.contains("counts")) {
    const json& c = j["counts"];
    cfg.counts.sparam = get_or<std::size_t>(c, "sparam", 100);
    cfg.counts.snr = get_or<std::size_t>(c, "snr", 100);
    cfg.counts.omtdr = get_or<std::size_t>(c, "omtdr", 100);
  }
  if (j.contains("priors")) {
    const auto p = j["priors"].get<std::vector<double>>();
    if (p.size() != 3) throw ParseError(file.string() + ": priors must have 3 entries");
    cfg.priors.p = {p[0], p[1], p[2]};
  }
  cfg.small_flag_half = get_or(j, "small_flag_half", false);
  cfg.validate();
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  json j;
  j["scenario"] = scenario_to_json(cfg.scenario);
  // The monitored fault layout is the quantity under observation, not data
  // lineage; editing it must not invalidate calibrations.
  j["scenario"].erase("monitored");
  j["seed"] = cfg.seed;
  j["split_fraction"] = cfg.split_fraction;
  j["counts"] = {{"sparam", cfg.counts.sparam},
                 {"snr", cfg.counts.snr},
                 {"omtdr", cfg.counts.omtdr}};
  j["priors"] = cfg.priors.p;
  return fnv1a_hex(j.dump());
}

}  // namespace cablewatch::scenario
