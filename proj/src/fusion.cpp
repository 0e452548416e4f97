#include "cablewatch/fusion.hpp"

#include <cmath>

#include "cablewatch/dsp.hpp"

namespace cablewatch::fusion {

namespace {

void check_prob(double v, const char* what) {
  if (!(v >= 0.0) || !(v <= 1.0 + kProbTol)) {
    throw ValidationError(std::string(what) + " is not a probability");
  }
}

}  // namespace

void Priors::validate() const {
  double sum = 0.0;
  for (double v : p) {
    check_prob(v, "prior");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTol) throw ValidationError("priors must sum to 1");
}

Row3 estimate_conditionals(const dvec& deviations, const thresholds::ThresholdPair& th) {
  if (deviations.empty()) {
    throw CalibrationError("no calibration summaries for this state");
  }
  th.validate();
  std::array<std::size_t, kStates> counts{0, 0, 0};
  for (double d : deviations) {
    counts[static_cast<std::size_t>(thresholds::classify_deviation(d, th))]++;
  }
  const double n = static_cast<double>(deviations.size());
  return {static_cast<double>(counts[0]) / n, static_cast<double>(counts[1]) / n,
          static_cast<double>(counts[2]) / n};
}

void ConfusionModel::validate() const {
  for (const auto& row : likelihood) {
    double sum = 0.0;
    for (double v : row) {
      check_prob(v, "likelihood");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
      throw ValidationError("likelihood rows must sum to 1");
    }
  }
}

ConfusionModel ConfusionModel::identity() {
  ConfusionModel m;
  for (std::size_t s = 0; s < kStates; ++s) m.likelihood[s][s] = 1.0;
  return m;
}

double PosteriorTable::at(CableState state, CableState verdict) const {
  const auto y = static_cast<std::size_t>(verdict);
  if (!defined[y]) {
    throw CalibrationError(std::string("posterior undefined: verdict '") +
                           to_string(verdict) + "' never occurs under the prior");
  }
  return posterior[static_cast<std::size_t>(state)][y];
}

PosteriorTable marginal_and_posterior(const ConfusionModel& model, const Priors& priors) {
  model.validate();
  priors.validate();
  PosteriorTable t;
  for (std::size_t y = 0; y < kStates; ++y) {
    double m = 0.0;
    for (std::size_t s = 0; s < kStates; ++s) m += model.likelihood[s][y] * priors.p[s];
    t.marginal[y] = m;
    t.defined[y] = m > 0.0;
    for (std::size_t s = 0; s < kStates; ++s) {
      t.posterior[s][y] =
          t.defined[y] ? model.likelihood[s][y] * priors.p[s] / m : 0.0;
    }
  }
  return t;
}

void FusionProfile::validate() const {
  check_prob(alpha, "alpha");
  check_prob(beta, "beta");
  check_prob(gamma, "gamma");
  if (std::abs(alpha + beta + gamma - 1.0) > kProbTol) {
    throw ValidationError("profile mix must sum to 1");
  }
}

FusionProfile FusionProfile::detect_first() { return {"detect-first", 0.5, 0.3, 0.2}; }
FusionProfile FusionProfile::low_fp() { return {"low-fp", 0.2, 0.3, 0.5}; }

FusionProfile FusionProfile::by_name(const std::string& name) {
  if (name == "detect-first") return detect_first();
  if (name == "low-fp") return low_fp();
  throw ValidationError("unknown profile '" + name + "' (detect-first, low-fp)");
}

double compute_weight(const PosteriorTable& table, const FusionProfile& profile) {
  profile.validate();
  const double w = profile.alpha * table.at(CableState::LargeFault, CableState::LargeFault) +
                   profile.beta * table.at(CableState::SmallFault, CableState::SmallFault) +
                   profile.gamma * table.at(CableState::Healthy, CableState::Healthy);
  return w;
}

double individual_hi(const std::vector<double>& flags) {
  if (flags.empty()) throw ValidationError("empty alarm stream");
  double sum = 0.0;
  for (double f : flags) {
    if (!(f >= 0.0) || !(f <= 1.0)) throw ValidationError("alarm flags must lie in [0, 1]");
    sum += f;
  }
  return (1.0 - sum / static_cast<double>(flags.size())) * 100.0;
}

HealthReport compute_health_index(const std::vector<MethodStream>& streams) {
  if (streams.empty()) throw ValidationError("no method streams");
  double wsum = 0.0;
  for (const auto& s : streams) {
    if (s.flags.empty()) throw ValidationError("method '" + s.name + "' has no flags");
    // The index normalizes by the weight sum, so any non-negative scale works.
    if (!std::isfinite(s.weight) || s.weight < 0.0) {
      throw ValidationError("method weight must be finite and non-negative");
    }
    wsum += s.weight;
  }
  if (!(wsum > 0.0)) throw ValidationError("all method weights are zero");

  HealthReport r;
  for (const auto& s : streams) {
    double flag_sum = 0.0;
    for (double f : s.flags) {
      if (!(f >= 0.0) || !(f <= 1.0)) throw ValidationError("alarm flags must lie in [0, 1]");
      flag_sum += f;
    }
    const double rate = flag_sum / static_cast<double>(s.flags.size());
    r.cfd += s.weight * rate;
    r.individual_hi.push_back((1.0 - rate) * 100.0);
  }
  r.ncfd = r.cfd / wsum;
  r.hi = (1.0 - r.ncfd) * 100.0;
  return r;
}

void CaseMix::validate() const {
  double sum = 0.0;
  for (double v : p) {
    check_prob(v, "mix entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTol) throw ValidationError("case mix must sum to 1");
}

CaseEmulation emulate_case(const std::vector<StatePools>& pools,
                           const std::vector<thresholds::ThresholdPair>& th,
                           const CaseMix& mix, std::size_t n, std::uint64_t seed) {
  mix.validate();
  if (pools.empty() || pools.size() != th.size()) {
    throw ValidationError("pool and threshold lists disagree");
  }
  if (n == 0) throw ValidationError("need at least one draw");
  for (std::size_t s = 0; s < kStates; ++s) {
    if (mix.p[s] > 0.0) {
      for (const auto& mp : pools) {
        if (mp.pool[s].empty()) {
          throw ValidationError(std::string("state '") +
                                to_string(static_cast<CableState>(s)) +
                                "' has positive share but an empty pool");
        }
      }
    }
  }

  CaseEmulation out;
  out.flags.assign(pools.size(), {});
  out.ground_truth_hi = (1.0 - mix.p[2]) * 100.0;

  dsp::Rng rng(dsp::Rng::derive(seed, 0x656d756cULL));
  for (std::size_t i = 0; i < n; ++i) {
    // Ground truth state for this instant, shared across methods.
    const double u = rng.uniform();
    std::size_t s = (u < mix.p[0]) ? 0 : (u < mix.p[0] + mix.p[1]) ? 1 : 2;
    out.states.push_back(static_cast<CableState>(s));
    for (std::size_t m = 0; m < pools.size(); ++m) {
      const dvec& pool = pools[m].pool[s];
      const std::size_t pick =
          std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size())),
                   pool.size() - 1);
      const CableState verdict = thresholds::classify_deviation(pool[pick], th[m]);
      out.flags[m].push_back(thresholds::flag_for(verdict));
    }
  }
  return out;
}

}  // namespace cablewatch::fusion
