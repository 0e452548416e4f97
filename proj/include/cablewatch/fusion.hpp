#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cablewatch/thresholds.hpp"
#include "cablewatch/types.hpp"

// Decision fusion across diagnostic methods. Per-method verdict statistics
// from calibration data are inverted into posteriors; a profile-weighted mix
// of the posterior diagonal scores each method's trustworthiness; alarm
// streams combine into one normalized health index.

namespace cablewatch::fusion {

inline constexpr double kProbTol = 1e-12;
inline constexpr std::size_t kStates = 3;

using Row3 = std::array<double, kStates>;
using Mat3 = std::array<Row3, kStates>;

struct Priors {
  Row3 p{0.9, 0.08, 0.02};  // healthy, small, large

  void validate() const;
  double at(CableState s) const { return p[static_cast<std::size_t>(s)]; }
};

/// Share of calibration summaries from one known state that each band
/// catches: (healthy, small, large) in that order. Exact counting.
Row3 estimate_conditionals(const dvec& deviations, const thresholds::ThresholdPair& th);

/// likelihood[s][y] = P(verdict y | state s); rows close to 1.
struct ConfusionModel {
  Mat3 likelihood{};

  void validate() const;
  static ConfusionModel identity();
};

struct PosteriorTable {
  Row3 marginal{};           // P(verdict y)
  Mat3 posterior{};          // posterior[s][y] = P(state s | verdict y)
  std::array<bool, kStates> defined{};  // verdict column observable at all

  /// Throws CalibrationError when the verdict never occurs under the prior.
  double at(CableState state, CableState verdict) const;
};

PosteriorTable marginal_and_posterior(const ConfusionModel& model, const Priors& priors);

/// Mixing profile over the posterior diagonal. alpha scores large-fault
/// recall, beta small-fault recall, gamma healthy recall; they sum to 1.
struct FusionProfile {
  std::string name;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;

  void validate() const;
  static FusionProfile detect_first();  // 0.5 / 0.3 / 0.2
  static FusionProfile low_fp();        // 0.2 / 0.3 / 0.5
  static FusionProfile by_name(const std::string& name);
};

/// Trust weight W = alpha*P(L|L) + beta*P(S|S) + gamma*P(H|H). Lies in [0,1].
double compute_weight(const PosteriorTable& table, const FusionProfile& profile);

/// One method's alarm stream with its trust weight. Flags are 0/1 under the
/// default rule; the optional small-counts-half rule emits 0.5, so values
/// anywhere in [0, 1] are accepted.
struct MethodStream {
  std::string name;
  std::vector<double> flags;
  double weight = 0.0;
};

struct HealthReport {
  double cfd = 0.0;   // weighted sum of per-method alarm rates
  double ncfd = 0.0;  // cfd normalized by the weight sum
  double hi = 0.0;    // (1 - ncfd) * 100
  std::vector<double> individual_hi;  // same order as the input streams
};

HealthReport compute_health_index(const std::vector<MethodStream>& streams);

/// Health index of a single alarm stream: (1 - mean flag) * 100.
double individual_hi(const std::vector<double>& flags);

struct CaseMix {
  Row3 p{};  // healthy, small, large shares

  void validate() const;
};

/// Deviation pools per state for one method, drawn from labeled data.
struct StatePools {
  std::array<dvec, kStates> pool;
};

struct CaseEmulation {
  std::vector<std::vector<int>> flags;   // [method][draw]
  std::vector<CableState> states;        // shared ground-truth state per draw
  double ground_truth_hi = 0.0;          // (1 - p_large) * 100
};

/// Synthesizes n monitoring instants under a state mix: each draw picks a
/// ground-truth state once (shared by all methods), then every method reads
/// a uniformly drawn calibration deviation from its pool for that state and
/// thresholds it.
CaseEmulation emulate_case(const std::vector<StatePools>& pools,
                           const std::vector<thresholds::ThresholdPair>& th,
                           const CaseMix& mix, std::size_t n, std::uint64_t seed);

}  // namespace cablewatch::fusion
