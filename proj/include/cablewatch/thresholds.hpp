#pragma once

#include "cablewatch/types.hpp"

// Shared three-band decision rule. Every diagnostic summary is mapped to a
// deviation score where larger means worse; two thresholds cut the score
// into healthy / small-fault / large-fault bands. Thresholds sit halfway
// between neighbouring class means from calibration data.

namespace cablewatch::thresholds {

struct ThresholdPair {
  double th_small = 0.0;
  double th_large = 0.0;

  void validate() const;
};

/// Band decision, boundaries included in the worse band:
/// d >= th_large -> LargeFault; th_small <= d < th_large -> SmallFault.
CableState classify_deviation(double deviation, const ThresholdPair& th);

/// Binary alarm flag: raised only for the large band.
int flag_for(CableState verdict);

/// Which way a raw summary moves when the cable degrades.
enum class DeviationSense { drop_is_bad, rise_is_bad };

struct DeviationModel {
  double healthy_ref = 0.0;  // mean raw summary of the healthy class
  DeviationSense sense = DeviationSense::drop_is_bad;
  ThresholdPair thresholds;

  double deviation(double raw) const;
  CableState classify(double raw) const;
};

/// Midpoint calibration from labeled raw summaries, one list per class.
/// Throws CalibrationError when class mean deviations are not strictly
/// ordered healthy < small < large.
DeviationModel calibrate_deviation_model(const dvec& healthy_raw,
                                         const dvec& small_raw,
                                         const dvec& large_raw,
                                         DeviationSense sense);

double mean(const dvec& v);

}  // namespace cablewatch::thresholds
