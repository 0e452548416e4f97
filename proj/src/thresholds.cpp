#include "cablewatch/thresholds.hpp"

#include "cablewatch/kernels.hpp"

namespace cablewatch {

CableState state_from_string(const std::string& s) {
  if (s == "healthy") return CableState::Healthy;
  if (s == "small") return CableState::SmallFault;
  if (s == "large") return CableState::LargeFault;
  throw ValidationError("unknown cable state '" + s + "'");
}

}  // namespace cablewatch

namespace cablewatch::thresholds {

void ThresholdPair::validate() const {
  if (!(th_small < th_large)) {
    throw CalibrationError("thresholds must satisfy th_small < th_large");
  }
}

CableState classify_deviation(double deviation, const ThresholdPair& th) {
  th.validate();
  if (deviation >= th.th_large) return CableState::LargeFault;
  if (deviation >= th.th_small) return CableState::SmallFault;
  return CableState::Healthy;
}

int flag_for(CableState verdict) {
  return verdict == CableState::LargeFault ? 1 : 0;
}

double DeviationModel::deviation(double raw) const {
  return sense == DeviationSense::drop_is_bad ? healthy_ref - raw : raw - healthy_ref;
}

CableState DeviationModel::classify(double raw) const {
  return classify_deviation(deviation(raw), thresholds);
}

double mean(const dvec& v) {
  if (v.empty()) throw ValidationError("mean of empty list");
  return kernels::sum_f64(v.data(), v.size()) / static_cast<double>(v.size());
}

DeviationModel calibrate_deviation_model(const dvec& healthy_raw,
                                         const dvec& small_raw,
                                         const dvec& large_raw,
                                         DeviationSense sense) {
  if (healthy_raw.empty() || small_raw.empty() || large_raw.empty()) {
    throw CalibrationError("every class needs at least one calibration value");
  }
  DeviationModel model;
  model.healthy_ref = mean(healthy_raw);
  model.sense = sense;

  auto class_dev = [&](const dvec& raw) {
    dvec d(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) d[i] = model.deviation(raw[i]);
    return mean(d);
  };
  const double dev_h = class_dev(healthy_raw);  // zero up to rounding
  const double dev_s = class_dev(small_raw);
  const double dev_l = class_dev(large_raw);
  if (!(dev_h < dev_s && dev_s < dev_l)) {
    throw CalibrationError("class mean deviations are not ordered healthy < small < large");
  }
  model.thresholds.th_small = 0.5 * (dev_h + dev_s);
  model.thresholds.th_large = 0.5 * (dev_s + dev_l);
  model.thresholds.validate();
  return model;
}

}  // namespace cablewatch::thresholds
