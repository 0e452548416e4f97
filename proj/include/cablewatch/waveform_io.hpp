#pragma once

#include <cstdint>
#include <filesystem>

#include "cablewatch/types.hpp"

// Waveform and reflectogram files. Two interchangeable waveform formats:
// a text CSV for inspection and a packed binary for datasets. Values
// round-trip exactly in both.

namespace cablewatch::wio {

/// Reflectogram magnitudes: header "sample_index,value", one row per lag.
void write_reflectogram_csv(const dvec& values, const std::filesystem::path& file);
dvec read_reflectogram_csv(const std::filesystem::path& file);

/// Complex waveform as text: a "# sample_rate_hz=..." comment, then
/// "sample_index,i_value,q_value" rows.
void write_waveform_csv(const Waveform& w, const std::filesystem::path& file);
Waveform read_waveform_csv(const std::filesystem::path& file);

/// Packed waveform: magic "CWF1", little-endian u32 oversampling,
/// f64 sample rate, u64 sample count, then (re, im) f64 pairs.
void write_waveform_cwf(const Waveform& w, std::uint32_t oversampling,
                        const std::filesystem::path& file);
struct CwfData {
  Waveform wave;
  std::uint32_t oversampling = 0;
};
CwfData read_waveform_cwf(const std::filesystem::path& file);

/// Dispatch on extension: ".cwf" binary, ".csv" text.
void write_waveform(const Waveform& w, std::uint32_t oversampling,
                    const std::filesystem::path& file);
Waveform read_waveform(const std::filesystem::path& file);

}  // namespace cablewatch::wio
