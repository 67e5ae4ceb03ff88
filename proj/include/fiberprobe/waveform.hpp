#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fiberprobe/fft.hpp"

namespace fiberprobe {

struct Rational {
  int num = 2;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Uniformly sampled complex baseband envelope. Samples are field amplitudes in sqrt(W).
struct ComplexWaveform {
  CVector samples;
  double sample_period_ps = 1.0;
  double wavelength_nm = 1555.752;
  Rational samples_per_symbol{};

  std::size_t size() const { return samples.size(); }

  double mean_power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
  }

  double energy() const {
    double acc = 0.0;
    for (const auto& s : samples) acc += std::norm(s);
    return acc;
  }

  void validate() const {
    if (samples.size() < 2) throw std::invalid_argument("waveform needs at least 2 samples");
    if (!(sample_period_ps > 0.0) || !std::isfinite(sample_period_ps))
      throw std::invalid_argument("waveform sample period must be positive");
    if (!(wavelength_nm > 0.0)) throw std::invalid_argument("waveform wavelength must be positive");
    for (const auto& s : samples)
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
        throw std::invalid_argument("waveform contains non-finite samples");
  }
};

/// Relative L2 distance ||a - b|| / ||b||.
inline double relative_l2_error(std::span<const cdouble> a, std::span<const cdouble> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_l2_error: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace fiberprobe
