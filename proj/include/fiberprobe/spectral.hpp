#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fiberprobe/fft.hpp"

namespace fiberprobe {

/// Angular frequencies (rad/ps) of the DFT bins for n samples spaced T ps apart.
inline std::vector<double> omega_grid(std::size_t n, double sample_period_ps) {
  if (!is_power_of_two(n)) throw std::invalid_argument("omega_grid: length must be a power of two");
  if (!(sample_period_ps > 0.0)) throw std::invalid_argument("omega_grid: sample period must be positive");
  std::vector<double> omega(n);
  const double df = 1.0 / (static_cast<double>(n) * sample_period_ps);
  const long half = static_cast<long>(n / 2);
  for (long m = 0; m < static_cast<long>(n); ++m) {
    const long k = m < half ? m : m - static_cast<long>(n);
    omega[m] = 2.0 * std::numbers::pi * static_cast<double>(k) * df;
  }
  return omega;
}

/// exp(sign * (-i/2) * beta2 * omega^2 * dz) per bin. sign = -1 is the physical
/// fiber dispersion operator, sign = +1 its compensation.
inline void dispersion_response(std::span<const double> omega, double beta2, double dz, int sign,
                                std::span<cdouble> out) {
  const double k = -0.5 * sign * beta2 * dz;
  for (std::size_t m = 0; m < omega.size(); ++m) out[m] = std::polar(1.0, k * omega[m] * omega[m]);
}

}  // namespace fiberprobe
