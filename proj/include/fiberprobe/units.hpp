#pragma once

// Canonical internal units: time ps, distance km, power W, beta2 ps^2/km,
// gamma 1/(W km), angular frequency rad/ps, wavelength nm.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fiberprobe {

inline constexpr double kSpeedOfLightNmPerPs = 2.99792458e5;
inline constexpr double kSpeedOfLightMPerS = 2.99792458e8;
inline constexpr double kPlanck = 6.62607015e-34;  // J s

inline double dbm_to_watt(double p_dbm) { return std::pow(10.0, (p_dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double p_w) { return 10.0 * std::log10(p_w) + 30.0; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// Power attenuation coefficient in 1/km for a loss given in dB/km.
inline double alpha_db_to_neper(double alpha_db_per_km) {
  return alpha_db_per_km * std::numbers::ln10 / 10.0;
}

/// beta2 = -D lambda^2 / (2 pi c), D in ps/(nm km), lambda in nm -> ps^2/km.
inline double dispersion_to_beta2(double d_ps_nm_km, double lambda_nm) {
  return -d_ps_nm_km * lambda_nm * lambda_nm / (2.0 * std::numbers::pi * kSpeedOfLightNmPerPs);
}

inline double beta2_to_dispersion(double beta2_ps2_km, double lambda_nm) {
  return -beta2_ps2_km * 2.0 * std::numbers::pi * kSpeedOfLightNmPerPs / (lambda_nm * lambda_nm);
}

inline double carrier_frequency_hz(double lambda_nm) { return kSpeedOfLightMPerS / (lambda_nm * 1e-9); }

/// Effective nonlinear length of a lossy segment, km.
inline double effective_length(double alpha_db_per_km, double dz_km) {
  const double a = alpha_db_to_neper(alpha_db_per_km);
  if (a == 0.0) return dz_km;
  return -std::expm1(-a * dz_km) / a;
}

inline bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

/// SplitMix64 mix; derives independent per-purpose seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fiberprobe
