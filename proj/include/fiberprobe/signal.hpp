#pragma once

// Transmit-side waveform generation: QAM symbols, RRC pulse shaping, launch power.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiberprobe/units.hpp"
#include "fiberprobe/waveform.hpp"

namespace fiberprobe::signal {

struct SymbolSequence {
  std::vector<cdouble> points;
  int order = 16;
  std::uint64_t seed = 0;
};

/// Square QAM alphabet scaled to unit mean power; row-major over (I, Q) levels.
inline std::vector<cdouble> qam_alphabet(int order) {
  if (order != 4 && order != 16 && order != 64)
    throw std::invalid_argument("unsupported QAM order " + std::to_string(order) + " (expected 4, 16 or 64)");
  const int side = static_cast<int>(std::lround(std::sqrt(order)));
  const double norm = std::sqrt(2.0 * (order - 1) / 3.0);
  std::vector<cdouble> points;
  points.reserve(order);
  for (int i = 0; i < side; ++i)
    for (int q = 0; q < side; ++q)
      points.emplace_back((2 * i - side + 1) / norm, (2 * q - side + 1) / norm);
  return points;
}

inline SymbolSequence generate_qam_symbols(int order, std::size_t n, std::uint64_t seed) {
  const auto alphabet = qam_alphabet(order);
  if (n < 1) throw std::invalid_argument("symbol count must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, order - 1);
  SymbolSequence seq{{}, order, seed};
  seq.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) seq.points.push_back(alphabet[pick(rng)]);
  return seq;
}

struct ShapingConfig {
  int samples_per_symbol = 2;
  double rolloff = 0.2;
  int filter_span = 64;  // symbols
  double baud_gbd = 64.0;
  double wavelength_nm = 1555.752;

  double sample_period_ps() const { return 1000.0 / (baud_gbd * samples_per_symbol); }
};

/// Continuous root-raised-cosine pulse, t in symbol periods, unit symbol period.
inline double rrc_value(double t, double beta) {
  const double pi = std::numbers::pi;
  if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / pi;
  if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
    return beta / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
  }
  const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
  const double den = pi * t * (1.0 - 16.0 * beta * beta * t * t);
  return num / den;
}

/// FIR taps (filter_span * sps + 1) with unit energy.
inline std::vector<double> rrc_taps(int sps, double rolloff, int filter_span) {
  if (sps < 2) throw std::invalid_argument("samples per symbol must be >= 2");
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw std::invalid_argument("RRC roll-off must lie in (0, 1]");
  if (filter_span <= 0 || filter_span % 2 != 0) throw std::invalid_argument("RRC filter span must be a positive even number of symbols");
  const int len = filter_span * sps + 1;
  const int center = len / 2;
  std::vector<double> taps(len);
  double energy = 0.0;
  for (int i = 0; i < len; ++i) {
    taps[i] = rrc_value(static_cast<double>(i - center) / sps, rolloff);
    energy += taps[i] * taps[i];
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& t : taps) t *= scale;
  return taps;
}

/// Response of rrc_pulse_shape to a single unit symbol at index 0, before trimming.
/// The shaper scales unit-energy taps by sqrt(sps) so that the output has unit mean power.
inline std::vector<double> rrc_impulse_response(int sps, double rolloff, int filter_span) {
  auto taps = rrc_taps(sps, rolloff, filter_span);
  const double gain = std::sqrt(static_cast<double>(sps));
  for (auto& t : taps) t *= gain;
  return taps;
}

/// Zero-stuffs by sps and filters with the RRC FIR. The filter group delay is removed
/// and the output is trimmed to symbols * sps samples (sample k*sps is symbol k's peak).
inline ComplexWaveform rrc_pulse_shape(const SymbolSequence& symbols, const ShapingConfig& cfg) {
  const auto h = rrc_impulse_response(cfg.samples_per_symbol, cfg.rolloff, cfg.filter_span);
  const int sps = cfg.samples_per_symbol;
  const long n_out = static_cast<long>(symbols.points.size()) * sps;
  const long center = static_cast<long>(h.size() / 2);
  ComplexWaveform w;
  w.samples.assign(static_cast<std::size_t>(n_out), cdouble{});
  w.sample_period_ps = cfg.sample_period_ps();
  w.wavelength_nm = cfg.wavelength_nm;
  w.samples_per_symbol = Rational{sps, 1};
  for (std::size_t k = 0; k < symbols.points.size(); ++k) {
    const cdouble s = symbols.points[k];
    const long origin = static_cast<long>(k) * sps - center;
    const long j0 = std::max(0L, origin);
    const long j1 = std::min(n_out, origin + static_cast<long>(h.size()));
    for (long j = j0; j < j1; ++j) w.samples[j] += s * h[j - origin];
  }
  return w;
}

/// Scales the waveform so that mean(|x|^2) equals the launch power in W.
inline ComplexWaveform set_launch_power(ComplexWaveform w, double p_dbm) {
  const double p = w.mean_power();
  if (!(p > 0.0)) throw std::invalid_argument("cannot set launch power of an all-zero waveform");
  const double scale = std::sqrt(dbm_to_watt(p_dbm) / p);
  for (auto& s : w.samples) s *= scale;
  return w;
}

}  // namespace fiberprobe::signal
