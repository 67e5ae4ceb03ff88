#pragma once

// Forward link simulator: split-step propagation per span, inline attenuators,
// EDFAs with ASE, and the analytic nonlinear-coefficient profile of the link.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiberprobe/error.hpp"
#include "fiberprobe/fft.hpp"
#include "fiberprobe/signal.hpp"
#include "fiberprobe/spectral.hpp"
#include "fiberprobe/units.hpp"
#include "fiberprobe/waveform.hpp"

namespace fiberprobe::channel {

using fiberprobe::dispersion_to_beta2;

struct Attenuator {
  double position_km = 0.0;  // from span start
  double loss_db = 0.0;
};

struct FiberSpan {
  double length_km = 0.0;
  double alpha_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17.0;
  double gamma_per_w_km = 1.3;
  std::vector<Attenuator> attenuators;

  void validate() const {
    fiberprobe::detail::require(length_km > 0.0, "span length must be positive");
    fiberprobe::detail::require(alpha_db_per_km >= 0.0, "span loss must be non-negative");
    fiberprobe::detail::require(gamma_per_w_km >= 0.0, "span gamma must be non-negative");
    for (const auto& a : attenuators) {
      fiberprobe::detail::require(a.position_km > 0.0 && a.position_km < length_km,
                      "attenuator position must lie strictly inside its span");
      fiberprobe::detail::require(a.loss_db >= 0.0, "attenuator loss must be non-negative");
    }
  }

  double total_loss_db() const {
    double loss = alpha_db_per_km * length_km;
    for (const auto& a : attenuators) loss += a.loss_db;
    return loss;
  }
};

struct LinkConfig {
  std::vector<FiberSpan> spans;
  std::vector<double> launch_power_dbm;  // one per span
  double edfa_noise_figure_db = 5.0;
  bool ase_enabled = true;
  double wavelength_nm = 1555.752;
  double sim_step_km = 0.1;

  double total_length_km() const {
    double l = 0.0;
    for (const auto& s : spans) l += s.length_km;
    return l;
  }

  /// Accumulated dispersion, ps/nm.
  double total_cd_ps_nm() const {
    double cd = 0.0;
    for (const auto& s : spans) cd += s.dispersion_ps_nm_km * s.length_km;
    return cd;
  }

  /// Span boundaries in km: 0, end of span 1, ..., total length.
  std::vector<double> span_boundaries_km() const {
    std::vector<double> b{0.0};
    for (const auto& s : spans) b.push_back(b.back() + s.length_km);
    return b;
  }

  void validate() const {
    fiberprobe::detail::require(!spans.empty(), "link must contain at least one span");
    fiberprobe::detail::require(launch_power_dbm.size() == spans.size(), "launch_power_per_span must have one entry per span");
    fiberprobe::detail::require(sim_step_km > 0.0, "sim_step must be positive");
    fiberprobe::detail::require(wavelength_nm > 0.0, "wavelength must be positive");
    for (const auto& s : spans) {
      s.validate();
      const double steps = s.length_km / sim_step_km;
      fiberprobe::detail::require(std::abs(steps - std::round(steps)) < 1e-6, "sim_step must divide every span length");
    }
  }
};

struct GroundTruthProfile {
  std::vector<double> positions_km;
  std::vector<double> gamma_prime;  // 1/(W km)
  std::vector<double> beta2;        // ps^2/km
};

namespace detail {

inline std::size_t steps_for(double length, double dz, const char* what) {
  const double steps = length / dz;
  const double rounded = std::round(steps);
  if (rounded < 1.0 || std::abs(steps - rounded) > 1e-6 * std::max(1.0, steps)) {
    std::ostringstream os;
    os << "step " << dz << " km does not divide " << what << " " << length << " km";
    throw std::invalid_argument(os.str());
  }
  return static_cast<std::size_t>(rounded);
}

/// Grid index of an attenuator on a dz grid; off-grid positions snap to the nearest point.
inline std::size_t attenuator_index(const Attenuator& a, double dz) {
  const double exact = a.position_km / dz;
  const double idx = std::round(exact);
  if (std::abs(exact - idx) > 1e-6) {
    std::ostringstream os;
    os << "attenuator at " << a.position_km << " km snapped to " << idx * dz << " km";
    warn(os.str());
  }
  return static_cast<std::size_t>(idx);
}

}  // namespace detail

/// Split-step propagation through one span with step dz: per step the nonlinear
/// operator (loss and SPM with the effective length) followed by dispersion.
/// Attenuators act as pure loss at their grid positions, before the step starting there.
inline ComplexWaveform ssfm_propagate_span(ComplexWaveform w, const FiberSpan& span, double lambda_nm, double dz) {
  span.validate();
  if (!is_power_of_two(w.size())) throw std::invalid_argument("SSFM needs a power-of-two waveform length");
  const std::size_t steps = detail::steps_for(span.length_km, dz, "span length");

  std::vector<std::size_t> att_idx;
  for (const auto& a : span.attenuators) att_idx.push_back(detail::attenuator_index(a, dz));

  const Fft fft(w.size());
  const auto omega = omega_grid(w.size(), w.sample_period_ps);
  CVector disp(w.size());
  dispersion_response(omega, dispersion_to_beta2(span.dispersion_ps_nm_km, lambda_nm), dz, -1, disp);
  for (auto& v : disp) v /= static_cast<double>(w.size());

  const double decay = std::pow(10.0, -span.alpha_db_per_km * dz / 20.0);
  const double spm = span.gamma_per_w_km * effective_length(span.alpha_db_per_km, dz);
  auto& x = w.samples;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < att_idx.size(); ++j)
      if (att_idx[j] == s) {
        const double a = std::pow(10.0, -span.attenuators[j].loss_db / 20.0);
        for (auto& v : x) v *= a;
      }
    if (spm != 0.0 || decay != 1.0)
      for (auto& v : x) v *= std::polar(decay, spm * std::norm(v));
    fft.forward(x);
    for (std::size_t m = 0; m < x.size(); ++m) x[m] *= disp[m];
    fft.inverse_unscaled(x);
  }
  return w;
}

/// Field gain 10^(gain_db/20); optional circular Gaussian ASE of total power
/// n_sp (G-1) h nu B with n_sp = NF/2 and B = 1/T.
inline ComplexWaveform edfa_amplify(ComplexWaveform w, double gain_db, double nf_db, bool ase_enabled, std::uint64_t seed) {
  const double field_gain = std::pow(10.0, gain_db / 20.0);
  for (auto& v : w.samples) v *= field_gain;
  const double g = db_to_linear(gain_db);
  if (ase_enabled && g > 1.0) {
    const double nsp = db_to_linear(nf_db) / 2.0;
    const double bandwidth_hz = 1e12 / w.sample_period_ps;
    const double sigma2 = nsp * (g - 1.0) * kPlanck * carrier_frequency_hz(w.wavelength_nm) * bandwidth_hz;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2 / 2.0));
    for (auto& v : w.samples) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      v += cdouble(re, im);
    }
  }
  return w;
}

inline double ase_noise_power(double gain_db, double nf_db, double lambda_nm, double sample_period_ps) {
  const double g = db_to_linear(gain_db);
  if (g <= 1.0) return 0.0;
  return db_to_linear(nf_db) / 2.0 * (g - 1.0) * kPlanck * carrier_frequency_hz(lambda_nm) * 1e12 / sample_period_ps;
}

/// Nominal (noiseless) power at the end of span i, dBm.
inline double span_output_power_dbm(const LinkConfig& link, std::size_t i) {
  return link.launch_power_dbm[i] - link.spans[i].total_loss_db();
}

/// Gain of the EDFA after span i (i < number of spans - 1): restores the next span's
/// launch power. The last span feeds the receiver unamplified.
inline double edfa_gain_db(const LinkConfig& link, std::size_t i) {
  if (i + 1 >= link.spans.size()) throw std::invalid_argument("the last span has no amplifier");
  return link.launch_power_dbm[i + 1] - span_output_power_dbm(link, i);
}

/// Nominal received power, dBm.
inline double received_power_dbm(const LinkConfig& link) { return span_output_power_dbm(link, link.spans.size() - 1); }

namespace detail {

struct SpanLocation {
  std::size_t span = 0;
  double offset_km = 0.0;
};

inline SpanLocation locate(const LinkConfig& link, double z) {
  double start = 0.0;
  for (std::size_t i = 0; i < link.spans.size(); ++i) {
    const double end = start + link.spans[i].length_km;
    if (z < end - 1e-9 || i + 1 == link.spans.size()) return {i, z - start};
    start = end;
  }
  return {};
}

// Power relative to the first launch, dB. Attenuators count from their
// (simulation-grid snapped) position onwards.
inline double relative_power_db(const LinkConfig& link, const SpanLocation& loc) {
  const auto& span = link.spans[loc.span];
  double p = link.launch_power_dbm[loc.span] - link.launch_power_dbm.front() - span.alpha_db_per_km * loc.offset_km;
  for (const auto& a : span.attenuators) {
    const double pos = std::round(a.position_km / link.sim_step_km) * link.sim_step_km;
    if (loc.offset_km >= pos - 1e-9) p -= a.loss_db;
  }
  return p;
}

}  // namespace detail

/// gamma'(z) = gamma(z) exp(-int_0^z alpha), with EDFA gains and attenuators
/// entering the exponent as steps, at arbitrary positions in [0, L].
inline GroundTruthProfile ground_truth_at(const LinkConfig& link, std::span<const double> positions_km) {
  link.validate();
  GroundTruthProfile truth;
  for (const double z : positions_km) {
    if (z < 0.0 || z > link.total_length_km() + 1e-9) throw std::invalid_argument("truth position outside the link");
    const auto loc = detail::locate(link, z);
    const auto& span = link.spans[loc.span];
    truth.positions_km.push_back(z);
    truth.gamma_prime.push_back(span.gamma_per_w_km * db_to_linear(detail::relative_power_db(link, loc)));
    truth.beta2.push_back(dispersion_to_beta2(span.dispersion_ps_nm_km, link.wavelength_nm));
  }
  return truth;
}

/// The profile sampled at z_k = k * grid_dz, k = 0..K-1; grid_dz must divide L.
inline GroundTruthProfile ground_truth_gamma_profile(const LinkConfig& link, double grid_dz) {
  link.validate();
  const std::size_t k_steps = detail::steps_for(link.total_length_km(), grid_dz, "link length");
  std::vector<double> z(k_steps);
  for (std::size_t k = 0; k < k_steps; ++k) z[k] = static_cast<double>(k) * grid_dz;
  return ground_truth_at(link, z);
}

/// Per-step coefficients under which a lossless split-step chain with step dz reproduces
/// the simulator's nonlinear phase exactly: gamma'(z_k) L_eff(dz) / dz.
inline GroundTruthProfile discrete_equivalent_profile(const LinkConfig& link, double dz) {
  auto truth = ground_truth_gamma_profile(link, dz);
  for (std::size_t k = 0; k < truth.positions_km.size(); ++k) {
    const auto& span = link.spans[detail::locate(link, truth.positions_km[k]).span];
    truth.gamma_prime[k] *= effective_length(span.alpha_db_per_km, dz) / dz;
  }
  return truth;
}

struct LinkOutput {
  ComplexWaveform received;
  GroundTruthProfile truth;
};

/// Launch -> span -> EDFA -> span -> ... -> span. EDFA gains follow an ideal AGC on
/// nominal powers; each amplifier draws its ASE from a seed derived from `seed`.
inline LinkOutput propagate_link(const ComplexWaveform& tx, const LinkConfig& link, std::uint64_t seed) {
  link.validate();
  tx.validate();
  auto w = signal::set_launch_power(tx, link.launch_power_dbm.front());
  for (std::size_t i = 0; i < link.spans.size(); ++i) {
    w = ssfm_propagate_span(std::move(w), link.spans[i], link.wavelength_nm, link.sim_step_km);
    if (i + 1 < link.spans.size())
      w = edfa_amplify(std::move(w), edfa_gain_db(link, i), link.edfa_noise_figure_db, link.ase_enabled,
                       derive_seed(seed, 1000 + i));
  }
  return {std::move(w), ground_truth_gamma_profile(link, link.sim_step_km)};
}

}  // namespace fiberprobe::channel
