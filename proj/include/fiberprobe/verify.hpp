#pragma once

// Self-checks shared by the `verify` command and the test suites: analytic
// gradients against central differences, exact inversion of a matched-step
// channel, and self-convergence of the split-step simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fiberprobe/channel.hpp"
#include "fiberprobe/dbp.hpp"
#include "fiberprobe/signal.hpp"

namespace fiberprobe::verify {

/// Cost of the chain with the residual phase re-optimized, as seen by finite differences.
inline double dbp_cost(const dbp::Minibatch& batch, const dbp::DbpParams& params) {
  const auto fwd = dbp::dbp_forward(batch, params);
  return dbp::mse_cost(fwd.estimate, batch.reference, batch.guard);
}

struct GradcheckCase {
  std::size_t steps = 1;
  std::size_t block_length = 16;
  std::size_t blocks = 1;
  double max_rel_error = 0.0;
};

struct GradcheckResult {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
  double threshold = 1e-5;
  bool passed() const { return max_rel_error < threshold; }
};

/// Random chain configuration (K in {1,2,4}, block length in {16,64}) with a guard
/// large enough for its accumulated dispersion.
inline std::pair<dbp::Minibatch, dbp::DbpParams> random_gradcheck_problem(std::mt19937_64& rng) {
  constexpr std::size_t kSteps[] = {1, 2, 4};
  constexpr std::size_t kLengths[] = {16, 64};
  std::uniform_int_distribution<int> pick3(0, 2), pick2(0, 1), blocks(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));

  dbp::DbpParams p;
  p.grid.steps = kSteps[pick3(rng)];
  p.grid.dz = 0.05 + 0.45 * unit(rng);
  p.grid.last_dz = p.grid.dz;
  for (std::size_t k = 0; k < p.grid.steps; ++k) {
    p.gamma_prime.push_back(0.1 + 1.9 * unit(rng));
    p.beta2.push_back(-25.0 + 50.0 * unit(rng));
  }

  dbp::Minibatch b;
  b.sample_period_ps = 10.0;
  const std::size_t n = kLengths[pick2(rng)];
  b.guard = std::min(dbp::required_guard(p, b.sample_period_ps) + static_cast<std::size_t>(pick3(rng)), n / 2 - 1);
  const int count = blocks(rng);
  for (int i = 0; i < count; ++i) {
    dbp::Block rx(n), ref(n);
    for (auto& v : rx) v = {gauss(rng), gauss(rng)};
    for (auto& v : ref) v = {gauss(rng), gauss(rng)};
    b.received.push_back(std::move(rx));
    b.reference.push_back(std::move(ref));
  }
  return {std::move(b), std::move(p)};
}

/// Relative error of each analytic derivative against a central difference, scaled
/// by the largest derivative magnitude within its parameter group.
inline double gradcheck_problem(const dbp::Minibatch& batch, const dbp::DbpParams& params) {
  const auto analytic = dbp::dbp_gradient(batch, params);
  double worst = 0.0;
  auto group = [&](std::vector<double> dbp::DbpParams::*field, const std::vector<double>& grad) {
    double scale = 0.0;
    for (const double g : grad) scale = std::max(scale, std::abs(g));
    scale = std::max(scale, 1e-12);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double x = (params.*field)[k];
      const double h = 1e-4 * std::max(1.0, std::abs(x));
      auto plus = params, minus = params;
      (plus.*field)[k] = x + h;
      (minus.*field)[k] = x - h;
      const double fd = (dbp_cost(batch, plus) - dbp_cost(batch, minus)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - grad[k]) / scale);
    }
  };
  group(&dbp::DbpParams::gamma_prime, analytic.gamma_prime);
  group(&dbp::DbpParams::beta2, analytic.beta2);
  return worst;
}

inline GradcheckResult gradcheck(int configurations = 100, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  GradcheckResult out;
  for (int i = 0; i < configurations; ++i) {
    auto [batch, params] = random_gradcheck_problem(rng);
    GradcheckCase c{params.steps(), batch.block_length(), batch.received.size(), gradcheck_problem(batch, params)};
    out.max_rel_error = std::max(out.max_rel_error, c.max_rel_error);
    out.cases.push_back(c);
  }
  return out;
}

struct RoundtripResult {
  double rel_l2_error = 0.0;
  double threshold = 1e-9;
  std::size_t samples = 0;
  std::size_t guard = 0;
  std::size_t steps = 0;
  bool passed() const { return rel_l2_error < threshold; }
};

/// 4 x 10 km toy link, no ASE, simulated with the same step the chain uses.
inline channel::LinkConfig roundtrip_link(double dz = 0.5) {
  channel::LinkConfig link;
  for (int i = 0; i < 4; ++i) {
    channel::FiberSpan s;
    s.length_km = 10.0;
    s.alpha_db_per_km = 0.2;
    s.dispersion_ps_nm_km = 17.0;
    s.gamma_per_w_km = 1.3;
    link.spans.push_back(s);
    link.launch_power_dbm.push_back(6.0);
  }
  link.ase_enabled = false;
  link.sim_step_km = dz;
  return link;
}

/// Propagates a 16-QAM waveform through the matched-step channel and runs the chain
/// with the discrete-equivalent parameters on the whole waveform as a single block.
inline RoundtripResult roundtrip(std::size_t samples = 4096, std::uint64_t seed = 1, double dz = 0.5) {
  const auto link = roundtrip_link(dz);
  signal::ShapingConfig shaping;
  shaping.filter_span = 32;
  const auto symbols = signal::generate_qam_symbols(16, samples / 2, seed);
  const auto tx = signal::set_launch_power(signal::rrc_pulse_shape(symbols, shaping), link.launch_power_dbm.front());
  const auto rx = channel::propagate_link(tx, link, seed).received;

  const auto eq = channel::discrete_equivalent_profile(link, dz);
  dbp::DbpParams params;
  params.grid = dbp::make_step_grid(link.total_length_km(), dz);
  params.gamma_prime = eq.gamma_prime;
  params.beta2 = eq.beta2;

  dbp::Minibatch batch;
  batch.sample_period_ps = rx.sample_period_ps;
  batch.guard = dbp::required_guard(params, rx.sample_period_ps);
  const double back_to_launch =
      std::sqrt(dbm_to_watt(link.launch_power_dbm.front()) / dbm_to_watt(channel::received_power_dbm(link)));
  dbp::Block block(rx.samples.begin(), rx.samples.end());
  for (auto& v : block) v *= back_to_launch;
  batch.received.push_back(std::move(block));
  batch.reference.emplace_back(tx.samples.begin(), tx.samples.end());

  const auto fwd = dbp::dbp_forward(batch, params);
  RoundtripResult out;
  out.samples = samples;
  out.guard = batch.guard;
  out.steps = params.steps();
  const auto interior = [&](const dbp::Block& b) {
    return std::span<const cdouble>(b).subspan(batch.guard, samples - 2 * batch.guard);
  };
  out.rel_l2_error = relative_l2_error(interior(fwd.estimate.front()), interior(batch.reference.front()));
  return out;
}

struct ConvergencePoint {
  double dz_km = 0.0;
  double rel_l2_error = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergencePoint> points;  // coarse to fine
  double reference_dz_km = 0.0;
  bool monotone() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].rel_l2_error < points[i - 1].rel_l2_error)) return false;
    return !points.empty();
  }
  /// log2 of the error ratio over the finest halving of dz.
  double observed_order() const {
    if (points.size() < 2) return 0.0;
    const auto& a = points[points.size() - 2];
    const auto& b = points.back();
    return std::log2(a.rel_l2_error / b.rel_l2_error);
  }
};

/// One strongly nonlinear 20 km span at step sizes 2, 1, 0.5, 0.25, 0.125 km against a
/// 1/128 km reference.
inline ConvergenceResult ssfm_convergence(std::size_t samples = 4096, std::uint64_t seed = 1) {
  channel::FiberSpan span;
  span.length_km = 20.0;
  span.alpha_db_per_km = 0.2;
  span.dispersion_ps_nm_km = 17.0;
  span.gamma_per_w_km = 1.3;
  signal::ShapingConfig shaping;
  const auto symbols = signal::generate_qam_symbols(16, samples / 2, seed);
  const auto tx = signal::set_launch_power(signal::rrc_pulse_shape(symbols, shaping), 12.0);

  ConvergenceResult out;
  out.reference_dz_km = 1.0 / 128.0;
  const auto reference = channel::ssfm_propagate_span(tx, span, shaping.wavelength_nm, out.reference_dz_km);
  for (const double dz : {2.0, 1.0, 0.5, 0.25, 0.125}) {
    const auto y = channel::ssfm_propagate_span(tx, span, shaping.wavelength_nm, dz);
    out.points.push_back({dz, relative_l2_error(y.samples, reference.samples)});
  }
  return out;
}

}  // namespace fiberprobe::verify
