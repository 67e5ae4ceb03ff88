#pragma once

// Learned digital backpropagation: a chain of K steps, each a frequency-domain
// dispersion compensation (CDC) followed by a nonlinear phase rotation (NLPR),
// trained by least squares with analytic Wirtinger gradients and Adam.
//
// Gradient convention: a cotangent g for a complex signal y is dI/d(conj y);
// for the real cost I, dI/dy = conj(g).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiberprobe/adam.hpp"
#include "fiberprobe/error.hpp"
#include "fiberprobe/fft.hpp"
#include "fiberprobe/spectral.hpp"

namespace fiberprobe::dbp {

using Block = CVector;

/// Constant-step grid z_k = k dz, k = 0..K-1. The final step may be longer or
/// shorter (last_dz) when the link length is not a multiple of dz.
struct StepGrid {
  double dz = 2.0;
  std::size_t steps = 1;
  double last_dz = 2.0;

  double total_length() const { return dz * static_cast<double>(steps - 1) + last_dz; }
  double position(std::size_t k) const { return dz * static_cast<double>(k); }
  double step_length(std::size_t k) const { return k + 1 == steps ? last_dz : dz; }

  std::vector<double> positions() const {
    std::vector<double> z(steps);
    for (std::size_t k = 0; k < steps; ++k) z[k] = position(k);
    return z;
  }

  void validate() const {
    if (steps < 1) throw std::invalid_argument("step grid needs at least one step");
    if (!(dz > 0.0) || !(last_dz > 0.0)) throw std::invalid_argument("step length must be positive");
  }
};

/// K = round(L / dz) (at least 1); the residual length is folded into the final step.
inline StepGrid make_step_grid(double length_km, double dz) {
  if (!(length_km > 0.0) || !(dz > 0.0)) throw std::invalid_argument("make_step_grid: length and dz must be positive");
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length_km / dz)));
  return {dz, k, length_km - dz * static_cast<double>(k - 1)};
}

struct DbpParams {
  std::vector<double> gamma_prime;  // per step, in units matching 1/(|x|^2 km)
  std::vector<double> beta2;        // per step, ps^2/km
  StepGrid grid;

  std::size_t steps() const { return grid.steps; }

  void validate() const {
    grid.validate();
    if (gamma_prime.size() != grid.steps || beta2.size() != grid.steps)
      throw std::invalid_argument("DBP parameter vectors must have one entry per step");
    for (std::size_t k = 0; k < grid.steps; ++k)
      if (!std::isfinite(gamma_prime[k]) || !std::isfinite(beta2[k]))
        throw std::invalid_argument("DBP parameters must be finite");
  }

  /// Accumulated beta2 * dz over the chain, ps^2.
  double total_beta2_length() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid.steps; ++k) acc += beta2[k] * grid.step_length(k);
    return acc;
  }
};

/// Aligned received/reference block pairs. `guard` samples at both block edges are
/// excluded from the cost.
struct Minibatch {
  std::vector<Block> received;
  std::vector<Block> reference;
  std::size_t guard = 0;
  double sample_period_ps = 1.0;

  std::size_t block_length() const { return received.empty() ? 0 : received.front().size(); }

  void validate() const {
    if (received.empty()) throw std::invalid_argument("minibatch is empty");
    if (received.size() != reference.size()) throw std::invalid_argument("minibatch received/reference count mismatch");
    const std::size_t n = block_length();
    if (!is_power_of_two(n)) throw std::invalid_argument("minibatch block length must be a power of two");
    for (std::size_t b = 0; b < received.size(); ++b)
      if (received[b].size() != n || reference[b].size() != n)
        throw std::invalid_argument("minibatch blocks must all have the same length");
    if (2 * guard >= n) throw std::invalid_argument("minibatch guard must satisfy 2*guard < block length");
    if (!(sample_period_ps > 0.0)) throw std::invalid_argument("minibatch sample period must be positive");
  }
};

/// Frequency grid and FFT plan for one block length.
class BlockGrid {
 public:
  BlockGrid(std::size_t n, double sample_period_ps)
      : fft_(n), sample_period_ps_(sample_period_ps), omega_(omega_grid(n, sample_period_ps)) {
    omega2_.resize(n);
    for (std::size_t m = 0; m < n; ++m) omega2_[m] = omega_[m] * omega_[m];
  }

  std::size_t size() const { return fft_.size(); }
  double sample_period_ps() const { return sample_period_ps_; }
  std::span<const double> omega() const { return omega_; }
  std::span<const double> omega_squared() const { return omega2_; }
  const Fft& fft() const { return fft_; }

  void check(std::size_t n) const {
    if (n != size()) {
      std::ostringstream os;
      os << "block length " << n << " does not match the cached frequency grid of length " << size();
      throw std::invalid_argument(os.str());
    }
  }

 private:
  Fft fft_;
  double sample_period_ps_;
  std::vector<double> omega_;
  std::vector<double> omega2_;
};

// ---------------------------------------------------------------------------
// Single-block operators and their adjoints

/// y = IDFT[ DFT(x) * exp(sign * (-i/2) beta2 omega^2 dz) ]; sign = +1 compensates
/// dispersion, sign = -1 applies it.
inline Block cdc_apply(std::span<const cdouble> x, double beta2, double dz, int sign, const BlockGrid& grid) {
  grid.check(x.size());
  Block y(x.begin(), x.end());
  Block h(x.size());
  dispersion_response(grid.omega(), beta2, dz, sign, h);
  grid.fft().forward(y);
  for (std::size_t m = 0; m < y.size(); ++m) y[m] *= h[m];
  grid.fft().inverse(y);
  return y;
}

struct CdcGradient {
  Block grad_x;
  double grad_beta2 = 0.0;
};

/// Adjoint of cdc_apply. `x_freq` is the cached DFT of the forward input.
inline CdcGradient cdc_backward(std::span<const cdouble> grad_y, std::span<const cdouble> x_freq, double beta2, double dz,
                                int sign, const BlockGrid& grid) {
  if (x_freq.empty()) throw std::invalid_argument("cdc_backward: missing forward cache");
  grid.check(grad_y.size());
  grid.check(x_freq.size());
  const std::size_t n = grad_y.size();
  Block gf(grad_y.begin(), grad_y.end());
  grid.fft().forward(gf);
  const auto w2 = grid.omega_squared();
  const double k = -0.5 * sign * beta2 * dz;
  double acc = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const cdouble h_conj = std::polar(1.0, -k * w2[m]);
    // d(conj H)/d beta2 = conj(H) * (i/2) sign omega^2 dz
    acc += (cdouble(0.0, sign * w2[m] * dz) * gf[m] * std::conj(x_freq[m]) * h_conj).real();
    gf[m] *= h_conj;
  }
  grid.fft().inverse(gf);
  return {std::move(gf), acc / static_cast<double>(n)};
}

/// y_n = x_n exp(-i gamma' |x_n|^2 dz).
inline Block nlpr_apply(std::span<const cdouble> x, double gamma_prime, double dz) {
  Block y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = x[n] * std::polar(1.0, -gamma_prime * std::norm(x[n]) * dz);
  return y;
}

struct NlprGradient {
  Block grad_x;
  double grad_gamma = 0.0;
};

/// Adjoint of nlpr_apply:
///   dI/dconj(x) = conj(g) (-i gamma' dz) x^2 e^{-i phi} + g (1 + i phi) e^{+i phi}
///   dI/dgamma'  = sum Re[(2 i dz) g conj(x) |x|^2 e^{+i phi}],   phi = gamma' |x|^2 dz.
inline NlprGradient nlpr_backward(std::span<const cdouble> grad_y, std::span<const cdouble> x, double gamma_prime,
                                  double dz) {
  if (x.empty()) throw std::invalid_argument("nlpr_backward: missing forward cache");
  if (grad_y.size() != x.size()) throw std::invalid_argument("nlpr_backward: cotangent/input length mismatch");
  NlprGradient out{Block(x.size()), 0.0};
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double p = std::norm(x[n]);
    const double phi = gamma_prime * p * dz;
    const cdouble rot_conj = std::polar(1.0, phi);
    const cdouble g = grad_y[n];
    out.grad_gamma += (cdouble(0.0, 2.0 * dz) * g * std::conj(x[n]) * p * rot_conj).real();
    out.grad_x[n] = std::conj(g) * cdouble(0.0, -gamma_prime * dz) * x[n] * x[n] * std::conj(rot_conj) +
                    g * cdouble(1.0, phi) * rot_conj;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost and residual phase

struct PhaseAlignment {
  double phase = 0.0;
  std::vector<Block> aligned;
};

namespace detail {

inline void check_pairs(std::span<const Block> est, std::span<const Block> ref, std::size_t guard) {
  if (est.size() != ref.size() || est.empty()) throw std::invalid_argument("estimate/reference block counts differ");
  for (std::size_t b = 0; b < est.size(); ++b) {
    if (est[b].size() != ref[b].size()) throw std::invalid_argument("estimate/reference block lengths differ");
    if (2 * guard >= est[b].size()) throw std::invalid_argument("guard must satisfy 2*guard < block length");
  }
}

inline cdouble correlation(std::span<const Block> est, std::span<const Block> ref, std::size_t guard) {
  cdouble acc{};
  for (std::size_t b = 0; b < est.size(); ++b)
    for (std::size_t n = guard; n + guard < est[b].size(); ++n) acc += ref[b][n] * std::conj(est[b][n]);
  return acc;
}

}  // namespace detail

/// phi* = arg(sum ref * conj(est)) over the non-guard samples; the global phase that
/// minimizes the squared error. A zero correlation yields phi* = 0.
inline PhaseAlignment residual_phase_align(std::span<const Block> est, std::span<const Block> ref, std::size_t guard = 0) {
  detail::check_pairs(est, ref, guard);
  const cdouble c = detail::correlation(est, ref, guard);
  const double phase = std::abs(c) > 0.0 ? std::arg(c) : 0.0;
  const cdouble rot = std::polar(1.0, phase);
  PhaseAlignment out{phase, std::vector<Block>(est.begin(), est.end())};
  for (auto& block : out.aligned)
    for (auto& v : block) v *= rot;
  return out;
}

/// Mean of |ref - est|^2 over the non-guard samples of all blocks.
inline double mse_cost(std::span<const Block> est, std::span<const Block> ref, std::size_t guard) {
  detail::check_pairs(est, ref, guard);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < est.size(); ++b)
    for (std::size_t n = guard; n + guard < est[b].size(); ++n) {
      acc += std::norm(ref[b][n] - est[b][n]);
      ++count;
    }
  return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Chain forward / backward

/// Samples at each block edge needed for the accumulated dispersion of the chain:
/// ceil(memory / 2), memory = |sum beta2 dz| * omega_max / T with omega_max = pi / T.
inline std::size_t required_guard(const DbpParams& params, double sample_period_ps) {
  const double memory = std::abs(params.total_beta2_length()) * std::numbers::pi / (sample_period_ps * sample_period_ps);
  return static_cast<std::size_t>(std::ceil(memory / 2.0 - 1e-12));
}

/// Per-block activations kept for the backward pass, step-major (k * n + sample).
struct BlockCache {
  CVector cdc_input_freq;
  CVector nlpr_input;
  CVector rotation;  // exp(-i gamma' |u|^2 dz)
};

struct ForwardPass {
  std::vector<Block> estimate;  // phase-aligned output
  double phase = 0.0;
  std::vector<BlockCache> cache;
  CVector responses;  // per step CDC response divided by n, k * n + bin
};

/// Throws when `guard` cannot hold the accumulated dispersion of `params`. Training
/// checks this once against the initial parameters; beta2 may drift afterwards.
inline void check_guard(std::size_t guard, const DbpParams& params, double sample_period_ps) {
  const std::size_t needed = required_guard(params, sample_period_ps);
  if (guard < needed) {
    std::ostringstream os;
    os << "guard of " << guard << " samples is too small for the accumulated dispersion; at least " << needed
       << " samples per block edge are required";
    throw std::invalid_argument(os.str());
  }
}

/// Runs the chain from z = L back to z = 0: for k = K-1 .. 0 compensate step k's
/// dispersion, then derotate its nonlinear phase (the exact inverse of a forward
/// step that applies the nonlinearity first). Finishes with the residual phase.
/// `out` is overwritten; its buffers are reused when the shapes match.
inline void dbp_forward(const Minibatch& batch, const DbpParams& params, ForwardPass& out) {
  batch.validate();
  params.validate();
  const std::size_t n = batch.block_length();
  const std::size_t steps = params.steps();
  const BlockGrid grid(n, batch.sample_period_ps);

  out.responses.resize(steps * n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto h = std::span(out.responses).subspan(k * n, n);
    dispersion_response(grid.omega(), params.beta2[k], params.grid.step_length(k), +1, h);
    for (auto& v : h) v *= inv_n;
  }

  out.estimate.resize(batch.received.size());
  out.cache.resize(batch.received.size());
  for (std::size_t b = 0; b < batch.received.size(); ++b) {
    auto& cache = out.cache[b];
    cache.cdc_input_freq.resize(steps * n);
    cache.nlpr_input.resize(steps * n);
    cache.rotation.resize(steps * n);
    Block& x = out.estimate[b];
    x.assign(batch.received[b].begin(), batch.received[b].end());
    for (std::size_t kk = steps; kk-- > 0;) {
      const double dz = params.grid.step_length(kk);
      const double gamma = params.gamma_prime[kk];
      const cdouble* h = out.responses.data() + kk * n;
      grid.fft().forward(x);
      std::copy(x.begin(), x.end(), cache.cdc_input_freq.begin() + kk * n);
      for (std::size_t m = 0; m < n; ++m) x[m] *= h[m];
      grid.fft().inverse_unscaled(x);
      std::copy(x.begin(), x.end(), cache.nlpr_input.begin() + kk * n);
      cdouble* rot = cache.rotation.data() + kk * n;
      for (std::size_t m = 0; m < n; ++m) {
        rot[m] = std::polar(1.0, -gamma * std::norm(x[m]) * dz);
        x[m] *= rot[m];
      }
    }
  }
  const cdouble c = detail::correlation(out.estimate, batch.reference, batch.guard);
  out.phase = std::abs(c) > 0.0 ? std::arg(c) : 0.0;
  const cdouble align = std::polar(1.0, out.phase);
  for (auto& block : out.estimate)
    for (auto& v : block) v *= align;
}

inline ForwardPass dbp_forward(const Minibatch& batch, const DbpParams& params) {
  ForwardPass out;
  dbp_forward(batch, params, out);
  return out;
}

struct Gradient {
  double cost = 0.0;
  std::vector<double> gamma_prime;
  std::vector<double> beta2;
};

/// Reverse-mode pass through a cached forward pass. Per-block gradients are summed
/// in block order, so results are bit-reproducible.
inline Gradient dbp_backward(const Minibatch& batch, const DbpParams& params, const ForwardPass& fwd) {
  if (fwd.cache.size() != batch.received.size() || fwd.responses.empty())
    throw std::invalid_argument("dbp_backward: missing forward cache");
  const std::size_t n = batch.block_length();
  const std::size_t steps = params.steps();
  const BlockGrid grid(n, batch.sample_period_ps);
  const auto w2 = grid.omega_squared();
  const std::size_t guard = batch.guard;
  const double counted = static_cast<double>(batch.received.size() * (n - 2 * guard));

  Gradient out;
  out.cost = mse_cost(fwd.estimate, batch.reference, guard);
  out.gamma_prime.assign(steps, 0.0);
  out.beta2.assign(steps, 0.0);
  const cdouble unrotate = std::polar(1.0, -fwd.phase);

  Block g(n);
  for (std::size_t b = 0; b < batch.received.size(); ++b) {
    const auto& cache = fwd.cache[b];
    const auto& est = fwd.estimate[b];
    const auto& ref = batch.reference[b];
    for (std::size_t m = 0; m < n; ++m) {
      const bool inside = m >= guard && m + guard < n;
      g[m] = inside ? (est[m] - ref[m]) / counted * unrotate : cdouble{};
    }
    for (std::size_t k = 0; k < steps; ++k) {
      const double dz = params.grid.step_length(k);
      const double gamma = params.gamma_prime[k];
      const cdouble* u = cache.nlpr_input.data() + k * n;
      const cdouble* rot = cache.rotation.data() + k * n;
      double g_gamma = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const double p = std::norm(u[m]);
        const double phi = gamma * p * dz;
        const cdouble rc = std::conj(rot[m]);
        const cdouble gm = g[m];
        g_gamma += (cdouble(0.0, 2.0 * dz) * gm * std::conj(u[m]) * p * rc).real();
        g[m] = std::conj(gm) * cdouble(0.0, -gamma * dz) * u[m] * u[m] * rot[m] + gm * cdouble(1.0, phi) * rc;
      }
      out.gamma_prime[k] += g_gamma;

      grid.fft().forward(g);
      const cdouble* h = fwd.responses.data() + k * n;
      const cdouble* xf = cache.cdc_input_freq.data() + k * n;
      double g_beta = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const cdouble hc = std::conj(h[m]);
        g_beta += (cdouble(0.0, w2[m] * dz) * g[m] * std::conj(xf[m]) * hc).real();
        g[m] *= hc;
      }
      out.beta2[k] += g_beta;
      grid.fft().inverse_unscaled(g);
    }
  }
  return out;
}

/// Cost and gradient; pass a workspace to reuse activation storage across calls.
inline Gradient dbp_gradient(const Minibatch& batch, const DbpParams& params, ForwardPass* workspace = nullptr) {
  ForwardPass local;
  ForwardPass& fwd = workspace ? *workspace : local;
  dbp_forward(batch, params, fwd);
  return dbp_backward(batch, params, fwd);
}

/// Units in which Adam sees the parameters: it updates p / unit, so one learning-rate
/// step moves a parameter by about lr * unit.
struct ParamScale {
  double gamma_prime = 1.0;
  double beta2 = 1.0;
};

struct TrainStep {
  DbpParams params;
  AdamState optimizer;
  double cost = 0.0;
  Gradient gradient;
};

/// Forward, cost, backward, and one Adam update over all 2K parameters
/// (flattened as gamma'_0..K-1 followed by beta2_0..K-1).
inline TrainStep dbp_train_step(const Minibatch& batch, DbpParams params, AdamState optimizer,
                                const ParamScale& scale = {}, ForwardPass* workspace = nullptr) {
  auto grad = dbp_gradient(batch, params, workspace);
  if (!std::isfinite(grad.cost)) {
    std::ostringstream os;
    os << "non-finite cost (" << grad.cost << ") at Adam step " << optimizer.t + 1;
    throw NumericalError(os.str());
  }
  const std::size_t steps = params.steps();
  std::vector<double> theta(2 * steps), g(2 * steps);
  for (std::size_t k = 0; k < steps; ++k) {
    theta[k] = params.gamma_prime[k] / scale.gamma_prime;
    g[k] = grad.gamma_prime[k] * scale.gamma_prime;
    theta[steps + k] = params.beta2[k] / scale.beta2;
    g[steps + k] = grad.beta2[k] * scale.beta2;
  }
  adam_step(theta, g, optimizer);
  for (std::size_t k = 0; k < steps; ++k) {
    params.gamma_prime[k] = theta[k] * scale.gamma_prime;
    params.beta2[k] = theta[steps + k] * scale.beta2;
  }
  const double cost = grad.cost;
  return {std::move(params), std::move(optimizer), cost, std::move(grad)};
}

}  // namespace fiberprobe::dbp
