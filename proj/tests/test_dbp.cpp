#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fiberprobe/adam.hpp"
#include "fiberprobe/channel.hpp"
#include "fiberprobe/dbp.hpp"
#include "fiberprobe/verify.hpp"

using namespace fiberprobe;
using namespace fiberprobe::dbp;

namespace {

Block random_block(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale * std::sqrt(0.5));
  Block b(n);
  for (auto& v : b) v = {g(rng), g(rng)};
  return b;
}

double norm2(std::span<const cdouble> x) {
  double acc = 0.0;
  for (auto v : x) acc += std::norm(v);
  return acc;
}

// Central-difference dI/dconj(x) = (dI/dRe + i dI/dIm) / 2 for every sample.
Block fd_wirtinger(const std::function<double(const Block&)>& cost, const Block& x, double h = 1e-6) {
  Block out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    auto xp = x, xm = x;
    xp[n] += cdouble(h, 0.0);
    xm[n] -= cdouble(h, 0.0);
    const double dre = (cost(xp) - cost(xm)) / (2 * h);
    xp = x;
    xm = x;
    xp[n] += cdouble(0.0, h);
    xm[n] -= cdouble(0.0, h);
    const double dim = (cost(xp) - cost(xm)) / (2 * h);
    out[n] = cdouble(dre, dim) / 2.0;
  }
  return out;
}

double max_rel(std::span<const cdouble> a, std::span<const cdouble> b) {
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    err = std::max(err, std::abs(a[i] - b[i]));
  }
  return err / scale;
}

}  // namespace

TEST(Grid, MakeStepGrid) {
  const auto g = make_step_grid(280.0, 2.0);
  EXPECT_EQ(g.steps, 140u);
  EXPECT_DOUBLE_EQ(g.total_length(), 280.0);
  EXPECT_DOUBLE_EQ(g.position(139), 278.0);
  const auto odd = make_step_grid(261.0, 2.0);
  EXPECT_EQ(odd.steps, 131u);  // round(130.5) away from zero
  EXPECT_NEAR(odd.total_length(), 261.0, 1e-12);
  EXPECT_NEAR(odd.last_dz, 1.0, 1e-12);
  const auto pos = g.positions();
  for (std::size_t k = 1; k < pos.size(); ++k) EXPECT_GT(pos[k], pos[k - 1]);
}

TEST(Cdc, IdentityAllPassAndInversePair) {
  std::mt19937_64 rng(1);
  const BlockGrid grid(64, 7.8125);
  const auto x = random_block(64, rng);
  const auto id = cdc_apply(x, 0.0, 2.0, +1, grid);
  EXPECT_LT(max_rel(id, x), 1e-12);
  for (double beta : {-21.7, 0.5, 80.0}) {
    const auto y = cdc_apply(x, beta, 2.0, +1, grid);
    EXPECT_NEAR(norm2(y) / norm2(x), 1.0, 1e-12);
    const auto back = cdc_apply(y, beta, 2.0, -1, grid);
    EXPECT_LT(max_rel(back, x), 1e-12);
  }
  EXPECT_THROW(cdc_apply(random_block(32, rng), 1.0, 1.0, +1, grid), std::invalid_argument);
}

TEST(Nlpr, IdentityMagnitudeAndDirectValue) {
  std::mt19937_64 rng(2);
  const auto x = random_block(64, rng);
  const auto id = nlpr_apply(x, 0.0, 2.0);
  for (std::size_t n = 0; n < x.size(); ++n) EXPECT_EQ(id[n], x[n]);
  const auto y = nlpr_apply(x, 3.7, 0.4);
  for (std::size_t n = 0; n < x.size(); ++n) EXPECT_NEAR(std::abs(y[n]), std::abs(x[n]), 1e-12);
  const auto back = nlpr_apply(y, -3.7, 0.4);
  EXPECT_LT(max_rel(back, x), 1e-14);
  Block one(1, cdouble(1.0, 0.0));
  const auto r = nlpr_apply(one, 0.05, 2.0);
  EXPECT_NEAR(std::abs(r[0] - std::polar(1.0, -0.1)), 0.0, 1e-15);
}

TEST(CdcBackward, ZeroCotangent) {
  std::mt19937_64 rng(3);
  const BlockGrid grid(16, 10.0);
  Block xf = random_block(16, rng);
  const auto g = cdc_backward(Block(16), xf, -20.0, 0.5, +1, grid);
  EXPECT_EQ(g.grad_beta2, 0.0);
  for (auto v : g.grad_x) EXPECT_EQ(v, cdouble{});
  EXPECT_THROW(cdc_backward(Block(16), Block(), -20.0, 0.5, +1, grid), std::invalid_argument);
}

TEST(CdcBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int sign : {+1, -1}) {
    for (std::size_t n : {8u, 64u}) {
      const BlockGrid grid(n, 10.0);
      const auto x = random_block(n, rng);
      const auto t = random_block(n, rng);
      const double beta = -21.7, dz = 2.0;
      auto cost_x = [&](const Block& in) {
        const auto y = cdc_apply(in, beta, dz, sign, grid);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += std::norm(y[i] - t[i]);
        return acc;
      };
      auto y = cdc_apply(x, beta, dz, sign, grid);
      Block g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = y[i] - t[i];
      Block xf = x;
      grid.fft().forward(xf);
      const auto an = cdc_backward(g, xf, beta, dz, sign, grid);
      if (n == 8) {
        EXPECT_LT(max_rel(an.grad_x, fd_wirtinger(cost_x, x)), 1e-6);
      }
      const double h = std::cbrt(2.2e-16) * std::abs(beta);
      auto cost_b = [&](double b) {
        const auto yy = cdc_apply(x, b, dz, sign, grid);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += std::norm(yy[i] - t[i]);
        return acc;
      };
      const double fd = (cost_b(beta + h) - cost_b(beta - h)) / (2 * h);
      EXPECT_LT(std::abs(fd - an.grad_beta2) / std::abs(an.grad_beta2), 1e-6) << "sign " << sign << " n " << n;
    }
  }
}

TEST(NlprBackward, ZeroCotangent) {
  std::mt19937_64 rng(5);
  const auto x = random_block(16, rng);
  const auto g = nlpr_backward(Block(16), x, 1.3, 0.5);
  EXPECT_EQ(g.grad_gamma, 0.0);
  for (auto v : g.grad_x) EXPECT_EQ(v, cdouble{});
}

TEST(NlprBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (std::size_t n : {8u, 64u}) {
    const auto x = random_block(n, rng);
    const auto t = random_block(n, rng);
    const double gamma = 1.7, dz = 0.6;
    auto cost_x = [&](const Block& in) {
      const auto y = nlpr_apply(in, gamma, dz);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += std::norm(y[i] - t[i]);
      return acc;
    };
    const auto y = nlpr_apply(x, gamma, dz);
    Block g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = y[i] - t[i];
    const auto an = nlpr_backward(g, x, gamma, dz);
    if (n == 8) {
      EXPECT_LT(max_rel(an.grad_x, fd_wirtinger(cost_x, x)), 1e-6);
    }
    auto cost_g = [&](double gm) {
      const auto yy = nlpr_apply(x, gm, dz);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += std::norm(yy[i] - t[i]);
      return acc;
    };
    const double h = std::cbrt(2.2e-16) * gamma;
    const double fd = (cost_g(gamma + h) - cost_g(gamma - h)) / (2 * h);
    EXPECT_LT(std::abs(fd - an.grad_gamma) / std::abs(an.grad_gamma), 1e-6) << n;
  }
}

TEST(Phase, ExactRecoveryAndConventions) {
  std::mt19937_64 rng(7);
  std::vector<Block> ref{random_block(32, rng), random_block(32, rng)};
  std::vector<Block> est = ref;
  for (auto& b : est)
    for (auto& v : b) v *= std::polar(1.0, -0.3);  // est = ref * exp(-0.3i): aligning needs +0.3
  const auto a = residual_phase_align(est, ref);
  EXPECT_NEAR(a.phase, 0.3, 1e-9);
  EXPECT_LT(mse_cost(a.aligned, ref, 0), 1e-18);
  EXPECT_NEAR(residual_phase_align(ref, ref).phase, 0.0, 1e-15);

  std::vector<Block> e1{Block{cdouble(1, 0), cdouble(0, 0)}}, r1{Block{cdouble(0, 0), cdouble(1, 0)}};
  const auto orth = residual_phase_align(e1, r1);
  EXPECT_EQ(orth.phase, 0.0);
  EXPECT_EQ(mse_cost(orth.aligned, r1, 0), mse_cost(e1, r1, 0));
}

TEST(Cost, MseExamples) {
  std::mt19937_64 rng(8);
  std::vector<Block> ref{random_block(64, rng)};
  EXPECT_EQ(mse_cost(ref, ref, 5), 0.0);
  std::vector<Block> zero{Block(64)};
  double p = 0.0;
  for (std::size_t n = 5; n < 59; ++n) p += std::norm(ref[0][n]);
  EXPECT_NEAR(mse_cost(zero, ref, 5), p / 54.0, 1e-15);
  std::vector<Block> est{random_block(64, rng)};
  auto scaled = [](std::vector<Block> v, double c) {
    for (auto& b : v)
      for (auto& x : b) x *= c;
    return v;
  };
  EXPECT_NEAR(mse_cost(scaled(est, 3.0), scaled(ref, 3.0), 2), 9.0 * mse_cost(est, ref, 2), 1e-12);
  EXPECT_THROW(mse_cost(est, ref, 32), std::invalid_argument);
}

TEST(Guard, DefaultFromDispersionMemory) {
  DbpParams p;
  p.grid = make_step_grid(280.0, 2.0);
  p.gamma_prime.assign(140, 0.0);
  p.beta2.assign(140, dispersion_to_beta2(16.9, 1555.752));
  EXPECT_EQ(required_guard(p, 7.8125), 157u);

  EXPECT_NO_THROW(check_guard(157, p, 7.8125));
  try {
    check_guard(100, p, 7.8125);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("157"), std::string::npos);
  }
}

TEST(Forward, PureCdcInvertsLinearChannel) {
  std::mt19937_64 rng(10);
  const std::size_t n = 1024;
  const BlockGrid grid(n, 7.8125);
  const auto x = random_block(n, rng);
  const double beta = dispersion_to_beta2(16.9, 1555.752);
  const auto rx = cdc_apply(x, beta, 20.0, -1, grid);
  DbpParams p;
  p.grid = make_step_grid(20.0, 20.0);
  p.gamma_prime = {0.0};
  p.beta2 = {beta};
  Minibatch b;
  b.sample_period_ps = 7.8125;
  b.guard = required_guard(p, 7.8125);
  b.received.push_back(rx);
  b.reference.push_back(x);
  const auto f = dbp_forward(b, p);
  EXPECT_LT(relative_l2_error(f.estimate[0], x), 1e-9);
}

TEST(Forward, ZeroParamsIsIdentityUpToPhase) {
  std::mt19937_64 rng(11);
  DbpParams p;
  p.grid = make_step_grid(8.0, 2.0);
  p.gamma_prime.assign(4, 0.0);
  p.beta2.assign(4, 0.0);
  Minibatch b;
  b.sample_period_ps = 10.0;
  b.guard = 0;
  b.received.push_back(random_block(64, rng));
  b.reference.push_back(random_block(64, rng));
  const auto f = dbp_forward(b, p);
  const cdouble rot = f.estimate[0][0] / b.received[0][0];
  EXPECT_NEAR(std::abs(rot), 1.0, 1e-12);
  for (std::size_t n = 0; n < 64; ++n) EXPECT_NEAR(std::abs(f.estimate[0][n] - rot * b.received[0][n]), 0.0, 1e-12);
}

TEST(Forward, MatchedChannelRoundTrip) {
  const auto r = verify::roundtrip(4096, 1);
  EXPECT_LT(r.rel_l2_error, 1e-9);
}

TEST(Forward, WorkspaceReuseIsBitIdentical) {
  std::mt19937_64 rng(12);
  auto [batch, params] = verify::random_gradcheck_problem(rng);
  ForwardPass ws;
  const auto a = dbp_gradient(batch, params, &ws);
  const auto b = dbp_gradient(batch, params, &ws);
  const auto c = dbp_gradient(batch, params);
  EXPECT_EQ(a.gamma_prime, b.gamma_prime);
  EXPECT_EQ(a.beta2, c.beta2);
  EXPECT_EQ(a.cost, c.cost);
}

TEST(Gradient, HundredRandomConfigurations) {
  const auto r = verify::gradcheck(100, 2024);
  EXPECT_LT(r.max_rel_error, 1e-5);
  std::set<std::size_t> steps, lengths;
  for (const auto& c : r.cases) {
    steps.insert(c.steps);
    lengths.insert(c.block_length);
  }
  EXPECT_EQ(steps, (std::set<std::size_t>{1, 2, 4}));
  EXPECT_EQ(lengths, (std::set<std::size_t>{16, 64}));
}

TEST(Gradient, FullVectorK4Block64) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    auto [batch, params] = verify::random_gradcheck_problem(rng);
    params.grid = make_step_grid(4 * 0.3, 0.3);
    params.gamma_prime = {0.5, 1.2, 0.1, 2.0};
    params.beta2 = {-20.0, 3.0, -5.0, 15.0};
    batch.guard = required_guard(params, batch.sample_period_ps);
    for (auto* set : {&batch.received, &batch.reference})
      for (auto& blk : *set) blk = random_block(64, rng);
    EXPECT_LT(verify::gradcheck_problem(batch, params), 1e-5);
  }
}

namespace {

struct MatchedProblem {
  Minibatch batch;
  DbpParams truth;
};

MatchedProblem matched_problem() {
  const auto link = verify::roundtrip_link(0.5);
  signal::ShapingConfig shaping;
  const auto tx = signal::set_launch_power(signal::rrc_pulse_shape(signal::generate_qam_symbols(16, 1024, 3), shaping),
                                           link.launch_power_dbm.front());
  const auto rx = channel::propagate_link(tx, link, 3).received;
  const auto eq = channel::discrete_equivalent_profile(link, 0.5);
  MatchedProblem m;
  m.truth.grid = make_step_grid(link.total_length_km(), 0.5);
  m.truth.gamma_prime = eq.gamma_prime;
  m.truth.beta2 = eq.beta2;
  m.batch.sample_period_ps = rx.sample_period_ps;
  m.batch.guard = required_guard(m.truth, rx.sample_period_ps);
  const double s = std::sqrt(dbm_to_watt(link.launch_power_dbm.front()) / dbm_to_watt(channel::received_power_dbm(link)));
  Block r(rx.samples.begin(), rx.samples.end());
  for (auto& v : r) v *= s;
  m.batch.received.push_back(std::move(r));
  m.batch.reference.emplace_back(tx.samples.begin(), tx.samples.end());
  return m;
}

}  // namespace

TEST(TrainStep, StationaryAtExactMinimum) {
  const auto m = matched_problem();
  const auto g = dbp_gradient(m.batch, m.truth);
  EXPECT_LT(g.cost, 1e-9 * dbm_to_watt(6.0));
  double worst = 0.0;
  for (double v : g.gamma_prime) worst = std::max(worst, std::abs(v));
  for (double v : g.beta2) worst = std::max(worst, std::abs(v));
  EXPECT_LT(worst, 1e-9);
}

TEST(TrainStep, PerturbedGammaGradientPointsBack) {
  const auto m = matched_problem();
  for (std::size_t k : {3u, 40u, 70u}) {
    for (double delta : {+0.2, -0.2}) {
      auto p = m.truth;
      p.gamma_prime[k] *= 1.0 + delta;
      const auto g = dbp_gradient(m.batch, p);
      // Descent along -g moves the perturbed entry back towards the truth.
      EXPECT_GT(g.gamma_prime[k] * delta, 0.0) << k << " " << delta;
    }
  }
}

TEST(TrainStep, DeterministicAndFinite) {
  std::mt19937_64 rng(14);
  auto [batch, params] = verify::random_gradcheck_problem(rng);
  const auto a = dbp_train_step(batch, params, AdamState{});
  const auto b = dbp_train_step(batch, params, AdamState{});
  EXPECT_EQ(a.params.gamma_prime, b.params.gamma_prime);
  EXPECT_EQ(a.params.beta2, b.params.beta2);
  EXPECT_EQ(a.optimizer.t, 1);
  auto bad = batch;
  bad.received[0][bad.guard] = cdouble(std::numeric_limits<double>::infinity(), 0.0);
  EXPECT_THROW(dbp_train_step(bad, params, AdamState{}), std::exception);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0};
  AdamState s;
  adam_step(p, std::vector<double>{0.0, 0.0}, s);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLr) {
  std::vector<double> p{0.0, 0.0};
  AdamState s;
  adam_step(p, std::vector<double>{3.0, -1e-4}, s);
  EXPECT_NEAR(p[0], -1e-3, 1e-11);
  EXPECT_NEAR(p[1], 1e-3, 1e-6);
}

TEST(Adam, ThreeStepHandRecurrence) {
  std::vector<double> p{0.0};
  AdamState s;
  s.lr = 0.1;
  for (int i = 0; i < 3; ++i) adam_step(p, std::vector<double>{1.0}, s);
  // g = 1 each step: m_t = 1 - 0.9^t, v_t = 1 - 0.999^t, so m_hat = v_hat = 1.
  const double step = 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], -3.0 * step, 1e-12);
  EXPECT_NEAR(s.m[0], 1.0 - std::pow(0.9, 3), 1e-15);
  EXPECT_NEAR(s.v[0], 1.0 - std::pow(0.999, 3), 1e-15);
  EXPECT_EQ(s.t, 3);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0, 2.0}, s), std::invalid_argument);
}
