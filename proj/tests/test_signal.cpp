#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "fiberprobe/fft.hpp"
#include "fiberprobe/signal.hpp"
#include "fiberprobe/spectral.hpp"
#include "fiberprobe/units.hpp"

using namespace fiberprobe;
using namespace fiberprobe::signal;

TEST(Units, DbmAndDb) {
  EXPECT_DOUBLE_EQ(dbm_to_watt(0.0), 1e-3);
  EXPECT_NEAR(dbm_to_watt(5.0), 3.16227766e-3, 1e-11);
  EXPECT_NEAR(watt_to_dbm(dbm_to_watt(-7.3)), -7.3, 1e-12);
  EXPECT_NEAR(db_to_linear(14.0), std::pow(10.0, 1.4), 1e-12);
  EXPECT_NEAR(linear_to_db(100.0), 20.0, 1e-12);
}

TEST(Units, DispersionToBeta2) {
  EXPECT_NEAR(dispersion_to_beta2(16.90, 1555.752), -21.72, 0.005);
  EXPECT_NEAR(dispersion_to_beta2(0.378, 1555.752), -0.486, 0.0005);
  EXPECT_EQ(dispersion_to_beta2(0.0, 1555.752), 0.0);
  EXPECT_NEAR(beta2_to_dispersion(dispersion_to_beta2(2.59, 1550.0), 1550.0), 2.59, 1e-12);
}

TEST(Units, EffectiveLength) {
  EXPECT_DOUBLE_EQ(effective_length(0.0, 2.0), 2.0);
  const double a = alpha_db_to_neper(0.2);
  EXPECT_NEAR(effective_length(0.2, 2.0), (1.0 - std::exp(-a * 2.0)) / a, 1e-12);
}

TEST(Units, DerivedSeedsDifferPerStream) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Spectral, OmegaGrid) {
  const auto w = omega_grid(4, 1.0);
  const double tp = 2.0 * std::numbers::pi;
  ASSERT_EQ(w.size(), 4u);
  EXPECT_DOUBLE_EQ(w[0], 0.0);
  EXPECT_NEAR(w[1], tp * 0.25, 1e-15);
  EXPECT_NEAR(w[2], -tp * 0.5, 1e-15);
  EXPECT_NEAR(w[3], -tp * 0.25, 1e-15);
  const auto big = omega_grid(1024, 7.8125);
  double mx = 0.0;
  for (double v : big) mx = std::max(mx, std::abs(v));
  EXPECT_NEAR(mx, std::numbers::pi / 7.8125, 1e-14);
}

TEST(Fft, MatchesDirectDft) {
  const std::size_t n = 16;
  CVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = {std::sin(0.3 * i), std::cos(1.7 * i)};
  CVector y = x;
  Fft(n).forward(y);
  for (std::size_t m = 0; m < n; ++m) {
    cdouble acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += x[k] * std::polar(1.0, -2.0 * std::numbers::pi * m * k / n);
    EXPECT_NEAR(std::abs(acc - y[m]), 0.0, 1e-12);
  }
  Fft(n).inverse(y);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(std::abs(y[i] - x[i]), 0.0, 1e-14);
}

TEST(Fft, MisalignedInputGivesSameResult) {
  const std::size_t n = 64;
  CVector a(n + 1);
  for (std::size_t i = 0; i <= n; ++i) a[i] = {std::sin(0.1 * i), 0.5 * i};
  CVector b(a.begin() + 1, a.end());
  std::span<cdouble> shifted(a.data() + 1, n);
  Fft(n).forward(shifted);
  Fft(n).forward(b);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(shifted[i], b[i]);
  EXPECT_THROW(Fft(12), std::invalid_argument);
}

TEST(Qam, AlphabetsHaveUnitPower) {
  for (int order : {4, 16, 64}) {
    const auto a = qam_alphabet(order);
    ASSERT_EQ(static_cast<int>(a.size()), order);
    double p = 0.0;
    for (auto v : a) p += std::norm(v);
    EXPECT_NEAR(p / order, 1.0, 1e-12) << order;
  }
}

TEST(Qam, QpskAnd16QamPoints) {
  for (auto v : qam_alphabet(4)) {
    EXPECT_NEAR(std::abs(v.real()), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(v.imag()), 1.0 / std::sqrt(2.0), 1e-15);
  }
  for (auto v : qam_alphabet(16)) {
    const double re = v.real() * std::sqrt(10.0), im = v.imag() * std::sqrt(10.0);
    EXPECT_TRUE(std::abs(std::abs(re) - 1.0) < 1e-12 || std::abs(std::abs(re) - 3.0) < 1e-12);
    EXPECT_TRUE(std::abs(std::abs(im) - 1.0) < 1e-12 || std::abs(std::abs(im) - 3.0) < 1e-12);
  }
}

TEST(Qam, SymbolsDeterministicAndInAlphabet) {
  const auto a = generate_qam_symbols(16, 500, 42);
  const auto b = generate_qam_symbols(16, 500, 42);
  const auto c = generate_qam_symbols(16, 500, 43);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
  const auto alphabet = qam_alphabet(16);
  for (auto p : a.points)
    EXPECT_TRUE(std::any_of(alphabet.begin(), alphabet.end(), [&](cdouble q) { return q == p; }));
  EXPECT_THROW(generate_qam_symbols(8, 10, 1), std::invalid_argument);
  EXPECT_THROW(generate_qam_symbols(16, 0, 1), std::invalid_argument);
}

TEST(Rrc, ImpulseSymbolGivesImpulseResponse) {
  ShapingConfig cfg;
  cfg.filter_span = 8;
  SymbolSequence s{std::vector<cdouble>(32, 0.0), 16, 0};
  s.points[10] = 1.0;
  const auto w = rrc_pulse_shape(s, cfg);
  const auto h = rrc_impulse_response(cfg.samples_per_symbol, cfg.rolloff, cfg.filter_span);
  const long center = static_cast<long>(h.size() / 2);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const long idx = static_cast<long>(j) - 10 * cfg.samples_per_symbol + center;
    const double expected = idx >= 0 && idx < static_cast<long>(h.size()) ? h[idx] : 0.0;
    EXPECT_NEAR(w.samples[j].real(), expected, 1e-15);
    EXPECT_EQ(w.samples[j].imag(), 0.0);
  }
}

TEST(Rrc, Linearity) {
  ShapingConfig cfg;
  const auto s1 = generate_qam_symbols(16, 256, 1);
  const auto s2 = generate_qam_symbols(16, 256, 2);
  const cdouble a(0.7, -0.2), b(-1.3, 0.4);
  SymbolSequence mix{{}, 16, 0};
  for (std::size_t i = 0; i < 256; ++i) mix.points.push_back(a * s1.points[i] + b * s2.points[i]);
  const auto y1 = rrc_pulse_shape(s1, cfg), y2 = rrc_pulse_shape(s2, cfg), y = rrc_pulse_shape(mix, cfg);
  for (std::size_t j = 0; j < y.size(); ++j) EXPECT_NEAR(std::abs(y.samples[j] - (a * y1.samples[j] + b * y2.samples[j])), 0.0, 1e-10);
}

TEST(Rrc, MatchedCascadeHasNoIsi) {
  // Tx RRC convolved with the matched RRC, sampled at symbol spacing: a raised cosine.
  const int sps = 2;
  const auto h = rrc_taps(sps, 0.2, 512);
  const std::size_t n = h.size();
  auto cascade = [&](long lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const long j = static_cast<long>(i) + lag;
      if (j >= 0 && j < static_cast<long>(n)) acc += h[i] * h[j];
    }
    return acc;
  };
  EXPECT_NEAR(cascade(0), 1.0, 1e-12);
  for (long k = 1; k <= 20; ++k) EXPECT_LT(std::abs(cascade(k * sps)), 1e-6) << "symbol offset " << k;
}

TEST(Rrc, BandwidthConfined) {
  ShapingConfig cfg;
  auto w = rrc_pulse_shape(generate_qam_symbols(16, 4096, 3), cfg);
  Fft(w.size()).forward(w.samples);
  const auto omega = omega_grid(w.size(), w.sample_period_ps);
  // Occupied band (1 + rolloff) * baud = 76.8 GHz: edges at +-38.4 GHz.
  const double edge = 2.0 * std::numbers::pi * 38.4e-3;  // rad/ps
  double inside = 0.0, outside = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m) (std::abs(omega[m]) <= edge * 1.02 ? inside : outside) += std::norm(w.samples[m]);
  EXPECT_LT(outside / inside, 1e-4);
  EXPECT_NEAR((1.0 + cfg.rolloff) * cfg.baud_gbd, 76.8, 1e-12);
}

TEST(Rrc, UnitMeanPowerAndPreconditions) {
  ShapingConfig cfg;
  const auto w = rrc_pulse_shape(generate_qam_symbols(16, 8192, 5), cfg);
  EXPECT_NEAR(w.mean_power(), 1.0, 0.03);
  EXPECT_NEAR(w.sample_period_ps, 1000.0 / 128.0, 1e-12);
  ShapingConfig bad = cfg;
  bad.samples_per_symbol = 1;
  EXPECT_THROW(rrc_pulse_shape(generate_qam_symbols(4, 8, 1), bad), std::invalid_argument);
  bad = cfg;
  bad.filter_span = 7;
  EXPECT_THROW(rrc_pulse_shape(generate_qam_symbols(4, 8, 1), bad), std::invalid_argument);
}

TEST(LaunchPower, SetsMeanPowerAndPreservesShape) {
  const auto w = rrc_pulse_shape(generate_qam_symbols(16, 1024, 9), ShapingConfig{});
  const auto p0 = set_launch_power(w, 0.0);
  EXPECT_NEAR(p0.mean_power(), 1e-3, 1e-15);
  const auto p5 = set_launch_power(w, 5.0);
  EXPECT_NEAR(p5.mean_power() / 3.16227766e-3, 1.0, 1e-9);
  const auto twice = set_launch_power(p5, 5.0);
  EXPECT_NEAR(twice.mean_power() / p5.mean_power(), 1.0, 1e-12);
  const cdouble c = p5.samples[3] / w.samples[3];
  EXPECT_NEAR(c.imag(), 0.0, 1e-15);
  EXPECT_GT(c.real(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(std::abs(p5.samples[i] - c.real() * w.samples[i]), 0.0, 1e-15);
  ComplexWaveform zero;
  zero.samples.assign(8, 0.0);
  EXPECT_THROW(set_launch_power(zero, 0.0), std::invalid_argument);
}
