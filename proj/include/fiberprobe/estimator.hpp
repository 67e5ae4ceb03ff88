#pragma once

// Identification pipeline: mini-batching, initialization, the training loop with
// profile averaging, and the analyses run on the learned profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fiberprobe/adam.hpp"
#include "fiberprobe/dbp.hpp"
#include "fiberprobe/error.hpp"
#include "fiberprobe/units.hpp"
#include "fiberprobe/waveform.hpp"

namespace fiberprobe::estimator {

using dbp::Block;
using dbp::DbpParams;
using dbp::Minibatch;
using dbp::StepGrid;

struct TrainConfig {
  double dz_km = 2.0;
  double lr = 1e-3;
  int iterations = 50;
  std::size_t block_length = 1024;
  std::size_t blocks_per_batch = 100;
  std::optional<std::size_t> guard;  // per block edge; derived from the dispersion when unset
  int profiles_to_average = 20;
  std::uint64_t seed = 1;

  void validate() const {
    fiberprobe::detail::require(dz_km > 0.0, "train.dz_km must be positive");
    fiberprobe::detail::require(lr > 0.0, "train.lr must be positive");
    fiberprobe::detail::require(iterations >= 1, "train.iterations must be at least 1");
    fiberprobe::detail::require(is_power_of_two(block_length) && block_length >= 4,
                                "train.block_length must be a power of two");
    fiberprobe::detail::require(blocks_per_batch >= 1, "train.blocks_per_batch must be at least 1");
    fiberprobe::detail::require(profiles_to_average >= 1, "train.profiles_to_average must be at least 1");
  }
};

/// What the estimator knows about the link from its configuration.
struct LinkMeta {
  double total_cd_ps_nm = 0.0;
  double length_km = 0.0;
  double wavelength_nm = 1555.752;
  double reference_gamma = 1.3;  // 1/(W km); 0 dB level of power profiles
};

// ---------------------------------------------------------------------------
// Mini-batches

/// Block start offsets tiled with a hop of half a block.
inline std::vector<std::size_t> candidate_block_offsets(std::size_t length, std::size_t block_length) {
  if (length < block_length) {
    std::ostringstream os;
    os << "waveform of " << length << " samples is shorter than one block (" << block_length << ")";
    throw std::invalid_argument(os.str());
  }
  const std::size_t hop = std::max<std::size_t>(1, block_length / 2);
  std::vector<std::size_t> offsets;
  for (std::size_t start = 0; start + block_length <= length; start += hop) offsets.push_back(start);
  return offsets;
}

/// Seeded stream of mini-batches; each batch draws blocks_per_batch distinct candidate
/// blocks (with replacement only when the pool is smaller than the batch).
class MinibatchStream {
 public:
  MinibatchStream(const ComplexWaveform& rx, const ComplexWaveform& ref, std::size_t block_length,
                  std::size_t blocks_per_batch, std::size_t guard, std::uint64_t seed)
      : rx_(&rx),
        ref_(&ref),
        block_length_(block_length),
        blocks_per_batch_(blocks_per_batch),
        guard_(guard),
        offsets_(candidate_block_offsets(std::min(rx.size(), ref.size()), block_length)),
        rng_(seed) {
    if (rx.size() != ref.size()) throw std::invalid_argument("received and reference waveforms differ in length");
    if (2 * guard >= block_length) throw std::invalid_argument("guard must satisfy 2*guard < block length");
  }

  std::size_t candidates() const { return offsets_.size(); }

  /// Offsets chosen for the next batch (advances the stream).
  std::vector<std::size_t> next_offsets() {
    std::vector<std::size_t> chosen;
    chosen.reserve(blocks_per_batch_);
    if (blocks_per_batch_ <= offsets_.size()) {
      std::vector<std::size_t> pool(offsets_.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < blocks_per_batch_; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng_)]);
        chosen.push_back(offsets_[pool[i]]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, offsets_.size() - 1);
      for (std::size_t i = 0; i < blocks_per_batch_; ++i) chosen.push_back(offsets_[pick(rng_)]);
    }
    return chosen;
  }

  Minibatch next() {
    Minibatch batch;
    batch.guard = guard_;
    batch.sample_period_ps = rx_->sample_period_ps;
    for (const auto start : next_offsets()) {
      const auto first_rx = rx_->samples.begin() + static_cast<std::ptrdiff_t>(start);
      const auto first_ref = ref_->samples.begin() + static_cast<std::ptrdiff_t>(start);
      batch.received.emplace_back(first_rx, first_rx + static_cast<std::ptrdiff_t>(block_length_));
      batch.reference.emplace_back(first_ref, first_ref + static_cast<std::ptrdiff_t>(block_length_));
    }
    return batch;
  }

 private:
  const ComplexWaveform* rx_;
  const ComplexWaveform* ref_;
  std::size_t block_length_;
  std::size_t blocks_per_batch_;
  std::size_t guard_;
  std::vector<std::size_t> offsets_;
  std::mt19937_64 rng_;
};

inline MinibatchStream make_minibatches(const ComplexWaveform& rx, const ComplexWaveform& ref, const TrainConfig& cfg,
                                        std::size_t guard, std::uint64_t seed) {
  cfg.validate();
  return MinibatchStream(rx, ref, cfg.block_length, cfg.blocks_per_batch, guard, seed);
}

// ---------------------------------------------------------------------------
// Initialization

/// gamma' = 0 everywhere; beta2 uniform at the link-average dispersion.
inline DbpParams init_params(double total_cd_ps_nm, double lambda_nm, double length_km, const TrainConfig& cfg) {
  DbpParams p;
  p.grid = dbp::make_step_grid(length_km, cfg.dz_km);
  p.gamma_prime.assign(p.grid.steps, 0.0);
  p.beta2.assign(p.grid.steps, dispersion_to_beta2(total_cd_ps_nm / length_km, lambda_nm));
  return p;
}

// ---------------------------------------------------------------------------
// Profiles

/// Floor (relative to the reference) applied to non-positive or tiny gamma' before
/// taking logarithms: -30 dB.
inline constexpr double kDbFloorRelative = 1e-3;

struct DbProfile {
  std::vector<double> db;
  std::vector<bool> clamped;
};

/// p_k = 10 log10(max(gamma'_k, floor) / reference).
inline DbProfile to_db_profile(std::span<const double> gamma_prime, double reference_gamma) {
  if (!(reference_gamma > 0.0)) throw std::invalid_argument("reference gamma must be positive");
  if (std::none_of(gamma_prime.begin(), gamma_prime.end(), [](double g) { return g > 0.0; }))
    throw std::invalid_argument("gamma' profile has no positive entries; cannot form a power profile");
  const double floor = kDbFloorRelative * reference_gamma;
  DbProfile out;
  for (const double g : gamma_prime) {
    const bool clamp = !(g >= floor);
    out.clamped.push_back(clamp);
    out.db.push_back(10.0 * std::log10((clamp ? floor : g) / reference_gamma));
  }
  return out;
}

struct TiltCoefficients {
  double offset_db = 0.0;
  double slope_db_per_km = 0.0;
};

/// Applies profile + offset + slope * z.
inline std::vector<double> apply_tilt(std::span<const double> profile_db, std::span<const double> positions_km,
                                      const TiltCoefficients& c) {
  if (profile_db.size() != positions_km.size()) throw std::invalid_argument("apply_tilt: length mismatch");
  std::vector<double> out(profile_db.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = profile_db[k] + c.offset_db + c.slope_db_per_km * positions_km[k];
  return out;
}

struct TiltResult {
  std::vector<double> scaled;
  TiltCoefficients coefficients;
};

/// Least-squares (offset, slope) such that profile + offset + slope z best matches the
/// reference. A constant reference fixes the slope to zero.
inline TiltResult tilt_scale(std::span<const double> profile_db, std::span<const double> reference_db,
                             std::span<const double> positions_km) {
  const std::size_t n = profile_db.size();
  if (n == 0 || reference_db.size() != n || positions_km.size() != n)
    throw std::invalid_argument("tilt_scale: profile, reference and positions must have equal nonzero length");
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = reference_db[k] - profile_db[k];
  const double mean_r = std::accumulate(r.begin(), r.end(), 0.0) / n;
  const double mean_z = std::accumulate(positions_km.begin(), positions_km.end(), 0.0) / n;
  const double ref_mean = std::accumulate(reference_db.begin(), reference_db.end(), 0.0) / n;
  double ref_var = 0.0, szz = 0.0, szr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ref_var += (reference_db[k] - ref_mean) * (reference_db[k] - ref_mean);
    szz += (positions_km[k] - mean_z) * (positions_km[k] - mean_z);
    szr += (positions_km[k] - mean_z) * (r[k] - mean_r);
  }
  TiltCoefficients c;
  if (ref_var > 0.0 && szz > 0.0) {
    c.slope_db_per_km = szr / szz;
    c.offset_db = mean_r - c.slope_db_per_km * mean_z;
  } else {
    c.offset_db = mean_r;
  }
  return {apply_tilt(profile_db, positions_km, c), c};
}

/// Delta_k = baseline_k - test_k.
inline std::vector<double> diff_anomaly_profile(std::span<const double> baseline_db, std::span<const double> test_db) {
  if (baseline_db.size() != test_db.size()) throw std::invalid_argument("diff_anomaly_profile: length mismatch");
  std::vector<double> d(baseline_db.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = baseline_db[k] - test_db[k];
  return d;
}

/// Population standard deviation of profile - reference.
inline double profile_sd(std::span<const double> profile_db, std::span<const double> reference_db) {
  if (profile_db.size() != reference_db.size() || profile_db.empty())
    throw std::invalid_argument("profile_sd: length mismatch");
  const std::size_t n = profile_db.size();
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean += profile_db[k] - reference_db[k];
  mean /= n;
  double var = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = profile_db[k] - reference_db[k] - mean;
    var += d * d;
  }
  return std::sqrt(var / n);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty range");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Findings

enum class EventKind { LossAnomaly, LowDispersionSpan, PowerDeviation };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::LossAnomaly: return "loss-anomaly";
    case EventKind::LowDispersionSpan: return "low-dispersion-span";
    case EventKind::PowerDeviation: return "power-deviation";
  }
  return "unknown";
}

struct AnomalyEvent {
  double position_km = 0.0;
  double magnitude = 0.0;  // dB for loss/power events; relative beta2 (ps^2/km) for dispersion
  EventKind kind = EventKind::LossAnomaly;
  std::size_t span = 0;    // dispersion/power events only
  double area = 0.0;       // loss events: sum of the difference over the run, dB * steps
};

struct AnomalyReport {
  std::vector<AnomalyEvent> events;
};

/// Maximal runs with diff > threshold. Each run is one event at its onset with the
/// median over the run as magnitude, in order of position.
inline AnomalyReport detect_loss_anomalies(std::span<const double> diff_db, std::span<const double> positions_km,
                                           double threshold_db = 1.0) {
  if (!(threshold_db > 0.0)) throw std::invalid_argument("anomaly threshold must be positive");
  if (diff_db.size() != positions_km.size()) throw std::invalid_argument("detect_loss_anomalies: grid mismatch");
  AnomalyReport report;
  std::size_t k = 0;
  while (k < diff_db.size()) {
    if (!(diff_db[k] > threshold_db)) {
      ++k;
      continue;
    }
    const std::size_t begin = k;
    while (k < diff_db.size() && diff_db[k] > threshold_db) ++k;
    std::vector<double> run(diff_db.begin() + begin, diff_db.begin() + k);
    AnomalyEvent e;
    e.position_km = positions_km[begin];
    e.magnitude = median(run);
    e.kind = EventKind::LossAnomaly;
    e.area = std::accumulate(run.begin(), run.end(), 0.0);
    report.events.push_back(e);
  }
  return report;
}

/// The loss event with the largest area, if any.
inline std::optional<AnomalyEvent> dominant_event(const AnomalyReport& report) {
  if (report.events.empty()) return std::nullopt;
  return *std::max_element(report.events.begin(), report.events.end(),
                           [](const AnomalyEvent& a, const AnomalyEvent& b) { return a.area < b.area; });
}

namespace detail {

inline std::size_t span_of(double z, std::span<const double> boundaries) {
  for (std::size_t s = 0; s + 1 < boundaries.size(); ++s)
    if (z < boundaries[s + 1] - 1e-9) return s;
  return boundaries.size() - 2;
}

inline void check_boundaries(std::span<const double> boundaries) {
  if (boundaries.size() < 2) throw std::invalid_argument("span boundaries need at least two entries");
  for (std::size_t s = 0; s + 1 < boundaries.size(); ++s)
    if (!(boundaries[s + 1] > boundaries[s])) throw std::invalid_argument("span boundaries must be increasing");
}

}  // namespace detail

/// Relative beta2 (with respect to the profile minimum); spans whose peak exceeds
/// threshold * (max - min) are reported, highest peak first. Boundaries are the span
/// edges in km (0, ..., L). Nothing is reported when the range is below
/// min_contrast * median |beta2|, so training noise on a uniform link stays quiet.
inline AnomalyReport detect_low_dispersion_spans(std::span<const double> beta2, std::span<const double> positions_km,
                                                 std::span<const double> span_boundaries_km, double threshold = 0.5,
                                                 double min_contrast = 0.05) {
  detail::check_boundaries(span_boundaries_km);
  if (span_boundaries_km.size() < 3) throw std::invalid_argument("dispersion-span detection needs at least two spans");
  if (beta2.size() != positions_km.size() || beta2.empty()) throw std::invalid_argument("beta2/positions length mismatch");
  const auto [lo, hi] = std::minmax_element(beta2.begin(), beta2.end());
  const double range = *hi - *lo;
  AnomalyReport report;
  std::vector<double> magnitudes(beta2.size());
  std::transform(beta2.begin(), beta2.end(), magnitudes.begin(), [](double b) { return std::abs(b); });
  if (!(range > 0.0) || range < min_contrast * median(magnitudes)) return report;
  const std::size_t n_spans = span_boundaries_km.size() - 1;
  std::vector<std::optional<AnomalyEvent>> peaks(n_spans);
  for (std::size_t k = 0; k < beta2.size(); ++k) {
    const std::size_t s = detail::span_of(positions_km[k], span_boundaries_km);
    const double rel = beta2[k] - *lo;
    if (!peaks[s] || rel > peaks[s]->magnitude) peaks[s] = AnomalyEvent{positions_km[k], rel, EventKind::LowDispersionSpan, s, 0.0};
  }
  for (const auto& p : peaks)
    if (p && p->magnitude > threshold * range) report.events.push_back(*p);
  std::stable_sort(report.events.begin(), report.events.end(),
                   [](const AnomalyEvent& a, const AnomalyEvent& b) { return a.magnitude > b.magnitude; });
  return report;
}

struct LevelDiagram {
  std::vector<double> relative_launch_db;  // per span, relative to the median span
  std::vector<double> absolute_db;         // per span, in the profile's own scale
};

/// Per-span launch estimate: mean of the first `window` profile points of each span.
inline LevelDiagram extract_level_diagram(std::span<const double> profile_db, std::span<const double> positions_km,
                                          std::span<const double> span_boundaries_km, std::size_t window = 3) {
  detail::check_boundaries(span_boundaries_km);
  if (profile_db.size() != positions_km.size()) throw std::invalid_argument("level diagram: grid mismatch");
  if (window == 0) throw std::invalid_argument("level diagram window must be positive");
  const std::size_t n_spans = span_boundaries_km.size() - 1;
  std::vector<std::vector<double>> members(n_spans);
  for (std::size_t k = 0; k < profile_db.size(); ++k)
    members[detail::span_of(positions_km[k], span_boundaries_km)].push_back(profile_db[k]);
  LevelDiagram out;
  for (std::size_t s = 0; s < n_spans; ++s) {
    const auto& m = members[s];
    if (m.empty()) throw std::invalid_argument("span " + std::to_string(s + 1) + " contains no profile points");
    std::size_t w = window;
    if (m.size() < w) {
      warn("span " + std::to_string(s + 1) + " is shorter than the level-diagram window; window shrunk to " +
           std::to_string(m.size()));
      w = m.size();
    }
    out.absolute_db.push_back(std::accumulate(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(w), 0.0) / w);
  }
  const double mid = median(out.absolute_db);
  for (const double a : out.absolute_db) out.relative_launch_db.push_back(a - mid);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct ProfileEstimate {
  std::vector<double> positions_km;
  std::vector<double> gamma_prime;  // 1/(W km)
  std::vector<double> beta2;        // ps^2/km
  std::vector<double> power_db;
  std::vector<bool> clamped;
  std::size_t n_averaged = 0;
  double final_cost = 0.0;                   // mean over kept runs
  std::vector<double> run_final_costs;       // per kept run
  std::vector<std::vector<double>> cost_trace;  // per kept run, per iteration
  std::vector<std::size_t> discarded_runs;
  std::vector<std::vector<double>> run_gamma_prime;  // per kept run, 1/(W km)
  std::vector<std::vector<double>> run_beta2;
  double dz_km = 0.0;
  std::size_t guard = 0;
};

/// Worker count: FIBERPROBE_THREADS if set, otherwise the hardware concurrency.
inline unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FIBERPROBE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

namespace detail {

inline ComplexWaveform normalized(const ComplexWaveform& w) {
  const double p = w.mean_power();
  if (!(p > 0.0)) throw std::invalid_argument("cannot normalize an all-zero waveform");
  ComplexWaveform out = w;
  const double s = 1.0 / std::sqrt(p);
  for (auto& v : out.samples) v *= s;
  return out;
}

struct RunResult {
  std::vector<double> gamma_prime;  // normalized-power units
  std::vector<double> beta2;
  std::vector<double> costs;
  bool ok = true;
  std::string diagnostic;
};

}  // namespace detail

/// Scale in which Adam updates the parameters during fit. Waveforms are normalized to
/// unit mean power, so gamma' is learned in 1/km; beta2 is measured in units of T^2 per km.
inline dbp::ParamScale training_scale(double sample_period_ps) {
  return {1.0, sample_period_ps * sample_period_ps};
}

/// Known-waveform identification: profiles_to_average independent Adam runs (each with
/// its own batch-sampling seed) on the same data, averaged elementwise.
inline ProfileEstimate fit(const ComplexWaveform& rx, const ComplexWaveform& ref, const LinkMeta& meta,
                           const TrainConfig& cfg) {
  cfg.validate();
  rx.validate();
  ref.validate();
  if (std::abs(rx.sample_period_ps - ref.sample_period_ps) > 1e-12 * ref.sample_period_ps)
    throw DataError("received and reference waveforms have different sample periods");
  if (std::abs(rx.wavelength_nm - ref.wavelength_nm) > 1e-9)
    throw DataError("received and reference waveforms have different wavelengths");
  if (rx.size() != ref.size()) throw DataError("received and reference waveforms differ in length");
  if (!(meta.length_km > 0.0)) throw std::invalid_argument("link length must be positive");

  const double ref_power = ref.mean_power();
  const auto rx_n = detail::normalized(rx);
  const auto ref_n = detail::normalized(ref);
  const DbpParams init = init_params(meta.total_cd_ps_nm, meta.wavelength_nm, meta.length_km, cfg);
  const std::size_t needed = dbp::required_guard(init, rx.sample_period_ps);
  const std::size_t guard = cfg.guard.value_or(needed);
  if (guard < needed) {
    std::ostringstream os;
    os << "train.guard of " << guard << " samples is below the " << needed
       << " samples needed for the link's accumulated dispersion";
    throw ConfigError(os.str());
  }
  if (2 * guard >= cfg.block_length) {
    std::ostringstream os;
    os << "block length " << cfg.block_length << " cannot hold a guard of " << guard << " samples per edge";
    throw ConfigError(os.str());
  }
  const auto scale = training_scale(rx.sample_period_ps);

  const auto runs = static_cast<std::size_t>(cfg.profiles_to_average);
  std::vector<detail::RunResult> results(runs);
  auto run_one = [&](std::size_t r) {
    auto& res = results[r];
    try {
      auto stream = make_minibatches(rx_n, ref_n, cfg, guard, derive_seed(cfg.seed, r));
      DbpParams params = init;
      AdamState opt;
      opt.lr = cfg.lr;
      dbp::ForwardPass workspace;
      for (int it = 0; it < cfg.iterations; ++it) {
        auto step = dbp::dbp_train_step(stream.next(), std::move(params), std::move(opt), scale, &workspace);
        params = std::move(step.params);
        opt = std::move(step.optimizer);
        res.costs.push_back(step.cost);
      }
      res.gamma_prime = std::move(params.gamma_prime);
      res.beta2 = std::move(params.beta2);
    } catch (const NumericalError& e) {
      res.ok = false;
      res.diagnostic = e.what();
    }
  };

  const unsigned workers = std::min<unsigned>(worker_threads(), static_cast<unsigned>(runs));
  if (workers <= 1) {
    for (std::size_t r = 0; r < runs; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < runs; r += workers) run_one(r);
      });
    for (auto& t : pool) t.join();
  }

  ProfileEstimate est;
  est.dz_km = cfg.dz_km;
  est.guard = guard;
  est.positions_km = init.grid.positions();
  const std::size_t steps = init.steps();
  est.gamma_prime.assign(steps, 0.0);
  est.beta2.assign(steps, 0.0);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto& res = results[r];
    if (!res.ok) {
      warn("training run " + std::to_string(r) + " discarded: " + res.diagnostic);
      est.discarded_runs.push_back(r);
      continue;
    }
    std::vector<double> g(steps);
    for (std::size_t k = 0; k < steps; ++k) g[k] = res.gamma_prime[k] / ref_power;
    for (std::size_t k = 0; k < steps; ++k) {
      est.gamma_prime[k] += g[k];
      est.beta2[k] += res.beta2[k];
    }
    est.run_gamma_prime.push_back(std::move(g));
    est.run_beta2.push_back(res.beta2);
    est.cost_trace.push_back(res.costs);
    est.run_final_costs.push_back(res.costs.back());
    ++est.n_averaged;
  }
  if (est.n_averaged == 0) throw NumericalError("all training runs produced non-finite costs");
  for (std::size_t k = 0; k < steps; ++k) {
    est.gamma_prime[k] /= static_cast<double>(est.n_averaged);
    est.beta2[k] /= static_cast<double>(est.n_averaged);
  }
  est.final_cost = std::accumulate(est.run_final_costs.begin(), est.run_final_costs.end(), 0.0) /
                   static_cast<double>(est.n_averaged);
  if (std::any_of(est.gamma_prime.begin(), est.gamma_prime.end(), [](double g) { return g > 0.0; })) {
    auto db = to_db_profile(est.gamma_prime, meta.reference_gamma);
    est.power_db = std::move(db.db);
    est.clamped = std::move(db.clamped);
  } else {
    warn("learned gamma' has no positive entries; power profile left at the floor");
    est.power_db.assign(steps, 10.0 * std::log10(kDbFloorRelative));
    est.clamped.assign(steps, true);
  }
  return est;
}

/// Elementwise mean over iterations of the per-run cost traces.
inline std::vector<double> mean_cost_trace(const ProfileEstimate& est) {
  if (est.cost_trace.empty()) return {};
  std::vector<double> mean(est.cost_trace.front().size(), 0.0);
  for (const auto& run : est.cost_trace)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += run[i];
  for (auto& m : mean) m /= static_cast<double>(est.cost_trace.size());
  return mean;
}

}  // namespace fiberprobe::estimator
