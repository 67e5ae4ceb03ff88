#pragma once

// Scenario-level helpers shared by the command line and the acceptance runner.

#include <vector>

#include "fiberprobe/channel.hpp"
#include "fiberprobe/config.hpp"
#include "fiberprobe/estimator.hpp"
#include "fiberprobe/io.hpp"
#include "fiberprobe/signal.hpp"

namespace fiberprobe::pipeline {

struct Simulation {
  ComplexWaveform tx;  // at the first span's launch power
  ComplexWaveform rx;
};

inline Simulation simulate(const config::ScenarioConfig& cfg) {
  const config::SeedPlan seeds(cfg.seed);
  const auto symbols = signal::generate_qam_symbols(cfg.signal.qam_order, cfg.signal.n_symbols, seeds.symbols);
  auto tx = signal::set_launch_power(signal::rrc_pulse_shape(symbols, cfg.signal.shaping), cfg.link.launch_power_dbm.front());
  auto rx = channel::propagate_link(tx, cfg.link, seeds.channel).received;
  return {std::move(tx), std::move(rx)};
}

inline estimator::ProfileEstimate estimate(const config::ScenarioConfig& cfg, const Simulation& sim) {
  return estimator::fit(sim.rx, sim.tx, cfg.link_meta(), cfg.train);
}

/// Ground truth on the estimator grid. power_db is relative to the first span's gamma;
/// points with no positive gamma' (gamma = 0 fibers) sit at the dB floor.
inline io::ProfileTable truth_table(const config::ScenarioConfig& cfg) {
  const auto grid = dbp::make_step_grid(cfg.link.total_length_km(), cfg.train.dz_km);
  const auto t = channel::ground_truth_at(cfg.link, grid.positions());
  const double ref = cfg.link_meta().reference_gamma;
  std::vector<double> db(t.gamma_prime.size());
  for (std::size_t k = 0; k < db.size(); ++k)
    db[k] = 10.0 * std::log10(std::max(t.gamma_prime[k], estimator::kDbFloorRelative * ref) / ref);
  return {t.positions_km, t.gamma_prime, t.beta2, db};
}

}  // namespace fiberprobe::pipeline
