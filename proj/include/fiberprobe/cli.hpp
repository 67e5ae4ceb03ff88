#pragma once

// The `fiberprobe` command line: simulate | estimate | analyze | verify.
// Exit codes: 0 ok, 1 verification failed, 2 config/usage error, 3 data error,
// 4 numerical failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fiberprobe/channel.hpp"
#include "fiberprobe/config.hpp"
#include "fiberprobe/error.hpp"
#include "fiberprobe/estimator.hpp"
#include "fiberprobe/io.hpp"
#include "fiberprobe/pipeline.hpp"
#include "fiberprobe/signal.hpp"
#include "fiberprobe/verify.hpp"

namespace fiberprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool emit_plot_data = false;
  // estimate
  std::string rx;
  std::string tx;
  // analyze
  std::string profile;
  std::string baseline;
  std::string truth;
  // verify
  std::string suite;
  int gradcheck_configs = 100;
};

namespace detail {

inline fs::path output_dir(const Options& o, const config::ScenarioConfig* cfg) {
  fs::path dir = !o.out.empty() ? fs::path(o.out) : (cfg && !cfg->output_dir.empty() ? fs::path(cfg->output_dir) : ".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " is not writable");
  return dir;
}

inline config::ScenarioConfig load(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  auto cfg = config::load_scenario(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = config::SeedPlan(cfg.seed).train;
  }
  return cfg;
}

inline std::vector<double> db_of(const std::vector<double>& gamma_prime, double reference) {
  return estimator::to_db_profile(gamma_prime, reference).db;
}

/// Tidy long-format CSV: series,position_km,value.
class TidyCsv {
 public:
  TidyCsv() : text_("series,position_km,value\n") {}
  void add(const std::string& series, const std::vector<double>& z, const std::vector<double>& v) {
    for (std::size_t k = 0; k < z.size(); ++k)
      text_ += series + ',' + io::format_double(z[k]) + ',' + io::format_double(v[k]) + '\n';
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline void check_grid(const io::ProfileTable& a, const io::ProfileTable& b, const std::string& what) {
  if (a.size() != b.size()) throw DataError(what + ": grid has " + std::to_string(b.size()) + " points, profile has " +
                                            std::to_string(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a.positions_km[k] - b.positions_km[k]) > 1e-9 * std::max(1.0, std::abs(a.positions_km[k])))
      throw DataError(what + ": position mismatch at row " + std::to_string(k + 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_simulate(const Options& o) {
  const auto cfg = detail::load(o);
  const auto dir = detail::output_dir(o, &cfg);
  const config::SeedPlan seeds(cfg.seed);

  const auto sim = pipeline::simulate(cfg);
  const auto& tx = sim.tx;
  const auto grid = dbp::make_step_grid(cfg.link.total_length_km(), cfg.train.dz_km);
  const double ref_gamma = cfg.link_meta().reference_gamma;

  io::write_waveform(dir / "tx.cwf", tx);
  io::write_waveform(dir / "rx.cwf", sim.rx);
  io::write_text(dir / "truth.csv", io::profile_csv(pipeline::truth_table(cfg)));

  json edfa = json::array();
  for (std::size_t i = 0; i + 1 < cfg.link.spans.size(); ++i) edfa.push_back(seeds.edfa(i));
  json runs = json::array();
  for (int r = 0; r < cfg.train.profiles_to_average; ++r) runs.push_back(seeds.training_run(static_cast<std::size_t>(r)));
  dbp::DbpParams init = estimator::init_params(cfg.link.total_cd_ps_nm(), cfg.link.wavelength_nm,
                                               cfg.link.total_length_km(), cfg.train);
  json manifest{
      {"tool", "fiberprobe"},
      {"version", kVersion},
      {"command", "simulate"},
      {"scenario_id", cfg.scenario_id},
      {"seeds",
       {{"master", seeds.master},
        {"symbols", seeds.symbols},
        {"channel", seeds.channel},
        {"edfa", edfa},
        {"train", seeds.train},
        {"training_runs", runs}}},
      {"derived",
       {{"total_length_km", cfg.link.total_length_km()},
        {"total_cd_ps_nm", cfg.link.total_cd_ps_nm()},
        {"sample_period_ps", tx.sample_period_ps},
        {"n_samples", tx.size()},
        {"dbp_steps", grid.steps},
        {"default_guard_samples", dbp::required_guard(init, tx.sample_period_ps)},
        {"received_power_dbm", watt_to_dbm(sim.rx.mean_power())}}},
      {"outputs", {"tx.cwf", "rx.cwf", "truth.csv"}},
      {"config", config::to_json(cfg)}};
  if (o.emit_plot_data) {
    const auto fine = channel::ground_truth_gamma_profile(cfg.link, cfg.link.sim_step_km);
    detail::TidyCsv plot;
    std::vector<double> db(fine.gamma_prime.size());
    for (std::size_t k = 0; k < db.size(); ++k)
      db[k] = 10.0 * std::log10(std::max(fine.gamma_prime[k], estimator::kDbFloorRelative * ref_gamma) / ref_gamma);
    plot.add("truth_power_db", fine.positions_km, db);
    plot.add("truth_beta2_ps2_km", fine.positions_km, fine.beta2);
    io::write_text(dir / "plot_truth.csv", plot.str());
    manifest["outputs"].push_back("plot_truth.csv");
  }
  io::write_text(dir / "manifest.json", io::dump(manifest));
  std::cout << "simulate: wrote " << (dir / "rx.cwf").string() << " (" << tx.size() << " samples)\n";
  return kOk;
}

inline int cmd_estimate(const Options& o) {
  const auto cfg = detail::load(o);
  const auto dir = detail::output_dir(o, &cfg);
  const fs::path rx_path = o.rx.empty() ? dir / "rx.cwf" : fs::path(o.rx);
  const fs::path tx_path = o.tx.empty() ? dir / "tx.cwf" : fs::path(o.tx);
  const auto rx = io::read_waveform(rx_path);
  const auto tx = io::read_waveform(tx_path);

  const double t_cfg = cfg.signal.shaping.sample_period_ps();
  for (const auto* w : {&rx, &tx}) {
    const std::string name = (w == &rx ? rx_path : tx_path).string();
    if (std::abs(w->sample_period_ps - t_cfg) > 1e-9 * t_cfg)
      throw DataError(name + ": sample period " + io::format_double(w->sample_period_ps) +
                      " ps does not match the configuration (" + io::format_double(t_cfg) + " ps)");
    if (std::abs(w->wavelength_nm - cfg.link.wavelength_nm) > 1e-9)
      throw DataError(name + ": wavelength " + io::format_double(w->wavelength_nm) +
                      " nm does not match the configuration (" + io::format_double(cfg.link.wavelength_nm) + " nm)");
  }
  if (rx.size() != tx.size()) throw DataError("rx and tx waveforms differ in length");

  const auto est = estimator::fit(rx, tx, cfg.link_meta(), cfg.train);
  io::write_text(dir / "profile.csv", io::profile_csv(io::to_table(est)));

  auto pj = io::to_json(est);
  pj["scenario_id"] = cfg.scenario_id;
  pj["seeds"] = {{"master", cfg.seed}, {"train", cfg.train.seed}};
  pj["reference_gamma_per_w_km"] = cfg.link_meta().reference_gamma;
  io::write_text(dir / "profile.json", io::dump(pj));

  const auto trace = estimator::mean_cost_trace(est);
  std::string cost = "iteration,mean_cost\n";
  for (std::size_t i = 0; i < trace.size(); ++i) cost += std::to_string(i + 1) + ',' + io::format_double(trace[i]) + '\n';
  io::write_text(dir / "cost.csv", cost);

  if (o.emit_plot_data) {
    std::string runs = "run,iteration,cost\n";
    for (std::size_t r = 0; r < est.cost_trace.size(); ++r)
      for (std::size_t i = 0; i < est.cost_trace[r].size(); ++i)
        runs += std::to_string(r) + ',' + std::to_string(i + 1) + ',' + io::format_double(est.cost_trace[r][i]) + '\n';
    io::write_text(dir / "plot_cost_runs.csv", runs);
    detail::TidyCsv plot;
    plot.add("power_db", est.positions_km, est.power_db);
    plot.add("beta2_ps2_km", est.positions_km, est.beta2);
    for (std::size_t r = 0; r < est.run_beta2.size(); ++r) {
      plot.add("run" + std::to_string(r) + "_beta2_ps2_km", est.positions_km, est.run_beta2[r]);
      std::vector<double> g = est.run_gamma_prime[r];
      for (auto& v : g) v = std::max(v, estimator::kDbFloorRelative * cfg.link_meta().reference_gamma);
      plot.add("run" + std::to_string(r) + "_power_db", est.positions_km, detail::db_of(g, cfg.link_meta().reference_gamma));
    }
    io::write_text(dir / "plot_profile.csv", plot.str());
  }
  std::cout << "estimate: " << est.positions_km.size() << " steps, " << est.n_averaged << " runs averaged, cost "
            << trace.front() << " -> " << trace.back() << '\n';
  return kOk;
}

inline int cmd_analyze(const Options& o) {
  std::optional<config::ScenarioConfig> cfg;
  if (!o.config.empty()) cfg = detail::load(o);
  const auto dir = detail::output_dir(o, cfg ? &*cfg : nullptr);
  const auto analysis = cfg ? cfg->analysis : config::AnalysisConfig{};
  const fs::path profile_path = o.profile.empty() ? dir / "profile.csv" : fs::path(o.profile);
  const auto profile = io::read_profile_csv(profile_path);
  std::optional<io::ProfileTable> baseline, truth;
  if (!o.baseline.empty()) {
    baseline = io::read_profile_csv(o.baseline);
    detail::check_grid(profile, *baseline, o.baseline);
  }
  if (!o.truth.empty()) {
    truth = io::read_profile_csv(o.truth);
    detail::check_grid(profile, *truth, o.truth);
  }
  const auto& z = profile.positions_km;

  // Affine dB correction fitted on the baseline (or the profile itself) against the
  // truth and reused for every profile.
  estimator::TiltCoefficients tilt;
  std::string tilt_source = "none";
  if (truth) {
    const auto& fit_on = baseline ? baseline->power_db : profile.power_db;
    tilt = estimator::tilt_scale(fit_on, truth->power_db, z).coefficients;
    tilt_source = baseline ? "baseline" : "profile";
  }
  const auto scaled = estimator::apply_tilt(profile.power_db, z, tilt);

  estimator::AnomalyReport report;
  json metrics{{"n_points", profile.size()},
               {"tilt", {{"offset_db", tilt.offset_db}, {"slope_db_per_km", tilt.slope_db_per_km}, {"fitted_on", tilt_source}}}};
  detail::TidyCsv plot;
  plot.add("power_db", z, scaled);
  plot.add("beta2_ps2_km", z, profile.beta2);
  if (truth) {
    metrics["profile_sd_db"] = estimator::profile_sd(scaled, truth->power_db);
    plot.add("truth_power_db", z, truth->power_db);
  }
  if (baseline) {
    const auto base_scaled = estimator::apply_tilt(baseline->power_db, z, tilt);
    const auto diff = estimator::diff_anomaly_profile(base_scaled, scaled);
    report = estimator::detect_loss_anomalies(diff, z, analysis.anomaly_threshold_db);
    metrics["sd_vs_baseline_db"] = estimator::profile_sd(profile.power_db, baseline->power_db);
    if (truth) metrics["baseline_profile_sd_db"] = estimator::profile_sd(base_scaled, truth->power_db);
    plot.add("baseline_power_db", z, base_scaled);
    plot.add("diff_db", z, diff);
  }

  json level = nullptr;
  if (cfg) {
    const auto bounds = cfg->link.span_boundaries_km();
    if (bounds.size() >= 3) {
      auto disp = estimator::detect_low_dispersion_spans(profile.beta2, z, bounds, analysis.dispersion_threshold);
      report.events.insert(report.events.end(), disp.events.begin(), disp.events.end());
    } else {
      warn("single-span link: dispersion-span detection skipped");
    }
    const auto ld = estimator::extract_level_diagram(scaled, z, bounds, analysis.level_window);
    for (std::size_t s = 0; s < ld.relative_launch_db.size(); ++s)
      if (std::abs(ld.relative_launch_db[s]) > analysis.power_deviation_db)
        report.events.push_back({bounds[s], ld.relative_launch_db[s], estimator::EventKind::PowerDeviation, s, 0.0});
    level = {{"span_start_km", std::vector<double>(bounds.begin(), bounds.end() - 1)},
             {"relative_launch_db", ld.relative_launch_db},
             {"absolute_db", ld.absolute_db}};
  } else if (!baseline) {
    warn("no --config: span boundaries unknown, dispersion-span and level-diagram analyses skipped");
  }

  auto rj = io::to_json(report);
  if (!level.is_null()) rj["level_diagram"] = level;
  io::write_text(dir / "report.json", io::dump(rj));
  io::write_text(dir / "metrics.json", io::dump(metrics));
  if (o.emit_plot_data) io::write_text(dir / "plot_analysis.csv", plot.str());
  std::cout << "analyze: " << report.events.size() << " event(s)\n";
  return kOk;
}

inline int cmd_verify(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(1);
  json summary{{"suite", o.suite}, {"seed", seed}};
  bool pass = false;
  if (o.suite == "gradcheck") {
    const auto r = verify::gradcheck(o.gradcheck_configs, seed);
    pass = r.passed();
    summary["configurations"] = r.cases.size();
    summary["max_rel_error"] = r.max_rel_error;
    summary["threshold"] = r.threshold;
  } else if (o.suite == "roundtrip") {
    const auto r = verify::roundtrip(4096, seed);
    pass = r.passed();
    summary["rel_l2_error"] = r.rel_l2_error;
    summary["threshold"] = r.threshold;
    summary["steps"] = r.steps;
    summary["guard_samples"] = r.guard;
  } else if (o.suite == "convergence") {
    const auto r = verify::ssfm_convergence(4096, seed);
    pass = r.monotone();
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back({{"dz_km", p.dz_km}, {"rel_l2_error", p.rel_l2_error}});
    summary["points"] = pts;
    summary["reference_dz_km"] = r.reference_dz_km;
    summary["observed_order"] = r.observed_order();
  } else {
    throw ConfigError("unknown suite '" + o.suite + "' (expected gradcheck, roundtrip or convergence)");
  }
  summary["passed"] = pass;
  const auto text = io::dump(summary);
  std::cout << text;
  if (!o.out.empty()) io::write_text(detail::output_dir(o, nullptr) / ("verify_" + o.suite + ".json"), text);
  return pass ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------------------

/// Full entry point; never throws.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"fiberprobe: longitudinal power and dispersion profiles from learned backpropagation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "scenario JSON");
    if (config_required) c->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_flag("--emit-plot-data", o.emit_plot_data, "also write tidy CSVs for plotting");
  };
  auto* sim = app.add_subcommand("simulate", "simulate a link; writes tx.cwf, rx.cwf, truth.csv, manifest.json");
  common(sim, true);
  auto* est = app.add_subcommand("estimate", "learn the profile; writes profile.csv, profile.json, cost.csv");
  common(est, true);
  est->add_option("--rx", o.rx, "received waveform (default <out>/rx.cwf)");
  est->add_option("--tx", o.tx, "transmitted waveform (default <out>/tx.cwf)");
  auto* ana = app.add_subcommand("analyze", "tilt scaling, anomalies, dispersion spans, level diagram");
  common(ana, false);
  ana->add_option("--profile", o.profile, "profile CSV (default <out>/profile.csv)");
  ana->add_option("--baseline", o.baseline, "baseline profile CSV for difference analysis");
  ana->add_option("--truth", o.truth, "reference profile CSV (e.g. truth.csv)");
  auto* ver = app.add_subcommand("verify", "run a self-check suite");
  common(ver, false);
  ver->add_option("suite,--suite", o.suite, "gradcheck | roundtrip | convergence")->required();
  ver->add_option("--configs", o.gradcheck_configs, "gradcheck: number of random configurations")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  for (auto* sub : {sim, est, ana, ver})
    if (sub->count("--seed")) o.seed = seed;

  try {
    if (*sim) return cmd_simulate(o);
    if (*est) return cmd_estimate(o);
    if (*ana) return cmd_analyze(o);
    return cmd_verify(o);
  } catch (const ConfigError& e) {
    std::cerr << "fiberprobe: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "fiberprobe: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "fiberprobe: numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "fiberprobe: invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "fiberprobe: error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace fiberprobe::cli
