#pragma once

// Scenario configuration: one JSON document describing the transmitter, the link,
// the training recipe and the analysis thresholds. Errors name the offending JSON
// path (RFC 6901 pointer) and surface as ConfigError.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fiberprobe/channel.hpp"
#include "fiberprobe/error.hpp"
#include "fiberprobe/estimator.hpp"
#include "fiberprobe/signal.hpp"
#include "fiberprobe/units.hpp"

namespace fiberprobe::config {

using nlohmann::json;

struct SignalConfig {
  int qam_order = 16;
  std::size_t n_symbols = 65536;
  double launch_power_dbm = 0.0;
  signal::ShapingConfig shaping;

  std::size_t n_samples() const { return n_symbols * static_cast<std::size_t>(shaping.samples_per_symbol); }
};

struct AnalysisConfig {
  double anomaly_threshold_db = 1.0;
  double dispersion_threshold = 0.5;
  std::size_t level_window = 3;
  double power_deviation_db = 1.0;
};

struct ScenarioConfig {
  std::string scenario_id;
  std::uint64_t seed = 1;
  std::string output_dir;
  SignalConfig signal;
  channel::LinkConfig link;
  estimator::TrainConfig train;
  AnalysisConfig analysis;

  estimator::LinkMeta link_meta() const {
    return {link.total_cd_ps_nm(), link.total_length_km(), link.wavelength_nm, link.spans.front().gamma_per_w_km};
  }
};

/// Derived seeds recorded in run manifests.
struct SeedPlan {
  std::uint64_t master = 1;
  std::uint64_t symbols = 0;
  std::uint64_t channel = 0;
  std::uint64_t train = 0;

  explicit SeedPlan(std::uint64_t m)
      : master(m), symbols(derive_seed(m, 1)), channel(derive_seed(m, 2)), train(derive_seed(m, 3)) {}

  std::uint64_t edfa(std::size_t span) const { return derive_seed(channel, 1000 + span); }
  std::uint64_t training_run(std::size_t r) const { return derive_seed(train, r); }
};

namespace detail {

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("config: " + (path_.empty() ? std::string("/") : path_) + ": " + why);
  }

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    std::set<std::string> keys;
    for (const char* k : allowed) keys.insert(k);
    for (const auto& [k, v] : j_.items())
      if (!keys.count(k)) Node(v, path_ + "/" + k).fail("unknown field");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Node child(const char* key) const {
    if (!j_.contains(key)) Node(json(), path_ + "/" + key).fail("missing required field");
    return {j_.at(key), path_ + "/" + key};
  }

  Node at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }

  long long integer() const {
    if (!j_.is_number_integer() && !j_.is_number_unsigned()) fail("expected an integer");
    return j_.get<long long>();
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::size_t array_size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

 private:
  const json& j_;
  std::string path_;
};

inline double number_or(const Node& n, const char* key, double fallback) {
  return n.has(key) ? n.child(key).number() : fallback;
}

inline double positive(const Node& n, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!n.has(key) && fallback) return *fallback;
  const auto c = n.child(key);
  const double v = c.number();
  if (!(v > 0.0)) c.fail("must be positive");
  return v;
}

inline double non_negative(const Node& n, const char* key, double fallback) {
  if (!n.has(key)) return fallback;
  const auto c = n.child(key);
  const double v = c.number();
  if (v < 0.0) c.fail("must be non-negative");
  return v;
}

inline long long int_at_least(const Node& n, const char* key, long long min, long long fallback) {
  if (!n.has(key)) return fallback;
  const auto c = n.child(key);
  const long long v = c.integer();
  if (v < min) c.fail("must be at least " + std::to_string(min));
  return v;
}

inline SignalConfig parse_signal(const Node& n) {
  n.expect_object({"modulation", "n_symbols", "baud_gbd", "rolloff", "samples_per_symbol", "filter_span",
                   "launch_power_dbm", "wavelength_nm"});
  SignalConfig s;
  if (n.has("modulation")) {
    const auto m = n.child("modulation");
    const auto name = m.string();
    if (name == "QPSK" || name == "4QAM") s.qam_order = 4;
    else if (name == "16QAM") s.qam_order = 16;
    else if (name == "64QAM") s.qam_order = 64;
    else m.fail("unsupported modulation '" + name + "' (expected QPSK, 16QAM or 64QAM)");
  }
  s.n_symbols = static_cast<std::size_t>(int_at_least(n, "n_symbols", 1, 65536));
  s.shaping.baud_gbd = positive(n, "baud_gbd", 64.0);
  if (n.has("rolloff")) {
    const auto c = n.child("rolloff");
    s.shaping.rolloff = c.number();
    if (!(s.shaping.rolloff > 0.0 && s.shaping.rolloff <= 1.0)) c.fail("must lie in (0, 1]");
  }
  s.shaping.samples_per_symbol = static_cast<int>(int_at_least(n, "samples_per_symbol", 2, 2));
  s.shaping.filter_span = static_cast<int>(int_at_least(n, "filter_span", 2, 64));
  if (s.shaping.filter_span % 2 != 0) n.child("filter_span").fail("must be even");
  s.shaping.wavelength_nm = positive(n, "wavelength_nm", 1555.752);
  s.launch_power_dbm = n.child("launch_power_dbm").number();
  if (!is_power_of_two(s.n_samples()))
    n.child("n_symbols").fail("n_symbols * samples_per_symbol must be a power of two (got " +
                              std::to_string(s.n_samples()) + ")");
  return s;
}

inline channel::LinkConfig parse_link(const Node& n, const SignalConfig& sig) {
  n.expect_object({"spans", "edfa_noise_figure_db", "ase_enabled", "sim_step_km"});
  channel::LinkConfig link;
  link.wavelength_nm = sig.shaping.wavelength_nm;
  link.edfa_noise_figure_db = number_or(n, "edfa_noise_figure_db", 5.0);
  link.ase_enabled = n.has("ase_enabled") ? n.child("ase_enabled").boolean() : true;
  link.sim_step_km = positive(n, "sim_step_km", 0.1);
  const auto spans = n.child("spans");
  if (spans.array_size() == 0) spans.fail("at least one span is required");
  for (std::size_t i = 0; i < spans.array_size(); ++i) {
    const auto s = spans.at(i);
    s.expect_object({"length_km", "alpha_db_per_km", "dispersion_ps_nm_km", "gamma_per_w_km", "launch_power_dbm",
                     "attenuators"});
    channel::FiberSpan span;
    span.length_km = positive(s, "length_km");
    span.alpha_db_per_km = non_negative(s, "alpha_db_per_km", 0.2);
    span.dispersion_ps_nm_km = s.child("dispersion_ps_nm_km").number();
    span.gamma_per_w_km = non_negative(s, "gamma_per_w_km", 1.3);
    if (s.has("attenuators")) {
      const auto atts = s.child("attenuators");
      for (std::size_t a = 0; a < atts.array_size(); ++a) {
        const auto an = atts.at(a);
        an.expect_object({"position_km", "loss_db"});
        channel::Attenuator att;
        att.position_km = an.child("position_km").number();
        if (!(att.position_km > 0.0 && att.position_km < span.length_km))
          an.child("position_km").fail("must lie strictly inside the span");
        att.loss_db = non_negative(an, "loss_db", 0.0);
        span.attenuators.push_back(att);
      }
    }
    const double steps = span.length_km / link.sim_step_km;
    if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps))
      s.child("length_km").fail("must be a multiple of link.sim_step_km");
    link.spans.push_back(span);
    link.launch_power_dbm.push_back(s.has("launch_power_dbm") ? s.child("launch_power_dbm").number()
                                                              : sig.launch_power_dbm);
  }
  return link;
}

inline estimator::TrainConfig parse_train(const Node& n) {
  n.expect_object({"dz_km", "lr", "iterations", "block_length", "blocks_per_batch", "guard", "profiles_to_average"});
  estimator::TrainConfig t;
  t.dz_km = positive(n, "dz_km", 2.0);
  t.lr = positive(n, "lr", 1e-3);
  t.iterations = static_cast<int>(int_at_least(n, "iterations", 1, 50));
  t.block_length = static_cast<std::size_t>(int_at_least(n, "block_length", 4, 1024));
  if (!is_power_of_two(t.block_length)) n.child("block_length").fail("must be a power of two");
  t.blocks_per_batch = static_cast<std::size_t>(int_at_least(n, "blocks_per_batch", 1, 100));
  if (n.has("guard")) t.guard = static_cast<std::size_t>(int_at_least(n, "guard", 0, 0));
  t.profiles_to_average = static_cast<int>(int_at_least(n, "profiles_to_average", 1, 20));
  return t;
}

inline AnalysisConfig parse_analysis(const Node& n) {
  n.expect_object({"anomaly_threshold_db", "dispersion_threshold", "level_window", "power_deviation_db"});
  AnalysisConfig a;
  a.anomaly_threshold_db = positive(n, "anomaly_threshold_db", 1.0);
  a.dispersion_threshold = positive(n, "dispersion_threshold", 0.5);
  a.level_window = static_cast<std::size_t>(int_at_least(n, "level_window", 1, 3));
  a.power_deviation_db = positive(n, "power_deviation_db", 1.0);
  return a;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const json& j) {
  const detail::Node root(j, "");
  root.expect_object({"scenario_id", "seed", "output_dir", "signal", "link", "train", "analysis"});
  ScenarioConfig cfg;
  cfg.scenario_id = root.has("scenario_id") ? root.child("scenario_id").string() : "scenario";
  if (root.has("seed")) {
    const auto s = root.child("seed");
    if (!s.raw().is_number_unsigned() && !(s.raw().is_number_integer() && s.raw().get<long long>() >= 0))
      s.fail("expected a non-negative integer");
    cfg.seed = s.raw().get<std::uint64_t>();
  }
  if (root.has("output_dir")) cfg.output_dir = root.child("output_dir").string();
  cfg.signal = detail::parse_signal(root.child("signal"));
  cfg.link = detail::parse_link(root.child("link"), cfg.signal);
  cfg.train = root.has("train") ? detail::parse_train(root.child("train")) : estimator::TrainConfig{};
  cfg.analysis = root.has("analysis") ? detail::parse_analysis(root.child("analysis")) : AnalysisConfig{};
  cfg.train.seed = SeedPlan(cfg.seed).train;
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": invalid JSON: " + e.what());
  }
  return parse_scenario(j);
}

/// Inverse of parse_scenario; the result parses back to an equal configuration.
inline json to_json(const ScenarioConfig& c) {
  json spans = json::array();
  for (std::size_t i = 0; i < c.link.spans.size(); ++i) {
    const auto& s = c.link.spans[i];
    json atts = json::array();
    for (const auto& a : s.attenuators) atts.push_back({{"position_km", a.position_km}, {"loss_db", a.loss_db}});
    spans.push_back({{"length_km", s.length_km},
                     {"alpha_db_per_km", s.alpha_db_per_km},
                     {"dispersion_ps_nm_km", s.dispersion_ps_nm_km},
                     {"gamma_per_w_km", s.gamma_per_w_km},
                     {"launch_power_dbm", c.link.launch_power_dbm[i]},
                     {"attenuators", atts}});
  }
  const char* modulation = c.signal.qam_order == 4 ? "QPSK" : c.signal.qam_order == 16 ? "16QAM" : "64QAM";
  json train{{"dz_km", c.train.dz_km},
             {"lr", c.train.lr},
             {"iterations", c.train.iterations},
             {"block_length", c.train.block_length},
             {"blocks_per_batch", c.train.blocks_per_batch},
             {"profiles_to_average", c.train.profiles_to_average}};
  if (c.train.guard) train["guard"] = *c.train.guard;
  json out{{"scenario_id", c.scenario_id},
           {"seed", c.seed},
           {"signal",
            {{"modulation", modulation},
             {"n_symbols", c.signal.n_symbols},
             {"baud_gbd", c.signal.shaping.baud_gbd},
             {"rolloff", c.signal.shaping.rolloff},
             {"samples_per_symbol", c.signal.shaping.samples_per_symbol},
             {"filter_span", c.signal.shaping.filter_span},
             {"launch_power_dbm", c.signal.launch_power_dbm},
             {"wavelength_nm", c.signal.shaping.wavelength_nm}}},
           {"link",
            {{"spans", spans},
             {"edfa_noise_figure_db", c.link.edfa_noise_figure_db},
             {"ase_enabled", c.link.ase_enabled},
             {"sim_step_km", c.link.sim_step_km}}},
           {"train", train},
           {"analysis",
            {{"anomaly_threshold_db", c.analysis.anomaly_threshold_db},
             {"dispersion_threshold", c.analysis.dispersion_threshold},
             {"level_window", c.analysis.level_window},
             {"power_deviation_db", c.analysis.power_deviation_db}}}};
  if (!c.output_dir.empty()) out["output_dir"] = c.output_dir;
  return out;
}

}  // namespace fiberprobe::config
