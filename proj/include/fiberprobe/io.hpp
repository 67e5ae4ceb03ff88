#pragma once

// Artifact formats: the binary waveform container (.cwf), profile CSVs and the JSON
// forms of estimates and reports. The container layout is described in docs/cwf-format.md.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fiberprobe/error.hpp"
#include "fiberprobe/estimator.hpp"
#include "fiberprobe/waveform.hpp"

namespace fiberprobe::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Waveform container

inline constexpr std::array<unsigned char, 8> kCwfMagic = {'F', 'P', 'C', 'W', 'F', 0, 0, 0};
inline constexpr std::uint32_t kCwfVersion = 1;
inline constexpr std::size_t kCwfHeaderBytes = 56;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
inline double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline std::vector<unsigned char> encode_waveform(const ComplexWaveform& w) {
  std::vector<unsigned char> payload;
  payload.reserve(16 * w.size());
  for (const auto& s : w.samples) {
    detail::put_f64(payload, s.real());
    detail::put_f64(payload, s.imag());
  }
  std::vector<unsigned char> out(kCwfMagic.begin(), kCwfMagic.end());
  out.reserve(kCwfHeaderBytes + payload.size());
  detail::put_u32(out, kCwfVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(kCwfHeaderBytes));
  detail::put_u64(out, w.size());
  detail::put_f64(out, w.sample_period_ps);
  detail::put_f64(out, w.wavelength_nm);
  detail::put_u32(out, static_cast<std::uint32_t>(w.samples_per_symbol.num));
  detail::put_u32(out, static_cast<std::uint32_t>(w.samples_per_symbol.den));
  detail::put_u64(out, detail::fnv1a(payload.data(), payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

/// Parses a container; `name` prefixes every diagnostic. Throws DataError.
inline ComplexWaveform decode_waveform(std::span<const unsigned char> bytes, const std::string& name = "waveform") {
  auto fail = [&](const std::string& why) { throw DataError(name + ": " + why); };
  if (bytes.size() < kCwfHeaderBytes)
    fail("truncated header (" + std::to_string(bytes.size()) + " bytes, need " + std::to_string(kCwfHeaderBytes) + ")");
  if (!std::equal(kCwfMagic.begin(), kCwfMagic.end(), bytes.begin())) fail("bad magic; not a .cwf container");
  const unsigned char* p = bytes.data();
  const auto version = detail::get_u32(p + 8);
  if (version != kCwfVersion) fail("unsupported container version " + std::to_string(version));
  const auto header = detail::get_u32(p + 12);
  if (header != kCwfHeaderBytes) fail("unexpected header size " + std::to_string(header));
  const auto count = detail::get_u64(p + 16);
  if (count > (bytes.size() - kCwfHeaderBytes) / 16 || bytes.size() != kCwfHeaderBytes + 16 * count) {
    std::ostringstream os;
    os << "header declares " << count << " samples but the payload holds " << (bytes.size() - kCwfHeaderBytes)
       << " bytes";
    fail(os.str());
  }
  ComplexWaveform w;
  w.sample_period_ps = detail::get_f64(p + 24);
  w.wavelength_nm = detail::get_f64(p + 32);
  w.samples_per_symbol = {static_cast<int>(static_cast<std::int32_t>(detail::get_u32(p + 40))),
                          static_cast<int>(static_cast<std::int32_t>(detail::get_u32(p + 44)))};
  const auto checksum = detail::get_u64(p + 48);
  if (!(w.sample_period_ps > 0.0) || !std::isfinite(w.sample_period_ps)) fail("sample period must be positive");
  if (!(w.wavelength_nm > 0.0) || !std::isfinite(w.wavelength_nm)) fail("wavelength must be positive");
  if (w.samples_per_symbol.den <= 0 || w.samples_per_symbol.num <= 0) fail("samples-per-symbol must be positive");
  const unsigned char* payload = p + kCwfHeaderBytes;
  if (detail::fnv1a(payload, 16 * count) != checksum) fail("payload checksum mismatch");
  w.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double re = detail::get_f64(payload + 16 * i);
    const double im = detail::get_f64(payload + 16 * i + 8);
    if (!std::isfinite(re) || !std::isfinite(im)) fail("non-finite sample at index " + std::to_string(i));
    w.samples[i] = {re, im};
  }
  return w;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_waveform(const std::filesystem::path& path, const ComplexWaveform& w) {
  write_bytes(path, encode_waveform(w));
}

inline ComplexWaveform read_waveform(const std::filesystem::path& path) {
  return decode_waveform(read_bytes(path), path.string());
}

// ---------------------------------------------------------------------------
// Profile CSV

inline constexpr std::string_view kProfileHeader = "position_km,gamma_prime,beta2_ps2_km,power_db";

struct ProfileTable {
  std::vector<double> positions_km;
  std::vector<double> gamma_prime;
  std::vector<double> beta2;
  std::vector<double> power_db;

  std::size_t size() const { return positions_km.size(); }
  friend bool operator==(const ProfileTable&, const ProfileTable&) = default;
};

/// 17 significant digits: reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string profile_csv(const ProfileTable& t) {
  if (t.gamma_prime.size() != t.size() || t.beta2.size() != t.size() || t.power_db.size() != t.size())
    throw std::invalid_argument("profile columns differ in length");
  std::string out(kProfileHeader);
  out += '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    out += format_double(t.positions_km[k]) + ',' + format_double(t.gamma_prime[k]) + ',' + format_double(t.beta2[k]) +
           ',' + format_double(t.power_db[k]) + '\n';
  }
  return out;
}

inline ProfileTable parse_profile_csv(std::string_view text, const std::string& name = "profile") {
  auto fail = [&](std::size_t line, const std::string& why) {
    throw DataError(name + ":" + std::to_string(line) + ": " + why);
  };
  ProfileTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kProfileHeader) fail(1, "expected header '" + std::string(kProfileHeader) + "'");
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[4];
    const char* p = line.c_str();
    for (int c = 0; c < 4; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(p, &end);
      if (end == p) fail(lineno, "column " + std::to_string(c + 1) + " is not a number");
      p = end;
      if (c < 3) {
        if (*p != ',') fail(lineno, "expected 4 comma-separated columns");
        ++p;
      }
    }
    if (*p != '\0') fail(lineno, "trailing characters after 4 columns");
    t.positions_km.push_back(v[0]);
    t.gamma_prime.push_back(v[1]);
    t.beta2.push_back(v[2]);
    t.power_db.push_back(v[3]);
  }
  if (t.size() == 0) fail(lineno, "no data rows");
  return t;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline ProfileTable read_profile_csv(const std::filesystem::path& path) {
  return parse_profile_csv(read_text(path), path.string());
}

inline ProfileTable to_table(const estimator::ProfileEstimate& est) {
  return {est.positions_km, est.gamma_prime, est.beta2, est.power_db};
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const estimator::ProfileEstimate& est) {
  json j;
  j["positions_km"] = est.positions_km;
  j["gamma_prime_per_w_km"] = est.gamma_prime;
  j["beta2_ps2_km"] = est.beta2;
  j["power_db"] = est.power_db;
  j["clamped"] = est.clamped;
  j["n_averaged"] = est.n_averaged;
  j["final_cost"] = est.final_cost;
  j["run_final_costs"] = est.run_final_costs;
  j["discarded_runs"] = est.discarded_runs;
  j["dz_km"] = est.dz_km;
  j["guard_samples"] = est.guard;
  return j;
}

inline json to_json(const estimator::AnomalyEvent& e) {
  json j{{"position_km", e.position_km}, {"magnitude", e.magnitude}, {"kind", estimator::to_string(e.kind)}};
  if (e.kind == estimator::EventKind::LossAnomaly) {
    j["area_db_steps"] = e.area;
  } else {
    j["span"] = e.span + 1;
  }
  return j;
}

inline json to_json(const estimator::AnomalyReport& r) {
  json events = json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  return json{{"events", events}};
}

inline std::string dump(const json& j) { return j.dump(2) + '\n'; }

}  // namespace fiberprobe::io
