#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcdrop/error.hpp"
#include "mcdrop/evaluation.hpp"
#include "mcdrop/model.hpp"
#include "mcdrop/text.hpp"
#include "mcdrop/weights_io.hpp"

namespace mcdrop {

inline constexpr const char* kVersion = "1.0.0";

// ---- model config JSON -----------------------------------------------------

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers}, {"d_model", c.d_model}, {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},         {"n_t", c.n_t},         {"max_len", c.max_len},
          {"ln_eps", c.ln_eps}};
}

// Missing keys keep their defaults; unknown keys and wrong types are errors.
inline ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    auto as_size = [&](std::size_t& field) {
      if (!value.is_number_unsigned()) throw ConfigError("'" + key + "' must be a positive integer");
      field = value.get<std::size_t>();
    };
    if (key == "n_layers") as_size(c.n_layers);
    else if (key == "d_model") as_size(c.d_model);
    else if (key == "n_heads") as_size(c.n_heads);
    else if (key == "d_ff") as_size(c.d_ff);
    else if (key == "n_t") as_size(c.n_t);
    else if (key == "max_len") as_size(c.max_len);
    else if (key == "ln_eps") {
      if (!value.is_number()) throw ConfigError("'ln_eps' must be a number");
      c.ln_eps = value.get<double>();
    } else {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline ModelConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

inline nlohmann::json eval_config_to_json(const ModelConfig& model, const EvalConfig& eval) {
  return {{"model", config_to_json(model)},
          {"rates", eval.rates},
          {"depth_fraction", eval.depth_fraction},
          {"n_samples", eval.mc.n_samples}};
}

// FNV-1a of the compact JSON dump; the seed is reported separately.
inline std::string config_hash(const nlohmann::json& canonical) { return hex64(fnv1a64(canonical.dump())); }

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string provenance_line(const Provenance& p) {
  return "mcdrop " + p.version + " seed=" + std::to_string(p.seed) + " config_hash=" + p.config_hash;
}

// ---- sweep report ----------------------------------------------------------

// {"provenance": {...}, "config": {...}, "rates": [{"rate", "median",
//  "families": [{"family_id", "srcc", "n_mutants"}], "skipped": [...]}]}
inline nlohmann::json report_to_json(const SweepReport& report, const nlohmann::json& config = nullptr,
                                     bool include_timestamp = true) {
  nlohmann::json prov{{"tool", "mcdrop"},
                      {"version", report.provenance.version},
                      {"seed", report.provenance.seed},
                      {"config_hash", report.provenance.config_hash}};
  if (include_timestamp) prov["timestamp"] = report.provenance.timestamp;

  nlohmann::json rates = nlohmann::json::array();
  for (const auto& rr : report.rates) {
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& f : rr.families)
      fams.push_back({{"family_id", f.family_id}, {"srcc", f.srcc}, {"n_mutants", f.n_mutants}});
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : rr.skipped) skipped.push_back({{"family_id", s.family_id}, {"reason", s.reason}});
    rates.push_back({{"rate", rr.rate},
                     {"median", rr.median ? nlohmann::json(*rr.median) : nlohmann::json(nullptr)},
                     {"n_families", rr.families.size()},
                     {"families", std::move(fams)},
                     {"skipped", std::move(skipped)}});
  }
  nlohmann::json out{{"provenance", std::move(prov)}, {"rates", std::move(rates)}};
  if (!config.is_null()) out["config"] = config;
  return out;
}

struct SweepCsvRow {
  double rate = 0.0;
  std::string family_id;
  double srcc = 0.0;
  std::size_t n_mutants = 0;

  friend bool operator==(const SweepCsvRow&, const SweepCsvRow&) = default;
};

inline constexpr const char* kSweepCsvHeader = "rate,family_id,srcc,n_mutants";

// One row per (rate, evaluated family); numbers use shortest round-trip form.
inline std::string report_to_csv(const SweepReport& report) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& rr : report.rates)
    for (const auto& f : rr.families)
      out += text::format_double(rr.rate) + "," + f.family_id + "," + text::format_double(f.srcc) + "," +
             std::to_string(f.n_mutants) + "\n";
  return out;
}

inline std::vector<SweepCsvRow> parse_sweep_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::size_t line_no = 0;
  std::vector<SweepCsvRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    if (line_no == 1) {
      if (text::trim(line) != kSweepCsvHeader) throw ParseError(1, "unexpected sweep CSV header");
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
    const auto rate = text::parse_double(f[0]);
    const auto srcc = text::parse_double(f[2]);
    const auto n = text::parse_double(f[3]);
    if (!rate || !srcc || !n || *n < 0 || *n != static_cast<double>(static_cast<std::size_t>(*n)))
      throw ParseError(line_no, "malformed sweep CSV row");
    rows.push_back({*rate, std::string(f[1]), *srcc, static_cast<std::size_t>(*n)});
  }
  return rows;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mcdrop
