#pragma once

// Configuration schema and file formats.
//
// Config is JSON. Every section and key is optional and defaults as listed
// in README; unknown keys are rejected with their JSON-pointer path.
// Numbers in every output file are written with 9 significant digits via
// std::to_chars, which is locale independent. Every output file carries a
// provenance header: a '#' comment line for CSV, a "provenance" object for
// JSON.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "hqrb/analysis.hpp"
#include "hqrb/device.hpp"
#include "hqrb/noise.hpp"
#include "hqrb/rb.hpp"

namespace hqrb {

// ---------------------------------------------------------------------------
// Number formatting

inline std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(what + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(what + ": cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  RbConfig rb;
  double sigma_j_neV = 0.0;  ///< as configured (1/f noise stores the matched amplitude in rb.noise)
  std::vector<double> sweep_sigma_t_ps = {10.0, 50.0, 75.0, 100.0};
  std::vector<double> sweep_sigma_j_neV = {10.0, 20.0, 30.0};
};

namespace detail {

using Json = nlohmann::json;

class ConfigReader {
 public:
  static void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ValidationError("config: " + (path.empty() ? "/" : path) + " must be an object");
    const std::set<std::string_view> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
      if (!ok.contains(k)) throw ValidationError("config: unknown key " + path + "/" + k);
    }
  }

  static std::optional<double> number(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number()) throw ValidationError("config: " + path + "/" + key + " must be a number");
    return v.get<double>();
  }

  static std::optional<std::uint64_t> count(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      throw ValidationError("config: " + path + "/" + key + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  static std::optional<std::string> string(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_string()) throw ValidationError("config: " + path + "/" + key + " must be a string");
    return v.get<std::string>();
  }

  static std::optional<std::vector<double>> numbers(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const Json& v = obj.at(key);
    if (!v.is_array()) throw ValidationError("config: " + path + "/" + key + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ValidationError("config: " + path + "/" + key + "/" + std::to_string(i) + " must be a number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }
};

inline void require(bool ok, const std::string& path, const char* what) {
  if (!ok) throw ValidationError("config: " + path + " " + what);
}

}  // namespace detail

/// Parses and validates a config document. Throws ValidationError naming
/// the offending key path.
inline RunConfig parse_run_config(const nlohmann::json& doc) {
  using detail::ConfigReader;
  using detail::require;
  RunConfig rc;
  RbConfig& c = rc.rb;
  ConfigReader::check_keys(doc, "", {"device", "noise", "rb", "model", "sweep"});

  if (doc.contains("device")) {
    const auto& d = doc.at("device");
    ConfigReader::check_keys(d, "/device", {"j_max_ueV", "e_z_ueV", "t_min_ps"});
    if (auto v = ConfigReader::number(d, "/device", "j_max_ueV")) c.device.j_max_ueV = *v;
    if (auto v = ConfigReader::number(d, "/device", "e_z_ueV")) c.device.e_z_ueV = *v;
    if (auto v = ConfigReader::number(d, "/device", "t_min_ps")) c.device.t_min_ps = *v;
    require(c.device.j_max_ueV > 0.0, "/device/j_max_ueV", "must be positive");
    require(c.device.e_z_ueV >= 0.0, "/device/e_z_ueV", "must be non-negative");
    require(c.device.t_min_ps >= 0.0, "/device/t_min_ps", "must be non-negative");
  }

  std::string noise_model = "qsg";
  double sigma_t = 0.0, sigma_j = 0.0, f_min = 50e3, f_max = 10e9;
  Resample resample = Resample::PerGate;
  if (doc.contains("noise")) {
    const auto& n = doc.at("noise");
    ConfigReader::check_keys(n, "/noise", {"model", "sigma_t_ps", "sigma_j_neV", "f_min_hz", "f_max_hz", "resample"});
    if (auto v = ConfigReader::string(n, "/noise", "model")) noise_model = *v;
    require(noise_model == "qsg" || noise_model == "one_over_f", "/noise/model", "must be \"qsg\" or \"one_over_f\"");
    if (auto v = ConfigReader::number(n, "/noise", "sigma_t_ps")) sigma_t = *v;
    if (auto v = ConfigReader::number(n, "/noise", "sigma_j_neV")) sigma_j = *v;
    if (auto v = ConfigReader::number(n, "/noise", "f_min_hz")) f_min = *v;
    if (auto v = ConfigReader::number(n, "/noise", "f_max_hz")) f_max = *v;
    if (auto v = ConfigReader::string(n, "/noise", "resample")) {
      try {
        resample = parse_resample(*v);
      } catch (const ValidationError&) {
        throw ValidationError("config: /noise/resample must be one of per_step, per_gate, per_sequence");
      }
    }
    require(sigma_t >= 0.0, "/noise/sigma_t_ps", "must be non-negative");
    require(sigma_j >= 0.0, "/noise/sigma_j_neV", "must be non-negative");
    require(f_min > 0.0, "/noise/f_min_hz", "must be positive");
    require(f_max > f_min, "/noise/f_max_hz", "must exceed f_min_hz");
  }
  rc.sigma_j_neV = sigma_j;
  if (noise_model == "qsg") {
    c.noise = QsgParams{sigma_t, sigma_j, resample};
  } else {
    auto p = OneOverFParams::matched(sigma_j, sigma_t, c.device.j_max_ueV, f_min, f_max);
    p.timing_resample = resample;
    c.noise = p;
  }

  if (doc.contains("rb")) {
    const auto& r = doc.at("rb");
    ConfigReader::check_keys(r, "/rb", {"n_grid", "n_seq", "n_rep", "interleave", "seed"});
    if (r.contains("n_grid")) {
      const auto& g = r.at("n_grid");
      require(g.is_array() && !g.empty(), "/rb/n_grid", "must be a non-empty array of integers");
      c.n_grid.clear();
      for (std::size_t i = 0; i < g.size(); ++i) {
        require(g[i].is_number_unsigned(), "/rb/n_grid/" + std::to_string(i), "must be a non-negative integer");
        c.n_grid.push_back(g[i].get<std::size_t>());
        require(i == 0 || c.n_grid[i] > c.n_grid[i - 1], "/rb/n_grid", "must be strictly increasing");
      }
    }
    if (auto v = ConfigReader::count(r, "/rb", "n_seq")) c.n_seq = *v;
    if (auto v = ConfigReader::count(r, "/rb", "n_rep")) c.n_rep = *v;
    require(c.n_seq >= 1, "/rb/n_seq", "must be >= 1");
    require(c.n_rep >= 1, "/rb/n_rep", "must be >= 1");
    if (r.contains("interleave")) {
      const auto& il = r.at("interleave");
      if (!il.is_null()) {
        require(il.is_string(), "/rb/interleave", "must be null, \"x\", \"z\" or \"h\"");
        const auto s = il.get<std::string>();
        require(s == "x" || s == "z" || s == "h", "/rb/interleave", "must be null, \"x\", \"z\" or \"h\"");
        c.interleave = parse_interleave(s);
      }
    }
    if (auto v = ConfigReader::count(r, "/rb", "seed")) c.seed = *v;
  }

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    ConfigReader::check_keys(m, "/model", {"kind", "coefficients"});
    if (auto v = ConfigReader::string(m, "/model", "kind")) {
      require(*v == "abstract_angle" || *v == "two_level_hamiltonian", "/model/kind",
              "must be \"abstract_angle\" or \"two_level_hamiltonian\"");
      c.model.kind = parse_model_kind(*v);
    }
    if (m.contains("coefficients")) {
      const auto& k = m.at("coefficients");
      ConfigReader::check_keys(k, "/model/coefficients", {"c_x", "c_e", "c_j", "c_12"});
      auto& co = c.model.coefficients;
      if (auto v = ConfigReader::number(k, "/model/coefficients", "c_x")) co.c_x = *v;
      if (auto v = ConfigReader::number(k, "/model/coefficients", "c_e")) co.c_e = *v;
      if (auto v = ConfigReader::number(k, "/model/coefficients", "c_j")) co.c_j = *v;
      if (auto v = ConfigReader::number(k, "/model/coefficients", "c_12")) co.c_12 = *v;
    }
  }

  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    ConfigReader::check_keys(s, "/sweep", {"sigma_t_ps", "sigma_j_neV"});
    if (auto v = ConfigReader::numbers(s, "/sweep", "sigma_t_ps")) rc.sweep_sigma_t_ps = *v;
    if (auto v = ConfigReader::numbers(s, "/sweep", "sigma_j_neV")) rc.sweep_sigma_j_neV = *v;
    require(!rc.sweep_sigma_t_ps.empty(), "/sweep/sigma_t_ps", "must not be empty");
    require(!rc.sweep_sigma_j_neV.empty(), "/sweep/sigma_j_neV", "must not be empty");
    for (double v : rc.sweep_sigma_t_ps) require(v >= 0.0, "/sweep/sigma_t_ps", "entries must be non-negative");
    for (double v : rc.sweep_sigma_j_neV) require(v >= 0.0, "/sweep/sigma_j_neV", "entries must be non-negative");
  }

  c.validate();
  return rc;
}

inline RunConfig parse_run_config_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_run_config(doc);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_run_config(const std::string& path) { return parse_run_config_text(read_file(path)); }

/// Canonical resolved config: every key present, keys sorted.
inline nlohmann::json resolved_config_json(const RunConfig& rc) {
  const RbConfig& c = rc.rb;
  nlohmann::json j;
  j["device"] = {{"j_max_ueV", c.device.j_max_ueV}, {"e_z_ueV", c.device.e_z_ueV}, {"t_min_ps", c.device.t_min_ps}};
  nlohmann::json noise;
  noise["model"] = noise_model_name(c.noise);
  noise["sigma_t_ps"] = noise_sigma_t_ps(c.noise);
  noise["sigma_j_neV"] = rc.sigma_j_neV;
  if (const auto* q = std::get_if<QsgParams>(&c.noise)) {
    noise["resample"] = resample_name(q->resample);
    noise["f_min_hz"] = 50e3;
    noise["f_max_hz"] = 10e9;
  } else {
    const auto& p = std::get<OneOverFParams>(c.noise);
    noise["resample"] = resample_name(p.timing_resample);
    noise["f_min_hz"] = p.f_min_hz;
    noise["f_max_hz"] = p.f_max_hz;
  }
  j["noise"] = noise;
  j["rb"] = {{"n_grid", c.n_grid},
             {"n_seq", c.n_seq},
             {"n_rep", c.n_rep},
             {"interleave", c.interleave ? nlohmann::json(interleave_name(c.interleave)) : nlohmann::json(nullptr)},
             {"seed", c.seed}};
  const auto& k = c.model.coefficients;
  j["model"] = {{"kind", model_kind_name(c.model.kind)},
                {"coefficients", {{"c_x", k.c_x}, {"c_e", k.c_e}, {"c_j", k.c_j}, {"c_12", k.c_12}}}};
  j["sweep"] = {{"sigma_t_ps", rc.sweep_sigma_t_ps}, {"sigma_j_neV", rc.sweep_sigma_j_neV}};
  return j;
}

/// 64-bit FNV-1a of the canonical resolved config, as 16 hex digits.
inline std::string config_hash(const RunConfig& rc) {
  const std::string text = resolved_config_json(rc).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline Provenance provenance_of(const RunConfig& rc) { return {config_hash(rc), rc.rb.seed}; }

inline std::string csv_header_comment(std::string_view kind, const Provenance& p) {
  return "# hqrb " + std::string(kind) + " config_hash=" + p.config_hash + " seed=" + std::to_string(p.seed) + "\n";
}

// ---------------------------------------------------------------------------
// Minimal JSON writer with 9-significant-digit numbers

class JsonWriter {
 public:
  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(std::string_view k) {
    separator();
    out_ += quote(k) + ": ";
    pending_key_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return raw(std::isfinite(v) ? fmt9(v) : "null"); }
  JsonWriter& value(bool v) { return raw(v ? "true" : "false"); }
  JsonWriter& value(std::uint64_t v) { return raw(std::to_string(v)); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(std::string_view v) { return raw(quote(v)); }
  JsonWriter& value(const char* v) { return raw(quote(v)); }
  JsonWriter& null() { return raw("null"); }

  template <class T>
  JsonWriter& field(std::string_view k, T v) {
    key(k);
    return value(v);
  }

  std::string str() const { return out_ + "\n"; }

 private:
  static std::string quote(std::string_view s) {
    std::string q = "\"";
    for (char ch : s) {
      switch (ch) {
        case '"': q += "\\\""; break;
        case '\\': q += "\\\\"; break;
        case '\n': q += "\\n"; break;
        case '\t': q += "\\t"; break;
        default:
          if (static_cast<unsigned char>(ch) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", ch);
            q += buf;
          } else {
            q += ch;
          }
      }
    }
    return q + "\"";
  }

  void newline() {
    out_ += "\n";
    out_.append(2 * first_.size(), ' ');
  }

  void separator() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (first_.empty()) return;
    if (!first_.back()) out_ += ",";
    first_.back() = false;
    newline();
  }

  JsonWriter& open(char c) {
    separator();
    out_ += c;
    first_.push_back(true);
    return *this;
  }

  JsonWriter& close(char c) {
    const bool empty = first_.back();
    first_.pop_back();
    if (!empty) newline();
    out_ += c;
    return *this;
  }

  JsonWriter& raw(const std::string& s) {
    separator();
    out_ += s;
    return *this;
  }

  std::string out_;
  std::vector<bool> first_;
  bool pending_key_ = false;
};

namespace detail {

inline void write_provenance(JsonWriter& w, const Provenance& p) {
  w.key("provenance").begin_object();
  w.field("config_hash", std::string_view(p.config_hash));
  w.field("seed", p.seed);
  w.end_object();
}

inline void write_fit_fields(JsonWriter& w, const FitResult& f) {
  w.field("f_a", f.f_a).field("f_b", f.f_b).field("p", f.p);
  w.field("se_f_a", f.se_f_a).field("se_f_b", f.se_f_b).field("se_p", f.se_p);
  w.field("epc", f.epc).field("se_epc", f.se_epc);
  w.field("converged", f.converged);
  w.field("at_boundary", f.at_boundary);
  w.field("f_a_at_bound", f.f_a_at_bound);
  w.field("residual_norm", f.residual_norm);
  w.field("uncertainty_method", "linearized_covariance");
}

}  // namespace detail

inline std::string fit_json(const FitResult& f, const Provenance& p) {
  JsonWriter w;
  w.begin_object();
  detail::write_provenance(w, p);
  detail::write_fit_fields(w, f);
  w.end_object();
  return w.str();
}

/// Reference-curve fit plus the interleaved-gate analysis.
inline std::string irb_json(const FitResult& reference, const FitResult& interleaved, std::string_view gate,
                            const Provenance& p) {
  const IrbResult r = interleaved_analysis(reference, interleaved);
  JsonWriter w;
  w.begin_object();
  detail::write_provenance(w, p);
  detail::write_fit_fields(w, reference);
  w.field("gate", gate);
  w.field("p_i", r.p_i).field("se_p_i", r.se_p_i);
  w.field("eps", r.eps).field("se_eps", r.se_eps).field("eps_raw", r.eps_raw);
  w.field("bound_e", r.bound_e);
  w.key("interval").begin_array().value(r.interval[0]).value(r.interval[1]).end_array();
  w.field("interleaved_converged", interleaved.converged);
  w.end_object();
  return w.str();
}

// ---------------------------------------------------------------------------
// Decay CSV

inline constexpr std::string_view kDecayHeader = "model,interleave,sigma_t_ps,sigma_j_neV,N,mean_fidelity,std_error,samples";

struct DecayRecord {
  std::string model;
  std::string interleave = "none";
  double sigma_t_ps = 0.0;
  double sigma_j_neV = 0.0;
  DecayPoint point;
};

struct DecayTable {
  Provenance provenance;
  std::vector<DecayRecord> rows;

  /// Rows for one interleave label, in file order.
  DecayCurve curve(std::string_view interleave) const {
    DecayCurve c;
    for (const auto& r : rows)
      if (r.interleave == interleave) c.points.push_back(r.point);
    return c;
  }

  std::vector<std::string> interleave_labels() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (std::find(out.begin(), out.end(), r.interleave) == out.end()) out.push_back(r.interleave);
    return out;
  }
};

inline std::string decay_rows(const RbConfig& c, const DecayCurve& curve) {
  std::string s;
  for (const auto& p : curve.points) {
    s += std::string(noise_model_name(c.noise)) + "," + interleave_name(c.interleave) + "," +
         fmt9(noise_sigma_t_ps(c.noise)) + "," + fmt9(noise_sigma_j_neV(c.noise)) + "," + std::to_string(p.n) + "," +
         fmt9(p.mean_fidelity) + "," + fmt9(p.std_error) + "," + std::to_string(p.samples) + "\n";
  }
  return s;
}

inline std::string decay_csv_header(const Provenance& p) {
  return csv_header_comment("decay", p) + std::string(kDecayHeader) + "\n";
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

inline void parse_provenance_comment(std::string_view line, Provenance& p) {
  for (auto tok : split(line, ' ')) {
    if (tok.starts_with("config_hash=")) p.config_hash = std::string(tok.substr(12));
    if (tok.starts_with("seed=")) p.seed = parse_u64(tok.substr(5), "decay csv seed");
  }
}

}  // namespace detail

inline DecayTable parse_decay_csv(std::string_view text) {
  DecayTable t;
  bool header_seen = false;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      detail::parse_provenance_comment(line, t.provenance);
      continue;
    }
    const std::string where = "decay csv line " + std::to_string(line_no);
    if (!header_seen) {
      if (line != kDecayHeader) throw ValidationError(where + ": expected header '" + std::string(kDecayHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 8) throw ValidationError(where + ": expected 8 fields");
    DecayRecord r;
    r.model = std::string(f[0]);
    r.interleave = std::string(f[1]);
    r.sigma_t_ps = parse_double(f[2], where);
    r.sigma_j_neV = parse_double(f[3], where);
    r.point.n = static_cast<std::size_t>(parse_u64(f[4], where));
    r.point.mean_fidelity = parse_double(f[5], where);
    r.point.std_error = parse_double(f[6], where);
    r.point.samples = static_cast<std::size_t>(parse_u64(f[7], where));
    t.rows.push_back(r);
  }
  if (!header_seen) throw ValidationError("decay csv: missing header");
  if (t.rows.empty()) throw ValidationError("decay csv: no data rows");
  return t;
}

// ---------------------------------------------------------------------------
// Sweep table, noise traces, calibration report

inline constexpr std::string_view kSweepHeader =
    "model,sigma_t_ps,sigma_j_neV,f_a,f_b,p,se_f_a,se_f_b,se_p,epc,se_epc,converged,clamped_steps,status";

inline std::string sweep_csv(const std::vector<SweepRow>& rows, const Provenance& p) {
  std::string s = csv_header_comment("sweep", p) + std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    s += r.model + "," + fmt9(r.sigma_t_ps) + "," + fmt9(r.sigma_j_neV) + "," + fmt9(r.fit.f_a) + "," +
         fmt9(r.fit.f_b) + "," + fmt9(r.fit.p) + "," + fmt9(r.fit.se_f_a) + "," + fmt9(r.fit.se_f_b) + "," +
         fmt9(r.fit.se_p) + "," + fmt9(r.fit.epc) + "," + fmt9(r.fit.se_epc) + "," +
         (r.fit.converged ? "true" : "false") + "," + std::to_string(r.clamped_steps) + "," + status + "\n";
  }
  return s;
}

inline std::string trace_csv(std::span<const double> trace, double t0_ns, const Provenance& p) {
  std::string s = csv_header_comment("noise_trace", p) + "t_ns,value_neV\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    s += fmt9(static_cast<double>(i) * t0_ns) + "," + fmt9(trace[i]) + "\n";
  }
  return s;
}

inline std::string psd_csv(std::span<const PsdBin> bins, const Provenance& p) {
  std::string s = csv_header_comment("periodogram", p) + "f_hz,psd\n";
  for (const auto& b : bins) s += fmt9(b.f_hz) + "," + fmt9(b.psd) + "\n";
  return s;
}

inline std::string calibration_json(const CalibrationReport& r, const DeviceParams& dp, const Provenance& p) {
  JsonWriter w;
  w.begin_object();
  detail::write_provenance(w, p);
  w.field("model", std::string_view(r.model));
  w.key("device").begin_object();
  w.field("j_max_ueV", dp.j_max_ueV).field("e_z_ueV", dp.e_z_ueV).field("t_min_ps", dp.t_min_ps);
  w.end_object();
  w.key("exactness").begin_object();
  w.field("grid_size", static_cast<std::uint64_t>(r.grid_size));
  w.field("initial_max_infidelity", r.initial_max_infidelity);
  w.field("max_infidelity", r.max_infidelity);
  w.field("threshold", kCertificationThreshold);
  w.field("certified", r.certified);
  w.field("converged", r.converged);
  w.field("iterations", r.iterations);
  w.field("status", std::string_view(r.status));
  w.field("e_z_ueV", r.e_z_ueV);
  w.key("coefficients").begin_object();
  w.field("c_x", r.coefficients.c_x).field("c_e", r.coefficients.c_e);
  w.field("c_j", r.coefficients.c_j).field("c_12", r.coefficients.c_12);
  w.end_object();
  w.end_object();
  w.key("gate_times").begin_object();
  w.field("best_fit_e_z_ueV", r.table_e_z_ueV);
  w.field("rms_residual_ns", r.table_rms_residual_ns);
  w.field("converged", r.table_converged);
  w.key("rows").begin_array();
  for (const auto& row : r.rows) {
    w.begin_object();
    w.field("gate", std::string_view(row.gate));
    w.field("reference_ns", row.reference_ns).field("model_ns", row.model_ns).field("residual_ns", row.residual_ns);
    w.field("fitted", row.fitted);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  w.key("constraints").begin_object();
  w.field("j_only_required_ueV", r.j_only_required_ueV);
  w.field("j_only_model_ueV", r.j_only_model_ueV);
  w.field("j_only_phase_error_rad", r.j_only_phase_error);
  w.field("j_only_satisfied", r.j_only_satisfied);
  w.field("c_x_required", r.c_x_required);
  w.field("imbalance_slope_rad_per_ns", r.imbalance_slope_rad_per_ns);
  w.field("imbalance_satisfied", r.imbalance_satisfied);
  w.field("rz_discontinuity_ns", r.rz_discontinuity_ns);
  w.end_object();
  w.end_object();
  return w.str();
}

/// Structural check of a calibration report. Returns an empty string when
/// valid, otherwise the first problem found.
inline std::string validate_calibration_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return std::string("not JSON: ") + e.what();
  }
  auto need = [&](const nlohmann::json& obj, const char* path, const char* key, auto pred) -> std::string {
    if (!obj.is_object() || !obj.contains(key)) return std::string("missing ") + path + "/" + key;
    if (!pred(obj.at(key))) return std::string("wrong type at ") + path + "/" + key;
    return {};
  };
  auto num = [](const nlohmann::json& v) { return v.is_number(); };
  auto boolean = [](const nlohmann::json& v) { return v.is_boolean(); };
  auto str = [](const nlohmann::json& v) { return v.is_string(); };
  auto obj = [](const nlohmann::json& v) { return v.is_object(); };
  std::string e;
  for (const char* k : {"provenance", "device", "exactness", "gate_times", "constraints"})
    if (!(e = need(j, "", k, obj)).empty()) return e;
  if (!(e = need(j, "", "model", str)).empty()) return e;
  if (!(e = need(j["provenance"], "/provenance", "config_hash", str)).empty()) return e;
  if (!(e = need(j["provenance"], "/provenance", "seed", num)).empty()) return e;
  for (const char* k : {"max_infidelity", "threshold", "e_z_ueV", "grid_size"})
    if (!(e = need(j["exactness"], "/exactness", k, num)).empty()) return e;
  for (const char* k : {"certified", "converged"})
    if (!(e = need(j["exactness"], "/exactness", k, boolean)).empty()) return e;
  if (!(e = need(j["exactness"], "/exactness", "status", str)).empty()) return e;
  const auto& gt = j["gate_times"];
  if (!(e = need(gt, "/gate_times", "best_fit_e_z_ueV", num)).empty()) return e;
  if (!(e = need(gt, "/gate_times", "rms_residual_ns", num)).empty()) return e;
  if (!(e = need(gt, "/gate_times", "rows", [](const nlohmann::json& v) { return v.is_array() && !v.empty(); }))
           .empty())
    return e;
  for (const auto& row : gt["rows"]) {
    if (!(e = need(row, "/gate_times/rows", "gate", str)).empty()) return e;
    for (const char* k : {"reference_ns", "model_ns", "residual_ns"})
      if (!(e = need(row, "/gate_times/rows", k, num)).empty()) return e;
  }
  for (const char* k : {"j_only_required_ueV", "j_only_model_ueV", "rz_discontinuity_ns", "imbalance_slope_rad_per_ns"})
    if (!(e = need(j["constraints"], "/constraints", k, num)).empty()) return e;
  for (const char* k : {"j_only_satisfied", "imbalance_satisfied"})
    if (!(e = need(j["constraints"], "/constraints", k, boolean)).empty()) return e;
  return {};
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace hqrb
