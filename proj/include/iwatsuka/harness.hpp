#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "iwatsuka/bands.hpp"
#include "iwatsuka/evolve2d.hpp"
#include "iwatsuka/landau.hpp"
#include "iwatsuka/ledger.hpp"
#include "iwatsuka/parallel.hpp"
#include "iwatsuka/profiles.hpp"
#include "iwatsuka/report.hpp"
#include "iwatsuka/wavepacket.hpp"

namespace iwatsuka::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ProfileSpec {
  ProfileKind kind = ProfileKind::Sharp;
  double b_minus = 1.0;
  double b_plus = 1.5;
  double epsilon = 0.0;

  FieldProfile make() const { return FieldProfile::make(kind, b_minus, b_plus, epsilon); }
};

struct WindowSpec {
  int j = 1;
  double delta = 0.1;
};

struct LocalizationSpec {
  double b_minus = 16.0;  // the run uses b_+ = r b_-
  double eps1 = 1.0;
  double eps2 = 0.25;
  std::vector<std::array<double, 2>> probes = {{0.5, 0.125}, {0.5, 0.25}, {1.0, 0.125}, {1.0, 0.25}};
  std::vector<double> threshold_scan = {16.0, 32.0, 64.0, 128.0, 256.0, 512.0};
  EnvelopeKind envelope = EnvelopeKind::Indicator;
  std::size_t packet_nodes = 64;
};

struct SmoothSpec {
  std::vector<ProfileKind> kinds = {ProfileKind::SmoothLinear, ProfileKind::SmoothCubic};
  std::vector<double> epsilons = {0.01, 0.05, 0.1};
};

struct EvolutionSpec {
  std::size_t nx = 384;
  std::size_t ny = 1536;
  double length_y = 64.0;
  double dt = 2e-3;
  double t_final = 5.0;
  std::size_t sample_every = 50;
  std::size_t snapshot_every = 0;
  EnvelopeKind envelope = EnvelopeKind::Hann;
};

// Short run under a perturbation of the admissible size for the perturbed
// current bound.
struct PerturbedRunSpec {
  std::size_t nx = 192;
  std::size_t ny = 512;
  double length_y = 64.0;
  double dt = 0.02;
  double t_final = 10.0;
  std::size_t sample_every = 25;
  double support_halfwidth = 2.0;
};

struct ProbeSpec {
  double a2_fraction = 0.5;       // sup|a_2| in units of the admissible a_* b_-^{1/2}
  double support_halfwidth = 1.0;
  double stress_factor = 0.0;     // > 0 adds a recorded run at this multiple of the admissible size
  ProbeRequest request;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ProfileSpec profile;
  int j_max = 3;
  std::size_t k_points = 512;
  std::optional<double> k_extent;  // default: 8 b_+^{1/2} (2 j_max - 1)^{1/2}
  double spacing = 0.003;
  double margin_widths = 8.0;
  std::vector<WindowSpec> windows = {WindowSpec{}};
  bool figure_mode = false;
  std::vector<double> scaling_b_minus = {1.0, 4.0, 16.0};
  std::vector<EnvelopeKind> envelopes = {EnvelopeKind::Indicator, EnvelopeKind::Gaussian, EnvelopeKind::Hann};
  std::size_t packet_nodes = 256;
  double transport_t_max = 10.0;
  LocalizationSpec localization;
  SmoothSpec smooth;
  EvolutionSpec evolution;
  PerturbedRunSpec perturbed_run;
  ProbeSpec probe;
  std::optional<std::vector<std::string>> checks;  // absent: every check
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int threads = 0;
};

namespace detail {

// Typed access to one JSON object that rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    if (j_.contains(key)) f(j_.at(key), where_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline EnvelopeKind envelope_from(const json& j, const std::string& where) {
  try {
    return envelope_kind_from_string(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline ProfileKind profile_kind_from(const json& j, const std::string& where) {
  try {
    return profile_kind_from_string(j.get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::Reader r(j, "config");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  r.with("profile", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    p.with("kind", [&](const json& k, const std::string& ww) { c.profile.kind = detail::profile_kind_from(k, ww); });
    p.get("b_minus", c.profile.b_minus);
    p.get("b_plus", c.profile.b_plus);
    p.get("epsilon", c.profile.epsilon);
    p.finish();
  });
  r.get("j_max", c.j_max);
  r.with("k_grid", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    p.get("points", c.k_points);
    p.with("extent", [&](const json& e, const std::string&) {
      if (!e.is_null()) c.k_extent = e.get<double>();
    });
    p.finish();
  });
  r.get("spacing", c.spacing);
  r.get("margin_widths", c.margin_widths);
  r.with("windows", [&](const json& v, const std::string& w) {
    if (!v.is_array()) throw ConfigError(w + ": expected an array");
    c.windows.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      detail::Reader p(v[i], w + "[" + std::to_string(i) + "]");
      WindowSpec s;
      p.get("j", s.j);
      p.get("delta", s.delta);
      p.finish();
      c.windows.push_back(s);
    }
  });
  r.get("figure_mode", c.figure_mode);
  r.get("scaling_b_minus", c.scaling_b_minus);
  r.with("envelopes", [&](const json& v, const std::string& w) {
    if (!v.is_array()) throw ConfigError(w + ": expected an array");
    c.envelopes.clear();
    for (const auto& e : v) c.envelopes.push_back(detail::envelope_from(e, w));
  });
  r.get("packet_nodes", c.packet_nodes);
  r.get("transport_t_max", c.transport_t_max);
  r.with("localization", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    auto& l = c.localization;
    p.get("b_minus", l.b_minus);
    p.get("eps1", l.eps1);
    p.get("eps2", l.eps2);
    p.get("probes", l.probes);
    p.get("threshold_scan", l.threshold_scan);
    p.with("envelope", [&](const json& e, const std::string& ww) { l.envelope = detail::envelope_from(e, ww); });
    p.get("packet_nodes", l.packet_nodes);
    p.finish();
  });
  r.with("smooth", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    p.with("kinds", [&](const json& ks, const std::string& ww) {
      if (!ks.is_array()) throw ConfigError(ww + ": expected an array");
      c.smooth.kinds.clear();
      for (const auto& k : ks) c.smooth.kinds.push_back(detail::profile_kind_from(k, ww));
    });
    p.get("epsilons", c.smooth.epsilons);
    p.finish();
  });
  r.with("evolution", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    auto& e = c.evolution;
    p.get("nx", e.nx);
    p.get("ny", e.ny);
    p.get("length_y", e.length_y);
    p.get("dt", e.dt);
    p.get("t_final", e.t_final);
    p.get("sample_every", e.sample_every);
    p.get("snapshot_every", e.snapshot_every);
    p.with("envelope", [&](const json& x, const std::string& ww) { e.envelope = detail::envelope_from(x, ww); });
    p.finish();
  });
  r.with("perturbed_run", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    auto& e = c.perturbed_run;
    p.get("nx", e.nx);
    p.get("ny", e.ny);
    p.get("length_y", e.length_y);
    p.get("dt", e.dt);
    p.get("t_final", e.t_final);
    p.get("sample_every", e.sample_every);
    p.get("support_halfwidth", e.support_halfwidth);
    p.finish();
  });
  r.with("probe", [&](const json& v, const std::string& w) {
    detail::Reader p(v, w);
    auto& e = c.probe;
    auto& q = e.request;
    p.get("a2_fraction", e.a2_fraction);
    p.get("support_halfwidth", e.support_halfwidth);
    p.get("stress_factor", e.stress_factor);
    p.with("envelope", [&](const json& x, const std::string& ww) { q.kind = detail::envelope_from(x, ww); });
    p.get("nx", q.nx);
    p.get("ny", q.ny);
    p.get("length_y", q.length_y);
    p.get("dt", q.dt);
    p.get("t_final", q.t_final);
    p.get("launch_gap", q.launch_gap);
    p.get("sample_every", q.sample_every);
    p.get("late_fraction", q.late_fraction);
    p.get("velocity_slack", q.velocity_slack);
    p.finish();
  });
  r.with("checks", [&](const json& v, const std::string& w) {
    if (!v.is_array()) throw ConfigError(w + ": expected an array");
    c.checks = v.get<std::vector<std::string>>();
  });
  r.get("output_dir", c.output_dir);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.finish();
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["profile"] = {{"kind", to_string(c.profile.kind)},
                  {"b_minus", c.profile.b_minus},
                  {"b_plus", c.profile.b_plus},
                  {"epsilon", c.profile.epsilon}};
  j["j_max"] = c.j_max;
  j["k_grid"] = {{"points", c.k_points}, {"extent", c.k_extent ? json(*c.k_extent) : json(nullptr)}};
  j["spacing"] = c.spacing;
  j["margin_widths"] = c.margin_widths;
  j["windows"] = json::array();
  for (const auto& w : c.windows) j["windows"].push_back({{"j", w.j}, {"delta", w.delta}});
  j["figure_mode"] = c.figure_mode;
  j["scaling_b_minus"] = c.scaling_b_minus;
  j["envelopes"] = json::array();
  for (auto e : c.envelopes) j["envelopes"].push_back(to_string(e));
  j["packet_nodes"] = c.packet_nodes;
  j["transport_t_max"] = c.transport_t_max;
  const auto& l = c.localization;
  j["localization"] = {{"b_minus", l.b_minus},       {"eps1", l.eps1},
                       {"eps2", l.eps2},             {"probes", l.probes},
                       {"threshold_scan", l.threshold_scan}, {"envelope", to_string(l.envelope)},
                       {"packet_nodes", l.packet_nodes}};
  j["smooth"]["kinds"] = json::array();
  for (auto k : c.smooth.kinds) j["smooth"]["kinds"].push_back(to_string(k));
  j["smooth"]["epsilons"] = c.smooth.epsilons;
  const auto& e = c.evolution;
  j["evolution"] = {{"nx", e.nx}, {"ny", e.ny}, {"length_y", e.length_y}, {"dt", e.dt}, {"t_final", e.t_final},
                    {"sample_every", e.sample_every}, {"snapshot_every", e.snapshot_every},
                    {"envelope", to_string(e.envelope)}};
  const auto& pr = c.perturbed_run;
  j["perturbed_run"] = {{"nx", pr.nx}, {"ny", pr.ny}, {"length_y", pr.length_y}, {"dt", pr.dt},
                        {"t_final", pr.t_final}, {"sample_every", pr.sample_every},
                        {"support_halfwidth", pr.support_halfwidth}};
  const auto& q = c.probe.request;
  j["probe"] = {{"a2_fraction", c.probe.a2_fraction}, {"support_halfwidth", c.probe.support_halfwidth},
                {"stress_factor", c.probe.stress_factor}, {"envelope", to_string(q.kind)},
                {"nx", q.nx}, {"ny", q.ny}, {"length_y", q.length_y}, {"dt", q.dt}, {"t_final", q.t_final},
                {"launch_gap", q.launch_gap}, {"sample_every", q.sample_every},
                {"late_fraction", q.late_fraction}, {"velocity_slack", q.velocity_slack}};
  if (c.checks) j["checks"] = *c.checks;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

// Structural checks that do not need any band computation.
inline void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  FieldProfile p;
  try {
    p = c.profile.make();
  } catch (const ParameterError& e) {
    fail(std::string("profile: ") + e.what());
  }
  if (c.j_max < 1 || c.j_max > 8) fail("j_max must lie in [1, 8]");
  if (c.k_points < 16) fail("k_grid.points must be >= 16");
  if (c.k_extent && !(*c.k_extent > 0.0)) fail("k_grid.extent must be positive");
  if (!(c.spacing > 0.0 && c.spacing <= 0.2)) fail("spacing must lie in (0, 0.2]");
  if (c.margin_widths < 6.0) fail("margin_widths must be >= 6");
  if (c.packet_nodes < 8) fail("packet_nodes must be >= 8");
  if (c.envelopes.empty()) fail("envelopes must not be empty");
  if (!c.figure_mode) {
    for (const auto& w : c.windows) {
      if (p.kind() != ProfileKind::Sharp) fail("windows need a sharp profile (or figure_mode)");
      const double r = p.ratio();
      int n = 0;
      try {
        n = admissible_n(r);
      } catch (const ParameterError&) {
        fail("ratio b_+/b_- = " + std::to_string(r) + " admits no window; use figure_mode for band data only");
      }
      if (w.j < 1 || w.j > n) fail("window level " + std::to_string(w.j) + " exceeds the admissible count");
      if (w.j > c.j_max) fail("window level exceeds j_max");
      if (!(w.delta > 0.0 && w.delta < delta_cap(w.j, r))) fail("window delta outside its admissible range");
    }
  }
  const auto& l = c.localization;
  if (!(l.b_minus > 0.0) || !(l.eps1 > 0.0) || !(l.eps2 > 0.0 && l.eps2 < 0.5))
    fail("localization parameters out of range");
  for (const auto& pr : l.probes)
    if (!(pr[0] > 0.0) || !(pr[1] > 0.0 && pr[1] < 0.5)) fail("localization probe out of range");
  for (double b : l.threshold_scan)
    if (!(b > 0.0)) fail("threshold_scan entries must be positive");
  for (double b : c.scaling_b_minus)
    if (!(b > 0.0)) fail("scaling_b_minus entries must be positive");
  for (auto k : c.smooth.kinds)
    if (k != ProfileKind::SmoothLinear && k != ProfileKind::SmoothCubic) fail("smooth.kinds must be ramp kinds");
  for (double e : c.smooth.epsilons)
    if (!(e > 0.0 && e < 1.0 / std::sqrt(c.profile.b_minus))) fail("smooth epsilon must lie in (0, b_-^{-1/2})");
  const auto& ev = c.evolution;
  if (ev.nx < 16 || ev.ny < 16 || !(ev.dt > 0.0) || !(ev.t_final > 0.0) || ev.sample_every == 0 || !(ev.length_y > 0.0))
    fail("evolution parameters out of range");
  const auto& pr = c.perturbed_run;
  if (pr.nx < 16 || pr.ny < 16 || !(pr.dt > 0.0) || !(pr.t_final > 0.0) || pr.sample_every == 0 ||
      !(pr.support_halfwidth > 0.0))
    fail("perturbed_run parameters out of range");
  const auto& q = c.probe;
  if (!(q.a2_fraction >= 0.0) || !(q.support_halfwidth > 0.0) || q.stress_factor < 0.0 || q.request.sample_every == 0 ||
      !(q.request.late_fraction > 0.0 && q.request.late_fraction <= 1.0))
    fail("probe parameters out of range");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  auto c = config_from_json(j);
  validate_config(c);
  return c;
}

// Lazily computed shared data of a run. Every accessor caches its result so
// that checks and artifact writers see the same numbers.
class RunContext {
 public:
  explicit RunContext(RunConfig c) : cfg_(std::move(c)), profile_(cfg_.profile.make()) {}

  const RunConfig& config() const { return cfg_; }
  const FieldProfile& profile() const { return profile_; }

  BandOptions band_options() const {
    BandOptions o;
    o.fiber.spacing = cfg_.spacing;
    o.fiber.margin_widths = cfg_.margin_widths;
    return o;
  }

  std::vector<double> k_grid_for(const FieldProfile& p) const {
    const double K = cfg_.k_extent ? *cfg_.k_extent : default_k_extent(p, cfg_.j_max);
    return uniform_grid(-K, K, cfg_.k_points);
  }

  bool has_main_table() const { return main_.has_value(); }
  const BandTable& main_table() {
    if (!main_) main_ = compute_bands(profile_, k_grid_for(profile_), cfg_.j_max, band_options());
    return *main_;
  }

  const DerivativeBoundConstants& constants() {
    if (!constants_) {
      int jm = cfg_.j_max;
      for (const auto& w : cfg_.windows) jm = std::max(jm, w.j);
      constants_ = derivative_bound_constants(std::min(jm, 8));
    }
    return *constants_;
  }

  std::optional<std::string> window_skip_reason() const {
    if (cfg_.figure_mode) {
      std::ostringstream os;
      os << "figure mode: r = " << profile_.ratio() << (profile_.ratio() > std::sqrt(3.0) ? " exceeds sqrt(3)" : "")
         << "; window checks skipped, band data only";
      return os.str();
    }
    if (cfg_.windows.empty()) return "no spectral window configured";
    if (profile_.kind() != ProfileKind::Sharp) return "spectral windows need a sharp profile";
    return std::nullopt;
  }

  const std::vector<SpectralWindow>& windows() {
    if (!windows_) {
      std::vector<SpectralWindow> ws;
      const auto& t = main_table();
      for (const auto& s : cfg_.windows)
        ws.push_back(make_window_unchecked(profile_, band_options(), s.j, s.delta, t.k.front(), t.k.back()));
      windows_ = std::move(ws);
    }
    return *windows_;
  }

  // Dense table over the closed preimage of window i, with eigenvectors.
  const BandTable& preimage_table(std::size_t i) {
    auto it = preimage_.find(i);
    if (it != preimage_.end()) return it->second;
    const auto& w = windows().at(i);
    BandOptions o = band_options();
    o.keep_vectors = true;
    return preimage_.emplace(i, compute_bands(profile_, uniform_grid(w.k_lo, w.k_hi, 129), w.j, o)).first->second;
  }

  bool has_packets() const { return !packets_.empty(); }
  const std::vector<WavePacket>& packets(std::size_t i) {
    auto it = packets_.find(i);
    if (it != packets_.end()) return it->second;
    std::vector<WavePacket> ps;
    for (auto kind : cfg_.envelopes) ps.push_back(build_packet(windows().at(i), kind, cfg_.packet_nodes));
    return packets_.emplace(i, std::move(ps)).first->second;
  }

  const VelocityWindow& velocity(std::size_t i) {
    auto it = velocity_.find(i);
    if (it != velocity_.end()) return it->second;
    return velocity_.emplace(i, velocity_window(windows().at(i))).first->second;
  }

  // Sharp table with the main b_+- on the main k grid.
  const BandTable& sharp_reference() {
    if (profile_.kind() == ProfileKind::Sharp) return main_table();
    if (!sharp_ref_) {
      const auto p = FieldProfile::sharp(profile_.b_minus(), profile_.b_plus());
      sharp_ref_ = compute_bands(p, k_grid_for(profile_), cfg_.j_max, band_options());
    }
    return *sharp_ref_;
  }

  const BandTable& smooth_table(ProfileKind kind, double eps) {
    const auto key = std::make_pair(static_cast<int>(kind), eps);
    auto it = smooth_.find(key);
    if (it != smooth_.end()) return it->second;
    const auto p = FieldProfile::make(kind, profile_.b_minus(), profile_.b_plus(), eps);
    return smooth_.emplace(key, compute_bands(p, k_grid_for(profile_), cfg_.j_max, band_options())).first->second;
  }

  struct Localization {
    SpectralWindow window;
    WavePacket packet;
  };
  const Localization& localization_at(double b_minus) {
    auto it = localization_.find(b_minus);
    if (it != localization_.end()) return it->second;
    const auto& spec = cfg_.windows.front();
    const auto p = FieldProfile::sharp(b_minus, profile_.ratio() * b_minus);
    const double s = std::sqrt(b_minus);
    auto w = make_window_unchecked(p, band_options(), spec.j, spec.delta, -s, s);
    auto pk = build_packet(w, cfg_.localization.envelope, cfg_.localization.packet_nodes);
    return localization_.emplace(b_minus, Localization{w, std::move(pk)}).first->second;
  }

  // Series produced by the evolution checks, kept for the CSV writers.
  std::optional<EvolutionRun> oracle_run;
  std::vector<double> oracle_y;
  std::optional<ProbeReport> probe_run;
  std::optional<ProbeReport> stress_run;
  std::optional<EvolutionRun> perturbed_run;
  std::filesystem::path out_dir;

 private:
  RunConfig cfg_;
  FieldProfile profile_;
  std::optional<BandTable> main_;
  std::optional<DerivativeBoundConstants> constants_;
  std::optional<std::vector<SpectralWindow>> windows_;
  std::map<std::size_t, BandTable> preimage_;
  std::map<std::size_t, std::vector<WavePacket>> packets_;
  std::map<std::size_t, VelocityWindow> velocity_;
  std::optional<BandTable> sharp_ref_;
  std::map<std::pair<int, double>, BandTable> smooth_;
  std::map<double, Localization> localization_;
};

namespace detail {

inline CheckReport skipped(const std::string& why) {
  CheckReport r;
  r.status = CheckStatus::Skipped;
  r.ratio = NAN;
  r.note = why;
  return r;
}

// One report from several: the worst status wins and the witness numbers are
// taken from the entry with the smallest ratio.
inline CheckReport combine(const std::vector<CheckReport>& rs) {
  if (rs.empty()) return skipped("nothing to check");
  auto rank = [](CheckStatus s) {
    switch (s) {
      case CheckStatus::Fail: return 4;
      case CheckStatus::Pass: return 3;
      case CheckStatus::Vacuous: return 2;
      case CheckStatus::Recorded: return 1;
      case CheckStatus::Skipped: return 0;
    }
    return 0;
  };
  CheckReport out = rs.front();
  std::size_t worst = 0;
  for (std::size_t i = 1; i < rs.size(); ++i) {
    if (rank(rs[i].status) > rank(out.status)) out.status = rs[i].status;
    const double a = rs[i].ratio, b = rs[worst].ratio;
    if (rs[i].status == CheckStatus::Fail && rs[worst].status != CheckStatus::Fail) worst = i;
    else if ((rs[i].status == CheckStatus::Fail) == (rs[worst].status == CheckStatus::Fail) && !std::isnan(a) &&
             (std::isnan(b) || a < b))
      worst = i;
  }
  out.observed = rs[worst].observed;
  out.bound = rs[worst].bound;
  out.ratio = rs[worst].ratio;
  std::ostringstream os;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (i) os << "; ";
    os << to_string(rs[i].status) << " " << rs[i].note;
  }
  out.note = os.str();
  return out;
}

inline CheckReport bounded(double observed, double bound, const std::string& note) {
  CheckReport r;
  r.observed = observed;
  r.bound = bound;
  r.ratio = bound / observed;
  r.status = observed <= bound ? CheckStatus::Pass : CheckStatus::Fail;
  r.note = note;
  return r;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------- checks

namespace checks {

inline CheckReport landau_flat(RunContext& ctx) {
  const auto& c = ctx.config();
  const double b = c.profile.b_minus;
  const auto p = FieldProfile::constant(b);
  const auto t = compute_bands(p, ctx.k_grid_for(p), c.j_max, ctx.band_options());
  double dev = 0.0, slope = 0.0;
  for (int j = 1; j <= t.j_max; ++j)
    for (std::size_t ik = 0; ik < t.size(); ++ik) {
      dev = std::max(dev, std::abs(t.omega(j, ik) - (2.0 * j - 1.0) * b));
      slope = std::max(slope, std::abs(t.mode(j, ik).fh));
    }
  std::ostringstream os;
  os << "constant b=" << b << ", " << t.size() << " k samples, max |omega'| = " << slope;
  return detail::bounded(dev, 1e-5 * b, os.str());
}

// V_- <= V(., k) <= V_+(., r k) for k <= 0 and r^2 V(., k) >= V_+(., k) for
// k >= 0 on the nodes of the fiber grid.
inline CheckReport ev_bounds_potential(RunContext& ctx) {
  const auto& p = ctx.profile();
  if (p.kind() != ProfileKind::Sharp) return detail::skipped("potential comparison is stated for the sharp edge");
  const double bm = p.b_minus(), bp = p.b_plus(), r = p.ratio();
  const auto ks = ctx.k_grid_for(p);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t ik = 0; ik < ks.size(); ik += 8) {
    const double k = ks[ik];
    const auto g = select_domain(p, k, ctx.config().j_max, ctx.band_options().fiber);
    for (std::size_t i = 0; i < g.n; i += 16) {
      const double x = g.x(i);
      const double v = fiber_potential(p, k, x);
      const double scale = 1e-12 * std::max(1.0, v);
      if (k <= 0.0) {
        const double vm = (k - bm * x) * (k - bm * x);
        const double vp = (r * k - bp * x) * (r * k - bp * x);
        worst = std::min({worst, (v - vm) / scale, (vp - v) / scale});
      } else {
        const double vp = (k - bp * x) * (k - bp * x);
        worst = std::min(worst, (r * r * v - vp) / scale);
      }
      ++count;
    }
  }
  CheckReport rep;
  rep.observed = worst;
  rep.bound = -1.0;
  rep.ratio = NAN;
  rep.status = worst >= -1.0 ? CheckStatus::Pass : CheckStatus::Fail;
  rep.note = std::to_string(count) + " (x, k) samples; observed = min slack in units of 1e-12 max(1, V)";
  return rep;
}

inline CheckReport sandwich(RunContext& ctx) {
  auto r = check_sandwich(ctx.main_table(), 1e-4);
  r.note += " (" + profile_id(ctx.profile()) + ")";
  return r;
}

inline CheckReport monotone(RunContext& ctx) { return check_monotone(ctx.main_table()); }

inline CheckReport band_limits(RunContext& ctx) { return check_band_limits(ctx.main_table(), 1e-3); }

// Alternative derivative routes against Feynman-Hellmann on the whole table,
// plus centred finite differences of fresh solves at seeded random samples.
inline CheckReport derivative_crosscheck(RunContext& ctx) {
  const auto& t = ctx.main_table();
  if (t.profile.kind() == ProfileKind::Constant) return detail::skipped("flat bands for a constant field");
  std::vector<CheckReport> rs;
  std::mt19937_64 rng(ctx.config().seed);
  for (int j = 1; j <= t.j_max; ++j) {
    auto r = check_derivative_routes(t, j, 1e-3, 1e-4);
    double peak = 0.0;
    for (std::size_t ik = 0; ik < t.size(); ++ik) peak = std::max(peak, t.mode(j, ik).fh);
    std::vector<std::size_t> active;
    for (std::size_t ik = 0; ik < t.size(); ++ik)
      if (t.mode(j, ik).fh >= 1e-2 * peak) active.push_back(ik);
    std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
    double fd_worst = 0.0;
    for (int s = 0; s < 6; ++s) {
      const std::size_t ik = active[pick(rng)];
      const double fd = finite_difference_derivative(t.profile, t.k[ik], j, t.options, 1e-3);
      fd_worst = std::max(fd_worst, std::abs(fd - t.mode(j, ik).fh) / t.mode(j, ik).fh);
    }
    const double combined = std::max(r.observed, fd_worst / 1e-4);
    r.observed = combined;
    r.ratio = 1.0 / combined;
    r.status = combined <= 1.0 ? CheckStatus::Pass : CheckStatus::Fail;
    r.note += " fd=" + detail::fmt(fd_worst);
    rs.push_back(r);
  }
  auto out = detail::combine(rs);
  out.note = "observed = worst disagreement / tolerance; " + out.note;
  return out;
}

inline CheckReport window_disjoint(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (const auto& w : ctx.windows()) rs.push_back(check_window_disjoint(w, ctx.main_table()));
  return detail::combine(rs);
}

inline CheckReport derivative_bound(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (std::size_t i = 0; i < ctx.windows().size(); ++i) {
    const auto& w = ctx.windows()[i];
    auto dense = check_derivative_lower_bound(w, ctx.preimage_table(i), ctx.constants());
    try {
      auto coarse = check_derivative_lower_bound(w, ctx.main_table(), ctx.constants());
      if (coarse.ratio < dense.ratio) dense = coarse;
    } catch (const ParameterError&) {
      // the main grid may have no sample inside a narrow preimage
    }
    std::ostringstream os;
    os << "j=" << w.j << " delta=" << w.delta << " " << dense.note;
    dense.note = os.str();
    rs.push_back(dense);
  }
  return detail::combine(rs);
}

// Minimal ratio omega'/bound on the preimage for several b_- at fixed r and
// delta; the ratio must not drift by more than 5 percent.
inline CheckReport derivative_bound_scaling(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& c = ctx.config();
  const auto& spec = c.windows.front();
  const double r = ctx.profile().ratio();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::ostringstream os;
  for (double b : c.scaling_b_minus) {
    const auto p = FieldProfile::sharp(b, r * b);
    const double s = std::sqrt(b);
    const auto w = make_window_unchecked(p, ctx.band_options(), spec.j, spec.delta, -s, s);
    const auto t = compute_bands(p, uniform_grid(w.k_lo, w.k_hi, 129), w.j, ctx.band_options());
    const auto rep = check_derivative_lower_bound(w, t, ctx.constants());
    lo = std::min(lo, rep.ratio);
    hi = std::max(hi, rep.ratio);
    os << "b_-=" << b << ": bound " << rep.bound << " min ratio " << rep.ratio << "; ";
  }
  CheckReport r_;
  r_.observed = hi / lo - 1.0;
  r_.bound = 0.05;
  r_.ratio = lo;
  r_.status = (lo >= 1.0 && r_.observed <= 0.05) ? CheckStatus::Pass : CheckStatus::Fail;
  r_.note = "observed = relative spread of the min ratio, ratio = smallest min ratio; " + os.str();
  return r_;
}

// Overlap sums with the Landau functions of b_- (k < 0) and b_+ (k >= 0) on
// the preimage.
inline CheckReport overlap_bounds(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (std::size_t i = 0; i < ctx.windows().size(); ++i) {
    const auto& w = ctx.windows()[i];
    const auto& t = ctx.preimage_table(i);
    const double bm = w.profile.b_minus(), bp = w.profile.b_plus();
    double worst = std::numeric_limits<double>::infinity();
    double excess = 0.0;
    std::size_t neg = 0, pos = 0;
    for (std::size_t ik = 0; ik < t.size(); ++ik) {
      const double k = t.k[ik];
      const bool left = k < 0.0;
      const auto alpha = landau_overlaps(t.vector(w.j, ik), t.grids[ik], left ? bm : bp, k, 12);
      double s = 0.0, total = 0.0;
      for (int l = 1; l <= 12; ++l) {
        if (l <= w.j) s += alpha[l] * alpha[l];
        total += alpha[l] * alpha[l];
      }
      excess = std::max(excess, total - 1.0);
      const double bound = left ? 1.0 / (2.0 * w.j) : w.delta / (2.0 * (2.0 * w.j - 1.0));
      worst = std::min(worst, s / bound);
      (left ? neg : pos)++;
    }
    CheckReport r;
    r.observed = worst;
    r.bound = 1.0;
    r.ratio = worst;
    r.status = (worst > 1.0 && excess <= 1e-6) ? CheckStatus::Pass : CheckStatus::Fail;
    std::ostringstream os;
    os << "min overlap sum / bound over " << neg << " samples k<0 and " << pos
       << " samples k>=0; max (sum over 12 levels - 1) = " << excess;
    r.note = os.str();
    rs.push_back(r);
  }
  return detail::combine(rs);
}

// Half-line cubic moment of the b_+ Landau functions: tilde c_l b_+^{3/4} at
// k = 0 and no larger for k > 0.
inline CheckReport landau_moment(RunContext& ctx) {
  const auto& c = ctx.constants();
  const double bp = ctx.profile().b_plus();
  double worst = 0.0, over = -std::numeric_limits<double>::infinity();
  for (int l = 1; l <= c.j_max; ++l) {
    const double ref = c.c_tilde[l] * std::pow(bp, 0.75);
    worst = std::max(worst, std::abs(half_line_cubic_moment(bp, l, 0.0) - ref) / ref);
    for (double k : {0.25, 0.5, 1.0, 2.0}) over = std::max(over, half_line_cubic_moment(bp, l, k * std::sqrt(bp)) / ref - 1.0);
  }
  auto r = detail::bounded(worst, 1e-6, "");
  if (over > 1e-12) r.status = CheckStatus::Fail;
  r.note = "max relative error at k = 0 over levels 1.." + std::to_string(c.j_max) +
           "; max excess for k > 0: " + detail::fmt(over);
  return r;
}

inline CheckReport current_lower(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (std::size_t i = 0; i < ctx.windows().size(); ++i)
    for (const auto& pk : ctx.packets(i)) rs.push_back(check_current_lower_bound(pk, ctx.constants()));
  return detail::combine(rs);
}

inline CheckReport current_upper(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (std::size_t i = 0; i < ctx.windows().size(); ++i)
    for (const auto& pk : ctx.packets(i)) {
      auto r = check_current_upper_bound(pk);
      r.note = to_string(pk.kind);
      rs.push_back(r);
    }
  return detail::combine(rs);
}

// Indicator packet near the band bottom whose current falls below the
// derivative bound constant times b_-^{1/2}; the current stays positive.
inline CheckReport band_edge(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (const auto& w : ctx.windows()) {
    const auto in = ledger_inputs(w, ctx.constants());
    const auto probe = band_edge_probe(ctx.main_table(), w.j, in.gap_scale());
    CheckReport r;
    r.bound = probe.threshold;
    r.observed = probe.current;
    r.ratio = probe.found ? probe.threshold / probe.current : NAN;
    std::ostringstream os;
    if (!probe.found) {
      r.status = CheckStatus::Fail;
      os << "no sample with omega' below " << probe.threshold << " at this grid extent";
    } else {
      r.status = (probe.current < probe.threshold && probe.current > 0.0) ? CheckStatus::Pass : CheckStatus::Fail;
      os << "k_j=" << probe.k_center << " kappa=" << probe.kappa << " omega'(k_j)/2=" << 0.5 * probe.derivative_at_center;
    }
    r.note = os.str();
    rs.push_back(r);
  }
  return detail::combine(rs);
}

inline CheckReport transport(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& pks = ctx.packets(0);
  const WavePacket* pk = nullptr;
  for (const auto& p : pks)
    if (p.kind == EnvelopeKind::Hann) pk = &p;
  for (const auto& p : pks)
    if (!pk && p.kind == EnvelopeKind::Gaussian) pk = &p;
  if (!pk) return detail::skipped("fibered transport needs a differentiable envelope");
  const auto fit = fibered_transport(*pk, ctx.config().transport_t_max);
  const double v = 2.0 * edge_current(*pk);
  const auto& vw = ctx.velocity(0);
  const double slope_err = std::abs(fit.slope - v) / v;
  const double err = std::max(slope_err, fit.max_rel_dev);
  CheckReport r = detail::bounded(err, 1e-3, "");
  if (!(fit.slope >= vw.rho && fit.slope <= vw.theta)) r.status = CheckStatus::Fail;
  std::ostringstream os;
  os << to_string(pk->kind) << " slope=" << fit.slope << " 2J=" << v << " (J=" << 0.5 * v << ") velocity window ["
     << vw.rho << ", " << vw.theta << "] over t in [0, " << ctx.config().transport_t_max << "]";
  r.note = os.str();
  return r;
}

inline CheckReport containment(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& l = ctx.localization_at(ctx.config().localization.b_minus);
  return preimage_containment_check(l.window, ctx.config().localization.eps2);
}

inline CheckReport decay(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& l = ctx.localization_at(ctx.config().localization.b_minus);
  return decay_envelope_check(l.packet, ctx.config().localization.eps2);
}

// Localization mass at the configured b_- for every probe pair, and the
// smallest scanned b_- from which the bound is informative and holds.
inline CheckReport localization(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& c = ctx.config().localization;
  const int j = ctx.config().windows.front().j;
  const auto& here = ctx.localization_at(c.b_minus);
  std::vector<std::array<double, 2>> pairs = c.probes;
  if (std::find(pairs.begin(), pairs.end(), std::array<double, 2>{c.eps1, c.eps2}) == pairs.end())
    pairs.push_back({c.eps1, c.eps2});
  std::vector<CheckReport> rs;
  for (const auto& e : pairs)
    rs.push_back(check_localization(here.packet, make_localization_window(here.window.profile, j, e[0], e[1])));
  auto out = detail::combine(rs);
  std::vector<double> scan = c.threshold_scan;
  std::sort(scan.begin(), scan.end());
  double threshold = NAN;
  std::ostringstream os;
  for (double b : scan) {
    const auto& l = ctx.localization_at(b);
    const auto r = check_localization(l.packet, make_localization_window(l.window.profile, j, c.eps1, c.eps2));
    os << " b_-=" << b << ":" << to_string(r.status) << "(" << r.observed << " vs " << r.bound << ")";
    if (r.status == CheckStatus::Pass) {
      if (std::isnan(threshold)) threshold = b;
    } else {
      threshold = NAN;
    }
  }
  out.note += "; threshold scan eps1=" + detail::fmt(c.eps1) + " eps2=" + detail::fmt(c.eps2) + ":" + os.str();
  out.note += !std::isnan(threshold) ? "; empirical threshold b_- = " + detail::fmt(threshold) : "; threshold not reached in scan";
  return out;
}

inline CheckReport smooth_comparison(RunContext& ctx) {
  if (ctx.profile().kind() == ProfileKind::Constant) return detail::skipped("no edge for a constant field");
  const auto& c = ctx.config();
  std::vector<CheckReport> rs;
  for (auto kind : c.smooth.kinds)
    for (double e : c.smooth.epsilons)
      for (int j = 1; j <= c.j_max; ++j) {
        auto r = compare_sharp_smooth(ctx.sharp_reference(), ctx.smooth_table(kind, e), j);
        r.note += " j=" + std::to_string(j);
        rs.push_back(r);
      }
  return detail::combine(rs);
}

inline CheckReport smooth_routes(RunContext& ctx) {
  if (ctx.profile().kind() == ProfileKind::Constant) return detail::skipped("no edge for a constant field");
  const auto& c = ctx.config();
  std::vector<CheckReport> rs;
  for (auto kind : c.smooth.kinds)
    for (double e : c.smooth.epsilons)
      for (int j = 1; j <= c.j_max; ++j) {
        const auto a = derivative_agreement(ctx.smooth_table(kind, e), j);
        const double worst = std::max(a.smooth / 1e-4, a.ramp / 1e-3);
        auto r = detail::bounded(worst, 1.0, "");
        std::ostringstream os;
        os << to_string(kind) << " eps=" << e << " j=" << j << " half-line " << a.smooth << " ramp " << a.ramp;
        r.note = os.str();
        rs.push_back(r);
      }
  auto out = detail::combine(rs);
  out.note = "observed = worst disagreement / tolerance; " + out.note;
  return out;
}

inline CheckReport smooth_positivity(RunContext& ctx) {
  if (ctx.profile().kind() == ProfileKind::Constant) return detail::skipped("no edge for a constant field");
  const auto& c = ctx.config();
  std::vector<CheckReport> rs;
  for (auto kind : c.smooth.kinds) {
    if (kind != ProfileKind::SmoothCubic) continue;  // the statement needs a C^1 field
    for (double e : c.smooth.epsilons)
      for (int j = 1; j <= c.j_max; ++j) rs.push_back(check_smooth_positivity(ctx.smooth_table(kind, e), j, false));
  }
  if (rs.empty()) return detail::skipped("no continuously differentiable ramp configured");
  return detail::combine(rs);
}

inline CheckReport smooth_positivity_all(RunContext& ctx) {
  if (ctx.profile().kind() == ProfileKind::Constant) return detail::skipped("no edge for a constant field");
  const auto& c = ctx.config();
  const double cap = 1.0 / (std::sqrt(ctx.profile().b_minus()) * 2.0 * ctx.profile().ratio());
  std::vector<CheckReport> rs;
  for (auto kind : c.smooth.kinds)
    for (double e : c.smooth.epsilons) {
      if (!(e < cap)) continue;
      for (int j = 1; j <= c.j_max; ++j) rs.push_back(check_smooth_positivity(ctx.smooth_table(kind, e), j, true));
    }
  if (rs.empty()) return detail::skipped("no configured epsilon below b_-^{-1/2}/(2r)");
  return detail::combine(rs);
}

inline CheckReport ledger(RunContext& ctx, bool perturbed) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (const auto& w : ctx.windows()) {
    const auto in = ledger_inputs(w, ctx.constants());
    auto r = check_ledger(in, perturbed);
    if (!perturbed && r.status == CheckStatus::Pass) {
      const auto reg = admissible_region(in, false);
      if (!(reg.epsilon_max < 1.0 / std::sqrt(in.b_minus))) {
        r.status = CheckStatus::Fail;
        r.note += "; eps_j not below b_-^{-1/2}";
      }
    }
    rs.push_back(r);
  }
  return detail::combine(rs);
}

inline CheckReport mourre(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  std::vector<CheckReport> rs;
  for (const auto& w : ctx.windows()) rs.push_back(check_mourre_constant(ledger_inputs(w, ctx.constants())));
  return detail::combine(rs);
}

// Unperturbed two-dimensional run against the fibered oracle on the same
// x-grid: relative error of the displacement of <y>, norm drift, boundary mass.
inline CheckReport evolve_oracle(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& e = ctx.config().evolution;
  const auto& win = ctx.windows().front();
  const auto grid = default_grid_for(win, e.nx, e.ny, e.length_y, 0.0, ctx.config().margin_widths);
  const auto packet = build_packet(win, e.envelope, ctx.config().packet_nodes);
  auto emb = embed_packet(packet, grid, 0.0);
  BandOptions og = ctx.band_options();
  og.grid = grid.x;
  const auto oracle_packet = build_packet_on(win.profile, og, win.j, win.k_lo, win.k_hi, e.envelope, ctx.config().packet_nodes);
  FiberedTransport oracle(oracle_packet);
  PropagatorOptions po;
  po.dt = e.dt;
  Propagator prop(win.profile, grid, zero_perturbation(), po);
  EvolutionRequest rq;
  rq.t_final = e.t_final;
  rq.sample_every = e.sample_every;
  std::ofstream snaps;
  if (e.snapshot_every > 0 && !ctx.out_dir.empty()) {
    std::filesystem::create_directories(ctx.out_dir);
    snaps.open(ctx.out_dir / "snapshots.bin", std::ios::binary);
    rq.snapshots = &snaps;
    rq.snapshot_every = e.snapshot_every;
  }
  auto run = run_evolution(std::move(emb.state), prop, win.profile, rq);
  const double y0 = run.series.front().y_mean, o0 = oracle.position(0.0);
  double worst = 0.0;
  ctx.oracle_y.clear();
  for (const auto& s : run.series) {
    const double oy = oracle.position(s.t);
    ctx.oracle_y.push_back(oy - o0 + y0);
    if (s.t <= 0.0) continue;
    worst = std::max(worst, std::abs((s.y_mean - y0) - (oy - o0)) / std::abs(oy - o0));
  }
  const double j0 = run.series.front().current;
  CheckReport r = detail::bounded(worst, 1e-3, "");
  if (run.max_norm_drift > 1e-7 || run.aborted) r.status = CheckStatus::Fail;
  std::ostringstream os;
  os << "grid " << e.nx << "x" << e.ny << " dt=" << e.dt << " T=" << e.t_final << " norm drift " << run.max_norm_drift
     << " max boundary mass " << run.max_boundary_mass << " J(0)=" << j0 << " fiber J=" << emb.expected_current
     << " (rel " << std::abs(j0 - emb.expected_current) / emb.expected_current << ")";
  if (run.aborted) os << "; aborted: " << run.note;
  r.note = os.str();
  ctx.oracle_run = std::move(run);
  return r;
}

// Current along a run under a perturbation at the admissible corner of the
// perturbed ledger; every sample must stay above the commutator constant.
inline CheckReport perturbed_current(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const auto& spec = ctx.config().perturbed_run;
  const auto& win = ctx.windows().front();
  const auto in = ledger_inputs(win, ctx.constants());
  const auto reg = admissible_region(in, true);
  if (!reg.nonempty) return detail::skipped("perturbed ledger has no admissible point");
  // Equal a_1 = a_2 = A bumps: (|a|^2 + |grad a|)^{1/2} <= a_* b_-^{1/2} holds with
  // 2 A^2 + sqrt(2) A pi/(2R) = (a_* b_-^{1/2})^2, taken at half the size.
  const double R = spec.support_halfwidth;
  const double target = 0.5 * reg.a_star * std::sqrt(in.b_minus);
  const double lin = std::sqrt(2.0) * std::numbers::pi / (2.0 * R);
  const double A = 2.0 * target * target / (lin + std::sqrt(lin * lin + 8.0 * target * target));
  const auto pert = make_bump_perturbation(A, A, 0.5 * reg.q_max * in.b_minus, R);
  const auto grid = default_grid_for(win, spec.nx, spec.ny, spec.length_y, 0.0, ctx.config().margin_widths);
  const auto packet = build_packet(win, EnvelopeKind::Hann, ctx.config().packet_nodes);
  auto emb = embed_packet(packet, grid, 0.0);
  PropagatorOptions po;
  po.dt = spec.dt;
  Propagator prop(win.profile, grid, pert, po);
  EvolutionRequest rq;
  rq.t_final = spec.t_final;
  rq.sample_every = spec.sample_every;
  auto run = run_evolution(std::move(emb.state), prop, win.profile, rq);
  double jmin = std::numeric_limits<double>::infinity();
  for (const auto& s : run.series) jmin = std::min(jmin, s.current);
  CheckReport r;
  r.observed = jmin;
  r.bound = mourre_constant(in);
  r.ratio = jmin / r.bound;
  r.status = (jmin >= r.bound && !run.aborted) ? CheckStatus::Pass : CheckStatus::Fail;
  std::ostringstream os;
  os << "min J over " << run.series.size() << " samples, t in [0, " << spec.t_final << "]; sup|a|=" << pert.a_sup
     << " sup|grad a|=" << pert.grad_a_sup << " sup|q|=" << pert.q_sup << " (admissible a_*=" << reg.a_star
     << ", q_*=" << reg.q_max << ")";
  if (run.aborted) os << "; aborted: " << run.note;
  r.note = os.str();
  ctx.perturbed_run = std::move(run);
  return r;
}

inline ProbeReport run_probe(RunContext& ctx, double factor) {
  const auto& p = ctx.config().probe;
  const auto& win = ctx.windows().front();
  const auto in = ledger_inputs(win, ctx.constants());
  const double amp = factor * asymptotic_a_star(in) * std::sqrt(in.b_minus);
  const auto pert = make_bump_perturbation(0.0, amp, 0.0, p.support_halfwidth);
  return asymptotic_velocity_probe(win, pert, ctx.constants(), p.request);
}

inline CheckReport asymptotic(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  auto rep = run_probe(ctx, ctx.config().probe.a2_fraction);
  auto r = rep.check;
  ctx.probe_run = std::move(rep);
  return r;
}

inline CheckReport asymptotic_stress(RunContext& ctx) {
  if (auto why = ctx.window_skip_reason()) return detail::skipped(*why);
  const double f = ctx.config().probe.stress_factor;
  if (!(f > 0.0)) return detail::skipped("stress run disabled (probe.stress_factor = 0)");
  auto rep = run_probe(ctx, f);
  CheckReport r = rep.check;
  r.status = CheckStatus::Recorded;
  r.note = "no guarantee at this size; " + r.note + " min J=" + detail::fmt(rep.min_current);
  ctx.stress_run = std::move(rep);
  return r;
}

}  // namespace checks

// ---------------------------------------------------------------- registry

struct CheckDef {
  std::string id;
  std::string anchor;
  std::string group;
  std::function<CheckReport(RunContext&)> run;
};

inline const std::vector<CheckDef>& check_registry() {
  static const std::vector<CheckDef> defs = {
      {"landau_flat", "constant field: flat bands at the Landau levels", "bands", checks::landau_flat},
      {"ev_bounds_potential", "comparison of the fiber potential with the constant-field potentials", "bands",
       checks::ev_bounds_potential},
      {"a9_sandwich", "band functions between the asymptotic Landau levels", "bands", checks::sandwich},
      {"lemma31_monotone", "strictly increasing band functions", "bands", checks::monotone},
      {"bflimit", "band limits at k -> -inf and k -> +inf", "bands", checks::band_limits},
      {"derivative_crosscheck", "Feynman-Hellmann, boundary and half-line derivative identities", "bands",
       checks::derivative_crosscheck},
      {"a14_disjoint", "other bands avoid the spectral window", "bands", checks::window_disjoint},
      {"a14_lower_bound", "band derivative lower bound on the window preimage", "bands", checks::derivative_bound},
      {"a14_scaling", "b_-^{1/2} scaling of the band derivative lower bound", "bands",
       checks::derivative_bound_scaling},
      {"a14b_overlap", "overlap of band eigenfunctions with the Landau functions", "bands", checks::overlap_bounds},
      {"a20_moment", "half-line cubic moment of the Landau functions", "bands", checks::landau_moment},
      {"thm41_current", "edge current lower bound for states in the spectral window", "current",
       checks::current_lower},
      {"current_upper", "Cauchy-Schwarz upper bound for the edge current", "current", checks::current_upper},
      {"remark43_band_edge", "small current of packets near the band bottom", "current", checks::band_edge},
      {"fibered_transport", "unperturbed transport at the group velocity", "current", checks::transport},
      {"a25_containment", "window preimage inside the scaled k interval", "localize", checks::containment},
      {"a30_decay_envelope", "Gaussian decay of the band eigenfunctions away from the edge", "localize",
       checks::decay},
      {"thm44_localization", "localization of the current-carrying packet near the edge", "localize",
       checks::localization},
      {"b10_comparison", "sharp versus smoothed band functions", "smooth", checks::smooth_comparison},
      {"bb12_smooth_routes", "derivative identities for the smoothed edge", "smooth", checks::smooth_routes},
      {"lemma52_positivity", "positivity of the smoothed band derivative away from the ramp", "smooth",
       checks::smooth_positivity},
      {"remark53_positive", "positivity of the smoothed band derivative for every k", "smooth",
       checks::smooth_positivity_all},
      {"thm54_ledger", "admissible smoothing width for the smoothed edge current", "constants",
       [](RunContext& c) { return checks::ledger(c, false); }},
      {"thm61_ledger", "admissible perturbation size for the perturbed edge current", "constants",
       [](RunContext& c) { return checks::ledger(c, true); }},
      {"emp7_mourre_constant", "positive commutator constant of the perturbed edge", "constants", checks::mourre},
      {"evolve_oracle", "two-dimensional evolution against the fibered oracle", "evolve", checks::evolve_oracle},
      {"emp1d_current", "current lower bound under an admissible perturbation", "evolve", checks::perturbed_current},
      {"thm71_asymptotic", "asymptotic velocity after scattering off a compactly supported a_2", "evolve",
       checks::asymptotic},
      {"thm71_stress", "transit of an oversized a_2 bump (no guarantee)", "evolve", checks::asymptotic_stress},
  };
  return defs;
}

inline const std::vector<std::string>& command_groups() {
  static const std::vector<std::string> g = {"bands", "current", "localize", "smooth", "constants", "evolve"};
  return g;
}

inline const std::vector<std::string>& out_of_scope_notes() {
  static const std::vector<std::string> notes = {
      "Proofs are not verified; each inequality is checked on sampled data at desk scale.",
      "The operator form of the positive commutator estimate is not verified; only its constant is computed "
      "(emp7_mourre_constant).",
      "Existence of local wave operators as strong limits is probed only through long-time evolution "
      "(thm71_asymptotic).",
      "Absolute continuity of the spectrum is reduced to non-constancy of the computed bands "
      "(lemma31_monotone, lemma52_positivity).",
      "The smoothed-edge current and localization statements are covered through their constant ledger "
      "(thm54_ledger) and the sharp/smooth band comparison (b10_comparison); the admissible smoothing width "
      "lies far below the grid resolution.",
      "Unspecified constants (current upper bound, localization threshold) are recorded empirically.",
      "Sign-changing fields and the edge-conductance trace formula are not modelled.",
  };
  return notes;
}

// ---------------------------------------------------------------- artifacts

namespace detail {

inline void write_bands_csv(const std::filesystem::path& path, const BandTable& t) {
  std::ofstream os(path);
  os << "# units: k in inverse length, omega in energy, omega' in energy times length\n";
  os << "k,j,omega,omega_prime_fh,omega_prime_alt,profile_id\n";
  const std::string id = profile_id(t.profile);
  for (int j = 1; j <= t.j_max; ++j)
    for (std::size_t ik = 0; ik < t.size(); ++ik) {
      const auto& m = t.mode(j, ik);
      const double alt = t.profile.has_ramp() ? positive_route_derivative(t.profile, t.k[ik], m) : m.boundary;
      os << fmt(t.k[ik]) << ',' << j << ',' << fmt(m.omega) << ',' << fmt(m.fh) << ',' << fmt(alt) << ',' << id
         << '\n';
    }
}

inline void write_series_csv(const std::filesystem::path& path, const std::vector<TimeSample>& s,
                             const std::vector<double>* oracle = nullptr) {
  std::ofstream os(path);
  os << "# units: t in time, J_y in velocity, y_mean in length, norm dimensionless, boundary_mass dimensionless\n";
  os << "t,J_y,y_mean,norm,boundary_mass" << (oracle ? ",y_oracle" : "") << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << fmt(s[i].t) << ',' << fmt(s[i].current) << ',' << fmt(s[i].y_mean) << ',' << fmt(s[i].norm) << ','
       << fmt(s[i].boundary_mass);
    if (oracle) os << ',' << fmt((*oracle)[i]);
    os << '\n';
  }
}

inline void write_packets(const std::filesystem::path& dir, RunContext& ctx) {
  std::ofstream rows(dir / "wavepacket.csv");
  std::ofstream sum(dir / "wavepacket_summary.csv");
  rows << "# units: k in inverse length, beta_sq in length, omega in energy, omega' in energy times length\n";
  rows << "window,envelope,k,beta_sq,omega,omega_prime\n";
  sum << "# units: J in velocity, mass dimensionless\n";
  sum << "window,envelope,J,bound,ratio,mass,mass_bound\n";
  const auto& c = ctx.config();
  for (std::size_t i = 0; i < ctx.windows().size(); ++i) {
    for (const auto& pk : ctx.packets(i)) {
      for (std::size_t n = 0; n < pk.nodes.size(); ++n)
        rows << i << ',' << to_string(pk.kind) << ',' << fmt(pk.nodes[n]) << ','
             << fmt(pk.envelope[n] * pk.envelope[n]) << ',' << fmt(pk.modes.omega(pk.j, n)) << ','
             << fmt(pk.modes.mode(pk.j, n).fh) << '\n';
      const double J = edge_current(pk);
      const double bound = derivative_lower_bound(*pk.window, ctx.constants());
      const auto loc = make_localization_window(pk.profile, pk.j, c.localization.eps1, c.localization.eps2);
      sum << i << ',' << to_string(pk.kind) << ',' << fmt(J) << ',' << fmt(bound) << ',' << fmt(J / bound) << ','
          << fmt(localization_mass(pk, loc)) << ',' << fmt(loc.bound) << '\n';
    }
  }
}

inline json region_json(const AdmissibleRegion& r) {
  return {{"nonempty", r.nonempty},       {"N", r.N},
          {"a_max", r.a_max},             {"a_star", r.a_star},
          {"q_max", r.q_max},             {"d_max", r.d_max},
          {"epsilon_max", r.epsilon_max}, {"base_d_j", r.base_d_j},
          {"corner_condition", r.corner.condition}, {"corner_F", r.corner.F}};
}

inline json constants_json(RunContext& ctx) {
  json j;
  const auto& c = ctx.constants();
  j["c_tilde"] = json::array();
  j["c_j"] = json::array();
  for (int l = 1; l <= c.j_max; ++l) {
    j["c_tilde"].push_back(c.c_tilde[l]);
    j["c_j"].push_back({{"j", l}, {"negative_k", c.c_neg[l]}, {"positive_k", c.c_pos[l]}, {"merged", c.c[l]}});
  }
  j["windows"] = json::array();
  if (!ctx.window_skip_reason()) {
    for (const auto& w : ctx.windows()) {
      const auto in = ledger_inputs(w, c);
      j["windows"].push_back({{"j", w.j},
                              {"r", in.r},
                              {"delta", in.delta},
                              {"b_minus", in.b_minus},
                              {"interval", {w.lo, w.hi}},
                              {"preimage", {w.k_lo, w.k_hi}},
                              {"d_j", in.d_j},
                              {"e_j", in.e_j},
                              {"derivative_bound", derivative_lower_bound(w, c)},
                              {"current_bound", derivative_lower_bound(w, c)},
                              {"mourre_constant", mourre_constant(in)},
                              {"asymptotic_a_star", asymptotic_a_star(in)},
                              {"smooth", region_json(admissible_region(in, false))},
                              {"perturbed", region_json(admissible_region(in, true))}});
    }
  }
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------- runner

struct RunResult {
  std::vector<CheckReport> reports;
  std::vector<double> seconds;
  int exit_code = 0;
};

inline bool known_check(const std::string& id) {
  for (const auto& d : check_registry())
    if (d.id == id) return true;
  return false;
}

// command: one of command_groups() or "verify-all".
inline RunResult run(RunContext& ctx, const std::string& command) {
  const auto& cfg = ctx.config();
  const bool all = command == "verify-all";
  if (!all && std::find(command_groups().begin(), command_groups().end(), command) == command_groups().end())
    throw ConfigError("unknown command '" + command + "'");
  if (cfg.checks)
    for (const auto& id : *cfg.checks)
      if (!known_check(id)) throw ConfigError("unknown check id '" + id + "'");
  set_thread_count(cfg.threads);
  ctx.out_dir = cfg.output_dir;
  std::filesystem::create_directories(ctx.out_dir);

  RunResult res;
  for (const auto& def : check_registry()) {
    if (!all && def.group != command) continue;
    if (cfg.checks && std::find(cfg.checks->begin(), cfg.checks->end(), def.id) == cfg.checks->end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckReport r;
    try {
      r = def.run(ctx);
    } catch (const TheoremCheckFailure& e) {
      r = e.report();
      r.status = CheckStatus::Fail;
    }
    r.id = def.id;
    r.anchor = def.anchor;
    res.reports.push_back(r);
    res.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }

  // Artifacts: a single-group command always emits its data; verify-all emits
  // whatever the selected checks computed.
  const auto& dir = ctx.out_dir;
  const bool windows_ok = !ctx.window_skip_reason();
  if (command == "bands" || (all && ctx.has_main_table())) detail::write_bands_csv(dir / "bands.csv", ctx.main_table());
  if (windows_ok && (command == "current" || (all && ctx.has_packets()))) detail::write_packets(dir, ctx);
  if (command == "constants" || (all && ctx.has_main_table())) {
    std::ofstream os(dir / "constants.json");
    os << detail::constants_json(ctx).dump(2) << '\n';
  }
  if (ctx.oracle_run) detail::write_series_csv(dir / "evolve.csv", ctx.oracle_run->series, &ctx.oracle_y);
  if (ctx.perturbed_run) detail::write_series_csv(dir / "evolve_perturbed.csv", ctx.perturbed_run->series);
  if (ctx.probe_run) detail::write_series_csv(dir / "probe.csv", ctx.probe_run->series);
  if (ctx.stress_run) detail::write_series_csv(dir / "stress.csv", ctx.stress_run->series);

  res.exit_code = 0;
  for (const auto& r : res.reports)
    if (r.status == CheckStatus::Fail) res.exit_code = 1;
  return res;
}

inline json report_json(const RunContext& ctx, const std::string& command, const RunResult& res) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["profile_id"] = profile_id(ctx.profile());
  j["out_of_scope"] = out_of_scope_notes();
  if (auto why = ctx.window_skip_reason()) j["window_note"] = *why;
  j["config"] = config_to_json(ctx.config());
  j["checks"] = json::array();
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    const auto& r = res.reports[i];
    j["checks"].push_back({{"id", r.id},
                           {"anchor", r.anchor},
                           {"status", to_string(r.status)},
                           {"observed", r.observed},
                           {"bound", r.bound},
                           {"ratio", r.ratio},
                           {"note", r.note},
                           {"seconds", res.seconds[i]}});
  }
  j["exit_code"] = res.exit_code;
  return j;
}

inline std::string report_text(const RunContext& ctx, const std::string& command, const RunResult& res) {
  std::ostringstream os;
  os << "# iwatsuka_lab " << command << " " << profile_id(ctx.profile()) << "\n";
  if (auto why = ctx.window_skip_reason()) os << "# " << *why << "\n";
  os << "# out of scope:\n";
  for (const auto& n : out_of_scope_notes()) os << "#   - " << n << "\n";
  for (const auto& r : res.reports) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %-8s observed=%-12.6g bound=%-12.6g ratio=%-10.4g ", r.id.c_str(),
                  to_string(r.status), r.observed, r.bound, r.ratio);
    os << buf << r.note << "\n";
  }
  return os.str();
}

inline void write_reports(const RunContext& ctx, const std::string& command, const RunResult& res) {
  std::ofstream(ctx.out_dir / "report.json") << report_json(ctx, command, res).dump(2) << '\n';
  std::ofstream(ctx.out_dir / "report.txt") << report_text(ctx, command, res);
}

}  // namespace iwatsuka::harness
