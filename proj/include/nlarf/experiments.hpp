#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlarf/errors.hpp"
#include "nlarf/forest.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/noise_models.hpp"
#include "nlarf/oracle.hpp"
#include "nlarf/parallel.hpp"
#include "nlarf/tree_builder.hpp"

namespace nlarf {

inline constexpr const char* kVersion = "0.1.0";

/// floor(0.04 (ln T)^4 ln ln T), at least 1.
inline std::size_t k_schedule(std::size_t T) {
  if (T < 16) throw ConfigError("k_schedule: T must be at least 16");
  const double lt = std::log(static_cast<double>(T));
  const double k = std::floor(0.04 * lt * lt * lt * lt * std::log(lt));
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

enum class ExperimentKind { Simulate, EstimationCurves, KSweep, MseCurve, Concentration, DensityCheck };

inline std::string_view to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::Simulate: return "simulate";
    case ExperimentKind::EstimationCurves: return "estimation_curves";
    case ExperimentKind::KSweep: return "k_sweep";
    case ExperimentKind::MseCurve: return "mse_curve";
    case ExperimentKind::Concentration: return "concentration";
    case ExperimentKind::DensityCheck: return "density_check";
  }
  return "?";
}

inline ExperimentKind experiment_from_string(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  for (auto e : {ExperimentKind::Simulate, ExperimentKind::EstimationCurves, ExperimentKind::KSweep,
                 ExperimentKind::MseCurve, ExperimentKind::Concentration, ExperimentKind::DensityCheck})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Laplace;
  double scale = 1.0;
  std::optional<double> bernstein_c;

  NoiseModel model() const { return {kind, scale, bernstein_c}; }
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::EstimationCurves;
  std::string f_name = "f3";
  NoiseSpec noise;
  std::vector<std::size_t> Ts;  // empty: experiment default
  std::size_t B = 500;
  double alpha = 0.1;
  std::vector<double> rho;  // empty: uniform
  std::optional<std::size_t> k_override;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";
  // Harness settings beyond the core fields.
  std::size_t burn_in = 1000;
  std::size_t n_mc = 1'000'000;
  unsigned jobs = 1;
  SplitRule split_rule = SplitRule::ExtraTrees;
  std::size_t m_factor = 2;
  std::vector<std::size_t> ks{40, 160, 640};
  std::size_t n_samples = 1'000'000;
  std::size_t n_bins = 50;

  std::vector<std::size_t> sample_sizes() const {
    if (!Ts.empty()) return Ts;
    switch (experiment) {
      case ExperimentKind::KSweep: return {1600};
      case ExperimentKind::MseCurve: return {2500, 5000, 10000, 20000, 40000};
      case ExperimentKind::Simulate: return {400};
      default: return {400, 1600, 6400};
    }
  }

  std::size_t k_for(std::size_t T) const { return k_override ? *k_override : k_schedule(T); }

  void validate() const {
    if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    if (B == 0) throw ConfigError("config: B must be positive");
    if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("config: alpha must lie in (0, 1/2)");
    if (m_factor < 2) throw ConfigError("config: m_factor must be at least 2");
    for (auto T : sample_sizes())
      if (T == 0) throw ConfigError("config: sample sizes must be positive");
    (void)builtin_function(f_name);
    (void)noise.model();
  }
};

// ---------------------------------------------------------------------------
// JSON mapping; keys mirror the field names.

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json noise = {{"kind", std::string(to_string(c.noise.kind))}, {"scale", c.noise.scale}};
  if (c.noise.bernstein_c) noise["bernstein_c"] = *c.noise.bernstein_c;
  nlohmann::json j = {{"experiment", std::string(to_string(c.experiment))},
                      {"f_name", c.f_name},
                      {"noise", noise},
                      {"Ts", c.sample_sizes()},
                      {"B", c.B},
                      {"alpha", c.alpha},
                      {"rho", c.rho},
                      {"k_override", nullptr},
                      {"seeds", c.seeds},
                      {"output_dir", c.output_dir},
                      {"burn_in", c.burn_in},
                      {"n_mc", c.n_mc},
                      {"jobs", c.jobs},
                      {"split_rule", std::string(to_string(c.split_rule))},
                      {"m_factor", c.m_factor},
                      {"ks", c.ks},
                      {"n_samples", c.n_samples},
                      {"n_bins", c.n_bins}};
  if (c.k_override) j["k_override"] = *c.k_override;
  return j;
}

/// Reads a config document. A run manifest is accepted too: its "config"
/// member is used.
inline ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig c = {}) {
  const nlohmann::json& j = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::vector<std::string> known = {"experiment", "f_name", "noise", "Ts", "B", "alpha", "rho",
                                                 "k_override", "seeds", "output_dir", "burn_in", "n_mc", "jobs",
                                                 "split_rule", "m_factor", "ks", "n_samples", "n_bins"};
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw ConfigError("config: unknown field '" + it.key() + "'");
    if (j.contains("experiment")) c.experiment = experiment_from_string(j["experiment"].get<std::string>());
    if (j.contains("f_name")) c.f_name = j["f_name"].get<std::string>();
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      if (n.is_string()) {
        c.noise.kind = noise_kind_from_string(n.get<std::string>());
      } else {
        if (n.contains("kind")) c.noise.kind = noise_kind_from_string(n["kind"].get<std::string>());
        if (n.contains("scale")) c.noise.scale = n["scale"].get<double>();
        if (n.contains("bernstein_c") && !n["bernstein_c"].is_null()) c.noise.bernstein_c = n["bernstein_c"].get<double>();
      }
    }
    if (j.contains("Ts")) c.Ts = j["Ts"].get<std::vector<std::size_t>>();
    if (j.contains("B")) c.B = j["B"].get<std::size_t>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("rho")) c.rho = j["rho"].get<std::vector<double>>();
    if (j.contains("k_override"))
      c.k_override = j["k_override"].is_null() ? std::nullopt : std::optional(j["k_override"].get<std::size_t>());
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("burn_in")) c.burn_in = j["burn_in"].get<std::size_t>();
    if (j.contains("n_mc")) c.n_mc = j["n_mc"].get<std::size_t>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<unsigned>();
    if (j.contains("split_rule")) c.split_rule = split_rule_from_string(j["split_rule"].get<std::string>());
    if (j.contains("m_factor")) c.m_factor = j["m_factor"].get<std::size_t>();
    if (j.contains("ks")) c.ks = j["ks"].get<std::vector<std::size_t>>();
    if (j.contains("n_samples")) c.n_samples = j["n_samples"].get<std::size_t>();
    if (j.contains("n_bins")) c.n_bins = j["n_bins"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig defaults = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, std::move(defaults));
}

// ---------------------------------------------------------------------------
// Output helpers.

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    os << contents;
    if (!os) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline SimulationSpec simulation_for(const ExperimentConfig& cfg, std::size_t T, std::uint64_t seed) {
  SimulationSpec spec;
  spec.f = builtin_function(cfg.f_name);
  spec.noise = cfg.noise.model();
  spec.T = T;
  spec.burn_in = cfg.burn_in;
  spec.seed = seed;
  return spec;
}

inline BuildConfig build_config_for(const ExperimentConfig& cfg, std::size_t k, std::size_t p) {
  BuildConfig b{k, cfg.m_factor * k, cfg.alpha, cfg.rho, cfg.split_rule, 0};
  if (b.rho.empty()) b.rho = std::vector<double>(p, 1.0 / static_cast<double>(p));
  return b;
}

/// Forest master seed for a run seed.
inline std::uint64_t forest_seed_for(std::uint64_t seed) { return derive_seed(seed, 1); }
/// Monte-Carlo oracle seed for a run seed.
inline std::uint64_t oracle_seed_for(std::uint64_t seed) { return derive_seed(seed, 2); }

/// The 401-point grid -2.00, -1.99, ..., 2.00.
inline std::vector<double> curve_grid() {
  std::vector<double> g(401);
  for (int i = 0; i <= 400; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i - 200) / 100.0;
  return g;
}

/// {-2, -1.75, ..., 2}^2 as 289 row-major points, first coordinate outer.
inline std::vector<double> mse_grid() {
  std::vector<double> g;
  g.reserve(289 * 2);
  for (int i = 0; i <= 16; ++i)
    for (int j = 0; j <= 16; ++j) {
      g.push_back(-2.0 + 0.25 * i);
      g.push_back(-2.0 + 0.25 * j);
    }
  return g;
}

struct RunResult {
  std::vector<std::filesystem::path> outputs;
  nlohmann::json summary = nlohmann::json::object();
};

namespace detail {

struct Unit {
  std::size_t T;
  std::uint64_t seed;
  std::size_t k;
};

inline std::vector<Unit> units_over(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks_per_T = {}) {
  std::vector<Unit> units;
  for (auto T : cfg.sample_sizes())
    for (auto seed : cfg.seeds) {
      if (ks_per_T.empty())
        units.push_back({T, seed, cfg.k_for(T)});
      else
        for (auto k : ks_per_T) units.push_back({T, seed, k});
    }
  return units;
}

inline std::string unit_name(const std::string& stem, const Unit& u, bool with_k) {
  std::string s = stem + "_T" + std::to_string(u.T) + "_seed" + std::to_string(u.seed);
  if (with_k) s += "_k" + std::to_string(u.k);
  return s + ".csv";
}

// Runs every unit (in parallel across units), writes each unit's CSV body
// atomically, then concatenates bodies in unit order under one header.
template <typename Fn>
RunResult fan_out(const ExperimentConfig& cfg, const std::vector<Unit>& units, const std::string& stem,
                  const std::string& header, bool with_k, Fn&& body) {
  namespace fs = std::filesystem;
  const fs::path out = cfg.output_dir;
  std::vector<std::string> bodies(units.size());
  parallel_for(units.size(), cfg.jobs, [&](std::size_t i) {
    bodies[i] = body(units[i]);
    write_file_atomic(out / "units" / unit_name(stem, units[i], with_k), header + bodies[i]);
  });
  std::string combined = header;
  for (const auto& b : bodies) combined += b;
  RunResult r;
  r.outputs.push_back(out / (stem + ".csv"));
  write_file_atomic(r.outputs.back(), combined);
  for (const auto& u : units) r.outputs.push_back(out / "units" / unit_name(stem, u, with_k));
  return r;
}

}  // namespace detail

/// Simulated datasets, one CSV per (T, seed).
inline RunResult run_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult r;
  for (auto T : cfg.sample_sizes())
    for (auto seed : cfg.seeds) {
      const auto data = simulate_dataset(simulation_for(cfg, T, seed));
      std::ostringstream os;
      write_dataset_csv(os, data);
      r.outputs.push_back(std::filesystem::path(cfg.output_dir) /
                          ("dataset_T" + std::to_string(T) + "_seed" + std::to_string(seed) + ".csv"));
      write_file_atomic(r.outputs.back(), os.str());
    }
  return r;
}

/// Forest estimate against f on the 401-point grid; CSV "x,f_true,f_hat,T,seed".
inline RunResult run_estimation_curves(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto f = builtin_function(cfg.f_name);
  if (f.p != 1) throw ConfigError("estimation_curves needs a one-dimensional function");
  const auto grid = curve_grid();
  return detail::fan_out(cfg, detail::units_over(cfg), "estimation_curves", "x,f_true,f_hat,T,seed\n", false,
                         [&](const detail::Unit& u) {
                           auto data = std::make_shared<const Dataset>(simulate_dataset(simulation_for(cfg, u.T, u.seed)));
                           const auto forest = fit_forest(data, build_config_for(cfg, u.k, 1), cfg.B, forest_seed_for(u.seed));
                           const auto fhat = forest_predict_batch(forest, std::span<const double>(grid));
                           std::string s;
                           for (std::size_t i = 0; i < grid.size(); ++i) {
                             const double x = grid[i];
                             s += format_double(x) + ',' + format_double(f(std::span(&x, 1))) + ',' +
                                  format_double(fhat[i]) + ',' + std::to_string(u.T) + ',' + std::to_string(u.seed) + '\n';
                           }
                           return s;
                         });
}

/// Fixed T, several k; CSV "x,f_true,f_hat,T,seed,k".
inline RunResult run_k_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto f = builtin_function(cfg.f_name);
  if (f.p != 1) throw ConfigError("k_sweep needs a one-dimensional function");
  if (cfg.ks.empty()) throw ConfigError("k_sweep: ks must be nonempty");
  const auto grid = curve_grid();
  return detail::fan_out(cfg, detail::units_over(cfg, cfg.ks), "k_sweep", "x,f_true,f_hat,T,seed,k\n", true,
                         [&](const detail::Unit& u) {
                           auto data = std::make_shared<const Dataset>(simulate_dataset(simulation_for(cfg, u.T, u.seed)));
                           const auto forest = fit_forest(data, build_config_for(cfg, u.k, 1), cfg.B, forest_seed_for(u.seed));
                           const auto fhat = forest_predict_batch(forest, std::span<const double>(grid));
                           std::string s;
                           for (std::size_t i = 0; i < grid.size(); ++i) {
                             const double x = grid[i];
                             s += format_double(x) + ',' + format_double(f(std::span(&x, 1))) + ',' +
                                  format_double(fhat[i]) + ',' + std::to_string(u.T) + ',' + std::to_string(u.seed) +
                                  ',' + std::to_string(u.k) + '\n';
                           }
                           return s;
                         });
}

/// Mean squared error over the 17 x 17 grid; CSV "T,mse,seed".
inline RunResult run_mse_curve(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto f = builtin_function(cfg.f_name);
  if (f.p != 2) throw ConfigError("mse_curve needs a two-dimensional function");
  ExperimentConfig c = cfg;
  if (c.rho.empty()) c.rho = {0.5, 0.5};
  const auto grid = mse_grid();
  return detail::fan_out(c, detail::units_over(c), "mse_curve", "T,mse,seed\n", false, [&](const detail::Unit& u) {
    auto data = std::make_shared<const Dataset>(simulate_dataset(simulation_for(c, u.T, u.seed)));
    const auto forest = fit_forest(data, build_config_for(c, u.k, 2), c.B, forest_seed_for(u.seed));
    const auto fhat = forest_predict_batch(forest, std::span<const double>(grid));
    CompensatedSum sse;
    for (std::size_t i = 0; i < fhat.size(); ++i) {
      const double e = fhat[i] - f(std::span<const double>(grid).subspan(2 * i, 2));
      sse.add(e * e);
    }
    return std::to_string(u.T) + ',' + format_double(sse.value() / static_cast<double>(fhat.size())) + ',' +
           std::to_string(u.seed) + '\n';
  });
}

inline std::string leaf_report_csv(const DeviationReport& report) {
  std::string s = "tree_id,leaf_id,count,sample_mean,oracle_mean,oracle_hits,oracle_se,deviation\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("nan"); };
  for (const auto& r : report.leaves)
    s += std::to_string(r.tree_id) + ',' + std::to_string(r.leaf_id) + ',' + std::to_string(r.count) + ',' +
         format_double(r.sample_mean) + ',' + opt(r.oracle_mean) + ',' + std::to_string(r.oracle_hits) + ',' +
         opt(r.oracle_se) + ',' + opt(r.deviation) + '\n';
  return s;
}

/// Sup deviation between leaf means and Monte-Carlo conditional means, and the
/// normalised ratio sup_dev sqrt(k) / (ln T)^2; CSV "T,k,sup_dev,ratio,seed".
/// Each unit also writes its full leaf report.
inline RunResult run_concentration(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out = cfg.output_dir;
  auto units = detail::units_over(cfg);
  // One Monte-Carlo path per seed, shared by all T of that seed.
  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::vector<std::shared_ptr<const OracleSample>> mc(seeds.size());
  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t i) {
    OracleConfig ocfg{cfg.n_mc, cfg.burn_in, oracle_seed_for(seeds[i])};
    mc[i] = std::make_shared<const OracleSample>(OracleSample::simulate(simulation_for(cfg, cfg.n_mc, seeds[i]), ocfg));
  });
  const auto mc_for = [&](std::uint64_t seed) {
    return mc[static_cast<std::size_t>(std::find(seeds.begin(), seeds.end(), seed) - seeds.begin())];
  };
  auto r = detail::fan_out(cfg, units, "concentration", "T,k,sup_dev,ratio,seed\n", false, [&](const detail::Unit& u) {
    auto data = std::make_shared<const Dataset>(simulate_dataset(simulation_for(cfg, u.T, u.seed)));
    const auto forest = fit_forest(data, build_config_for(cfg, u.k, data->p()), cfg.B, forest_seed_for(u.seed));
    const auto report = leaf_deviation_report(forest, *mc_for(u.seed));
    write_file_atomic(out / "units" / detail::unit_name("leaf_report", u, false), leaf_report_csv(report));
    return std::to_string(u.T) + ',' + std::to_string(u.k) + ',' + format_double(report.sup_deviation) + ',' +
           format_double(concentration_ratio(report.sup_deviation, u.k, u.T)) + ',' + std::to_string(u.seed) + '\n';
  });
  for (const auto& u : units) r.outputs.push_back(out / "units" / detail::unit_name("leaf_report", u, false));
  r.summary["note"] = kSupApproximationNote;
  return r;
}

/// Histogram check of the transformed-input density; CSV
/// "seed,zeta_bar,zeta,fraction_in_bounds,min_density,max_density,n_samples,n_bins".
inline RunResult run_density_check(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> rows(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const auto rep = density_bound_check(simulation_for(cfg, cfg.n_samples, cfg.seeds[i]), cfg.n_samples, cfg.n_bins);
    rows[i] = std::to_string(cfg.seeds[i]) + ',' + format_double(rep.zeta_bar) + ',' + format_double(rep.zeta) + ',' +
              format_double(rep.fraction_in_bounds) + ',' + format_double(rep.min_density) + ',' +
              format_double(rep.max_density) + ',' + std::to_string(rep.n_samples) + ',' + std::to_string(rep.n_bins) + '\n';
  });
  std::string s = "seed,zeta_bar,zeta,fraction_in_bounds,min_density,max_density,n_samples,n_bins\n";
  for (const auto& row : rows) s += row;
  RunResult r;
  r.outputs.push_back(std::filesystem::path(cfg.output_dir) / "density_check.csv");
  write_file_atomic(r.outputs.back(), s);
  return r;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::Simulate: return run_simulate(cfg);
    case ExperimentKind::EstimationCurves: return run_estimation_curves(cfg);
    case ExperimentKind::KSweep: return run_k_sweep(cfg);
    case ExperimentKind::MseCurve: return run_mse_curve(cfg);
    case ExperimentKind::Concentration: return run_concentration(cfg);
    case ExperimentKind::DensityCheck: return run_density_check(cfg);
  }
  throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------------------
// Assumption diagnostics recorded in manifests.

inline nlohmann::json assumption_diagnostics(const ExperimentConfig& cfg, std::size_t T) {
  const auto f = builtin_function(cfg.f_name);
  const auto noise = cfg.noise.model();
  nlohmann::json d;
  const auto bern = bernstein_report(noise, 20);
  d["A1_bernstein_c"] = noise.bernstein_c();
  d["A1_bernstein_ok_to_m20"] = bern.ok;
  try {
    d["A1_tail_zeta_bar"] = zeta_bar(noise, f.bound_M);
    d["A1_tail_ok"] = true;
  } catch (const ModelError&) {
    d["A1_tail_ok"] = false;
  }
  d["A2_bound_M"] = f.bound_M;
  const std::size_t k = T >= 16 || cfg.k_override ? cfg.k_for(T) : 1;
  const double lt = std::log(static_cast<double>(T));
  d["A3_k_over_logT4"] = static_cast<double>(k) / (lt * lt * lt * lt);
  if (f.lipschitz_C) d["A4_lipschitz_C"] = *f.lipschitz_C;
  d["A5_log_T_over_m_over_log_inv_alpha"] =
      std::log(static_cast<double>(T) / static_cast<double>(cfg.m_factor * k)) / std::log(1.0 / cfg.alpha);
  d["T"] = T;
  d["k"] = k;
  return d;
}

inline nlohmann::json make_manifest(const std::string& subcommand, const ExperimentConfig& cfg, const RunResult& r,
                                    double wall_seconds, const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m;
  m["subcommand"] = subcommand;
  m["version"] = kVersion;
  m["config"] = to_json(cfg);
  m["seeds"] = cfg.seeds;
  m["wall_time_seconds"] = wall_seconds;
  std::vector<std::string> outs;
  for (const auto& p : r.outputs) outs.push_back(p.lexically_relative(cfg.output_dir).generic_string());
  m["outputs"] = outs;
  nlohmann::json diags = nlohmann::json::array();
  for (auto T : cfg.sample_sizes()) {
    try {
      diags.push_back(assumption_diagnostics(cfg, T));
    } catch (const Error&) {
    }
  }
  m["assumptions"] = diags;
  m["summary"] = r.summary;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

}  // namespace nlarf
