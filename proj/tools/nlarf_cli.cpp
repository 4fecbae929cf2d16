// Command-line front end: simulation, fitting, prediction, validation and the
// experiment runners. Exit codes: 0 success, 1 configuration/usage error,
// 2 runtime error (including a failed validation).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlarf/nlarf.hpp"

namespace fs = std::filesystem;
using namespace nlarf;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string f_name;
  std::string noise_kind;
  double noise_scale = 1.0;
  double bernstein_c = 0.0;
  std::vector<std::size_t> Ts;
  std::size_t B = 0;
  double alpha = 0.0;
  std::vector<double> rho;
  std::size_t k_override = 0;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  std::size_t burn_in = 0;
  std::size_t n_mc = 0;
  unsigned jobs = 1;
  std::string split_rule;
  std::size_t m_factor = 2;
  std::vector<std::size_t> ks;
  std::size_t n_samples = 0;
  std::size_t n_bins = 0;

  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_path, "JSON config file (or a previous run's manifest.json)");
    opts["f_name"] = app->add_option("--f-name,--f", f_name, "regression function: f1..f5, zero, zero2");
    opts["noise"] = app->add_option("--noise", noise_kind, "noise law: laplace | gaussian");
    opts["noise_scale"] = app->add_option("--noise-scale", noise_scale, "Laplace scale b or Gaussian sigma");
    opts["bernstein_c"] = app->add_option("--bernstein-c", bernstein_c, "Bernstein constant witness c");
    opts["Ts"] = app->add_option("--Ts,--T", Ts, "sample sizes")->delimiter(',');
    opts["B"] = app->add_option("--B", B, "number of trees");
    opts["alpha"] = app->add_option("--alpha", alpha, "balance fraction alpha in (0, 1/2)");
    opts["rho"] = app->add_option("--rho", rho, "split-direction probabilities")->delimiter(',');
    opts["k_override"] = app->add_option("--k-override", k_override, "minimum leaf size (default: k schedule)");
    opts["seeds"] = app->add_option("--seeds,--seed", seeds, "run seeds")->delimiter(',');
    opts["output_dir"] = app->add_option("--output-dir,--out", output_dir, "output directory");
    opts["burn_in"] = app->add_option("--burn-in", burn_in, "discarded initial steps");
    opts["n_mc"] = app->add_option("--n-mc", n_mc, "Monte-Carlo oracle path length");
    opts["jobs"] = app->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    opts["split_rule"] = app->add_option("--split-rule", split_rule, "extratrees | variance");
    opts["m_factor"] = app->add_option("--m-factor", m_factor, "m = m_factor * k");
    opts["ks"] = app->add_option("--ks", ks, "leaf sizes for k-sweep")->delimiter(',');
    opts["n_samples"] = app->add_option("--n-samples", n_samples, "samples for density-check");
    opts["n_bins"] = app->add_option("--n-bins", n_bins, "bins per axis for density-check");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  ExperimentConfig resolve(ExperimentKind kind) const {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
      cfg = load_config(config_path, cfg);
      cfg.experiment = kind;
    }
    if (given("f_name")) cfg.f_name = f_name;
    if (given("noise")) cfg.noise.kind = noise_kind_from_string(noise_kind);
    if (given("noise_scale")) cfg.noise.scale = noise_scale;
    if (given("bernstein_c")) cfg.noise.bernstein_c = bernstein_c;
    if (given("Ts")) cfg.Ts = Ts;
    if (given("B")) cfg.B = B;
    if (given("alpha")) cfg.alpha = alpha;
    if (given("rho")) cfg.rho = rho;
    if (given("k_override")) cfg.k_override = k_override;
    if (given("seeds")) cfg.seeds = seeds;
    if (given("output_dir")) cfg.output_dir = output_dir;
    if (given("burn_in")) cfg.burn_in = burn_in;
    if (given("n_mc")) cfg.n_mc = n_mc;
    if (given("jobs")) cfg.jobs = jobs;
    if (given("split_rule")) cfg.split_rule = split_rule_from_string(split_rule);
    if (given("m_factor")) cfg.m_factor = m_factor;
    if (given("ks")) cfg.ks = ks;
    if (given("n_samples")) cfg.n_samples = n_samples;
    if (given("n_bins")) cfg.n_bins = n_bins;
    cfg.validate();
    return cfg;
  }
};

std::shared_ptr<const Dataset> load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open dataset " + path);
  return std::make_shared<const Dataset>(read_dataset_csv(is));
}

void write_manifest(const std::string& sub, const ExperimentConfig& cfg, const RunResult& r,
                    std::chrono::steady_clock::time_point start, const nlohmann::json& extra = nlohmann::json::object()) {
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file_atomic(fs::path(cfg.output_dir) / "manifest.json", make_manifest(sub, cfg, r, wall, extra).dump(2) + "\n");
}

int cmd_fit(const ExperimentConfig& cfg, const std::string& data_path) {
  const auto start = std::chrono::steady_clock::now();
  std::shared_ptr<const Dataset> data;
  RunResult r;
  nlohmann::json extra;
  if (!data_path.empty()) {
    data = load_dataset(data_path);
    extra["data"] = data_path;
  } else {
    const std::size_t T = cfg.sample_sizes().front();
    data = std::make_shared<const Dataset>(simulate_dataset(simulation_for(cfg, T, cfg.seeds.front())));
    std::ostringstream os;
    write_dataset_csv(os, *data);
    r.outputs.push_back(fs::path(cfg.output_dir) / "data.csv");
    write_file_atomic(r.outputs.back(), os.str());
  }
  const std::size_t k = cfg.k_for(data->size());
  const auto forest = fit_forest(data, build_config_for(cfg, k, data->p()), cfg.B, forest_seed_for(cfg.seeds.front()), cfg.jobs);
  save_forest(forest, fs::path(cfg.output_dir) / "forest");
  r.outputs.push_back(fs::path(cfg.output_dir) / "forest" / "forest.json");
  extra["k"] = k;
  extra["m"] = forest.config.m;
  extra["master_seed"] = forest.master_seed;
  write_manifest("fit", cfg, r, start, extra);
  std::cout << "fitted " << forest.B << " trees (T = " << data->size() << ", k = " << k << ") into "
            << (fs::path(cfg.output_dir) / "forest").string() << '\n';
  return 0;
}

int cmd_predict(const ExperimentConfig& cfg, const std::string& forest_dir, const std::string& data_path,
                const std::string& points_path) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = load_dataset(data_path);
  const auto forest = load_forest(forest_dir, data);
  const std::size_t p = forest.p();
  std::vector<double> xs;
  if (!points_path.empty()) {
    std::ifstream is(points_path);
    if (!is) throw ConfigError("cannot open points file " + points_path);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != p) throw ShapeError("points file row has " + std::to_string(fields.size()) + " columns, expected p");
      for (auto f : fields) xs.push_back(parse_double(f));
    }
  } else {
    xs = p == 1 ? curve_grid() : mse_grid();
    if (p > 2) throw ConfigError("predict: --points is required for p > 2");
  }
  const auto yhat = forest_predict_batch(forest, std::span<const double>(xs), cfg.jobs);
  std::string s;
  for (std::size_t j = 1; j <= p; ++j) s += "x" + std::to_string(j) + ",";
  s += "f_hat\n";
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) s += format_double(xs[i * p + j]) + ',';
    s += format_double(yhat[i]) + '\n';
  }
  RunResult r;
  r.outputs.push_back(fs::path(cfg.output_dir) / "predictions.csv");
  write_file_atomic(r.outputs.back(), s);
  write_manifest("predict", cfg, r, start, {{"forest", forest_dir}, {"data", data_path}});
  return 0;
}

int cmd_validate(const ExperimentConfig& cfg, const std::string& forest_dir, const std::string& data_path,
                 std::size_t k, std::size_t m) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = load_dataset(data_path);
  const auto forest = load_forest(forest_dir, data);
  if (m == 0) m = 2 * k;
  std::string s = "tree_id,ok,rule_i,rule_iii,rule_iv,count_mismatch,infeasible_leaves\n";
  std::size_t bad = 0;
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    const auto rep = validate_akm(forest.trees[b], *data, cfg.alpha, k, m);
    bad += rep.ok ? 0 : 1;
    s += std::to_string(b) + ',' + (rep.ok ? "1" : "0") + ',' + std::to_string(rep.count(Rule::MaxLeaf)) + ',' +
         std::to_string(rep.count(Rule::Balance)) + ',' + std::to_string(rep.count(Rule::MinLeaf)) + ',' +
         std::to_string(rep.count(Rule::Count)) + ',' + std::to_string(rep.infeasible_leaves) + '\n';
  }
  RunResult r;
  r.outputs.push_back(fs::path(cfg.output_dir) / "validation.csv");
  write_file_atomic(r.outputs.back(), s);
  write_manifest("validate", cfg, r, start,
                 {{"forest", forest_dir}, {"data", data_path}, {"k", k}, {"m", m}, {"trees_failing", bad}});
  if (bad == 0) {
    std::cout << "all ok: " << forest.trees.size() << " trees satisfy (alpha=" << cfg.alpha << ", k=" << k
              << ", m=" << m << ")\n";
    return 0;
  }
  std::cout << bad << " of " << forest.trees.size() << " trees violate (alpha, k, m)-validity; see "
            << r.outputs.front().string() << '\n';
  return 2;
}

int cmd_experiment(const std::string& sub, const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_experiment(cfg);
  write_manifest(sub, cfg, r, start);
  std::cout << sub << ": wrote " << r.outputs.size() << " file(s) to " << cfg.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random forests for nonlinear autoregressive time series"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  struct Sub {
    std::string name;
    std::string help;
    ExperimentKind kind;
  };
  const std::vector<Sub> subs = {
      {"simulate", "simulate NLAR datasets to CSV", ExperimentKind::Simulate},
      {"fit", "fit a forest and save it", ExperimentKind::EstimationCurves},
      {"predict", "predict with a saved forest", ExperimentKind::EstimationCurves},
      {"estimation-curves", "forest estimate vs f on [-2, 2]", ExperimentKind::EstimationCurves},
      {"k-sweep", "estimate at fixed T for several k", ExperimentKind::KSweep},
      {"mse-curve", "grid MSE of the 2-d function vs T", ExperimentKind::MseCurve},
      {"concentration", "sup leaf deviation from Monte-Carlo oracle vs T", ExperimentKind::Concentration},
      {"density-check", "transformed-input density bounds", ExperimentKind::DensityCheck},
      {"validate", "check (alpha, k, m)-validity of a saved forest", ExperimentKind::EstimationCurves},
  };
  std::vector<CommonOptions> common(subs.size());
  std::vector<CLI::App*> apps;
  std::string forest_dir, data_path, points_path;
  std::size_t check_k = 0, check_m = 0;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto* sc = app.add_subcommand(subs[i].name, subs[i].help);
    common[i].attach(sc);
    apps.push_back(sc);
    const auto& n = subs[i].name;
    if (n == "fit" || n == "predict" || n == "validate") sc->add_option("--data", data_path, "dataset CSV");
    if (n == "predict" || n == "validate") sc->add_option("--forest", forest_dir, "saved forest directory")->required();
    if (n == "predict") sc->add_option("--points", points_path, "CSV of query points (header x1,...,xp)");
    if (n == "validate") {
      sc->add_option("--k", check_k, "minimum leaf size to check")->required();
      sc->add_option("--m", check_m, "split threshold to check (default 2k)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 1;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!apps[i]->parsed()) continue;
      const auto& n = subs[i].name;
      const ExperimentConfig cfg = common[i].resolve(subs[i].kind);
      if (n == "fit") return cmd_fit(cfg, data_path);
      if (n == "predict") {
        if (data_path.empty()) throw ConfigError("predict: --data is required");
        return cmd_predict(cfg, forest_dir, data_path, points_path);
      }
      if (n == "validate") {
        if (data_path.empty()) throw ConfigError("validate: --data is required");
        return cmd_validate(cfg, forest_dir, data_path, check_k, check_m);
      }
      return cmd_experiment(n, cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
