// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Heavy criteria run the same experiment runners as the CLI,
// writing into a scratch directory.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlarf/nlarf.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace nlarf;
using nlarf::reference::median;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned g_jobs = 1;
fs::path g_work;

std::vector<std::vector<double>> read_rows(const fs::path& p) {
  std::istringstream is(read_file(p));
  std::string line;
  std::getline(is, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (auto f : split_csv_line(line)) r.push_back(parse_double(f));
    rows.push_back(r);
  }
  return rows;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

ExperimentConfig base(ExperimentKind kind, const std::string& f, const std::string& dir) {
  ExperimentConfig c;
  c.experiment = kind;
  c.f_name = f;
  c.B = 500;
  c.seeds = {1, 2, 3, 4, 5};
  c.output_dir = (g_work / dir).string();
  c.jobs = g_jobs;
  return c;
}

// Configs of criteria 5-7, kept so criterion 10 can replay them.
std::map<int, nlohmann::json> g_manifests;

RunResult run_recorded(int criterion, const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = run_experiment(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto manifest = make_manifest(std::string(to_string(cfg.experiment)), cfg, r, wall);
  write_file_atomic(fs::path(cfg.output_dir) / "manifest.json", manifest.dump(2) + "\n");
  g_manifests[criterion] = manifest;
  return r;
}

Outcome c1_k_schedule() {
  const std::size_t a = k_schedule(400), b = k_schedule(1600), c = k_schedule(6400);
  return {a == 92 && b == 236 && c == 512,
          "k(400)=" + std::to_string(a) + " k(1600)=" + std::to_string(b) + " k(6400)=" + std::to_string(c)};
}

Outcome c2_validity() {
  struct Case {
    std::size_t T, k;
  };
  std::size_t bad = 0, trees = 0, infeasible = 0;
  for (const char* f : {"f1", "f3"})
    for (const Case cs : {Case{400, 92}, Case{1600, 236}, Case{1600, 40}}) {
      SimulationSpec s;
      s.f = builtin_function(f);
      s.T = cs.T;
      s.seed = 2024;
      const auto data = std::make_shared<const Dataset>(simulate_dataset(s));
      const BuildConfig cfg = BuildConfig::with_k(cs.k, 1);
      std::vector<AkmReport> reports(100);
      parallel_for(100, g_jobs, [&](std::size_t b) {
        BuildConfig local = cfg;
        local.seed = derive_seed(77, b);
        RandomStream rng(local.seed);
        reports[b] = validate_akm(grow_tree(*data, local, rng), *data, cfg.alpha, cfg.k, cfg.m);
      });
      for (const auto& r : reports) {
        ++trees;
        infeasible += r.infeasible_leaves;
        bad += r.ok ? 0 : 1;
      }
    }
  return {bad == 0, std::to_string(trees) + " trees, " + std::to_string(bad) + " with violations, " +
                        std::to_string(infeasible) + " flagged infeasible leaves"};
}

Outcome c3_brute_force_tree() {
  SimulationSpec s;
  s.f = builtin_function("f1");
  s.T = 30;
  s.seed = 5;
  const auto data = std::make_shared<const Dataset>(simulate_dataset(s));
  const auto forest = fit_forest(data, BuildConfig::with_k(5, 1), 1, 11);
  const Tree& tree = forest.trees.front();
  RandomStream rng(99);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-6.0, 6.0);
    const Box& region = tree.leaf_of(std::span(&x, 1)).region;
    double sum = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < data->size(); ++t)
      if (region.lo[0] < data->x(t, 0) && data->x(t, 0) <= region.hi[0]) sum += data->y(t), ++n;
    worst = std::max(worst, std::abs(tree_predict(tree, std::span(&x, 1)) - sum / n));
  }
  return {worst <= 1e-12, "max |tree_predict - brute force| = " + fmt(worst) + " over 100 points, " +
                              std::to_string(tree.leaf_count()) + " leaves"};
}

Outcome c4_forest_identity() {
  SimulationSpec s;
  s.f = builtin_function("f3");
  s.T = 1600;
  s.seed = 8;
  const auto data = std::make_shared<const Dataset>(simulate_dataset(s));
  const auto forest = fit_forest(data, BuildConfig::with_k(40, 1), 50, 12, g_jobs);
  RandomStream rng(4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-6.0, 6.0);
    double total = 0.0;
    for (const auto& t : forest.trees) total += tree_predict(t, std::span(&x, 1));
    worst = std::max(worst, std::abs(forest_predict(forest, std::span(&x, 1)) - total / 50.0));
  }
  return {worst <= 1e-12, "max deviation " + fmt(worst) + " over 1000 queries"};
}

Outcome c5_consistency_1d() {
  auto cfg = base(ExperimentKind::EstimationCurves, "f3", "c5");
  cfg.Ts = {400, 1600, 6400};
  const auto r = run_recorded(5, cfg);
  std::map<std::size_t, std::vector<double>> per_T;
  const auto rows = read_rows(r.outputs.front());
  for (std::size_t start = 0; start < rows.size(); start += 401) {
    double s = 0.0;
    for (std::size_t i = start; i < start + 401; ++i) s += std::abs(rows[i][2] - rows[i][1]);
    per_T[static_cast<std::size_t>(rows[start][3])].push_back(s / 401.0);
  }
  std::vector<double> med;
  for (auto T : cfg.Ts) med.push_back(median(per_T[T]));
  return {strictly_decreasing(med), "median mean|f_hat - f| at T=400,1600,6400: " + join(med)};
}

Outcome c6_consistency_2d() {
  auto cfg = base(ExperimentKind::MseCurve, "f5", "c6");
  cfg.Ts = {2500, 40000};
  cfg.rho = {0.5, 0.5};
  const auto r = run_recorded(6, cfg);
  std::map<std::size_t, std::vector<double>> per_T;
  for (const auto& row : read_rows(r.outputs.front())) per_T[static_cast<std::size_t>(row[0])].push_back(row[1]);
  const double a = median(per_T[2500]), b = median(per_T[40000]);
  return {b < a, "median MSE T=2500: " + fmt(a) + ", T=40000: " + fmt(b)};
}

Outcome c7_concentration() {
  auto cfg = base(ExperimentKind::Concentration, "f3", "c7");
  cfg.Ts = {400, 1600, 6400};
  cfg.n_mc = 1'000'000;
  const auto r = run_recorded(7, cfg);
  std::map<std::size_t, std::vector<double>> per_T;
  for (const auto& row : read_rows(r.outputs.front())) per_T[static_cast<std::size_t>(row[0])].push_back(row[3]);
  std::vector<double> med;
  for (auto T : cfg.Ts) med.push_back(median(per_T[T]));
  return {med[2] <= 2.0 * med[0], "median ratio at T=400,1600,6400: " + join(med)};
}

Outcome c8_k_monotone() {
  const std::vector<std::size_t> ks{40, 160, 640};
  std::map<std::size_t, std::vector<double>> per_k;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = base(ExperimentKind::Concentration, "f3", "c8");
    const auto sim = simulation_for(cfg, 1600, seed);
    const auto data = std::make_shared<const Dataset>(simulate_dataset(sim));
    const auto mc = OracleSample::simulate(sim, {1'000'000, 1000, oracle_seed_for(seed)});
    for (auto k : ks) {
      const auto forest = fit_forest(data, BuildConfig::with_k(k, 1), 500, forest_seed_for(seed), g_jobs);
      const auto rep = leaf_deviation_report(forest, mc, g_jobs);
      std::vector<double> dev;
      for (const auto& l : rep.leaves)
        if (l.deviation) dev.push_back(std::abs(*l.deviation));
      per_k[k].push_back(median(dev));
    }
  }
  std::vector<double> med;
  for (auto k : ks) med.push_back(median(per_k[k]));
  return {strictly_decreasing(med), "median per-leaf |deviation| at k=40,160,640: " + join(med)};
}

Outcome c9_density() {
  SimulationSpec s;
  s.f = builtin_function("f1");
  s.seed = 1;
  const auto rep = density_bound_check(s, 1'000'000, 50);
  const double z = zeta_bar(NoiseModel::laplace(1.0), 1.0);
  const double err = std::abs(z - std::exp(2.0));
  return {rep.fraction_in_bounds >= 0.99 && err <= 1e-6,
          "fraction_in_bounds=" + fmt(rep.fraction_in_bounds) + " (zeta=" + fmt(rep.zeta) +
              "), |zeta_bar(L1,1) - e^2|=" + fmt(err)};
}

// Replays the manifests of criteria 5-7 with a different job count and
// compares every CSV byte for byte.
Outcome c10_determinism() {
  if (g_manifests.size() != 3) return {false, "criteria 5-7 did not all run"};
  const unsigned other = g_jobs == 1 ? 2 : 1;
  std::size_t compared = 0, differing = 0;
  for (const auto& [criterion, manifest] : g_manifests) {
    auto cfg = config_from_json(manifest);
    const fs::path first = cfg.output_dir;
    cfg.output_dir = (g_work / ("c10_replay_" + std::to_string(criterion))).string();
    cfg.jobs = other;
    run_experiment(cfg);
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
      if (entry.path().extension() != ".csv") continue;
      const auto rel = fs::relative(entry.path(), first);
      ++compared;
      const fs::path replay = fs::path(cfg.output_dir) / rel;
      if (!fs::exists(replay) || read_file(entry.path()) != read_file(replay)) ++differing;
    }
  }
  return {compared > 0 && differing == 0, std::to_string(compared) + " CSVs compared (jobs " + std::to_string(g_jobs) +
                                               " vs " + std::to_string(other) + "), " + std::to_string(differing) +
                                               " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work;
  std::set<int> only;
  app.add_option("--jobs", g_jobs, "worker threads for forests and experiment units")->default_val(1);
  app.add_option("--work-dir", work, "scratch directory (default: a fresh temp directory)");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (g_jobs == 0) g_jobs = 1;
  g_work = work.empty() ? fs::temp_directory_path() / "nlarf_acceptance" : fs::path(work);
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, c1_k_schedule},      {2, c2_validity},       {3, c3_brute_force_tree}, {4, c4_forest_identity},
      {5, c5_consistency_1d},  {6, c6_consistency_2d}, {7, c7_concentration},   {8, c8_k_monotone},
      {9, c9_density},         {10, c10_determinism}};
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " [" << fmt(secs) << " s]"
              << std::endl;
    failures += o.pass ? 0 : 1;
  }
  if (work.empty()) fs::remove_all(g_work);
  return failures == 0 ? 0 : 1;
}
