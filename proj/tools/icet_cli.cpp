#include "icet/icet_solver.hpp"
#include "icet/monte_carlo.hpp"
#include "icet/ndt.hpp"
#include "icet/scan_io.hpp"
#include "icet/simulator.hpp"
#include "icet/voxel_grid.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace icet;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string env = "t-intersection";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string algo = "both";
  std::optional<double> voxel_width;
  std::optional<std::string> correspondence;
  std::string out = ".";
};

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// "t-intersection", "tunnel" or "custom:<file>" with a segment list.
void apply_env(ScenarioConfig& cfg, const std::string& spec) {
  const std::string prefix = "custom:";
  if (spec.rfind(prefix, 0) == 0) {
    cfg.environment = EnvironmentKind::custom;
    cfg.custom_environment = environment_from_json(read_json(spec.substr(prefix.size())));
  } else {
    cfg.environment = environment_kind_from_string(spec);
  }
}

void apply_grid_flags(GridConfig& grid, const Common& c) {
  if (c.voxel_width) grid.voxel_width = *c.voxel_width;
  if (c.correspondence) grid.correspondence = correspondence_mode_from_string(*c.correspondence);
}

void warn_voxel_width(double a, double sigma) {
  if (auto w = voxel_width_warning(a, sigma)) std::cerr << "warning: " << *w << '\n';
}

void add_grid_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--voxel-width", c.voxel_width, "Voxel edge length a");
  cmd->add_option("--correspondence", c.correspondence, "colocated or nn")
      ->check(CLI::IsMember({"colocated", "nn"}));
}

StateVector parse_state(const std::vector<double>& v) {
  return v.empty() ? StateVector{} : StateVector{v.at(0), v.at(1), v.at(2)};
}

int run_simulate(const Common& c, const std::vector<double>& truth, double sigma) {
  ScenarioConfig cfg;
  apply_env(cfg, c.env);
  if (!truth.empty()) cfg.truth = parse_state(truth);
  cfg.scan.noise_sigma = sigma;
  if (c.seed) cfg.base_seed = *c.seed;
  const std::size_t n = c.trials.value_or(1);
  const Environment env = cfg.build();
  fs::create_directories(c.out);
  for (std::size_t i = 0; i < n; ++i) {
    const TrialSpec spec = cfg.trial_spec(i);
    const TrialPair pair = generate_trial_pair(env, spec, cfg.scan);
    const std::map<std::string, std::string> meta{
        {"truth", std::to_string(pair.truth.x) + " " + std::to_string(pair.truth.y) + " " +
                      std::to_string(pair.truth.theta)},
        {"ref_seed", std::to_string(spec.ref_seed)},
        {"new_seed", std::to_string(spec.new_seed)}};
    const std::string stem = n == 1 ? "" : "_" + std::to_string(i);
    const fs::path ref = fs::path(c.out) / ("ref" + stem + ".csv");
    const fs::path fresh = fs::path(c.out) / ("new" + stem + ".csv");
    save_scan(ref.string(), pair.ref, meta);
    save_scan(fresh.string(), pair.fresh, meta);
    std::cout << ref.string() << ' ' << fresh.string() << '\n';
  }
  return 0;
}

int run_match(const Common& c, const std::string& ref_path, const std::string& new_path,
              const std::vector<double>& x0, double sigma, bool log) {
  const Scan ref = load_scan(ref_path).scan;
  const Scan fresh = load_scan(new_path).scan;
  GridConfig grid;
  apply_grid_flags(grid, c);
  grid.validate();
  warn_voxel_width(grid.voxel_width, sigma);
  const StateVector start = parse_state(x0);
  const Algorithm algo = algorithm_from_string(c.algo);

  nlohmann::json out;
  if (algo != Algorithm::ndt) {
    IcetConfig cfg;
    cfg.record_log = log;
    out["icet"] = solution_to_json(icet_match(ref, fresh, grid, cfg, start), log);
  }
  if (algo != Algorithm::icet) {
    NdtConfig cfg;
    cfg.grid = grid;
    out["ndt"] = ndt_result_to_json(ndt_match(ref, fresh, cfg, start));
  }
  if (algo != Algorithm::both) out = out.begin().value();
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_benchmark(const Common& c, const std::string& config_path, bool env_flag,
                  std::optional<unsigned> threads) {
  ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : scenario_from_json(read_json(config_path));
  if (config_path.empty() || env_flag) apply_env(cfg, c.env);
  if (c.trials) cfg.trials = *c.trials;
  if (c.seed) cfg.base_seed = *c.seed;
  cfg.algorithms = algorithm_from_string(c.algo);
  apply_grid_flags(cfg.grid, c);
  if (threads) cfg.threads = *threads;
  cfg.validate();
  warn_voxel_width(cfg.grid.voxel_width, cfg.scan.noise_sigma);

  const McReport rep = run_monte_carlo(cfg);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(rep).dump(2) + "\n");
  {
    std::ofstream os(dir / "records.csv");
    write_records_csv(os, rep.records);
  }
  {
    std::ofstream os(dir / "histograms.csv");
    write_error_histograms_csv(os, rep.records);
  }
  {
    std::ofstream os(dir / "ellipses.csv");
    write_ellipses_csv(os, cfg);
  }
  std::cout << render_comparison_table(rep, std::string(to_string(cfg.environment)));
  return 0;
}

// Each argument is a benchmark output directory; tables are rebuilt from
// records.csv so they never disagree with the raw data.
int run_compare(const std::vector<std::string>& dirs) {
  for (const auto& d : dirs) {
    const fs::path dir(d);
    const auto report = read_json(dir / "report.json");
    std::ifstream in(dir / "records.csv");
    if (!in) throw std::runtime_error("cannot open " + (dir / "records.csv").string());
    const McReport rep = summarize(read_records_csv(in), report.at("scenario"));
    const std::string title = report["scenario"].value("environment", dir.filename().string());
    std::cout << render_comparison_table(rep, title) << '\n';
  }
  return 0;
}

int run_voxels(const Common& c, const std::string& scan_path) {
  GridConfig grid;
  apply_grid_flags(grid, c);
  grid.validate();
  const ReferenceMap ref(build_grid(load_scan(scan_path).scan, grid), grid);
  std::cout << voxels_to_json(ref).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICET and NDT 2D scan matching"};
  app.require_subcommand(1);
  Common c;

  auto* sim = app.add_subcommand("simulate", "Generate reference/new scan pairs");
  std::vector<double> truth;
  double sim_sigma = 2.0;
  sim->add_option("--env", c.env, "t-intersection, tunnel or custom:<file>");
  sim->add_option("--trials", c.trials, "Number of pairs");
  sim->add_option("--seed", c.seed, "Base seed");
  sim->add_option("--truth", truth, "True transform x y theta")->expected(3);
  sim->add_option("--sigma", sim_sigma, "Range noise std");
  sim->add_option("--out", c.out, "Output directory");

  auto* match = app.add_subcommand("match", "Register one scan pair, JSON to stdout");
  std::string ref_path;
  std::string new_path;
  std::vector<double> x0;
  double match_sigma = 2.0;
  bool log = false;
  match->add_option("--ref", ref_path, "Reference scan file")->required();
  match->add_option("--new", new_path, "New scan file")->required();
  match->add_option("--algo", c.algo, "icet, ndt or both")->check(CLI::IsMember({"icet", "ndt", "both"}));
  match->add_option("--x0", x0, "Initial guess x y theta")->expected(3);
  match->add_option("--sigma", match_sigma, "Lidar noise std for the voxel width check");
  match->add_flag("--log", log, "Include per-iteration log");
  add_grid_options(match, c);

  auto* bench = app.add_subcommand("benchmark", "Monte-Carlo comparison");
  std::string config_path;
  std::optional<unsigned> threads;
  bench->add_option("--config", config_path, "Scenario JSON");
  bench->add_option("--env", c.env, "t-intersection, tunnel or custom:<file>");
  bench->add_option("--trials", c.trials, "Number of trials");
  bench->add_option("--seed", c.seed, "Base seed");
  bench->add_option("--algo", c.algo, "icet, ndt or both")->check(CLI::IsMember({"icet", "ndt", "both"}));
  bench->add_option("--threads", threads, "Worker threads, 0 for all cores");
  bench->add_option("--out", c.out, "Output directory");
  add_grid_options(bench, c);

  auto* compare = app.add_subcommand("compare", "Render comparison tables from benchmark outputs");
  std::vector<std::string> dirs;
  compare->add_option("dirs", dirs, "Benchmark output directories")->required();

  auto* vox = app.add_subcommand("voxels", "Dump voxel statistics and pruning for a scan");
  std::string scan_path;
  vox->add_option("scan", scan_path, "Scan file")->required();
  add_grid_options(vox, c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_simulate(c, truth, sim_sigma);
    if (*match) return run_match(c, ref_path, new_path, x0, match_sigma, log);
    if (*bench) return run_benchmark(c, config_path, bench->count("--env") > 0, threads);
    if (*compare) return run_compare(dirs);
    if (*vox) return run_voxels(c, scan_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
