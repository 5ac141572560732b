#include "icet/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace icet {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::icet: return "icet";
    case Algorithm::ndt: return "ndt";
    case Algorithm::both: return "both";
  }
  return "both";
}

Algorithm algorithm_from_string(std::string_view s) {
  if (s == "icet") return Algorithm::icet;
  if (s == "ndt") return Algorithm::ndt;
  if (s == "both") return Algorithm::both;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool runs_icet(Algorithm a) { return a != Algorithm::ndt; }
bool runs_ndt(Algorithm a) { return a != Algorithm::icet; }

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void ScenarioConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trial count must be at least 1");
  if (environment == EnvironmentKind::custom && !custom_environment) {
    throw std::invalid_argument("custom environment requires a segment list");
  }
  scan.validate();
  grid.validate();
  icet.validate();
  ndt.validate();
}

Environment ScenarioConfig::build() const {
  if (environment == EnvironmentKind::custom) {
    if (!custom_environment) throw std::invalid_argument("custom environment missing");
    return *custom_environment;
  }
  return build_environment(environment, environment_params);
}

TrialSpec ScenarioConfig::trial_spec(std::size_t i) const {
  const std::uint64_t s = base_seed + i;
  TrialSpec t;
  t.true_transform = truth;
  t.ref_seed = splitmix64(2 * s);
  t.new_seed = splitmix64(2 * s + 1);
  return t;
}

nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  const auto& p = cfg.environment_params;
  nlohmann::json j;
  j["environment"] = to_string(cfg.environment);
  j["environment_params"] = {{"width", p.width},
                             {"length", p.length},
                             {"cross_width", p.cross_width},
                             {"junction_offset", p.junction_offset},
                             {"stem_back", p.stem_back},
                             {"cross_half_length", p.cross_half_length}};
  if (cfg.custom_environment) j["custom_environment"] = environment_to_json(*cfg.custom_environment);
  j["trials"] = cfg.trials;
  j["truth"] = {{"x", cfg.truth.x}, {"y", cfg.truth.y}, {"theta", cfg.truth.theta}};
  j["scan"] = {{"beam_count", cfg.scan.beam_count},
               {"noise_sigma", cfg.scan.noise_sigma},
               {"max_range", cfg.scan.max_range}};
  j["grid"] = {{"voxel_width", cfg.grid.voxel_width},
               {"origin", {cfg.grid.origin.x(), cfg.grid.origin.y()}},
               {"min_points", cfg.grid.min_points},
               {"eigen_threshold", cfg.grid.threshold()},
               {"correspondence", to_string(cfg.grid.correspondence)},
               {"nn_radius", cfg.grid.radius()}};
  j["icet"] = {{"max_iterations", cfg.icet.max_iterations},
               {"translation_tol", cfg.icet.translation_tol},
               {"rotation_tol", cfg.icet.rotation_tol},
               {"condition_cutoff", cfg.icet.condition_cutoff},
               {"r_jitter", cfg.icet.jitter(cfg.grid.voxel_width)}};
  j["ndt"] = {{"max_iterations", cfg.ndt.max_iterations},
              {"translation_tol", cfg.ndt.translation_tol},
              {"rotation_tol", cfg.ndt.rotation_tol},
              {"eig_floor_ratio", cfg.ndt.eig_floor_ratio},
              {"max_halvings", cfg.ndt.max_halvings}};
  j["base_seed"] = cfg.base_seed;
  j["algorithms"] = to_string(cfg.algorithms);
  return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  if (j.contains("environment")) {
    cfg.environment = environment_kind_from_string(j.at("environment").get<std::string>());
  }
  if (j.contains("environment_params")) {
    const auto& e = j.at("environment_params");
    auto& p = cfg.environment_params;
    p.width = e.value("width", p.width);
    p.length = e.value("length", p.length);
    p.cross_width = e.value("cross_width", p.cross_width);
    p.junction_offset = e.value("junction_offset", p.junction_offset);
    p.stem_back = e.value("stem_back", p.stem_back);
    p.cross_half_length = e.value("cross_half_length", p.cross_half_length);
  }
  if (j.contains("custom_environment")) {
    cfg.custom_environment = environment_from_json(j.at("custom_environment"));
  }
  cfg.trials = j.value("trials", cfg.trials);
  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    cfg.truth = StateVector(t.value("x", 0.0), t.value("y", 0.0), t.value("theta", 0.0));
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    cfg.scan.beam_count = s.value("beam_count", cfg.scan.beam_count);
    cfg.scan.noise_sigma = s.value("noise_sigma", cfg.scan.noise_sigma);
    cfg.scan.max_range = s.value("max_range", cfg.scan.max_range);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    cfg.grid.voxel_width = g.value("voxel_width", cfg.grid.voxel_width);
    if (g.contains("origin")) {
      cfg.grid.origin = Point2(g.at("origin").at(0).get<double>(), g.at("origin").at(1).get<double>());
    }
    cfg.grid.min_points = g.value("min_points", cfg.grid.min_points);
    if (g.contains("eigen_threshold")) cfg.grid.eigen_threshold = g.at("eigen_threshold").get<double>();
    if (g.contains("correspondence")) {
      cfg.grid.correspondence =
          correspondence_mode_from_string(g.at("correspondence").get<std::string>());
    }
    if (g.contains("nn_radius")) cfg.grid.nn_radius = g.at("nn_radius").get<double>();
  }
  if (j.contains("icet")) {
    const auto& c = j.at("icet");
    cfg.icet.max_iterations = c.value("max_iterations", cfg.icet.max_iterations);
    cfg.icet.translation_tol = c.value("translation_tol", cfg.icet.translation_tol);
    cfg.icet.rotation_tol = c.value("rotation_tol", cfg.icet.rotation_tol);
    cfg.icet.condition_cutoff = c.value("condition_cutoff", cfg.icet.condition_cutoff);
    if (c.contains("r_jitter")) cfg.icet.r_jitter = c.at("r_jitter").get<double>();
  }
  if (j.contains("ndt")) {
    const auto& n = j.at("ndt");
    cfg.ndt.max_iterations = n.value("max_iterations", cfg.ndt.max_iterations);
    cfg.ndt.translation_tol = n.value("translation_tol", cfg.ndt.translation_tol);
    cfg.ndt.rotation_tol = n.value("rotation_tol", cfg.ndt.rotation_tol);
    cfg.ndt.eig_floor_ratio = n.value("eig_floor_ratio", cfg.ndt.eig_floor_ratio);
    cfg.ndt.max_halvings = n.value("max_halvings", cfg.ndt.max_halvings);
  }
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  if (j.contains("algorithms")) {
    cfg.algorithms = algorithm_from_string(j.at("algorithms").get<std::string>());
  }
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

namespace {

Vector3 state_error(const StateVector& est, const StateVector& truth) {
  return {est.x - truth.x, est.y - truth.y, normalize_angle(est.theta - truth.theta)};
}

AlgoRecord icet_record(const IcetSolution& sol, const StateVector& truth) {
  AlgoRecord r;
  r.ok = true;
  r.error = state_error(sol.estimate, truth);
  r.iterations = sol.iterations;
  r.converged = sol.converged;
  r.has_prediction = true;
  r.used_subspace = sol.used_subspace;
  for (int k = 0; k < 3; ++k) {
    r.excluded[k] = sol.axis_excluded(k);
    r.predicted_std(k) = r.excluded[k] ? nan_value : std::sqrt(sol.covariance.matrix(k, k));
  }
  if (sol.covariance.reduced) {
    const auto& red = *sol.covariance.reduced;
    const Eigen::VectorXd z = red.basis.transpose() * r.error;
    r.nees = z.dot(red.cov.ldlt().solve(z));
    r.nees_dof = static_cast<int>(red.basis.cols());
    r.excluded_angle_deg = sol.excluded_translation_angles_deg().front();
  } else {
    r.nees = r.error.dot(sol.covariance.matrix.ldlt().solve(r.error));
    r.nees_dof = 3;
  }
  return r;
}

AlgoRecord failed(const std::string& why) {
  AlgoRecord r;
  r.ok = false;
  r.failure = why;
  r.error.setConstant(nan_value);
  r.predicted_std.setConstant(nan_value);
  return r;
}

}  // namespace

TrialRecord run_trial(const ScenarioConfig& cfg, const Environment& env, std::size_t index) {
  TrialRecord rec;
  rec.trial = index;
  const TrialSpec spec = cfg.trial_spec(index);
  rec.ref_seed = spec.ref_seed;
  rec.new_seed = spec.new_seed;

  std::optional<TrialPair> pair;
  std::string gen_error;
  try {
    spec.validate();
    pair = generate_trial_pair(env, spec, cfg.scan);
  } catch (const std::exception& e) {
    gen_error = std::string("scan generation: ") + e.what();
  }

  if (runs_icet(cfg.algorithms)) {
    if (!pair) {
      rec.icet = failed(gen_error);
    } else {
      try {
        rec.icet = icet_record(icet_match(pair->ref, pair->fresh, cfg.grid, cfg.icet), spec.true_transform);
      } catch (const std::exception& e) {
        rec.icet = failed(e.what());
      }
    }
  }
  if (runs_ndt(cfg.algorithms)) {
    if (!pair) {
      rec.ndt = failed(gen_error);
    } else {
      try {
        NdtConfig ncfg = cfg.ndt;
        ncfg.grid = cfg.grid;
        const NdtResult res = ndt_match(pair->ref, pair->fresh, ncfg);
        AlgoRecord r;
        r.ok = true;
        r.error = state_error(res.estimate, spec.true_transform);
        r.iterations = res.iterations;
        r.converged = res.converged;
        r.predicted_std.setConstant(nan_value);
        rec.ndt = r;
      } catch (const std::exception& e) {
        rec.ndt = failed(e.what());
      }
    }
  }
  return rec;
}

AxisStats sample_statistics(std::span<const double> values) {
  if (values.empty()) throw std::domain_error("statistics of an empty sample");
  AxisStats s;
  s.available = true;
  s.count = values.size();
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / double(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

namespace {

const std::optional<AlgoRecord>& pick(const TrialRecord& r, Algorithm which) {
  return which == Algorithm::ndt ? r.ndt : r.icet;
}

}  // namespace

std::array<AxisStats, 3> error_statistics(std::span<const TrialRecord> records, Algorithm which) {
  if (records.empty()) throw std::domain_error("no records");
  std::array<AxisStats, 3> out;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> vals;
    for (const auto& rec : records) {
      const auto& a = pick(rec, which);
      if (!a || !a->ok || a->excluded[k]) continue;
      vals.push_back(a->error(k));
    }
    if (!vals.empty()) out[k] = sample_statistics(vals);
  }
  return out;
}

Consistency consistency_check(std::span<const TrialRecord> records) {
  Consistency c;
  double nees_sum = 0.0;
  double dof_sum = 0.0;
  std::size_t n = 0;
  std::array<std::vector<double>, 3> pred;
  for (const auto& rec : records) {
    if (!rec.icet || !rec.icet->ok || !rec.icet->has_prediction) continue;
    nees_sum += rec.icet->nees;
    dof_sum += rec.icet->nees_dof;
    ++n;
    for (int k = 0; k < 3; ++k) {
      if (!rec.icet->excluded[k]) pred[k].push_back(rec.icet->predicted_std(k));
    }
  }
  if (n == 0) return c;
  c.nees_mean = nees_sum / double(n);
  c.mean_nees_dof = dof_sum / double(n);
  const auto actual = error_statistics(records, Algorithm::icet);
  for (int k = 0; k < 3; ++k) {
    if (pred[k].empty() || !actual[k].available) continue;
    const double mp = sample_statistics(pred[k]).mean;
    c.mean_predicted_std[k] = mp;
    if (mp > 0.0) c.ratio[k] = actual[k].std / mp;
  }
  return c;
}

namespace {

AlgoSummary summarize_algo(std::span<const TrialRecord> records, Algorithm which) {
  AlgoSummary s;
  std::size_t subspace = 0;
  for (const auto& rec : records) {
    const auto& a = pick(rec, which);
    if (!a) continue;
    ++s.attempted;
    if (!a->ok) {
      ++s.failures;
      continue;
    }
    if (a->used_subspace) {
      ++subspace;
      const int bin = std::clamp(static_cast<int>(std::floor(a->excluded_angle_deg)), 0, 179);
      ++s.excluded_angle_histogram[bin];
    }
  }
  if (s.attempted > s.failures) s.error = error_statistics(records, which);
  if (which == Algorithm::icet) {
    s.consistency = consistency_check(records);
    const std::size_t ok = s.attempted - s.failures;
    s.ambiguity_rate = ok ? double(subspace) / double(ok) : 0.0;
  }
  return s;
}

}  // namespace

McReport summarize(std::vector<TrialRecord> records, nlohmann::json scenario) {
  McReport rep;
  rep.scenario = std::move(scenario);
  rep.records = std::move(records);
  const bool any_icet = std::any_of(rep.records.begin(), rep.records.end(),
                                    [](const TrialRecord& r) { return r.icet.has_value(); });
  const bool any_ndt = std::any_of(rep.records.begin(), rep.records.end(),
                                   [](const TrialRecord& r) { return r.ndt.has_value(); });
  if (any_icet) rep.icet = summarize_algo(rep.records, Algorithm::icet);
  if (any_ndt) rep.ndt = summarize_algo(rep.records, Algorithm::ndt);
  return rep;
}

McReport run_monte_carlo(const ScenarioConfig& cfg) {
  cfg.validate();
  const Environment env = cfg.build();
  std::vector<TrialRecord> records(cfg.trials);

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.trials));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.trials; i = next++) records[i] = run_trial(cfg, env, i);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  McReport rep = summarize(std::move(records), scenario_to_json(cfg));
  for (const auto* s : {rep.icet ? &*rep.icet : nullptr, rep.ndt ? &*rep.ndt : nullptr}) {
    if (s && s->failures * 10 > s->attempted) {
      throw std::runtime_error("more than 10% of Monte-Carlo trials failed (" +
                               std::to_string(s->failures) + " of " +
                               std::to_string(s->attempted) + ")");
    }
  }
  return rep;
}

namespace {

nlohmann::json axis_json(const AxisStats& s) {
  if (!s.available) return nullptr;
  return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json summary_json(const AlgoSummary& s) {
  nlohmann::json j;
  j["attempted"] = s.attempted;
  j["failures"] = s.failures;
  j["error"] = {{"x", axis_json(s.error[0])}, {"y", axis_json(s.error[1])},
                {"theta", axis_json(s.error[2])}};
  if (s.consistency) {
    const auto& c = *s.consistency;
    j["predicted_std"] = {{"x", opt_json(c.mean_predicted_std[0])},
                          {"y", opt_json(c.mean_predicted_std[1])},
                          {"theta", opt_json(c.mean_predicted_std[2])}};
    j["actual_to_predicted_ratio"] = {
        {"x", opt_json(c.ratio[0])}, {"y", opt_json(c.ratio[1])}, {"theta", opt_json(c.ratio[2])}};
    j["nees_mean"] = opt_json(c.nees_mean);
    j["nees_mean_dof"] = c.mean_nees_dof;
    j["ambiguity_detection_rate"] = s.ambiguity_rate;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [bin, count] : s.excluded_angle_histogram) hist[std::to_string(bin)] = count;
    j["excluded_angle_histogram_deg"] = hist;
  } else {
    j["predicted_std"] = nullptr;
  }
  return j;
}

}  // namespace

nlohmann::json report_to_json(const McReport& report) {
  nlohmann::json j;
  j["scenario"] = report.scenario;
  j["trials"] = report.records.size();
  j["icet"] = report.icet ? summary_json(*report.icet) : nlohmann::json(nullptr);
  j["ndt"] = report.ndt ? summary_json(*report.ndt) : nlohmann::json(nullptr);
  return j;
}

namespace {

const char* const csv_header =
    "trial,ref_seed,new_seed,algo,ok,failure,err_x,err_y,err_theta,iterations,converged,"
    "has_prediction,pred_std_x,pred_std_y,pred_std_theta,excl_x,excl_y,excl_theta,"
    "used_subspace,excluded_angle_deg,nees,nees_dof";

void write_row(std::ostream& os, const TrialRecord& t, const char* algo, const AlgoRecord& a) {
  std::string why = a.failure;
  std::replace(why.begin(), why.end(), ',', ';');
  std::replace(why.begin(), why.end(), '\n', ' ');
  os << t.trial << ',' << t.ref_seed << ',' << t.new_seed << ',' << algo << ',' << a.ok << ','
     << why << ',' << a.error(0) << ',' << a.error(1) << ',' << a.error(2) << ',' << a.iterations
     << ',' << a.converged << ',' << a.has_prediction << ',' << a.predicted_std(0) << ','
     << a.predicted_std(1) << ',' << a.predicted_std(2) << ',' << a.excluded[0] << ','
     << a.excluded[1] << ',' << a.excluded[2] << ',' << a.used_subspace << ','
     << a.excluded_angle_deg << ',' << a.nees << ',' << a.nees_dof << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return nan_value;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("records csv: bad number '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("records csv: bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

void write_records_csv(std::ostream& os, std::span<const TrialRecord> records) {
  const auto old = os.precision(17);
  os << csv_header << '\n';
  for (const auto& t : records) {
    if (t.icet) write_row(os, t, "icet", *t.icet);
    if (t.ndt) write_row(os, t, "ndt", *t.ndt);
  }
  os.precision(old);
}

std::vector<TrialRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("records csv: empty input");
  std::map<std::size_t, TrialRecord> by_trial;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 22) throw std::runtime_error("records csv: expected 22 fields");
    const std::size_t trial = to_u64(f[0]);
    TrialRecord& t = by_trial[trial];
    t.trial = trial;
    t.ref_seed = to_u64(f[1]);
    t.new_seed = to_u64(f[2]);
    AlgoRecord a;
    a.ok = f[4] == "1";
    a.failure = f[5];
    a.error = Vector3(to_double(f[6]), to_double(f[7]), to_double(f[8]));
    a.iterations = to_u64(f[9]);
    a.converged = f[10] == "1";
    a.has_prediction = f[11] == "1";
    a.predicted_std = Vector3(to_double(f[12]), to_double(f[13]), to_double(f[14]));
    a.excluded = {f[15] == "1", f[16] == "1", f[17] == "1"};
    a.used_subspace = f[18] == "1";
    a.excluded_angle_deg = to_double(f[19]);
    a.nees = to_double(f[20]);
    a.nees_dof = static_cast<int>(to_u64(f[21]));
    if (f[3] == "icet") {
      t.icet = a;
    } else if (f[3] == "ndt") {
      t.ndt = a;
    } else {
      throw std::runtime_error("records csv: unknown algorithm " + f[3]);
    }
  }
  std::vector<TrialRecord> out;
  out.reserve(by_trial.size());
  for (auto& [k, v] : by_trial) out.push_back(std::move(v));
  return out;
}

void write_error_histograms_csv(std::ostream& os, std::span<const TrialRecord> records,
                                std::size_t bins) {
  static constexpr std::array<const char*, 3> axis_names{"x", "y", "theta"};
  os << "algo,axis,bin_lo,bin_hi,count\n";
  os << std::setprecision(12);
  for (const Algorithm which : {Algorithm::icet, Algorithm::ndt}) {
    for (int k = 0; k < 3; ++k) {
      std::vector<double> vals;
      for (const auto& rec : records) {
        const auto& a = pick(rec, which);
        if (a && a->ok && !a->excluded[k]) vals.push_back(a->error(k));
      }
      if (vals.empty()) continue;
      const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
      double lo = *lo_it;
      double hi = *hi_it;
      if (hi <= lo) hi = lo + 1e-12;
      const double w = (hi - lo) / double(bins);
      std::vector<std::size_t> counts(bins, 0);
      for (const double v : vals) {
        auto b = static_cast<std::size_t>((v - lo) / w);
        ++counts[std::min(b, bins - 1)];
      }
      for (std::size_t b = 0; b < bins; ++b) {
        os << to_string(which) << ',' << axis_names[k] << ',' << lo + w * double(b) << ','
           << lo + w * double(b + 1) << ',' << counts[b] << '\n';
      }
    }
  }
}

void write_ellipses_csv(std::ostream& os, const ScenarioConfig& cfg, std::size_t trial) {
  const Environment env = cfg.build();
  const TrialPair pair = generate_trial_pair(env, cfg.trial_spec(trial), cfg.scan);
  const ReferenceMap ref(build_grid(pair.ref, cfg.grid), cfg.grid);
  os << "ix,iy,count,mean_x,mean_y,semi_major_2sigma,semi_minor_2sigma,major_angle_deg,"
        "minor_preserved,major_preserved\n";
  os << std::setprecision(12);
  for (std::size_t k = 0; k < ref.voxels().size(); ++k) {
    const auto& v = ref.voxels()[k];
    const auto& p = ref.prunes()[k];
    const double angle =
        std::atan2(p.eigenvectors(1, 1), p.eigenvectors(0, 1)) * 180.0 / std::numbers::pi;
    os << v.index.ix << ',' << v.index.iy << ',' << v.count << ',' << v.mean.x() << ','
       << v.mean.y() << ',' << 2.0 * std::sqrt(std::max(0.0, p.eigenvalues(1))) << ','
       << 2.0 * std::sqrt(std::max(0.0, p.eigenvalues(0))) << ',' << angle << ','
       << (p.preserved >= 1) << ',' << (p.preserved >= 2) << '\n';
  }
}

std::string render_comparison_table(const McReport& report, const std::string& title) {
  std::ostringstream os;
  auto cell = [](const AxisStats& s, const char* na) {
    std::ostringstream c;
    if (s.available) {
      c << std::setprecision(4) << s.std;
    } else {
      c << na;
    }
    return c.str();
  };
  auto row = [&os](const std::string& name, const std::array<std::string, 3>& cols) {
    os << "| " << std::left << std::setw(15) << name;
    for (const auto& c : cols) os << "| " << std::setw(24) << c;
    os << "|\n";
  };
  os << title << " (" << report.records.size() << " trials)\n";
  row("Algorithm", {"std error x", "std error y", "std error theta (rad)"});
  if (report.ndt) {
    const auto& e = report.ndt->error;
    row("NDT Actual", {cell(e[0], "N/A"), cell(e[1], "N/A"), cell(e[2], "N/A")});
  }
  if (report.icet) {
    const auto& e = report.icet->error;
    row("ICET Actual", {cell(e[0], "N/A"), cell(e[1], "N/A"), cell(e[2], "N/A")});
    if (report.icet->consistency) {
      std::array<std::string, 3> cols;
      for (int k = 0; k < 3; ++k) {
        const auto& mp = report.icet->consistency->mean_predicted_std[k];
        std::ostringstream c;
        if (mp) {
          c << std::setprecision(4) << *mp;
        } else {
          c << "Excluded from Solution";
        }
        cols[k] = c.str();
      }
      row("ICET Predicted", cols);
      const auto& c = *report.icet->consistency;
      os << std::setprecision(4);
      if (c.nees_mean) {
        os << "ICET NEES mean " << *c.nees_mean << " (mean dof " << c.mean_nees_dof << ")\n";
      }
      os << "ICET subspace path taken in " << report.icet->ambiguity_rate * 100.0
         << "% of trials\n";
    }
    if (report.icet->failures) os << "ICET failures: " << report.icet->failures << '\n';
  }
  if (report.ndt && report.ndt->failures) os << "NDT failures: " << report.ndt->failures << '\n';
  return os.str();
}

double mann_whitney_p_value(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::domain_error("two-sample test needs both samples");
  struct Item {
    double v;
    int group;
  };
  std::vector<Item> all;
  all.reserve(a.size() + b.size());
  for (const double v : a) all.push_back({v, 0});
  for (const double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end(), [](const Item& l, const Item& r) { return l.v < r.v; });

  const double n1 = double(a.size());
  const double n2 = double(b.size());
  const double n = n1 + n2;
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg_rank = 0.5 * double(i + 1 + j);
    const double t = double(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].group == 0) rank_sum_a += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
  return std::erfc(std::max(0.0, z) / std::numbers::sqrt2);
}

}  // namespace icet
