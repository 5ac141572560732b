#include "doctest.h"

#include "icet/monte_carlo.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace icet;

namespace {

TrialRecord icet_only(std::size_t i, const Vector3& err, const Vector3& pred_std) {
  TrialRecord t;
  t.trial = i;
  AlgoRecord a;
  a.ok = true;
  a.error = err;
  a.has_prediction = true;
  a.predicted_std = pred_std;
  Vector3 z = err.cwiseQuotient(pred_std);
  a.nees = z.squaredNorm();
  a.nees_dof = 3;
  t.icet = a;
  return t;
}

ScenarioConfig small(EnvironmentKind env, std::size_t trials) {
  ScenarioConfig cfg;
  cfg.environment = env;
  cfg.trials = trials;
  cfg.threads = 1;
  return cfg;
}

// Brute-force U statistic with tie handling, normal approximation with
// continuity and tie correction.
double mann_whitney_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    const double t = double(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double n1 = double(a.size());
  const double n2 = double(b.size());
  const double n = n1 + n2;
  const double var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)));
  const double z = std::max(0.0, std::abs(u - n1 * n2 / 2) - 0.5) / std::sqrt(var);
  return std::erfc(z / std::numbers::sqrt2);
}

}  // namespace

TEST_CASE("sample statistics examples") {
  const std::vector<double> pm{1.0, -1.0};
  const auto s = sample_statistics(pm);
  CHECK(s.mean == 0.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0)));

  const std::vector<double> zeros(10, 0.0);
  const auto z = sample_statistics(zeros);
  CHECK(z.mean == 0.0);
  CHECK(z.std == 0.0);

  std::mt19937_64 rng(51);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> draws;
  for (int i = 0; i < 1000; ++i) draws.push_back(n(rng));
  const auto d = sample_statistics(draws);
  CHECK(d.std > 0.93);
  CHECK(d.std < 1.07);

  CHECK_THROWS_AS((void)sample_statistics(std::vector<double>{}), std::domain_error);
}

TEST_CASE("error statistics skip excluded axes") {
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 4; ++i) {
    auto t = icet_only(i, {double(i), 1.0, 0.0}, {1, 1, 1});
    t.icet->excluded[1] = true;
    recs.push_back(t);
  }
  const auto st = error_statistics(recs, Algorithm::icet);
  CHECK(st[0].available);
  CHECK(st[0].mean == doctest::Approx(1.5));
  CHECK_FALSE(st[1].available);
  CHECK(st[2].std == 0.0);
  CHECK_THROWS_AS((void)error_statistics(std::vector<TrialRecord>{}, Algorithm::icet),
                  std::domain_error);
}

TEST_CASE("consistency on errors drawn from the prediction") {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 1.0);
  const Vector3 sd(0.101, 0.0602, 0.00035);
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    const Vector3 e(sd(0) * n(rng), sd(1) * n(rng), sd(2) * n(rng));
    recs.push_back(icet_only(i, e, sd));
  }
  const auto c = consistency_check(recs);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(c.ratio[k].has_value());
    CHECK(*c.ratio[k] > 0.9);
    CHECK(*c.ratio[k] < 1.1);
  }
  REQUIRE(c.nees_mean.has_value());
  // mean of 1000 chi-square(3) draws: sd sqrt(6/1000), 99% band about +-0.2
  CHECK(std::abs(*c.nees_mean - 3.0) < 0.2);
  CHECK(c.mean_nees_dof == 3.0);

  std::vector<TrialRecord> zero;
  for (int i = 0; i < 5; ++i) zero.push_back(icet_only(i, Vector3::Zero(), sd));
  const auto cz = consistency_check(zero);
  CHECK(*cz.ratio[0] == 0.0);
}

TEST_CASE("ten-trial smoke run") {
  const auto rep = run_monte_carlo(small(EnvironmentKind::t_intersection, 10));
  CHECK(rep.records.size() == 10);
  REQUIRE(rep.icet);
  REQUIRE(rep.ndt);
  CHECK(rep.icet->failures == 0);
  CHECK(rep.ndt->failures == 0);
  REQUIRE(rep.icet->consistency->nees_mean);
  CHECK(*rep.icet->consistency->nees_mean >= 1.0);
  CHECK(*rep.icet->consistency->nees_mean <= 6.0);
  for (std::size_t i = 0; i < rep.records.size(); ++i) CHECK(rep.records[i].trial == i);
}

TEST_CASE("tunnel ambiguity detection rate") {
  auto cfg = small(EnvironmentKind::tunnel, 20);
  cfg.algorithms = Algorithm::icet;
  const auto rep = run_monte_carlo(cfg);
  REQUIRE(rep.icet);
  CHECK(rep.icet->ambiguity_rate == 1.0);
  CHECK_FALSE(rep.icet->error[1].available);
  CHECK(rep.icet->error[0].available);
  CHECK(rep.icet->consistency->mean_nees_dof == 2.0);
}

TEST_CASE("single trial runs are byte identical") {
  auto cfg = small(EnvironmentKind::t_intersection, 1);
  cfg.base_seed = 1234;
  const auto a = run_monte_carlo(cfg);
  const auto b = run_monte_carlo(cfg);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  std::ostringstream ca;
  std::ostringstream cb;
  write_records_csv(ca, a.records);
  write_records_csv(cb, b.records);
  CHECK(ca.str() == cb.str());
}

TEST_CASE("thread count does not change results") {
  auto cfg = small(EnvironmentKind::t_intersection, 6);
  const auto one = run_monte_carlo(cfg);
  cfg.threads = 3;
  const auto three = run_monte_carlo(cfg);
  CHECK(report_to_json(one).dump() == report_to_json(three).dump());
}

TEST_CASE("seeds derive from base seed and trial index") {
  ScenarioConfig cfg;
  cfg.base_seed = 10;
  const auto a = cfg.trial_spec(5);
  cfg.base_seed = 15;
  const auto b = cfg.trial_spec(0);
  CHECK(a.ref_seed == b.ref_seed);
  CHECK(a.new_seed == b.new_seed);
  CHECK(a.ref_seed != a.new_seed);
}

TEST_CASE("records csv round trip regenerates the report") {
  auto cfg = small(EnvironmentKind::tunnel, 4);
  const auto rep = run_monte_carlo(cfg);
  std::stringstream ss;
  write_records_csv(ss, rep.records);
  const std::string first = ss.str();
  const auto back = read_records_csv(ss);
  REQUIRE(back.size() == rep.records.size());
  std::ostringstream again;
  write_records_csv(again, back);
  CHECK(again.str() == first);
  const auto rebuilt = summarize(back, rep.scenario);
  CHECK(report_to_json(rebuilt).dump() == report_to_json(rep).dump());
}

TEST_CASE("failed trials are recorded, not thrown") {
  auto cfg = small(EnvironmentKind::t_intersection, 3);
  cfg.truth = {500.0, 0.0, 0.0};  // moved sensor leaves the corridor
  const Environment env = cfg.build();
  const auto rec = run_trial(cfg, env, 0);
  REQUIRE(rec.icet);
  CHECK_FALSE(rec.icet->ok);
  CHECK(rec.icet->failure.find("scan generation") != std::string::npos);
  CHECK_THROWS_AS((void)run_monte_carlo(cfg), std::runtime_error);
}

TEST_CASE("scenario json round trip") {
  ScenarioConfig cfg;
  cfg.environment = EnvironmentKind::tunnel;
  cfg.trials = 17;
  cfg.base_seed = 99;
  cfg.grid.voxel_width = 40.0;
  cfg.grid.correspondence = CorrespondenceMode::colocated;
  cfg.algorithms = Algorithm::ndt;
  cfg.scan.noise_sigma = 1.5;
  const auto j = scenario_to_json(cfg);
  const auto back = scenario_from_json(j);
  CHECK(scenario_to_json(back).dump() == j.dump());

  const auto partial = scenario_from_json(nlohmann::json::parse(R"({"trials": 3})"));
  CHECK(partial.trials == 3);
  CHECK(partial.environment == EnvironmentKind::t_intersection);
}

TEST_CASE("comparison table layout") {
  auto cfg = small(EnvironmentKind::tunnel, 3);
  const auto rep = run_monte_carlo(cfg);
  const std::string table = render_comparison_table(rep, "Straight Tunnel");
  CHECK(table.find("NDT Actual") != std::string::npos);
  CHECK(table.find("ICET Actual") != std::string::npos);
  CHECK(table.find("ICET Predicted") != std::string::npos);
  CHECK(table.find("N/A") != std::string::npos);
  CHECK(table.find("Excluded from Solution") != std::string::npos);
}

TEST_CASE("plot data files") {
  auto cfg = small(EnvironmentKind::t_intersection, 3);
  const auto rep = run_monte_carlo(cfg);
  std::ostringstream hist;
  write_error_histograms_csv(hist, rep.records, 10);
  CHECK(hist.str().rfind("algo,axis,bin_lo,bin_hi,count", 0) == 0);
  std::ostringstream ell;
  write_ellipses_csv(ell, cfg, 0);
  CHECK(ell.str().find('\n') != std::string::npos);
}

TEST_CASE("mann-whitney matches a brute-force U oracle") {
  CHECK(mann_whitney_p_value(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) ==
        doctest::Approx(mann_whitney_oracle({1, 2, 3}, {4, 5, 6})));
  std::mt19937_64 rng(53);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 60; ++i) a.push_back(std::round(n(rng) * 4) / 4);
    for (int i = 0; i < 45; ++i) b.push_back(std::round((n(rng) + 0.3 * (trial % 3)) * 4) / 4);
    CHECK(mann_whitney_p_value(a, b) == doctest::Approx(mann_whitney_oracle(a, b)).epsilon(1e-12));
  }
  std::vector<double> same(50, 1.0);
  CHECK(mann_whitney_p_value(same, same) == 1.0);
}
