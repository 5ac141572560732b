#include "doctest.h"

#include "icet/simulator.hpp"

#include <cmath>
#include <numbers>

using namespace icet;

namespace {

double distance_to_walls(const Environment& env, const Point2& p) {
  double best = INFINITY;
  for (const auto& s : env.segments) {
    const Point2 ab = s.b - s.a;
    const double u = std::clamp((p - s.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (s.a + u * ab - p).norm());
  }
  return best;
}

// Closed-form 2D rigid fit for q_i = R p_i - t with known pairs.
StateVector rigid_fit(const std::vector<Point2>& p, const std::vector<Point2>& q) {
  Point2 pm = Point2::Zero();
  Point2 qm = Point2::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    pm += p[i];
    qm += q[i];
  }
  pm /= double(p.size());
  qm /= double(q.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2 a = p[i] - pm;
    const Point2 b = q[i] - qm;
    sxx += a.dot(b);
    sxy += a.x() * b.y() - a.y() * b.x();
  }
  const double th = std::atan2(sxy, sxx);
  const Point2 t = Point2(std::cos(th) * pm.x() - std::sin(th) * pm.y(),
                          std::sin(th) * pm.x() + std::cos(th) * pm.y()) - qm;
  return {t.x(), t.y(), th};
}

}  // namespace

TEST_CASE("single wall perpendicular hit") {
  Environment env;
  env.segments = {{{10, -100}, {10, 100}}};
  ScanSpec spec;
  spec.beam_count = 4;
  spec.noise_sigma = 0.0;
  const Scan s = raycast_scan(env, SensorPose{}, spec);
  REQUIRE(s.size() == 1);
  CHECK(s[0].x() == 10.0);
  CHECK(s[0].y() == 0.0);
}

TEST_CASE("environment builders") {
  const Environment tunnel = build_environment(EnvironmentKind::tunnel, {});
  REQUIRE(tunnel.segments.size() == 2);
  for (const auto& s : tunnel.segments) {
    CHECK(s.a.x() == s.b.x());
    CHECK(s.length() == doctest::Approx(1200.0));
  }
  CHECK(std::abs(tunnel.segments[0].a.x() - tunnel.segments[1].a.x()) == doctest::Approx(150.0));

  const Environment t = build_environment(EnvironmentKind::t_intersection);
  CHECK(t.segments.size() == 6);
  for (const auto& s : t.segments) CHECK(s.length() > 0.0);
  CHECK(t.contains({0, 0}));
  CHECK(t.contains({-5, -10}));
  CHECK_FALSE(t.contains({300, 0}));

  EnvironmentParams bad;
  bad.width = 0.0;
  CHECK_THROWS_AS((void)build_environment(EnvironmentKind::tunnel, bad), std::domain_error);
  CHECK_THROWS_AS((void)build_environment(EnvironmentKind::t_intersection, bad), std::domain_error);
  CHECK_THROWS_AS((void)build_environment(EnvironmentKind::custom), std::domain_error);
}

TEST_CASE("noiseless tunnel points sit on the walls") {
  ScanSpec spec;
  spec.noise_sigma = 0.0;
  const Scan s = raycast_scan(build_environment(EnvironmentKind::tunnel), SensorPose{}, spec);
  CHECK(s.size() > 1000);
  for (const auto& p : s) CHECK(std::abs(p.x()) == 75.0);
  for (const auto& p : s) CHECK(p.norm() <= spec.max_range);
}

TEST_CASE("noiseless points lie on segments from a displaced pose") {
  for (auto kind : {EnvironmentKind::tunnel, EnvironmentKind::t_intersection}) {
    const Environment env = build_environment(kind);
    TrialSpec trial;
    ScanSpec spec;
    spec.noise_sigma = 0.0;
    const auto pair = generate_trial_pair(env, trial, spec);
    const StateVector& s = trial.true_transform;
    for (const auto& p : pair.ref) CHECK(distance_to_walls(env, p) < 1e-9);
    for (const auto& p : pair.fresh) {
      const Point2 w(std::cos(s.theta) * p.x() - std::sin(s.theta) * p.y() - s.x,
                     std::sin(s.theta) * p.x() + std::cos(s.theta) * p.y() - s.y);
      CHECK(distance_to_walls(env, w) < 1e-9);
    }
  }
}

TEST_CASE("sign convention closes through a rigid fit") {
  const Environment env = build_environment(EnvironmentKind::t_intersection);
  TrialSpec trial;
  ScanSpec spec;
  spec.noise_sigma = 0.0;
  spec.beam_count = 720;
  const SensorPose pose = sensor_pose_for(trial.true_transform);
  const Scan body = raycast_scan(env, pose, spec);

  // Recast each beam in the world frame to get the physical hit independently.
  std::vector<Point2> world;
  const double step = 2.0 * std::numbers::pi / double(spec.beam_count);
  for (std::size_t k = 0; k < spec.beam_count; ++k) {
    const double az = pose.heading + step * double(k);
    const auto hit = cast_ray(env, pose.position, {std::cos(az), std::sin(az)});
    if (hit && (*hit - pose.position).norm() <= spec.max_range) world.push_back(*hit);
  }
  REQUIRE(world.size() == body.size());
  const StateVector fit = rigid_fit(body.points(), world);
  CHECK(std::abs(fit.x - 5.0) < 1e-9);
  CHECK(std::abs(fit.y - 10.0) < 1e-9);
  CHECK(std::abs(fit.theta - 0.1) < 1e-9);
}

TEST_CASE("determinism under seeds") {
  const Environment env = build_environment(EnvironmentKind::t_intersection);
  ScanSpec spec;
  spec.rng_seed = 99;
  const Scan a = raycast_scan(env, SensorPose{}, spec);
  const Scan b = raycast_scan(env, SensorPose{}, spec);
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) identical = identical && a[i] == b[i];
  CHECK(identical);

  spec.rng_seed = 100;
  const Scan c = raycast_scan(env, SensorPose{}, spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i] != c[i];
  CHECK(differs);

  TrialSpec same;
  same.true_transform = {0, 0, 0};
  same.ref_seed = same.new_seed = 7;
  const auto pair = generate_trial_pair(env, same, ScanSpec{});
  REQUIRE(pair.ref.size() == pair.fresh.size());
  for (std::size_t i = 0; i < pair.ref.size(); ++i) CHECK(pair.ref[i] == pair.fresh[i]);
  CHECK_THROWS_AS(same.validate(), std::invalid_argument);
}

TEST_CASE("cartesian noise has the configured spread") {
  ScanSpec spec;
  spec.rng_seed = 5;
  const Scan s = raycast_scan(build_environment(EnvironmentKind::tunnel), SensorPose{}, spec);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& p : s) {
    const double d = std::abs(p.x()) - 75.0;
    sum += d;
    sq += d * d;
  }
  const double n = double(s.size());
  const double var = (sq - sum * sum / n) / (n - 1.0);
  // 99% chi-square band for n ~ 2000 is about +-8% on the variance
  CHECK(var > 4.0 * 0.9);
  CHECK(var < 4.0 * 1.1);
}

TEST_CASE("range limit and geometry errors") {
  ScanSpec spec;
  spec.max_range = 100.0;
  const Scan s = raycast_scan(build_environment(EnvironmentKind::tunnel), SensorPose{}, spec);
  for (const auto& p : s) CHECK(p.norm() < 100.0 + 10.0);

  const Environment env = build_environment(EnvironmentKind::tunnel);
  CHECK_THROWS_AS((void)raycast_scan(env, SensorPose{{500, 0}, 0}, ScanSpec{}), std::domain_error);
  TrialSpec far;
  far.true_transform = {500, 0, 0};
  CHECK_THROWS_AS((void)generate_trial_pair(env, far, ScanSpec{}), std::domain_error);
  ScanSpec empty;
  empty.beam_count = 0;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("environment json round trip") {
  const Environment t = build_environment(EnvironmentKind::t_intersection);
  const Environment back = environment_from_json(environment_to_json(t));
  REQUIRE(back.segments.size() == t.segments.size());
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    CHECK(back.segments[i].a == t.segments[i].a);
    CHECK(back.segments[i].b == t.segments[i].b);
  }
  CHECK(back.kind == EnvironmentKind::t_intersection);
  CHECK(back.contains({0, 0}));
  CHECK_THROWS((void)environment_from_json(nlohmann::json::parse(R"({"segments": [[0,0,0,0]]})")));
}

TEST_CASE("sensor frames invert each other") {
  const SensorPose pose = sensor_pose_for({5, 10, 0.1});
  CHECK(pose.position == Point2(-5, -10));
  const Point2 w(123.0, -45.0);
  CHECK((body_to_world(pose, world_to_body(pose, w)) - w).norm() < 1e-12);
}
