#include "icet/simulator.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace icet {

std::string_view to_string(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::t_intersection: return "t-intersection";
    case EnvironmentKind::tunnel: return "tunnel";
    case EnvironmentKind::custom: return "custom";
  }
  return "custom";
}

EnvironmentKind environment_kind_from_string(std::string_view s) {
  if (s == "t-intersection" || s == "t_intersection") return EnvironmentKind::t_intersection;
  if (s == "tunnel") return EnvironmentKind::tunnel;
  if (s == "custom") return EnvironmentKind::custom;
  throw std::invalid_argument("unknown environment kind: " + std::string(s));
}

namespace {

double point_segment_distance(const Point2& p, const Segment& s) {
  const Point2 ab = s.b - s.a;
  const double l2 = ab.squaredNorm();
  const double u = std::clamp((p - s.a).dot(ab) / l2, 0.0, 1.0);
  return (s.a + u * ab - p).norm();
}

bool point_in_polygon(const Point2& p, const std::vector<Point2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

bool Environment::contains(const Point2& p) const {
  for (const auto& s : segments) {
    if (point_segment_distance(p, s) < 1e-9) return false;
  }
  if (interior.size() >= 3) return point_in_polygon(p, interior);
  return true;
}

Environment build_environment(EnvironmentKind kind, const EnvironmentParams& prm) {
  Environment env;
  env.kind = kind;
  if (kind == EnvironmentKind::tunnel) {
    if (!(prm.width > 0.0) || !(prm.length > 0.0)) {
      throw std::domain_error("tunnel dimensions must be positive");
    }
    const double hw = prm.width / 2.0;
    const double hl = prm.length / 2.0;
    env.segments = {{{-hw, -hl}, {-hw, hl}}, {{hw, -hl}, {hw, hl}}};
    env.interior = {{-hw, -hl}, {hw, -hl}, {hw, hl}, {-hw, hl}};
    return env;
  }
  if (kind == EnvironmentKind::t_intersection) {
    if (!(prm.width > 0.0) || !(prm.cross_width > 0.0) || !(prm.stem_back > 0.0) ||
        !(prm.cross_half_length > 0.0) || !std::isfinite(prm.junction_offset)) {
      throw std::domain_error("t-intersection dimensions must be positive");
    }
    const double hw = prm.width / 2.0;
    if (prm.cross_half_length <= hw) {
      throw std::domain_error("cross corridor must extend beyond the stem");
    }
    const double y0 = prm.junction_offset - prm.cross_width / 2.0;
    const double y1 = y0 + prm.cross_width;
    const double yb = -prm.stem_back;
    if (yb >= y0) throw std::domain_error("stem must extend below the cross corridor");
    const double xc = prm.cross_half_length;
    env.segments = {
        {{-hw, yb}, {-hw, y0}},  // stem, left wall
        {{hw, yb}, {hw, y0}},    // stem, right wall
        {{-hw, yb}, {hw, yb}},   // stem, closed end
        {{-xc, y0}, {-hw, y0}},  // cross corridor, near wall left of the stem
        {{hw, y0}, {xc, y0}},    // cross corridor, near wall right of the stem
        {{-xc, y1}, {xc, y1}},   // cross corridor, far wall
    };
    env.interior = {{-hw, yb}, {hw, yb}, {hw, y0}, {xc, y0}, {xc, y1}, {-xc, y1}, {-xc, y0}, {-hw, y0}};
    return env;
  }
  throw std::domain_error("custom environments are loaded from JSON, not built");
}

nlohmann::json environment_to_json(const Environment& env) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : env.segments) segs.push_back({s.a.x(), s.a.y(), s.b.x(), s.b.y()});
  nlohmann::json interior = nlohmann::json::array();
  for (const auto& p : env.interior) interior.push_back({p.x(), p.y()});
  return {{"kind", to_string(env.kind)}, {"segments", segs}, {"interior", interior}};
}

Environment environment_from_json(const nlohmann::json& j) {
  Environment env;
  env.kind = environment_kind_from_string(j.value("kind", std::string("custom")));
  for (const auto& s : j.at("segments")) {
    Segment seg{{s.at(0).get<double>(), s.at(1).get<double>()},
                {s.at(2).get<double>(), s.at(3).get<double>()}};
    if (!seg.a.allFinite() || !seg.b.allFinite() || !(seg.length() > 0.0)) {
      throw std::domain_error("environment segments must have positive length");
    }
    env.segments.push_back(seg);
  }
  if (env.segments.empty()) throw std::domain_error("environment has no segments");
  if (j.contains("interior")) {
    for (const auto& p : j.at("interior")) {
      env.interior.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
  }
  return env;
}

SensorPose sensor_pose_for(const StateVector& truth) {
  return {Point2(-truth.x, -truth.y), truth.theta};
}

Point2 world_to_body(const SensorPose& pose, const Point2& w) {
  return rotation(-pose.heading) * (w - pose.position);
}

Point2 body_to_world(const SensorPose& pose, const Point2& p) {
  return rotation(pose.heading) * p + pose.position;
}

void ScanSpec::validate() const {
  if (beam_count == 0) throw std::invalid_argument("beam_count must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (!(max_range > 0.0)) throw std::invalid_argument("max_range must be positive");
}

void TrialSpec::validate() const {
  if (ref_seed == new_seed) throw std::invalid_argument("trial seeds must differ");
}

std::optional<Point2> cast_ray(const Environment& env, const Point2& origin,
                               const Point2& direction) {
  double best_t = std::numeric_limits<double>::infinity();
  std::optional<Point2> hit;
  for (const auto& s : env.segments) {
    const Point2 e = s.b - s.a;
    const double denom = cross(direction, e);
    if (denom == 0.0) continue;
    const Point2 ao = s.a - origin;
    const double t = cross(ao, e) / denom;
    const double u = cross(ao, direction) / denom;
    if (t <= 0.0 || u < 0.0 || u > 1.0) continue;
    if (t < best_t) {
      best_t = t;
      // Parametrize on the segment so hits on axis-aligned walls are exact.
      hit = s.a + u * e;
    }
  }
  return hit;
}

Scan raycast_scan(const Environment& env, const SensorPose& pose, const ScanSpec& spec,
                  FrameTag tag) {
  spec.validate();
  if (!pose.position.allFinite() || !env.contains(pose.position)) {
    throw std::domain_error("sensor is outside the environment");
  }
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Point2> pts;
  pts.reserve(spec.beam_count);
  const double step = 2.0 * std::numbers::pi / double(spec.beam_count);
  for (std::size_t k = 0; k < spec.beam_count; ++k) {
    const double az = pose.heading + step * double(k);
    const auto hit = cast_ray(env, pose.position, Point2(std::cos(az), std::sin(az)));
    if (!hit || (*hit - pose.position).norm() > spec.max_range) continue;
    Point2 p = world_to_body(pose, *hit);
    if (spec.noise_sigma > 0.0) {
      const double nx = noise(rng);
      const double ny = noise(rng);
      p += spec.noise_sigma * Point2(nx, ny);
    }
    pts.push_back(p);
  }
  if (pts.empty()) throw std::domain_error("no beam returned a hit");
  return Scan(std::move(pts), tag);
}

TrialPair generate_trial_pair(const Environment& env, const TrialSpec& trial,
                              const ScanSpec& spec) {
  const SensorPose moved = sensor_pose_for(trial.true_transform);
  if (!env.contains(moved.position)) {
    throw std::domain_error("displaced sensor leaves the environment");
  }
  ScanSpec ref_spec = spec;
  ref_spec.rng_seed = trial.ref_seed;
  ScanSpec new_spec = spec;
  new_spec.rng_seed = trial.new_seed;
  return {raycast_scan(env, SensorPose{}, ref_spec, FrameTag::reference),
          raycast_scan(env, moved, new_spec, FrameTag::new_scan), trial.true_transform};
}

}  // namespace icet
