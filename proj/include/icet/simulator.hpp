#pragma once

#include "icet/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace icet {

struct Segment {
  Point2 a;
  Point2 b;
  [[nodiscard]] double length() const { return (b - a).norm(); }
};

enum class EnvironmentKind { t_intersection, tunnel, custom };

std::string_view to_string(EnvironmentKind kind);
EnvironmentKind environment_kind_from_string(std::string_view s);

/// Wall geometry. `interior`, when non-empty, is the free-space polygon used
/// to decide whether a sensor position lies inside the scene.
struct Environment {
  std::vector<Segment> segments;
  EnvironmentKind kind = EnvironmentKind::custom;
  std::vector<Point2> interior;

  [[nodiscard]] bool contains(const Point2& p) const;
};

/// Corridor dimensions in simulation units. The tunnel runs along +y centered
/// on the sensor. In the T-intersection the sensor stands in the junction:
/// the cross corridor runs along x and the closed stem extends toward -y.
struct EnvironmentParams {
  double width = 150.0;               // tunnel / stem corridor width
  double length = 1200.0;             // tunnel length
  double cross_width = 150.0;         // cross corridor width
  double junction_offset = 50.0;      // sensor to the cross corridor centerline, along y
  double stem_back = 225.0;           // sensor to the closed end of the stem
  double cross_half_length = 225.0;   // cross corridor extent on each side
};

/// Throws std::domain_error on non-positive or inconsistent dimensions.
[[nodiscard]] Environment build_environment(EnvironmentKind kind,
                                            const EnvironmentParams& params = {});

[[nodiscard]] nlohmann::json environment_to_json(const Environment& env);
[[nodiscard]] Environment environment_from_json(const nlohmann::json& j);

/// Sensor position and heading in the world (reference) frame.
struct SensorPose {
  Point2 position = Point2::Zero();
  double heading = 0.0;
};

/// Pose of the new-scan sensor such that q = R(theta) p - t maps its body
/// coordinates into the reference frame: heading theta, position -t.
[[nodiscard]] SensorPose sensor_pose_for(const StateVector& truth);

[[nodiscard]] Point2 world_to_body(const SensorPose& pose, const Point2& w);
[[nodiscard]] Point2 body_to_world(const SensorPose& pose, const Point2& p);

struct ScanSpec {
  std::size_t beam_count = 4200;
  double noise_sigma = 2.0;
  double max_range = 500.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct TrialSpec {
  StateVector true_transform{5.0, 10.0, 0.1};
  std::uint64_t ref_seed = 1;
  std::uint64_t new_seed = 2;

  /// Throws std::invalid_argument when the two scans would share noise.
  void validate() const;
};

/// Nearest wall hit along a world-frame ray, if any.
[[nodiscard]] std::optional<Point2> cast_ray(const Environment& env, const Point2& origin,
                                             const Point2& direction);

/// Uniform azimuth sweep over 2 pi from the sensor; hits are expressed in the
/// sensor body frame and then perturbed by independent N(0, sigma^2) noise on
/// each Cartesian coordinate. Beams without a hit within max_range are dropped.
[[nodiscard]] Scan raycast_scan(const Environment& env, const SensorPose& pose,
                                const ScanSpec& spec, FrameTag tag = FrameTag::reference);

struct TrialPair {
  Scan ref;
  Scan fresh;
  StateVector truth;
};

/// Reference scan from the origin and a new scan from sensor_pose_for(truth),
/// each in its own body frame.
[[nodiscard]] TrialPair generate_trial_pair(const Environment& env, const TrialSpec& trial,
                                            const ScanSpec& spec);

}  // namespace icet
