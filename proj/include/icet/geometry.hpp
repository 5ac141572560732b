#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace icet {

/// Planar point in abstract simulation units.
using Point2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

/// Rigid 2D transform (x, y, theta) mapping new-scan body coordinates into the
/// reference frame as q = R(theta) p - [x y]^T.
struct StateVector {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  StateVector() = default;
  StateVector(double x_, double y_, double theta_);

  static StateVector from_vector(const Vector3& v);
  [[nodiscard]] Vector3 as_vector() const { return {x, y, theta}; }

  /// Transform that undoes this one: apply(apply(p, s), s.inverse()) == p.
  [[nodiscard]] StateVector inverse() const;

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

[[nodiscard]] Matrix2 rotation(double theta);

/// q = R(theta) p - t
[[nodiscard]] Point2 apply_transform(const Point2& p, const StateVector& s);

enum class FrameTag { reference, new_scan, transformed };

std::string_view to_string(FrameTag tag);
FrameTag frame_tag_from_string(std::string_view s);

/// Immutable ordered point set.
class Scan {
 public:
  Scan() = default;
  explicit Scan(std::vector<Point2> points, FrameTag tag = FrameTag::reference);

  [[nodiscard]] const std::vector<Point2>& points() const { return points_; }
  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] FrameTag frame_tag() const { return tag_; }
  [[nodiscard]] const Point2& operator[](std::size_t i) const { return points_[i]; }

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

 private:
  std::vector<Point2> points_;
  FrameTag tag_ = FrameTag::reference;
};

/// Throws std::domain_error on an empty scan.
[[nodiscard]] Scan transform_scan(const Scan& scan, const StateVector& s);

/// Reduced-dimension (subspace) covariance: basis columns span the state
/// directions that were solved for, cov is the covariance in those coordinates.
struct SubspaceCovariance {
  Eigen::MatrixXd basis;  // 3 x n
  Eigen::MatrixXd cov;    // n x n
};

/// Covariance of a state estimate. On the subspace path `matrix` holds the
/// lifted form basis * cov * basis^T.
struct StateCovariance {
  Matrix3 matrix = Matrix3::Zero();
  std::optional<SubspaceCovariance> reduced;

  [[nodiscard]] bool has_reduced() const { return reduced.has_value(); }
};

}  // namespace icet
