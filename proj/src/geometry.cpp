#include "icet/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace icet {

double normalize_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta, two_pi);
  if (t <= -std::numbers::pi) t += two_pi;
  if (t > std::numbers::pi) t -= two_pi;
  return t;
}

StateVector::StateVector(double x_, double y_, double theta_)
    : x(x_), y(y_), theta(normalize_angle(theta_)) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(theta)) {
    throw std::domain_error("state vector must be finite");
  }
}

StateVector StateVector::from_vector(const Vector3& v) { return {v(0), v(1), v(2)}; }

StateVector StateVector::inverse() const {
  // p = R(-theta) (q + t) = R(-theta) q - (-R(-theta) t)
  const Point2 t_inv = -(rotation(-theta) * Point2(x, y));
  return {t_inv.x(), t_inv.y(), -theta};
}

Matrix2 rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Matrix2 r;
  r << c, -s, s, c;
  return r;
}

Point2 apply_transform(const Point2& p, const StateVector& s) {
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  return {c * p.x() - sn * p.y() - s.x, sn * p.x() + c * p.y() - s.y};
}

std::string_view to_string(FrameTag tag) {
  switch (tag) {
    case FrameTag::reference: return "reference";
    case FrameTag::new_scan: return "new";
    case FrameTag::transformed: return "transformed";
  }
  return "reference";
}

FrameTag frame_tag_from_string(std::string_view s) {
  if (s == "reference") return FrameTag::reference;
  if (s == "new") return FrameTag::new_scan;
  if (s == "transformed") return FrameTag::transformed;
  throw std::invalid_argument("unknown frame tag: " + std::string(s));
}

Scan::Scan(std::vector<Point2> points, FrameTag tag) : points_(std::move(points)), tag_(tag) {
  for (const auto& p : points_) {
    if (!p.allFinite()) throw std::domain_error("scan contains a non-finite point");
  }
}

Scan transform_scan(const Scan& scan, const StateVector& s) {
  if (scan.empty()) throw std::domain_error("cannot transform an empty scan");
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  std::vector<Point2> out;
  out.reserve(scan.size());
  for (const auto& p : scan) {
    out.emplace_back(c * p.x() - sn * p.y() - s.x, sn * p.x() + c * p.y() - s.y);
  }
  return Scan(std::move(out), FrameTag::transformed);
}

}  // namespace icet
