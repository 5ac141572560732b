#include "icet/ndt.hpp"

#include <cmath>
#include <stdexcept>

namespace icet {

void NdtConfig::validate() const {
  grid.validate();
  if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(translation_tol > 0.0) || !(rotation_tol > 0.0)) {
    throw std::invalid_argument("step tolerances must be positive");
  }
  if (!(eig_floor_ratio > 0.0)) throw std::invalid_argument("eig_floor_ratio must be positive");
  if (max_halvings < 0) throw std::invalid_argument("max_halvings must be non-negative");
}

NdtMap::NdtMap(const std::vector<VoxelStats>& voxels, const NdtConfig& cfg) : grid_(cfg.grid) {
  if (voxels.empty()) throw std::domain_error("no occupied voxels");
  cells_.reserve(voxels.size());
  for (const auto& v : voxels) {
    Eigen::SelfAdjointEigenSolver<Matrix2> es(0.5 * (v.cov + v.cov.transpose()));
    Eigen::Vector2d vals = es.eigenvalues();
    const double floor = cfg.eig_floor_ratio * vals.maxCoeff();
    if (!(floor > 0.0)) continue;  // all points coincide; no usable Gaussian
    vals = vals.cwiseMax(floor);
    const Matrix2 info =
        es.eigenvectors() * vals.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    index_.emplace(v.index, cells_.size());
    cells_.push_back({v.mean, 0.5 * (info + info.transpose())});
  }
  if (cells_.empty()) throw std::domain_error("no occupied voxels");
}

NdtMap::NdtMap(const Scan& ref_scan, const NdtConfig& cfg)
    : NdtMap(build_grid(ref_scan, cfg.grid), cfg) {}

std::vector<const NdtMap::Cell*> NdtMap::assign(std::span<const Point2> transformed) const {
  std::vector<const Cell*> out(transformed.size(), nullptr);
  if (grid_.correspondence == CorrespondenceMode::colocated) {
    for (std::size_t i = 0; i < transformed.size(); ++i) {
      const auto it = index_.find(cell_of(transformed[i], grid_));
      if (it != index_.end()) out[i] = &cells_[it->second];
    }
    return out;
  }

  std::map<CellIndex, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < transformed.size(); ++i) {
    groups[cell_of(transformed[i], grid_)].push_back(i);
  }
  const double radius = grid_.radius();
  const auto ring = static_cast<std::int64_t>(std::ceil(radius / grid_.voxel_width));
  for (const auto& [c, members] : groups) {
    Point2 mean = Point2::Zero();
    for (const std::size_t i : members) mean += transformed[i];
    mean /= double(members.size());
    const Cell* best = nullptr;
    double best_d2 = radius * radius;
    for (std::int64_t dx = -ring; dx <= ring; ++dx) {
      for (std::int64_t dy = -ring; dy <= ring; ++dy) {
        const auto it = index_.find({c.ix + dx, c.iy + dy});
        if (it == index_.end()) continue;
        const double d2 = (cells_[it->second].mean - mean).squaredNorm();
        if (d2 <= best_d2 && (best == nullptr || d2 < best_d2)) {
          best = &cells_[it->second];
          best_d2 = d2;
        }
      }
    }
    for (const std::size_t i : members) out[i] = best;
  }
  return out;
}

namespace {

std::vector<Point2> transform_points(const Scan& scan, const StateVector& x) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  std::vector<Point2> out;
  out.reserve(scan.size());
  for (const auto& p : scan) out.emplace_back(c * p.x() - s * p.y() - x.x, s * p.x() + c * p.y() - x.y);
  return out;
}

}  // namespace

double ndt_score(const StateVector& x, const Scan& new_scan, const NdtMap& map) {
  const std::vector<Point2> moved = transform_points(new_scan, x);
  const auto cells = map.assign(moved);
  double score = 0.0;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const NdtMap::Cell* cell = cells[i];
    if (!cell) continue;
    const Point2 d = moved[i] - cell->mean;
    score += std::exp(-0.5 * d.dot(cell->info * d));
  }
  return score;
}

NdtDerivatives ndt_derivatives(const StateVector& x, const Scan& new_scan, const NdtMap& map) {
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  const std::vector<Point2> moved = transform_points(new_scan, x);
  const auto cells = map.assign(moved);
  NdtDerivatives out;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const NdtMap::Cell* cell = cells[i];
    if (!cell) continue;
    const Point2& p = new_scan[i];
    const Point2 d = moved[i] - cell->mean;
    const Point2 sd = cell->info * d;
    const double e = std::exp(-0.5 * d.dot(sd));
    if (e == 0.0) continue;

    Eigen::Matrix<double, 2, 3> jq;
    jq << -1.0, 0.0, -s * p.x() - c * p.y(),  //
        0.0, -1.0, c * p.x() - s * p.y();
    const Point2 d2q_dtheta2(-c * p.x() + s * p.y(), -s * p.x() - c * p.y());

    const Eigen::RowVector3d dsj = sd.transpose() * jq;
    out.score += e;
    out.gradient -= e * dsj.transpose();
    Matrix3 h = dsj.transpose() * dsj - jq.transpose() * cell->info * jq;
    h(2, 2) -= sd.dot(d2q_dtheta2);
    out.hessian += e * h;
  }
  return out;
}

NdtResult ndt_match(const Scan& ref_scan, const Scan& new_scan, const NdtConfig& cfg,
                    const StateVector& x0) {
  cfg.validate();
  if (ref_scan.empty() || new_scan.empty()) throw std::domain_error("scans must be non-empty");
  const NdtMap map(ref_scan, cfg);

  NdtResult res;
  StateVector x = x0;
  NdtDerivatives der = ndt_derivatives(x, new_scan, map);
  res.score_history.push_back(der.score);

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    res.iterations = iter + 1;
    // Newton step on -score; shift the Hessian until positive definite.
    const Matrix3 hess = -der.hessian;
    const Vector3 grad = -der.gradient;
    const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    double lambda = 0.0;
    Eigen::LLT<Matrix3> llt(hess);
    while (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
      lambda = lambda == 0.0 ? 1e-9 * scale : lambda * 10.0;
      llt.compute(hess + lambda * Matrix3::Identity());
    }
    const Vector3 step = -llt.solve(grad);

    double alpha = 1.0;
    bool accepted = false;
    StateVector trial;
    double trial_score = 0.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, alpha *= 0.5) {
      trial = StateVector::from_vector(x.as_vector() + alpha * step);
      trial_score = ndt_score(trial, new_scan, map);
      if (trial_score >= der.score) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent along the Newton direction: treat as a stationary point.
      res.converged = true;
      break;
    }
    const Vector3 taken = alpha * step;
    x = trial;
    der = ndt_derivatives(x, new_scan, map);
    res.score_history.push_back(der.score);
    if (std::abs(taken(0)) < cfg.translation_tol && std::abs(taken(1)) < cfg.translation_tol &&
        std::abs(taken(2)) < cfg.rotation_tol) {
      res.converged = true;
      break;
    }
  }
  res.estimate = x;
  res.score = der.score;
  return res;
}

nlohmann::json ndt_result_to_json(const NdtResult& r) {
  return {{"algorithm", "ndt"},
          {"estimate", {{"x", r.estimate.x}, {"y", r.estimate.y}, {"theta", r.estimate.theta}}},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"score", r.score},
          {"covariance", nullptr},
          {"subspace", nullptr}};
}

}  // namespace icet
