#include "icet/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace icet {

std::string_view to_string(CorrespondenceMode mode) {
  return mode == CorrespondenceMode::colocated ? "colocated" : "nn";
}

CorrespondenceMode correspondence_mode_from_string(std::string_view s) {
  if (s == "colocated" || s == "co-located") return CorrespondenceMode::colocated;
  if (s == "nn" || s == "nearest-neighbor" || s == "nearest_neighbor") {
    return CorrespondenceMode::nearest_neighbor;
  }
  throw std::invalid_argument("unknown correspondence mode: " + std::string(s));
}

double GridConfig::threshold() const {
  return eigen_threshold.value_or(voxel_width * voxel_width / 16.0);
}

double GridConfig::radius() const { return nn_radius.value_or(voxel_width); }

void GridConfig::validate() const {
  if (!(voxel_width > 0.0) || !std::isfinite(voxel_width)) {
    throw std::invalid_argument("voxel width must be positive");
  }
  if (!origin.allFinite()) throw std::invalid_argument("grid origin must be finite");
  if (min_points < 3) throw std::invalid_argument("min_points must be at least 3");
  if (!(threshold() > 0.0)) throw std::invalid_argument("eigen threshold must be positive");
  if (!(radius() > 0.0)) throw std::invalid_argument("nn radius must be positive");
}

std::optional<std::string> voxel_width_warning(double voxel_width, double noise_sigma) {
  if (noise_sigma > 0.0 && voxel_width < 10.0 * noise_sigma) {
    std::ostringstream os;
    os << "voxel width " << voxel_width << " is less than 10x the lidar noise sigma "
       << noise_sigma << "; extended-object detection may misfire";
    return os.str();
  }
  return std::nullopt;
}

CellIndex cell_of(const Point2& p, const GridConfig& cfg) {
  return {static_cast<std::int64_t>(std::floor((p.x() - cfg.origin.x()) / cfg.voxel_width)),
          static_cast<std::int64_t>(std::floor((p.y() - cfg.origin.y()) / cfg.voxel_width))};
}

std::vector<VoxelStats> build_grid(const Scan& scan, const GridConfig& cfg) {
  if (scan.empty()) throw std::domain_error("cannot voxelize an empty scan");
  if (cfg.min_points < 2) throw std::invalid_argument("min_points below 2 leaves covariance undefined");

  std::map<CellIndex, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < scan.size(); ++i) cells[cell_of(scan[i], cfg)].push_back(i);

  std::vector<VoxelStats> out;
  out.reserve(cells.size());
  for (auto& [idx, members] : cells) {
    if (members.size() < cfg.min_points) continue;
    // Welford accumulation
    Point2 mean = Point2::Zero();
    Matrix2 m2 = Matrix2::Zero();
    double n = 0.0;
    for (const std::size_t i : members) {
      n += 1.0;
      const Point2 delta = scan[i] - mean;
      mean += delta / n;
      m2 += delta * (scan[i] - mean).transpose();
    }
    VoxelStats v;
    v.index = idx;
    v.count = members.size();
    v.mean = mean;
    v.cov = m2 / (n - 1.0);
    v.cov(0, 1) = v.cov(1, 0) = 0.5 * (v.cov(0, 1) + v.cov(1, 0));
    v.members = std::move(members);
    out.push_back(std::move(v));
  }
  if (out.empty()) throw std::domain_error("no usable voxels");
  return out;
}

namespace {

// Angle of an undirected axis to +x, in [0, pi).
double axis_angle(const Eigen::Vector2d& v) {
  double a = std::atan2(v.y(), v.x());
  if (a < 0.0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a -= std::numbers::pi;
  return a;
}

// Canonical sign: points into the upper half plane (or along +x).
Eigen::Vector2d canonical(Eigen::Vector2d v) {
  if (v.y() < 0.0 || (v.y() == 0.0 && v.x() < 0.0)) v = -v;
  return v;
}

}  // namespace

PruneResult eigen_prune(const Matrix2& q0, double threshold) {
  const Matrix2 sym = 0.5 * (q0 + q0.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix2> es(sym);
  Eigen::Vector2d vals = es.eigenvalues();
  Eigen::Vector2d v0 = canonical(es.eigenvectors().col(0));
  Eigen::Vector2d v1 = canonical(es.eigenvectors().col(1));

  bool swap = vals(1) < vals(0);
  if (vals(0) == vals(1)) swap = axis_angle(v1) < axis_angle(v0);
  if (swap) {
    std::swap(vals(0), vals(1));
    std::swap(v0, v1);
  }

  PruneResult r;
  r.eigenvalues = vals;
  r.eigenvectors.col(0) = v0;
  r.eigenvectors.col(1) = v1;
  // Values within 1e-12 of the threshold count as extended.
  r.preserved = 0;
  for (int k = 0; k < 2; ++k) {
    if (vals(k) < threshold - 1e-12) ++r.preserved;
  }
  return r;
}

ReferenceMap::ReferenceMap(std::vector<VoxelStats> voxels, const GridConfig& cfg)
    : voxels_(std::move(voxels)), cfg_(cfg) {
  const double t = cfg_.threshold();
  prunes_.reserve(voxels_.size());
  for (std::size_t k = 0; k < voxels_.size(); ++k) {
    prunes_.push_back(eigen_prune(voxels_[k].cov, t));
    lookup_.emplace(voxels_[k].index, k);
  }
}

std::optional<std::size_t> ReferenceMap::find(const CellIndex& idx) const {
  const auto it = lookup_.find(idx);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ReferenceMap::nearest(const Point2& p, double radius) const {
  const CellIndex c = cell_of(p, cfg_);
  const auto ring = static_cast<std::int64_t>(std::ceil(radius / cfg_.voxel_width));
  std::optional<std::size_t> best;
  double best_d2 = radius * radius;
  for (std::int64_t dx = -ring; dx <= ring; ++dx) {
    for (std::int64_t dy = -ring; dy <= ring; ++dy) {
      const auto k = find({c.ix + dx, c.iy + dy});
      if (!k) continue;
      const double d2 = (voxels_[*k].mean - p).squaredNorm();
      if (d2 > best_d2) continue;
      if (d2 == best_d2 && best && voxels_[*best].index < voxels_[*k].index) continue;
      best = k;
      best_d2 = d2;
    }
  }
  return best;
}

std::vector<Correspondence> correspond(const ReferenceMap& ref,
                                       const std::vector<VoxelStats>& fresh,
                                       const GridConfig& cfg) {
  if (ref.voxels().empty() || fresh.empty()) {
    throw std::domain_error("correspondence needs voxels in both scans");
  }
  std::vector<Correspondence> out;
  out.reserve(fresh.size());
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    std::optional<std::size_t> k;
    if (cfg.correspondence == CorrespondenceMode::colocated) {
      k = ref.find(fresh[j].index);
    } else {
      k = ref.nearest(fresh[j].mean, cfg.radius());
    }
    if (k) out.push_back({*k, j, ref.prunes()[*k]});
  }
  if (out.empty()) throw std::domain_error("no correspondences");
  return out;
}

std::vector<Correspondence> correspond(const std::vector<VoxelStats>& ref,
                                       const std::vector<VoxelStats>& fresh,
                                       const GridConfig& cfg) {
  return correspond(ReferenceMap(ref, cfg), fresh, cfg);
}

nlohmann::json voxels_to_json(const ReferenceMap& ref) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t k = 0; k < ref.voxels().size(); ++k) {
    const auto& v = ref.voxels()[k];
    const auto& pr = ref.prunes()[k];
    nlohmann::json axes = nlohmann::json::array();
    for (int c = 0; c < 2; ++c) {
      axes.push_back({{"eigenvalue", pr.eigenvalues(c)},
                      {"direction", {pr.eigenvectors(0, c), pr.eigenvectors(1, c)}},
                      {"preserved", c < pr.preserved}});
    }
    arr.push_back({{"index", {v.index.ix, v.index.iy}},
                   {"count", v.count},
                   {"mean", {v.mean.x(), v.mean.y()}},
                   {"covariance", {{v.cov(0, 0), v.cov(0, 1)}, {v.cov(1, 0), v.cov(1, 1)}}},
                   {"axes", axes}});
  }
  const auto& cfg = ref.config();
  return {{"voxel_width", cfg.voxel_width},
          {"origin", {cfg.origin.x(), cfg.origin.y()}},
          {"eigen_threshold", cfg.threshold()},
          {"voxels", arr}};
}

}  // namespace icet
