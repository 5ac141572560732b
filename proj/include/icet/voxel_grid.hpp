#pragma once

#include "icet/geometry.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace icet {

struct CellIndex {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

enum class CorrespondenceMode { colocated, nearest_neighbor };

std::string_view to_string(CorrespondenceMode mode);
CorrespondenceMode correspondence_mode_from_string(std::string_view s);

struct GridConfig {
  double voxel_width = 50.0;
  Point2 origin = Point2::Zero();
  std::size_t min_points = 5;
  /// Eigenvalue threshold T; a^2/16 when unset.
  std::optional<double> eigen_threshold;
  CorrespondenceMode correspondence = CorrespondenceMode::nearest_neighbor;
  /// Nearest-neighbor acceptance radius; one voxel width when unset.
  std::optional<double> nn_radius;

  [[nodiscard]] double threshold() const;
  [[nodiscard]] double radius() const;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Returns a warning message when the voxel is not much wider than the lidar
/// noise (a < 10 sigma). Such grids still work but eigen pruning gets noisy.
std::optional<std::string> voxel_width_warning(double voxel_width, double noise_sigma);

[[nodiscard]] CellIndex cell_of(const Point2& p, const GridConfig& cfg);

/// Gaussian summary of the points falling in one cell.
struct VoxelStats {
  CellIndex index;
  std::size_t count = 0;
  Point2 mean = Point2::Zero();
  Matrix2 cov = Matrix2::Zero();
  /// Indices into the scan the voxel was built from, ascending.
  std::vector<std::size_t> members;
};

/// Voxelizes a scan; cells with fewer than cfg.min_points points are dropped.
/// Covariances use the (count - 1) denominator. Result is sorted by index.
/// Throws std::domain_error("no usable voxels") if nothing survives.
[[nodiscard]] std::vector<VoxelStats> build_grid(const Scan& scan, const GridConfig& cfg);

/// Eigen split of a reference covariance into preserved (< T) and eliminated
/// (>= T) principal directions. Eigenpairs are sorted ascending, so the first
/// `preserved` columns of `eigenvectors` form U_P and the rest form U_N.
struct PruneResult {
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();
  Matrix2 eigenvectors = Matrix2::Identity();
  int preserved = 0;

  [[nodiscard]] Eigen::MatrixXd preserved_basis() const { return eigenvectors.leftCols(preserved); }
  [[nodiscard]] Eigen::MatrixXd eliminated_basis() const {
    return eigenvectors.rightCols(2 - preserved);
  }
  [[nodiscard]] Eigen::VectorXd preserved_eigenvalues() const { return eigenvalues.head(preserved); }
};

[[nodiscard]] PruneResult eigen_prune(const Matrix2& q0, double threshold);

/// Reference voxels with their frozen eigen pruning and an index lookup.
class ReferenceMap {
 public:
  ReferenceMap(std::vector<VoxelStats> voxels, const GridConfig& cfg);

  [[nodiscard]] const std::vector<VoxelStats>& voxels() const { return voxels_; }
  [[nodiscard]] const std::vector<PruneResult>& prunes() const { return prunes_; }
  [[nodiscard]] std::optional<std::size_t> find(const CellIndex& idx) const;
  [[nodiscard]] const GridConfig& config() const { return cfg_; }

  /// Nearest voxel mean to p within `radius`; ties go to the lowest cell index.
  [[nodiscard]] std::optional<std::size_t> nearest(const Point2& p, double radius) const;

 private:
  std::vector<VoxelStats> voxels_;
  std::vector<PruneResult> prunes_;
  std::map<CellIndex, std::size_t> lookup_;
  GridConfig cfg_;
};

struct Correspondence {
  std::size_t ref_index = 0;
  std::size_t new_index = 0;
  /// Derived from the reference covariance only.
  PruneResult prune;
};

/// Pairs new-scan voxels with reference voxels. Many-to-one is allowed.
/// Throws std::domain_error("no correspondences") when nothing pairs up.
[[nodiscard]] std::vector<Correspondence> correspond(const ReferenceMap& ref,
                                                     const std::vector<VoxelStats>& fresh,
                                                     const GridConfig& cfg);
[[nodiscard]] std::vector<Correspondence> correspond(const std::vector<VoxelStats>& ref,
                                                     const std::vector<VoxelStats>& fresh,
                                                     const GridConfig& cfg);

/// Debug dump of a voxelization: index, count, mean, covariance, eigenvalues
/// and which principal axes survive pruning.
[[nodiscard]] nlohmann::json voxels_to_json(const ReferenceMap& ref);

}  // namespace icet
