#pragma once

#include "icet/geometry.hpp"
#include "icet/voxel_grid.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace icet {

/// Point-to-distribution NDT settings. Voxelization (width, origin, minimum
/// count, correspondence mode) is shared with ICET through `grid`.
struct NdtConfig {
  GridConfig grid;
  std::size_t max_iterations = 50;
  double translation_tol = 1e-4;
  double rotation_tol = 1e-6;
  /// Covariance eigenvalues are raised to at least this fraction of the largest.
  double eig_floor_ratio = 1e-3;
  int max_halvings = 10;

  void validate() const;
};

/// Reference Gaussians with regularized inverse covariances.
class NdtMap {
 public:
  NdtMap(const std::vector<VoxelStats>& voxels, const NdtConfig& cfg);
  NdtMap(const Scan& ref_scan, const NdtConfig& cfg);

  struct Cell {
    Point2 mean;
    Matrix2 info;  // inverse of the floored covariance
  };

  /// Gaussian for each transformed point, nullptr where none applies.
  /// Co-located: the cell containing the point. Nearest-neighbor: points are
  /// grouped by cell and each group follows the reference mean nearest to the
  /// group mean, within the nn radius.
  [[nodiscard]] std::vector<const Cell*> assign(std::span<const Point2> transformed) const;
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }

 private:
  std::vector<Cell> cells_;
  std::map<CellIndex, std::size_t> index_;
  GridConfig grid_;
};

/// sum_i exp(-1/2 d_i^T S_i d_i), d_i = q_i(x) - mu_i
[[nodiscard]] double ndt_score(const StateVector& x, const Scan& new_scan, const NdtMap& map);

struct NdtDerivatives {
  double score = 0.0;
  Vector3 gradient = Vector3::Zero();
  Matrix3 hessian = Matrix3::Zero();
};

/// Score with its analytic gradient and Hessian with respect to (x, y, theta).
[[nodiscard]] NdtDerivatives ndt_derivatives(const StateVector& x, const Scan& new_scan,
                                             const NdtMap& map);

struct NdtResult {
  StateVector estimate;
  double score = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Scores after each accepted step, starting with the initial score.
  std::vector<double> score_history;
};

/// Newton ascent on the NDT score with identity-shift Hessian repair and
/// step halving. NDT provides no solution covariance.
[[nodiscard]] NdtResult ndt_match(const Scan& ref_scan, const Scan& new_scan,
                                  const NdtConfig& cfg, const StateVector& x0 = {});

[[nodiscard]] nlohmann::json ndt_result_to_json(const NdtResult& r);

}  // namespace icet
