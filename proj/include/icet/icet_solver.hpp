#pragma once

#include "icet/geometry.hpp"
#include "icet/voxel_grid.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace icet {

struct IcetConfig {
  std::size_t max_iterations = 50;
  double translation_tol = 1e-4;
  double rotation_tol = 1e-6;
  /// Largest eigenvalue ratio of H^T W H accepted before solution directions
  /// are dropped.
  double condition_cutoff = 1e5;
  /// Diagonal jitter added to every noise block; 1e-9 * a^2 when unset.
  std::optional<double> r_jitter;
  bool record_log = false;

  [[nodiscard]] double jitter(double voxel_width) const {
    return r_jitter.value_or(1e-9 * voxel_width * voxel_width);
  }
  void validate() const;
};

using Jacobian = Eigen::Matrix<double, 2, 3>;
using ReducedJacobian = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor, 2, 3>;
using ReducedMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;
using ReducedVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;

/// One voxel's contribution after projection onto its preserved axes.
struct MeasurementBlock {
  ReducedJacobian h;  // n x 3
  ReducedMatrix r;    // n x n
  ReducedVector dy;   // reference mean minus new mean, projected

  [[nodiscard]] int dimension() const { return static_cast<int>(dy.size()); }
};

/// d(voxel mean)/d(x, y, theta) for the voxel's original new-scan points.
[[nodiscard]] Jacobian jacobian_block(std::span<const Point2> points, double theta);
[[nodiscard]] Jacobian jacobian_block(const Scan& scan, std::span<const std::size_t> members,
                                      double theta);

/// Covariance of the mean difference: Q0/|I0| + Q/|I| + eps*I.
[[nodiscard]] Matrix2 noise_block(const VoxelStats& ref, const VoxelStats& fresh, double jitter);

/// Projects a 2D block onto the reference voxel's preserved axes. Returns
/// nothing when every axis was eliminated.
[[nodiscard]] std::optional<MeasurementBlock> reduce_block(const PruneResult& prune,
                                                           const Jacobian& h, const Matrix2& r,
                                                           const Point2& dy);

struct NormalEquations {
  Matrix3 a = Matrix3::Zero();  // sum H^T R^-1 H
  Vector3 b = Vector3::Zero();  // sum H^T R^-1 dy
};

[[nodiscard]] NormalEquations accumulate_normal_equations(std::span<const MeasurementBlock> blocks);

/// Well-conditioned subspace of H^T W H kept after dropping low eigenvalues.
struct Subspace {
  Eigen::MatrixXd preserved;   // 3 x m, V_P
  Eigen::VectorXd gamma;       // m preserved eigenvalues
  Eigen::MatrixXd eliminated;  // 3 x (3 - m), V_N
};

struct StepResult {
  Vector3 delta = Vector3::Zero();
  double condition_number = 1.0;
  std::optional<Subspace> subspace;
};

/// Solves A delta = b, falling back to the well-conditioned eigen subspace of
/// A when its condition number reaches `cfg.condition_cutoff`. Eigenvalues
/// are dropped smallest first until the remaining ratio is below the cutoff.
/// Throws std::domain_error("no observable directions") when A carries no
/// information.
[[nodiscard]] StepResult solve_step(const Matrix3& a, const Vector3& b, const IcetConfig& cfg);

struct IterationLog {
  Vector3 delta = Vector3::Zero();
  double residual_norm = 0.0;
  double condition_number = 1.0;
  std::size_t correspondences = 0;
  std::size_t blocks = 0;
  bool used_subspace = false;
};

struct IcetSolution {
  StateVector estimate;
  StateCovariance covariance;
  std::size_t iterations = 0;
  bool converged = false;
  bool used_subspace = false;
  /// Eliminated state-space directions (3 x k), empty on the full path.
  Eigen::MatrixXd excluded_basis;
  std::string excluded_directions;
  /// RMS of the reduced residuals at the last iteration.
  double residual_norm = 0.0;
  std::vector<IterationLog> log;

  /// True when state axis k (0 = x, 1 = y, 2 = theta) lies mostly in the
  /// eliminated subspace.
  [[nodiscard]] bool axis_excluded(int k) const;
  /// Heading of each eliminated direction's translation part, degrees in [0, 180).
  [[nodiscard]] std::vector<double> excluded_translation_angles_deg() const;
};

/// Full ICET registration of `new_scan` against `ref_scan` starting from x0.
[[nodiscard]] IcetSolution icet_match(const Scan& ref_scan, const Scan& new_scan,
                                      const GridConfig& grid_cfg, const IcetConfig& cfg,
                                      const StateVector& x0 = {});

[[nodiscard]] nlohmann::json solution_to_json(const IcetSolution& sol, bool include_log = false);

}  // namespace icet
