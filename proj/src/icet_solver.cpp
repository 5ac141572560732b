#include "icet/icet_solver.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace icet {

void IcetConfig::validate() const {
  if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(translation_tol > 0.0) || !(rotation_tol > 0.0)) {
    throw std::invalid_argument("convergence tolerances must be positive");
  }
  if (!(condition_cutoff > 1.0)) throw std::invalid_argument("condition cutoff must exceed 1");
  if (r_jitter && !(*r_jitter > 0.0)) throw std::invalid_argument("jitter must be positive");
}

Jacobian jacobian_block(std::span<const Point2> points, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Point2 sum = Point2::Zero();
  for (const auto& p : points) sum += p;
  const Point2 mean = points.empty() ? Point2::Zero() : Point2(sum / double(points.size()));
  Jacobian h = Jacobian::Zero();
  h(0, 0) = -1.0;
  h(1, 1) = -1.0;
  // dR/dtheta is linear, so averaging p first is equivalent to averaging the products.
  h(0, 2) = -s * mean.x() - c * mean.y();
  h(1, 2) = c * mean.x() - s * mean.y();
  return h;
}

Jacobian jacobian_block(const Scan& scan, std::span<const std::size_t> members, double theta) {
  Point2 sum = Point2::Zero();
  for (const std::size_t i : members) sum += scan[i];
  const Point2 mean = sum / double(members.size());
  return jacobian_block(std::span<const Point2>(&mean, 1), theta);
}

Matrix2 noise_block(const VoxelStats& ref, const VoxelStats& fresh, double jitter) {
  Matrix2 r = ref.cov / double(ref.count) + fresh.cov / double(fresh.count);
  r(0, 1) = r(1, 0) = 0.5 * (r(0, 1) + r(1, 0));
  r.diagonal().array() += jitter;
  return r;
}

std::optional<MeasurementBlock> reduce_block(const PruneResult& prune, const Jacobian& h,
                                             const Matrix2& r, const Point2& dy) {
  MeasurementBlock blk;
  switch (prune.preserved) {
    case 2:
      blk.h = h;
      blk.r = r;
      blk.dy = dy;
      return blk;
    case 1: {
      const Eigen::Vector2d u = prune.eigenvectors.col(0);
      blk.h = u.transpose() * h;
      blk.r.resize(1, 1);
      blk.r(0, 0) = u.dot(r * u);
      blk.dy.resize(1);
      blk.dy(0) = u.dot(dy);
      return blk;
    }
    default:
      return std::nullopt;
  }
}

NormalEquations accumulate_normal_equations(std::span<const MeasurementBlock> blocks) {
  NormalEquations ne;
  for (const auto& blk : blocks) {
    if (blk.dimension() == 1) {
      const double w = 1.0 / blk.r(0, 0);
      const Eigen::RowVector3d h = blk.h.row(0);
      ne.a.noalias() += w * h.transpose() * h;
      ne.b.noalias() += (w * blk.dy(0)) * h.transpose();
    } else if (blk.dimension() == 2) {
      const double det = blk.r(0, 0) * blk.r(1, 1) - blk.r(0, 1) * blk.r(1, 0);
      Matrix2 w;
      w << blk.r(1, 1), -blk.r(0, 1), -blk.r(1, 0), blk.r(0, 0);
      w /= det;
      const Eigen::Matrix<double, 2, 3> h = blk.h;
      const Eigen::Vector2d dy = blk.dy;
      ne.a.noalias() += h.transpose() * w * h;
      ne.b.noalias() += h.transpose() * (w * dy);
    }
  }
  ne.a = 0.5 * (ne.a + ne.a.transpose()).eval();
  return ne;
}

namespace {

Eigen::Vector3d canonical_sign(Eigen::Vector3d v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  return v(k) < 0.0 ? Eigen::Vector3d(-v) : v;
}

}  // namespace

StepResult solve_step(const Matrix3& a, const Vector3& b, const IcetConfig& cfg) {
  const Matrix3 sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix3> es(sym);
  const Eigen::Vector3d vals = es.eigenvalues();
  const double lmax = vals(2);
  if (!std::isfinite(lmax) || !(lmax > 0.0)) {
    throw std::domain_error("no observable directions");
  }

  StepResult out;
  out.condition_number =
      vals(0) > 0.0 ? lmax / vals(0) : std::numeric_limits<double>::infinity();

  int first = 0;
  while (first < 2 && !(vals(first) > 0.0 && lmax / vals(first) < cfg.condition_cutoff)) {
    ++first;
  }
  if (first == 0) {
    out.delta = sym.ldlt().solve(b);
    return out;
  }

  const int m = 3 - first;
  Subspace sub;
  sub.preserved.resize(3, m);
  sub.eliminated.resize(3, first);
  sub.gamma = vals.tail(m);
  for (int k = 0; k < first; ++k) sub.eliminated.col(k) = canonical_sign(es.eigenvectors().col(k));
  for (int k = 0; k < m; ++k) {
    sub.preserved.col(k) = canonical_sign(es.eigenvectors().col(first + k));
  }
  const Eigen::VectorXd dz = (sub.preserved.transpose() * b).cwiseQuotient(sub.gamma);
  out.delta = sub.preserved * dz;
  out.subspace = std::move(sub);
  return out;
}

bool IcetSolution::axis_excluded(int k) const {
  if (excluded_basis.cols() == 0) return false;
  return excluded_basis.row(k).squaredNorm() > 0.5;
}

std::vector<double> IcetSolution::excluded_translation_angles_deg() const {
  std::vector<double> out;
  for (Eigen::Index c = 0; c < excluded_basis.cols(); ++c) {
    double a = std::atan2(excluded_basis(1, c), excluded_basis(0, c)) * 180.0 / std::numbers::pi;
    if (a < 0.0) a += 180.0;
    if (a >= 180.0) a -= 180.0;
    out.push_back(a);
  }
  return out;
}

namespace {

std::string describe_excluded(const Eigen::MatrixXd& basis) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    if (c) os << "; ";
    const double tx = basis(0, c);
    const double ty = basis(1, c);
    double heading = std::atan2(ty, tx) * 180.0 / std::numbers::pi;
    if (heading < 0.0) heading += 180.0;
    os << "suppressed state direction [x " << tx << ", y " << ty << ", theta " << basis(2, c)
       << "]";
    if (std::hypot(tx, ty) > 0.5) {
      os << std::setprecision(2) << ", translation along " << heading << " deg from +x"
         << std::setprecision(4);
    } else {
      os << ", mostly rotation";
    }
  }
  return os.str();
}

bool step_converged(const Vector3& d, const IcetConfig& cfg) {
  return std::abs(d(0)) < cfg.translation_tol && std::abs(d(1)) < cfg.translation_tol &&
         std::abs(d(2)) < cfg.rotation_tol;
}

}  // namespace

IcetSolution icet_match(const Scan& ref_scan, const Scan& new_scan, const GridConfig& grid_cfg,
                        const IcetConfig& cfg, const StateVector& x0) {
  grid_cfg.validate();
  cfg.validate();
  if (ref_scan.empty() || new_scan.empty()) throw std::domain_error("scans must be non-empty");

  // Reference statistics and pruning are computed once and frozen.
  const ReferenceMap ref(build_grid(ref_scan, grid_cfg), grid_cfg);
  const double jitter = cfg.jitter(grid_cfg.voxel_width);

  const Vector3 x_bar = x0.as_vector();
  Vector3 x_prime = Vector3::Zero();
  StateVector x_hat = x0;

  IcetSolution sol;
  NormalEquations last_ne;
  StepResult last_step;
  std::vector<MeasurementBlock> blocks;

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    const Scan moved = transform_scan(new_scan, x_hat);
    const std::vector<VoxelStats> fresh = build_grid(moved, grid_cfg);
    const std::vector<Correspondence> pairs = correspond(ref, fresh, grid_cfg);

    blocks.clear();
    double sq = 0.0;
    int dims = 0;
    for (const auto& c : pairs) {
      const VoxelStats& rv = ref.voxels()[c.ref_index];
      const VoxelStats& nv = fresh[c.new_index];
      const Jacobian h = jacobian_block(new_scan, nv.members, x_hat.theta);
      const Matrix2 r = noise_block(rv, nv, jitter);
      auto blk = reduce_block(c.prune, h, r, rv.mean - nv.mean);
      if (!blk) continue;
      sq += blk->dy.squaredNorm();
      dims += blk->dimension();
      blocks.push_back(std::move(*blk));
    }
    if (blocks.empty()) throw std::domain_error("no observable directions");

    last_ne = accumulate_normal_equations(blocks);
    last_step = solve_step(last_ne.a, last_ne.b, cfg);

    x_prime += last_step.delta;
    x_hat = StateVector::from_vector(x_bar + x_prime);
    sol.iterations = iter + 1;
    sol.residual_norm = std::sqrt(sq / dims);

    if (cfg.record_log) {
      sol.log.push_back({last_step.delta, sol.residual_norm, last_step.condition_number,
                         pairs.size(), blocks.size(), last_step.subspace.has_value()});
    }
    if (step_converged(last_step.delta, cfg)) {
      sol.converged = true;
      break;
    }
  }

  if (last_step.subspace) {
    const Subspace& sub = *last_step.subspace;
    // Only the well-conditioned coordinates z = V_P^T x' carry information.
    x_hat = StateVector::from_vector(x_bar + sub.preserved * (sub.preserved.transpose() * x_prime));
    sol.used_subspace = true;
    SubspaceCovariance red;
    red.basis = sub.preserved;
    red.cov = sub.gamma.cwiseInverse().asDiagonal();
    sol.covariance.matrix = red.basis * red.cov * red.basis.transpose();
    sol.covariance.reduced = std::move(red);
    sol.excluded_basis = sub.eliminated;
    sol.excluded_directions = describe_excluded(sub.eliminated);
  } else {
    Matrix3 p = last_ne.a.inverse();
    sol.covariance.matrix = 0.5 * (p + p.transpose());
  }
  sol.estimate = x_hat;
  return sol;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json solution_to_json(const IcetSolution& sol, bool include_log) {
  nlohmann::json j;
  j["algorithm"] = "icet";
  j["estimate"] = {{"x", sol.estimate.x}, {"y", sol.estimate.y}, {"theta", sol.estimate.theta}};
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["used_subspace"] = sol.used_subspace;
  j["residual_norm"] = sol.residual_norm;
  if (sol.covariance.reduced) {
    j["covariance"] = nullptr;
    j["subspace"] = {{"basis", matrix_json(sol.covariance.reduced->basis)},
                     {"covariance", matrix_json(sol.covariance.reduced->cov)},
                     {"excluded_basis", matrix_json(sol.excluded_basis)}};
    j["excluded_translation_angles_deg"] = sol.excluded_translation_angles_deg();
    j["excluded_directions"] = sol.excluded_directions;
  } else {
    j["covariance"] = matrix_json(sol.covariance.matrix);
    j["subspace"] = nullptr;
    j["excluded_translation_angles_deg"] = nlohmann::json::array();
    j["excluded_directions"] = "";
  }
  if (include_log) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : sol.log) {
      log.push_back({{"delta", {e.delta(0), e.delta(1), e.delta(2)}},
                     {"residual_norm", e.residual_norm},
                     {"condition_number", e.condition_number},
                     {"correspondences", e.correspondences},
                     {"blocks", e.blocks},
                     {"used_subspace", e.used_subspace}});
    }
    j["log"] = log;
  }
  return j;
}

}  // namespace icet
