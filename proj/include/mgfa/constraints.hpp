#ifndef MGFA_CONSTRAINTS_HPP
#define MGFA_CONSTRAINTS_HPP

#include <Eigen/Dense>
#include <utility>

#include "mgfa/types.hpp"

namespace mgfa {

/// Singular value decomposition of a d-by-q loading matrix,
/// Lambda = U D V' with U d-by-d, D the d-by-q rectangular diagonal of the
/// q singular values (nonincreasing), V q-by-q.
struct SvdParts {
  Eigen::MatrixXd left_vectors;    // U, d x d
  Eigen::VectorXd singular_values; // q, sorted nonincreasing
  Eigen::MatrixXd right_vectors;   // V, q x q

  Eigen::MatrixXd reconstruct() const;
};

SvdParts svd_loadings(const Eigen::MatrixXd& loadings);

/// True iff every eigenvalue of Lambda Lambda' + diag(Psi) lies in
/// [lower - 1e-10, upper + 1e-10], checked by direct symmetric
/// eigendecomposition. This checker is independent of the sufficient
/// conditions the projection enforces.
bool bounds_satisfied(const Eigen::MatrixXd& loadings,
                      const Eigen::VectorXd& uniquenesses,
                      const EigenBounds& bounds);

/// What `project` guarantees on output.
///
/// `sufficient` clamps the singular values d_i of Lambda and the trailing
/// uniquenesses so that the sufficient conditions d_i^2 + psi_i in [a, b]
/// (i <= q) and psi_i in [a, b] (i > q) hold. Those conditions bound the
/// true spectrum only when the leading singular directions line up with the
/// small-psi coordinates, so the actual eigenvalues of Sigma may still
/// escape [a, b].
///
/// `strict` additionally clamps every uniqueness into [a, b] (which forces
/// lambda_min(Sigma) >= a) and, if lambda_max(Sigma) still exceeds b,
/// rescales the singular values by the largest factor that restores
/// feasibility. Output satisfies bounds_satisfied up to 1e-8.
enum class ProjectionMode { sufficient, strict };

/// Projects (Lambda, Psi) so the constrained conditions hold; see
/// ProjectionMode. Total function; idempotent (bitwise) in sufficient mode.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> project(
    const Eigen::MatrixXd& loadings, const Eigen::VectorXd& uniquenesses,
    const EigenBounds& bounds,
    ProjectionMode mode = ProjectionMode::sufficient);

/// Applies project componentwise; weights and means pass through untouched.
MgfaParams project_all(const MgfaParams& params, const EigenBounds& bounds,
                       ProjectionMode mode = ProjectionMode::sufficient);

}  // namespace mgfa

#endif  // MGFA_CONSTRAINTS_HPP
