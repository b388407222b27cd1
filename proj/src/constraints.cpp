#include "mgfa/constraints.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "mgfa/model.hpp"

namespace mgfa {

namespace {

// Comparison slack for the clamp triggers, relative to the bound. Exact
// comparisons would re-trigger on values an SVD round trip moved by an ulp,
// and re-reconstruction would then keep perturbing low bits forever; with
// the slack, a projected point projects to itself bitwise.
double trigger_slack(double bound) {
  return 1e-13 * std::max(1.0, std::abs(bound));
}

Eigen::VectorXd covariance_eigenvalues(const Eigen::MatrixXd& loadings,
                                       const Eigen::VectorXd& uniquenesses) {
  const Eigen::MatrixXd sigma = covariance_from_factors(loadings, uniquenesses);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

Eigen::MatrixXd SvdParts::reconstruct() const {
  const long d = left_vectors.rows();
  const long q = right_vectors.rows();
  Eigen::MatrixXd rect = Eigen::MatrixXd::Zero(d, q);
  rect.diagonal() = singular_values;
  return left_vectors * rect * right_vectors.transpose();
}

SvdParts svd_loadings(const Eigen::MatrixXd& loadings) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      loadings, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return SvdParts{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

bool bounds_satisfied(const Eigen::MatrixXd& loadings,
                      const Eigen::VectorXd& uniquenesses,
                      const EigenBounds& bounds) {
  bounds.validate();
  const Eigen::VectorXd ev = covariance_eigenvalues(loadings, uniquenesses);
  return ev.minCoeff() >= bounds.lower - 1e-10 &&
         ev.maxCoeff() <= bounds.upper + 1e-10;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> project(
    const Eigen::MatrixXd& loadings, const Eigen::VectorXd& uniquenesses,
    const EigenBounds& bounds, ProjectionMode mode) {
  bounds.validate();
  const long d = loadings.rows();
  const long q = loadings.cols();
  if (uniquenesses.size() != d)
    throw std::invalid_argument("project: uniqueness length mismatch");
  const double a = bounds.lower;
  const double b = bounds.upper;
  const double slack_a = trigger_slack(a);
  const double slack_b = trigger_slack(b);

  const SvdParts svd = q > 0 ? svd_loadings(loadings) : SvdParts{};
  Eigen::VectorXd dvals = q > 0 ? svd.singular_values : Eigen::VectorXd();
  Eigen::VectorXd psi = uniquenesses;
  bool d_changed = false;
  bool psi_changed = false;

  // Raise deficient leading variances through the singular values; the
  // sqrt(a) fallback covers psi entries above a (where the trigger cannot
  // fire) and guards against negative arguments.
  for (long i = 0; i < q; ++i) {
    if (dvals[i] * dvals[i] + psi[i] < a - slack_a) {
      dvals[i] = a - psi[i] >= 0.0 ? std::sqrt(a - psi[i]) : std::sqrt(a);
      d_changed = true;
    }
  }
  for (long i = q; i < d; ++i) {
    if (psi[i] < a) {
      psi[i] = a;
      psi_changed = true;
    }
  }
  if (bounds.bounded_above()) {
    for (long i = 0; i < q; ++i) {
      if (dvals[i] * dvals[i] + psi[i] > b + slack_b) {
        dvals[i] = b - psi[i] >= 0.0 ? std::sqrt(b - psi[i]) : std::sqrt(b);
        d_changed = true;
      }
    }
    for (long i = q; i < d; ++i) {
      if (psi[i] > b) {
        psi[i] = b;
        psi_changed = true;
      }
    }
  }

  if (mode == ProjectionMode::strict) {
    // The clamped sums bound the true spectrum only when the singular
    // directions align with the psi coordinates. Force the lower bound
    // through the full uniqueness diagonal, then shrink the singular values
    // until the top eigenvalue fits under b.
    for (long i = 0; i < q; ++i) {
      const double clamped = std::min(std::max(psi[i], a), b);
      if (clamped != psi[i]) {
        psi[i] = clamped;
        psi_changed = true;
      }
    }
    if (q > 0 && bounds.bounded_above()) {
      SvdParts cur = svd;
      cur.singular_values = dvals;
      Eigen::MatrixXd lam = d_changed ? cur.reconstruct() : loadings;
      double top = covariance_eigenvalues(lam, psi).maxCoeff();
      if (top > b + 1e-10) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
          const double t = 0.5 * (lo + hi);
          cur.singular_values = t * dvals;
          top = covariance_eigenvalues(cur.reconstruct(), psi).maxCoeff();
          (top <= b ? lo : hi) = t;
        }
        dvals *= lo;
        d_changed = true;
      }
    }
  }

  Eigen::MatrixXd out_loadings = loadings;
  if (d_changed) {
    SvdParts adjusted = svd;
    adjusted.singular_values = dvals;
    out_loadings = adjusted.reconstruct();
  }
  (void)psi_changed;
  return {std::move(out_loadings), std::move(psi)};
}

MgfaParams project_all(const MgfaParams& params, const EigenBounds& bounds,
                       ProjectionMode mode) {
  MgfaParams out = params;
  for (int g = 0; g < params.n_components(); ++g) {
    auto [lam, psi] =
        project(params.loadings[g], params.uniquenesses[g], bounds, mode);
    out.loadings[g] = std::move(lam);
    out.uniquenesses[g] = std::move(psi);
  }
  return out;
}

}  // namespace mgfa
