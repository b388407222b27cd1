#ifndef MGFA_TYPES_HPP
#define MGFA_TYPES_HPP

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

namespace mgfa {

/// Full parameter vector of a mixture of Gaussian factor analyzers:
/// weights pi_g, means mu_g, d-by-q loadings Lambda_g and diagonal
/// uniquenesses Psi_g for g = 1..G. Component covariances are
/// Sigma_g = Lambda_g Lambda_g' + diag(Psi_g).
struct MgfaParams {
  Eigen::VectorXd weights;                   // G
  std::vector<Eigen::VectorXd> means;        // G vectors of length d
  std::vector<Eigen::MatrixXd> loadings;     // G matrices, d x q
  std::vector<Eigen::VectorXd> uniquenesses; // G vectors of length d, > 0

  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  int n_factors() const {
    return loadings.empty() ? 0 : static_cast<int>(loadings[0].cols());
  }

  /// Throws std::invalid_argument on any violated invariant:
  /// weights nonnegative and summing to 1 within 1e-12, q < d,
  /// all uniquenesses strictly positive, consistent dimensions.
  void validate() const;
};

/// Observations as rows; labels, when present, are 1-based class ids.
struct Dataset {
  Eigen::MatrixXd observations;        // n x d
  std::vector<int> labels;             // empty or length n, values in 1..G
  std::vector<std::string> feature_names;  // empty or length d

  long n_rows() const { return observations.rows(); }
  int dim() const { return static_cast<int>(observations.cols()); }
  bool has_labels() const { return !labels.empty(); }
};

/// Posterior component memberships z_ig; every row is a probability vector.
struct Responsibilities {
  Eigen::MatrixXd matrix;  // n x G

  long n_rows() const { return matrix.rows(); }
  int n_components() const { return static_cast<int>(matrix.cols()); }

  /// Throws std::invalid_argument unless rows are nonnegative and sum to 1
  /// within 1e-10.
  void validate() const;

  /// One-hot matrix from 1-based hard labels.
  static Responsibilities from_labels(const std::vector<int>& labels, int G);
};

/// Admissible interval [lower, upper] for every component-covariance
/// eigenvalue. `upper` may be +infinity.
struct EigenBounds {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  static EigenBounds lower_only(double a) {
    return EigenBounds{a, std::numeric_limits<double>::infinity()};
  }
  bool bounded_above() const { return std::isfinite(upper); }

  /// Throws std::invalid_argument unless 0 < lower <= upper.
  void validate() const;
};

}  // namespace mgfa

#endif  // MGFA_TYPES_HPP
