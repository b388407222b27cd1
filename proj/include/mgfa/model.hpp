#ifndef MGFA_MODEL_HPP
#define MGFA_MODEL_HPP

#include <Eigen/Dense>
#include <string>

#include "mgfa/types.hpp"

namespace mgfa {

/// Assembles Sigma = Lambda Lambda' + diag(Psi).
Eigen::MatrixXd covariance_from_factors(const Eigen::MatrixXd& loadings,
                                        const Eigen::VectorXd& uniquenesses);

/// Gaussian density machinery for a low-rank-plus-diagonal covariance.
/// The constructor factors the q-by-q inner matrix I + Lambda' Psi^-1 Lambda
/// once; evaluations then cost O(dq) per point and never form the d-by-d
/// covariance or its inverse.
class FactoredGaussian {
 public:
  /// Throws std::invalid_argument on dimension mismatch, nonpositive
  /// uniquenesses or non-finite parameters; SingularMatrixError if the inner
  /// matrix cannot be factored.
  FactoredGaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& loadings,
                   const Eigen::VectorXd& uniquenesses, int component = 0);

  /// log phi_d(x; mu, Lambda Lambda' + Psi).
  double log_density(const Eigen::VectorXd& x) const;

  /// gamma = Lambda' Sigma^-1, the q-by-d posterior-factor regression matrix.
  Eigen::MatrixXd regression() const;

  const Eigen::VectorXd& mean() const { return mean_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd inv_sqrt_psi_;       // Psi^{-1/2} diagonal
  Eigen::MatrixXd scaled_loadings_;    // W = Psi^{-1/2} Lambda
  Eigen::LLT<Eigen::MatrixXd> inner_;  // LLT of I_q + W'W
  double log_det_ = 0.0;               // log |Sigma|
  double norm_const_ = 0.0;            // -(d/2) log 2pi - (1/2) log |Sigma|
};

/// log phi_d(x; mean, loadings loadings' + diag(uniquenesses)), computed
/// through the factored form (only q-by-q systems are solved).
double log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& loadings,
                   const Eigen::VectorXd& uniquenesses);

/// Observed-data log-likelihood sum_i log sum_g pi_g phi_d(x_i; ...),
/// with log-sum-exp stabilization of the inner sum.
double mixture_log_likelihood(const MgfaParams& params, const Dataset& data);

/// Free parameters per component of the factor-covariance model:
/// dq + d - q(q-1)/2. Requires q < d.
long free_parameter_count(int d, int q);

/// Relative saving in covariance parameters versus an unrestricted Gaussian
/// mixture: ((d-q)^2 - (d+q)) / (d(d+1)). May be negative. Requires q < d.
double relative_reduction(int d, int q);

/// Grid of relative reductions for q = 1..qmax, d = 1..dmax, two decimals,
/// "-" where the saving is not positive. Used by the rr-table CLI command.
std::string relative_reduction_table(int dmax, int qmax);

}  // namespace mgfa

#endif  // MGFA_MODEL_HPP
