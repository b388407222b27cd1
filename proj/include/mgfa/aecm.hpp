#ifndef MGFA_AECM_HPP
#define MGFA_AECM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mgfa/constraints.hpp"
#include "mgfa/types.hpp"

namespace mgfa {

struct FitConfig {
  int max_outer_iterations = 500;
  int inner_max_iterations = 200;
  double inner_tolerance = 1e-6;
  double aitken_epsilon = 1e-3;
  std::optional<EigenBounds> bounds;
  ProjectionMode projection = ProjectionMode::sufficient;
  // When false, the loading/uniqueness pair is re-seeded from the scatter
  // eigendecomposition at every outer iteration instead of continuing from
  // the previous iterate. Re-seeding can break monotonicity of the
  // log-likelihood trace.
  bool warm_start = true;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct FitResult {
  MgfaParams params;
  std::vector<double> loglik_trace;   // observed-data log-likelihood per outer iteration
  bool converged = false;
  int outer_iterations = 0;
  Responsibilities responsibilities;  // at the final parameters
  std::vector<int> hard_labels;       // argmax_g z_ig, 1-based
  Eigen::MatrixXd factor_scores;      // n x q

  double final_loglik() const {
    return loglik_trace.empty() ? -std::numeric_limits<double>::infinity()
                                : loglik_trace.back();
  }
};

/// Per-component weighted scatter matrices S_g and effective counts n_g.
struct ScatterSet {
  std::vector<Eigen::MatrixXd> scatter;  // G matrices, d x d, symmetric
  Eigen::VectorXd counts;                // G, sums to n
};

struct MStepResult {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  ScatterSet scatter;
};

struct InnerResult {
  Eigen::MatrixXd loadings;
  Eigen::VectorXd uniquenesses;
  int iterations = 0;
  bool converged = false;
};

/// Posterior responsibilities z_ig = pi_g phi_g(x_i) / sum_j pi_j phi_j(x_i),
/// computed in log space. Throws NumericError naming the row if every
/// component underflows for some observation.
Responsibilities e_step(const MgfaParams& params, const Dataset& data);

/// Weight/mean update plus the scatter matrices computed about the new
/// means. A component whose effective count falls below `min_count` raises
/// EmptyComponentError carrying the 1-based component index.
MStepResult m_step_weights_means(const Responsibilities& resp,
                                 const Dataset& data, double min_count = 2.0);

/// Seeds (Lambda, Psi) from the scatter eigendecomposition: column j of
/// Lambda is sqrt(d_j) times the j-th leading eigenvector, and Psi is the
/// residual diagonal diag(S - Lambda Lambda') floored at a small positive
/// value.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> init_loadings(
    const Eigen::MatrixXd& scatter, int n_factors);

/// One step of the factor-analysis fixed-point update:
///   gamma = Lambda'(Lambda Lambda' + Psi)^-1
///   Theta = I_q - gamma Lambda + gamma S gamma'
///   Lambda+ = S gamma' Theta^-1
///   Psi+    = diag(S - Lambda+ gamma S), floored at a small positive value.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> inner_factor_update(
    const Eigen::MatrixXd& scatter, const Eigen::MatrixXd& loadings,
    const Eigen::VectorXd& uniquenesses, int component = 0);

/// Repeats inner_factor_update until the max-abs parameter change drops
/// below config.inner_tolerance or the iteration budget is exhausted.
InnerResult inner_loop(const Eigen::MatrixXd& scatter,
                       const Eigen::MatrixXd& loadings0,
                       const Eigen::VectorXd& uniquenesses0,
                       const FitConfig& config, int component = 0);

/// Aitken-accelerated stopping rule on the last three log-likelihoods:
/// a = (l_next - l_curr)/(l_curr - l_prev), the asymptote estimate is
/// l_curr + (l_next - l_curr)/(1 - a), and the rule fires when the estimated
/// remaining gain drops below epsilon. A flat window (denominator under
/// 1e-14) also stops.
bool aitken_should_stop(double l_prev, double l_curr, double l_next,
                        double epsilon);

/// Full alternating two-cycle estimation: responsibilities and
/// weights/means in cycle 1, the loading/uniqueness inner loop in cycle 2,
/// with optional eigenvalue-bound projection after each cycle-2 update.
/// Deterministic given (data, init, config).
FitResult fit(const Dataset& data, int n_components, int n_factors,
              const Responsibilities& init, const FitConfig& config);

/// Convenience overload: one-hot initialization from 1-based hard labels.
FitResult fit(const Dataset& data, int n_components, int n_factors,
              const std::vector<int>& init_labels, const FitConfig& config);

enum class ScoreCentering { component_mean, grand_mean };

/// Posterior factor means, one row per observation: u_i = gamma_g (x_i - c)
/// where g is the most probable component for x_i and c is that component's
/// mean (or the grand mean of the data, behind the flag).
Eigen::MatrixXd factor_scores(
    const MgfaParams& params, const Dataset& data,
    ScoreCentering centering = ScoreCentering::component_mean);

}  // namespace mgfa

#endif  // MGFA_AECM_HPP
