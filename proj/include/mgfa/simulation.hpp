#ifndef MGFA_SIMULATION_HPP
#define MGFA_SIMULATION_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgfa/aecm.hpp"
#include "mgfa/types.hpp"

namespace mgfa {

/// Generating mixture: either factor form (loadings + uniquenesses) or
/// direct covariances, plus the nominal sample size.
struct MixtureSpec {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> loadings;      // factor form when nonempty
  std::vector<Eigen::VectorXd> uniquenesses;
  std::vector<Eigen::MatrixXd> covariances;   // direct form when nonempty
  int sample_size = 0;
  int default_factors = 0;  // q used when fitting this mixture

  bool factor_form() const { return !loadings.empty(); }
  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

  /// Covariance of component g (assembled for factor form).
  Eigen::MatrixXd covariance(int g) const;

  void validate() const;
};

/// Draws component per the weights, then x = mu_g + Lambda_g u + e with
/// u ~ N(0, I_q) and e ~ N(0, Psi_g); direct-covariance specs draw
/// N(mu_g, Sigma_g) through a Cholesky factor. Labels are recorded.
/// Deterministic given the seed.
Dataset sample(const MixtureSpec& spec, std::uint64_t seed);

/// The three built-in generating mixtures used by the simulation studies
/// (see README). Throws std::invalid_argument for other ids.
MixtureSpec builtin_mixture(int id);

/// i.i.d. uniform labels in 1..G, redrawn (with a derived sub-seed) until
/// every class is nonempty. Requires n >= G.
std::vector<int> random_partition(int n, int G, std::uint64_t seed);

/// Reference solution: the fit initialized from the dataset's true labels.
/// Its log-likelihood is the benchmark the restart runs are scored against.
FitResult right_maximum_reference(const Dataset& data, int n_factors,
                                  const FitConfig& config);

/// Fraction of disagreements minimized over all relabelings of the
/// predicted classes: exhaustive over the G! permutations for G <= 8, exact
/// rectangular assignment beyond that. Both labelings are 1-based.
double misclassification_error(const std::vector<int>& predicted,
                               const std::vector<int>& truth);

/// One column of the restart experiment: a label for reports plus the
/// bounds to apply (nullopt = unconstrained).
struct BoundsSetting {
  std::string label;
  std::optional<EigenBounds> bounds;
};

/// Parses "a:b,a:b,...,unbounded" into settings; a bare "b" uses
/// default_lower for a.
std::vector<BoundsSetting> parse_bounds_list(const std::string& text,
                                             double default_lower = 0.01);

enum class RunStatus { converged, no_convergence, failed };

struct RestartRecord {
  int restart = 0;  // 1-based
  std::string bounds_label;
  RunStatus status = RunStatus::failed;
  double loglik = 0.0;       // NaN when failed
  int iterations = 0;
  double miscl_error = 0.0;  // against the true labels; NaN when failed
  bool right_max = false;
  std::string error;         // failure reason when status == failed
};

struct SummaryRow {
  std::string bounds_label;
  int runs = 0;
  int converged = 0;
  int failed = 0;
  int right_max_count = 0;
  double right_max_pct = 0.0;
  // min, Q1, median, Q3, max of the misclassification error over non-failed
  // runs (type-7 quantiles).
  std::array<double, 5> miscl_summary{};
};

struct ExperimentConfig {
  int restarts = 100;
  std::uint64_t seed = 0;
  FitConfig base;  // per-setting bounds override base.bounds
  double right_max_loglik_tol = 0.1;
  double right_max_miscl_tol = 0.02;
  int workers = 0;  // 0 = hardware concurrency
  // Test hook: explicit initial partitions (one per restart). Empty = drawn
  // from random_partition with per-restart derived seeds.
  std::vector<std::vector<int>> initial_partitions;
};

struct ExperimentReport {
  std::vector<RestartRecord> runs;   // ordered by (setting, restart)
  std::vector<SummaryRow> summaries;
  double reference_loglik = 0.0;
  std::vector<int> reference_labels;

  std::string runs_csv() const;
  std::string summary_csv() const;
  const SummaryRow& summary(const std::string& bounds_label) const;
};

/// Restart protocol: one dataset, one shared list of initial partitions,
/// then for every bounds setting a fit from each partition. A run reaches
/// the reference maximum when it converged, its log-likelihood is within
/// right_max_loglik_tol of the reference and its classification differs
/// from the reference classification by at most right_max_miscl_tol.
/// Failures are recorded, never fatal. Deterministic given the seed,
/// independent of worker count.
ExperimentReport run_experiment(const Dataset& data, int n_components,
                                int n_factors,
                                const std::vector<BoundsSetting>& settings,
                                const ExperimentConfig& config);

/// Samples spec first (with the experiment seed), then runs the protocol.
ExperimentReport run_experiment(const MixtureSpec& spec, int n_factors,
                                const std::vector<BoundsSetting>& settings,
                                const ExperimentConfig& config);

/// Type-7 (linear interpolation) min/Q1/median/Q3/max. Requires nonempty.
std::array<double, 5> five_number_summary(std::vector<double> values);

}  // namespace mgfa

#endif  // MGFA_SIMULATION_HPP
