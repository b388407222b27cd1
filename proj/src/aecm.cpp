#include "mgfa/aecm.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mgfa/errors.hpp"
#include "mgfa/model.hpp"

namespace mgfa {

namespace {

constexpr double kPsiFloor = 1e-10;

// log pi_g + log phi_g(x_i) for every observation/component pair.
Eigen::MatrixXd weighted_log_densities(const MgfaParams& params,
                                       const Dataset& data) {
  const int G = params.n_components();
  const long n = data.n_rows();
  std::vector<FactoredGaussian> comps;
  comps.reserve(G);
  for (int g = 0; g < G; ++g)
    comps.emplace_back(params.means[g], params.loadings[g],
                       params.uniquenesses[g], g + 1);
  Eigen::MatrixXd logd(n, G);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd x = data.observations.row(i);
    for (int g = 0; g < G; ++g)
      logd(i, g) = std::log(params.weights[g]) + comps[g].log_density(x);
  }
  return logd;
}

// Normalizes rows of the weighted log-density matrix into responsibilities
// and accumulates the observed-data log-likelihood.
std::pair<Responsibilities, double> normalize_rows(
    const Eigen::MatrixXd& logd) {
  Responsibilities resp;
  resp.matrix.resize(logd.rows(), logd.cols());
  double loglik = 0.0;
  for (long i = 0; i < logd.rows(); ++i) {
    const double m = logd.row(i).maxCoeff();
    if (!std::isfinite(m))
      throw NumericError(
          "e-step: every component underflowed at row " + std::to_string(i + 1),
          i + 1);
    const Eigen::ArrayXd shifted = (logd.row(i).array() - m).exp();
    const double denom = shifted.sum();
    resp.matrix.row(i) = (shifted / denom).matrix();
    loglik += m + std::log(denom);
  }
  return {std::move(resp), loglik};
}

Eigen::MatrixXd factor_scores_impl(const MgfaParams& params,
                                   const Dataset& data,
                                   const std::vector<int>& hard_labels,
                                   ScoreCentering centering) {
  const int G = params.n_components();
  const int q = params.n_factors();
  const long n = data.n_rows();
  std::vector<Eigen::MatrixXd> gammas(G);
  for (int g = 0; g < G; ++g)
    gammas[g] = FactoredGaussian(params.means[g], params.loadings[g],
                                 params.uniquenesses[g], g + 1)
                    .regression();
  const Eigen::VectorXd grand_mean =
      data.observations.colwise().mean().transpose();
  Eigen::MatrixXd scores(n, q);
  for (long i = 0; i < n; ++i) {
    const int g = hard_labels[static_cast<size_t>(i)] - 1;
    const Eigen::VectorXd center =
        centering == ScoreCentering::component_mean ? params.means[g]
                                                    : grand_mean;
    scores.row(i) =
        (gammas[g] * (data.observations.row(i).transpose() - center))
            .transpose();
  }
  return scores;
}

std::vector<int> argmax_labels(const Responsibilities& resp) {
  std::vector<int> labels(static_cast<size_t>(resp.n_rows()));
  for (long i = 0; i < resp.n_rows(); ++i) {
    Eigen::Index g;
    resp.matrix.row(i).maxCoeff(&g);
    labels[static_cast<size_t>(i)] = static_cast<int>(g) + 1;
  }
  return labels;
}

}  // namespace

void FitConfig::validate() const {
  if (max_outer_iterations < 1)
    throw std::invalid_argument("config: max_outer_iterations must be >= 1");
  if (inner_max_iterations < 0)
    throw std::invalid_argument("config: inner_max_iterations must be >= 0");
  if (!(inner_tolerance > 0.0) || !(aitken_epsilon > 0.0))
    throw std::invalid_argument("config: tolerances must be positive");
  if (bounds) bounds->validate();
}

Responsibilities e_step(const MgfaParams& params, const Dataset& data) {
  params.validate();
  return normalize_rows(weighted_log_densities(params, data)).first;
}

MStepResult m_step_weights_means(const Responsibilities& resp,
                                 const Dataset& data, double min_count) {
  const long n = data.n_rows();
  const int G = resp.n_components();
  const int d = data.dim();
  if (resp.n_rows() != n)
    throw std::invalid_argument("m-step: responsibility rows != observations");

  MStepResult out;
  out.scatter.counts = resp.matrix.colwise().sum().transpose();
  out.weights = out.scatter.counts / static_cast<double>(n);
  out.means.resize(G);
  out.scatter.scatter.resize(G);
  for (int g = 0; g < G; ++g) {
    const double ng = out.scatter.counts[g];
    if (ng < min_count)
      throw EmptyComponentError(
          "m-step: component " + std::to_string(g + 1) +
              " holds effective count " + std::to_string(ng),
          g + 1, ng);
    out.means[g] =
        (resp.matrix.col(g).transpose() * data.observations).transpose() / ng;
    const Eigen::MatrixXd centered =
        data.observations.rowwise() - out.means[g].transpose();
    Eigen::MatrixXd s(d, d);
    s.noalias() = centered.transpose() *
                  resp.matrix.col(g).asDiagonal() * centered;
    s /= ng;
    out.scatter.scatter[g] = (s + s.transpose()) / 2.0;
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> init_loadings(
    const Eigen::MatrixXd& scatter, int n_factors) {
  const long d = scatter.rows();
  if (scatter.cols() != d)
    throw std::invalid_argument("init: scatter must be square");
  if (!scatter.allFinite())
    throw std::invalid_argument("init: non-finite scatter");
  if (n_factors < 0 || n_factors >= d)
    throw std::invalid_argument("init: need 0 <= q < d");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
  // Eigen sorts ascending; take the trailing pairs in reverse.
  Eigen::MatrixXd loadings(d, n_factors);
  for (int j = 0; j < n_factors; ++j) {
    const long idx = d - 1 - j;
    const double ev = std::max(es.eigenvalues()[idx], 0.0);
    loadings.col(j) = std::sqrt(ev) * es.eigenvectors().col(idx);
  }
  Eigen::VectorXd psi =
      (scatter.diagonal() - loadings.rowwise().squaredNorm())
          .cwiseMax(kPsiFloor);
  return {std::move(loadings), std::move(psi)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> inner_factor_update(
    const Eigen::MatrixXd& scatter, const Eigen::MatrixXd& loadings,
    const Eigen::VectorXd& uniquenesses, int component) {
  const long d = loadings.rows();
  const long q = loadings.cols();
  if (scatter.rows() != d || scatter.cols() != d ||
      uniquenesses.size() != d)
    throw std::invalid_argument("inner update: dimension mismatch");
  if (!(uniquenesses.array() > 0.0).all())
    throw std::invalid_argument("inner update: uniquenesses must be positive");

  // gamma = Lambda' Sigma^-1 via (I + Lambda' Psi^-1 Lambda)^-1 Lambda' Psi^-1;
  // only q-by-q systems are factored.
  const Eigen::VectorXd psi_inv = uniquenesses.cwiseInverse();
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(q, q);
  inner.noalias() +=
      loadings.transpose() * psi_inv.asDiagonal() * loadings;
  Eigen::LLT<Eigen::MatrixXd> inner_llt(inner);
  if (inner_llt.info() != Eigen::Success)
    throw SingularMatrixError("inner update: covariance factor not positive",
                              component);
  const Eigen::MatrixXd gamma =
      inner_llt.solve(loadings.transpose() * psi_inv.asDiagonal());

  const Eigen::MatrixXd gamma_s = gamma * scatter;  // q x d
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(q, q);
  theta.noalias() -= gamma * loadings;
  theta.noalias() += gamma_s * gamma.transpose();
  theta = (theta + theta.transpose()) / 2.0;
  Eigen::LLT<Eigen::MatrixXd> theta_llt(theta);
  if (theta_llt.info() != Eigen::Success)
    throw SingularMatrixError("inner update: moment matrix not positive",
                              component);

  Eigen::MatrixXd new_loadings = theta_llt.solve(gamma_s).transpose();
  Eigen::VectorXd new_psi =
      (scatter.diagonal() -
       (new_loadings.array() * gamma_s.transpose().array())
           .rowwise()
           .sum()
           .matrix())
          .cwiseMax(kPsiFloor);
  return {std::move(new_loadings), std::move(new_psi)};
}

InnerResult inner_loop(const Eigen::MatrixXd& scatter,
                       const Eigen::MatrixXd& loadings0,
                       const Eigen::VectorXd& uniquenesses0,
                       const FitConfig& config, int component) {
  InnerResult out{loadings0, uniquenesses0, 0, false};
  for (int it = 1; it <= config.inner_max_iterations; ++it) {
    auto [lam, psi] =
        inner_factor_update(scatter, out.loadings, out.uniquenesses, component);
    const double delta =
        std::max((lam - out.loadings).cwiseAbs().maxCoeff(),
                 (psi - out.uniquenesses).cwiseAbs().maxCoeff());
    out.loadings = std::move(lam);
    out.uniquenesses = std::move(psi);
    out.iterations = it;
    if (delta < config.inner_tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

bool aitken_should_stop(double l_prev, double l_curr, double l_next,
                        double epsilon) {
  if (!std::isfinite(l_prev) || !std::isfinite(l_curr) ||
      !std::isfinite(l_next))
    throw std::invalid_argument("aitken: non-finite log-likelihood");
  const double denom = l_curr - l_prev;
  if (std::abs(denom) < 1e-14) return true;  // plateau
  const double accel = (l_next - l_curr) / denom;
  const double asymptote = l_curr + (l_next - l_curr) / (1.0 - accel);
  return asymptote - l_curr < epsilon;
}

FitResult fit(const Dataset& data, int n_components, int n_factors,
              const Responsibilities& init, const FitConfig& config) {
  config.validate();
  const long n = data.n_rows();
  const int d = data.dim();
  if (n_components < 1) throw std::invalid_argument("fit: need G >= 1");
  if (n_factors < 1 || n_factors >= d)
    throw std::invalid_argument("fit: need 1 <= q < d");
  if (init.n_rows() != n || init.n_components() != n_components)
    throw std::invalid_argument("fit: init shape mismatch");
  init.validate();

  const double min_count = std::max(static_cast<double>(n_factors) + 1.0, 2.0);
  Responsibilities resp = init;
  std::vector<Eigen::MatrixXd> loadings(n_components);
  std::vector<Eigen::VectorXd> uniq(n_components);
  bool have_factors = false;

  FitResult result;
  result.params.weights.resize(n_components);

  for (int outer = 1; outer <= config.max_outer_iterations; ++outer) {
    MStepResult ms = m_step_weights_means(resp, data, min_count);
    for (int g = 0; g < n_components; ++g) {
      if (!have_factors || !config.warm_start)
        std::tie(loadings[g], uniq[g]) =
            init_loadings(ms.scatter.scatter[g], n_factors);
      InnerResult inner = inner_loop(ms.scatter.scatter[g], loadings[g],
                                     uniq[g], config, g + 1);
      loadings[g] = std::move(inner.loadings);
      uniq[g] = std::move(inner.uniquenesses);
      if (config.bounds)
        std::tie(loadings[g], uniq[g]) =
            project(loadings[g], uniq[g], *config.bounds, config.projection);
    }
    have_factors = true;

    result.params.weights = ms.weights;
    result.params.means = std::move(ms.means);
    result.params.loadings = loadings;
    result.params.uniquenesses = uniq;

    auto [new_resp, loglik] =
        normalize_rows(weighted_log_densities(result.params, data));
    resp = std::move(new_resp);
    result.loglik_trace.push_back(loglik);

    const size_t k = result.loglik_trace.size();
    if (k >= 3 && aitken_should_stop(result.loglik_trace[k - 3],
                                     result.loglik_trace[k - 2],
                                     result.loglik_trace[k - 1],
                                     config.aitken_epsilon)) {
      result.converged = true;
      break;
    }
  }

  result.outer_iterations = static_cast<int>(result.loglik_trace.size());
  result.responsibilities = std::move(resp);
  result.hard_labels = argmax_labels(result.responsibilities);
  result.factor_scores = factor_scores_impl(
      result.params, data, result.hard_labels, ScoreCentering::component_mean);
  return result;
}

FitResult fit(const Dataset& data, int n_components, int n_factors,
              const std::vector<int>& init_labels, const FitConfig& config) {
  return fit(data, n_components, n_factors,
             Responsibilities::from_labels(init_labels, n_components), config);
}

Eigen::MatrixXd factor_scores(const MgfaParams& params, const Dataset& data,
                              ScoreCentering centering) {
  params.validate();
  const Responsibilities resp = e_step(params, data);
  return factor_scores_impl(params, data, argmax_labels(resp), centering);
}

}  // namespace mgfa
