#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mgfa/errors.hpp"
#include "mgfa/model.hpp"
#include "mgfa/rng.hpp"
#include "mgfa/simulation.hpp"
#include "oracles.hpp"

using namespace mgfa;

namespace {

Eigen::VectorXd eigenvalues_desc(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

MgfaParams params_from_spec(const MixtureSpec& spec) {
  MgfaParams p;
  p.weights = spec.weights;
  p.means = spec.means;
  p.loadings = spec.loadings;
  p.uniquenesses = spec.uniquenesses;
  return p;
}

}  // namespace

TEST_CASE("covariance assembly: zero loadings give the noise diagonal") {
  const Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(4, 2);
  const Eigen::VectorXd psi = Eigen::VectorXd::Constant(4, 0.1);
  const Eigen::MatrixXd sigma = covariance_from_factors(lam, psi);
  CHECK((sigma - 0.1 * Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("covariance assembly: dimension mismatch rejected") {
  CHECK_THROWS_AS(covariance_from_factors(Eigen::MatrixXd::Zero(4, 2),
                                          Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(covariance_from_factors(Eigen::MatrixXd::Zero(2, 2),
                                          Eigen::VectorXd::Ones(2)),
                  std::invalid_argument);
}

TEST_CASE("covariance assembly: first generating mixture spectra") {
  const MixtureSpec spec = builtin_mixture(1);
  const Eigen::VectorXd ev1 = eigenvalues_desc(
      covariance_from_factors(spec.loadings[0], spec.uniquenesses[0]));
  const Eigen::VectorXd want1 = (Eigen::VectorXd(6) << 3.17, 1.63, 0.10, 0.10,
                                 0.10, 0.10)
                                    .finished();
  CHECK((ev1 - want1).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("covariance assembly: symmetric positive definite property") {
  RandomStream rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 2 + rng.uniform_int(9);
    const int q = 1 + rng.uniform_int(d - 1);
    const Eigen::MatrixXd lam = oracles::random_loadings(d, q, rng);
    const Eigen::VectorXd psi = oracles::random_uniquenesses(d, rng);
    const Eigen::MatrixXd sigma = covariance_from_factors(lam, psi);
    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd ev = eigenvalues_desc(sigma);
    CHECK(ev.minCoeff() >= psi.minCoeff() - 1e-10);
  }
}

TEST_CASE("log density: standard normal at its mean") {
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::VectorXd psi = Eigen::VectorXd::Ones(2);
  CHECK(log_density(mu, mu, lam, psi) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("log density: one-sigma shift along a diagonal model costs 1/2") {
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(3, 1);
  Eigen::VectorXd psi(3);
  psi << 0.7, 1.3, 0.25;
  Eigen::VectorXd x = mu;
  x[0] += std::sqrt(psi[0]);
  CHECK(log_density(mu, mu, lam, psi) - log_density(x, mu, lam, psi) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("log density: factored route equals the dense oracle") {
  const MixtureSpec spec = builtin_mixture(1);
  RandomStream rng(23);
  Eigen::VectorXd x(6);
  for (int j = 0; j < 6; ++j) x[j] = 3.0 * rng.normal();
  const double factored = log_density(x, spec.means[0], spec.loadings[0],
                                      spec.uniquenesses[0]);
  const double dense = oracles::dense_log_density(
      x, spec.means[0],
      covariance_from_factors(spec.loadings[0], spec.uniquenesses[0]));
  CHECK(factored == doctest::Approx(dense).epsilon(1e-10));
}

TEST_CASE("log density: dense-oracle agreement over random parameters") {
  RandomStream rng(37);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 2 + rng.uniform_int(9);
    const int q = 1 + rng.uniform_int(d - 1);
    const Eigen::MatrixXd lam = oracles::random_loadings(d, q, rng);
    const Eigen::VectorXd psi = oracles::random_uniquenesses(d, rng);
    Eigen::VectorXd mu(d), x(d);
    for (int j = 0; j < d; ++j) {
      mu[j] = rng.normal();
      x[j] = mu[j] + 2.0 * rng.normal();
    }
    const double got = log_density(x, mu, lam, psi);
    const double want =
        oracles::dense_log_density(x, mu, covariance_from_factors(lam, psi));
    CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("log density: non-finite input rejected") {
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::VectorXd psi = Eigen::VectorXd::Ones(2);
  Eigen::VectorXd x(2);
  x << std::numeric_limits<double>::quiet_NaN(), 0.0;
  CHECK_THROWS_AS(log_density(x, mu, lam, psi), std::invalid_argument);
}

TEST_CASE("mixture log likelihood: single standard normal at its mean") {
  MgfaParams p;
  p.weights = Eigen::VectorXd::Ones(1);
  p.means = {Eigen::VectorXd::Zero(2)};
  p.loadings = {Eigen::MatrixXd::Zero(2, 1)};
  p.uniquenesses = {Eigen::VectorXd::Ones(2)};
  Dataset data;
  data.observations = Eigen::MatrixXd::Zero(1, 2);
  CHECK(mixture_log_likelihood(p, data) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("mixture log likelihood: duplicated component collapses") {
  RandomStream rng(5);
  const Eigen::MatrixXd lam = oracles::random_loadings(3, 1, rng);
  const Eigen::VectorXd psi = oracles::random_uniquenesses(3, rng);
  Eigen::VectorXd mu(3);
  mu << 0.4, -0.2, 1.0;
  MgfaParams p;
  p.weights = Eigen::VectorXd::Constant(2, 0.5);
  p.means = {mu, mu};
  p.loadings = {lam, lam};
  p.uniquenesses = {psi, psi};
  Dataset data;
  data.observations.resize(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) data.observations(i, j) = rng.normal();
  double single = 0.0;
  for (int i = 0; i < 4; ++i)
    single += log_density(data.observations.row(i), mu, lam, psi);
  CHECK(mixture_log_likelihood(p, data) ==
        doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("mixture log likelihood: label-switching symmetry") {
  const MixtureSpec spec = builtin_mixture(1);
  MgfaParams p = params_from_spec(spec);
  const Dataset data = sample(spec, 99);
  const double base = mixture_log_likelihood(p, data);

  MgfaParams swapped = p;
  std::swap(swapped.weights[0], swapped.weights[2]);
  std::swap(swapped.means[0], swapped.means[2]);
  std::swap(swapped.loadings[0], swapped.loadings[2]);
  std::swap(swapped.uniquenesses[0], swapped.uniquenesses[2]);
  CHECK(mixture_log_likelihood(swapped, data) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mixture log likelihood: invariant to loading rotation") {
  const MixtureSpec spec = builtin_mixture(1);
  MgfaParams p = params_from_spec(spec);
  const Dataset data = sample(spec, 7);
  const double base = mixture_log_likelihood(p, data);
  RandomStream rng(301);
  for (int rep = 0; rep < 5; ++rep) {
    MgfaParams rotated = p;
    for (auto& lam : rotated.loadings)
      lam = lam * oracles::random_orthogonal(2, rng).transpose();
    CHECK(mixture_log_likelihood(rotated, data) ==
          doctest::Approx(base).epsilon(1e-8));
  }
}

TEST_CASE("free parameter count") {
  CHECK(free_parameter_count(6, 2) == 17);
  CHECK(free_parameter_count(4, 1) == 8);
  CHECK(free_parameter_count(27, 4) == 129);
  CHECK_THROWS_AS(free_parameter_count(4, 4), std::invalid_argument);
  CHECK_THROWS_AS(free_parameter_count(4, 5), std::invalid_argument);
}

TEST_CASE("relative reduction values and sign") {
  CHECK(relative_reduction(4, 1) == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(std::abs(relative_reduction(10, 3) - 0.33) <= 0.005);
  CHECK(std::abs(relative_reduction(15, 5) - 0.33) <= 0.005);
  for (int d = 2; d <= 15; ++d)
    for (int q = 1; q < d; ++q) {
      const bool positive = relative_reduction(d, q) > 0.0;
      CHECK(positive == ((d - q) * (d - q) > d + q));
    }
}

TEST_CASE("relative reduction table matches the reference grid") {
  CHECK(relative_reduction_table(15, 5) ==
        oracles::reference_reduction_table());
}

TEST_CASE("parameter validation: weight sum and uniqueness positivity") {
  MgfaParams p;
  p.weights = Eigen::Vector2d(0.6, 0.3);
  p.means = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  p.loadings = {Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1)};
  p.uniquenesses = {Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.weights = Eigen::Vector2d(0.5, 0.5);
  CHECK_NOTHROW(p.validate());
  p.uniquenesses[1][0] = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
