#include "mgfa/model.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mgfa/errors.hpp"

namespace mgfa {

namespace {

constexpr double kWeightTol = 1e-12;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void MgfaParams::validate() const {
  const int G = n_components();
  require(G >= 1, "params: at least one component required");
  require(static_cast<int>(means.size()) == G &&
              static_cast<int>(loadings.size()) == G &&
              static_cast<int>(uniquenesses.size()) == G,
          "params: per-component field counts disagree");
  const int d = dim();
  const int q = n_factors();
  require(d >= 1, "params: dimension must be positive");
  require(q < d, "params: number of factors must be less than the dimension");
  double sum = 0.0;
  for (int g = 0; g < G; ++g) {
    require(weights[g] >= 0.0, "params: negative mixing weight");
    sum += weights[g];
    require(means[g].size() == d, "params: mean dimension mismatch");
    require(loadings[g].rows() == d && loadings[g].cols() == q,
            "params: loading shape mismatch");
    require(uniquenesses[g].size() == d, "params: uniqueness length mismatch");
    require((uniquenesses[g].array() > 0.0).all(),
            "params: uniquenesses must be strictly positive");
    require(loadings[g].allFinite() && means[g].allFinite(),
            "params: non-finite parameter");
  }
  require(std::abs(sum - 1.0) <= kWeightTol,
          "params: mixing weights must sum to 1");
}

void Responsibilities::validate() const {
  for (long i = 0; i < matrix.rows(); ++i) {
    if ((matrix.row(i).array() < 0.0).any() ||
        std::abs(matrix.row(i).sum() - 1.0) > 1e-10) {
      throw std::invalid_argument(
          "responsibilities: row " + std::to_string(i + 1) +
          " is not a probability vector");
    }
  }
}

Responsibilities Responsibilities::from_labels(const std::vector<int>& labels,
                                               int G) {
  Responsibilities r;
  r.matrix = Eigen::MatrixXd::Zero(static_cast<long>(labels.size()), G);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > G)
      throw std::invalid_argument("labels: value out of 1..G at row " +
                                  std::to_string(i + 1));
    r.matrix(static_cast<long>(i), labels[i] - 1) = 1.0;
  }
  return r;
}

void EigenBounds::validate() const {
  if (!(lower > 0.0) || !(lower <= upper))
    throw std::invalid_argument("bounds: need 0 < lower <= upper");
}

Eigen::MatrixXd covariance_from_factors(const Eigen::MatrixXd& loadings,
                                        const Eigen::VectorXd& uniquenesses) {
  require(loadings.rows() == uniquenesses.size(),
          "covariance: loading rows and uniqueness length disagree");
  require(loadings.cols() < loadings.rows(),
          "covariance: need fewer factors than features");
  require((uniquenesses.array() > 0.0).all(),
          "covariance: uniquenesses must be positive");
  Eigen::MatrixXd sigma = loadings * loadings.transpose();
  sigma.diagonal() += uniquenesses;
  // Force exact symmetry; the product above is symmetric only to rounding.
  return (sigma + sigma.transpose()) / 2.0;
}

FactoredGaussian::FactoredGaussian(Eigen::VectorXd mean,
                                   const Eigen::MatrixXd& loadings,
                                   const Eigen::VectorXd& uniquenesses,
                                   int component)
    : mean_(std::move(mean)) {
  const long d = mean_.size();
  const long q = loadings.cols();
  require(loadings.rows() == d && uniquenesses.size() == d,
          "density: parameter dimensions disagree");
  require(q < d, "density: need fewer factors than features");
  require((uniquenesses.array() > 0.0).all(),
          "density: uniquenesses must be positive");
  require(mean_.allFinite() && loadings.allFinite() &&
              uniquenesses.allFinite(),
          "density: non-finite parameter");

  inv_sqrt_psi_ = uniquenesses.array().rsqrt();
  scaled_loadings_ = inv_sqrt_psi_.asDiagonal() * loadings;
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(q, q);
  inner.noalias() += scaled_loadings_.transpose() * scaled_loadings_;
  inner_.compute(inner);
  if (inner_.info() != Eigen::Success)
    throw SingularMatrixError("density: inner q-by-q matrix not factorizable",
                              component);
  // |Sigma| = |I + W'W| prod psi_i (matrix determinant lemma).
  double log_det_inner = 0.0;
  for (long j = 0; j < q; ++j)
    log_det_inner += 2.0 * std::log(inner_.matrixLLT()(j, j));
  log_det_ = log_det_inner + uniquenesses.array().log().sum();
  if (!std::isfinite(log_det_))
    throw SingularMatrixError("density: degenerate covariance determinant",
                              component);
  norm_const_ =
      -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
              log_det_);
}

double FactoredGaussian::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size())
    throw std::invalid_argument("density: point dimension mismatch");
  if (!x.allFinite())
    throw std::invalid_argument("density: non-finite observation");
  // (x-mu)' Sigma^-1 (x-mu) = t't - || L^-1 W' t ||^2 with t = Psi^-1/2 (x-mu).
  const Eigen::VectorXd t = inv_sqrt_psi_.cwiseProduct(x - mean_);
  const Eigen::VectorXd proj =
      inner_.matrixL().solve(scaled_loadings_.transpose() * t);
  const double quad = t.squaredNorm() - proj.squaredNorm();
  return norm_const_ - 0.5 * quad;
}

Eigen::MatrixXd FactoredGaussian::regression() const {
  // gamma = Lambda' Sigma^-1 = (I + W'W)^-1 W' Psi^-1/2.
  return inner_.solve(scaled_loadings_.transpose() *
                      inv_sqrt_psi_.asDiagonal());
}

double log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& loadings,
                   const Eigen::VectorXd& uniquenesses) {
  return FactoredGaussian(mean, loadings, uniquenesses).log_density(x);
}

double mixture_log_likelihood(const MgfaParams& params, const Dataset& data) {
  params.validate();
  const int G = params.n_components();
  if (data.dim() != params.dim())
    throw std::invalid_argument("likelihood: data/parameter dimension mismatch");

  std::vector<FactoredGaussian> comps;
  comps.reserve(G);
  for (int g = 0; g < G; ++g)
    comps.emplace_back(params.means[g], params.loadings[g],
                       params.uniquenesses[g], g + 1);

  double total = 0.0;
  Eigen::VectorXd terms(G);
  for (long i = 0; i < data.n_rows(); ++i) {
    const Eigen::VectorXd x = data.observations.row(i);
    for (int g = 0; g < G; ++g)
      terms[g] = std::log(params.weights[g]) + comps[g].log_density(x);
    const double m = terms.maxCoeff();
    if (!std::isfinite(m))
      throw NumericError("likelihood: all components vanish at row " +
                             std::to_string(i + 1),
                         i + 1);
    total += m + std::log((terms.array() - m).exp().sum());
  }
  return total;
}

long free_parameter_count(int d, int q) {
  require(q >= 0 && q < d, "parameter count: need 0 <= q < d");
  return static_cast<long>(d) * q + d - static_cast<long>(q) * (q - 1) / 2;
}

double relative_reduction(int d, int q) {
  require(q >= 0 && q < d, "relative reduction: need 0 <= q < d");
  const double dd = d, qq = q;
  return ((dd - qq) * (dd - qq) - (dd + qq)) / (dd * (dd + 1.0));
}

std::string relative_reduction_table(int dmax, int qmax) {
  require(dmax >= 1 && qmax >= 1, "table: need positive grid extents");
  std::ostringstream out;
  out << "q|d";
  for (int d = 1; d <= dmax; ++d) out << '\t' << d;
  out << '\n';
  for (int q = 1; q <= qmax; ++q) {
    out << q;
    for (int d = 1; d <= dmax; ++d) {
      out << '\t';
      if (q >= d) {
        out << '-';
        continue;
      }
      const long num = static_cast<long>(d - q) * (d - q) - (d + q);
      if (num <= 0) {
        out << '-';
        continue;
      }
      // Round half away from zero on the exact rational, in integers, so the
      // printed cells are reproducible (printf rounding of the nearest
      // double misses exact .xx5 ties).
      const long den = static_cast<long>(d) * (d + 1);
      const long cents = (200 * num + den) / (2 * den);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%ld.%02ld", cents / 100, cents % 100);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mgfa
