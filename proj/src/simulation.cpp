#include "mgfa/simulation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <climits>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mgfa/errors.hpp"
#include "mgfa/model.hpp"
#include "mgfa/rng.hpp"

namespace mgfa {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Eigen::MatrixXd from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<long>(rows.size()),
                    static_cast<long>(rows.begin()->size()));
  long i = 0;
  for (const auto& row : rows) {
    long j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Exact min-cost assignment on a square cost matrix (potentials method).
long long min_cost_assignment(const std::vector<std::vector<long long>>& a) {
  const int n = static_cast<int>(a.size());
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long long> minv(n + 1, LLONG_MAX);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      long long delta = LLONG_MAX;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  long long cost = 0;
  for (int j = 1; j <= n; ++j)
    if (p[j]) cost += a[p[j] - 1][j - 1];
  return cost;
}

}  // namespace

Eigen::MatrixXd MixtureSpec::covariance(int g) const {
  if (factor_form()) return covariance_from_factors(loadings[g], uniquenesses[g]);
  return covariances[g];
}

void MixtureSpec::validate() const {
  const int G = n_components();
  if (G < 1) throw std::invalid_argument("mixture: at least one component");
  if (static_cast<int>(means.size()) != G)
    throw std::invalid_argument("mixture: mean count mismatch");
  if (sample_size < 1)
    throw std::invalid_argument("mixture: sample size must be positive");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must be a distribution");
  const bool factors = factor_form();
  const bool direct = !covariances.empty();
  if (factors == direct)
    throw std::invalid_argument(
        "mixture: exactly one of factor form and direct covariances");
  const int d = dim();
  for (int g = 0; g < G; ++g) {
    if (means[g].size() != d) throw std::invalid_argument("mixture: mean dims");
    if (factors) {
      if (loadings[g].rows() != d ||
          uniquenesses[g].size() != d ||
          !(uniquenesses[g].array() > 0.0).all())
        throw std::invalid_argument("mixture: bad factor parameters");
    } else {
      if (covariances[g].rows() != d || covariances[g].cols() != d)
        throw std::invalid_argument("mixture: covariance shape");
      Eigen::LLT<Eigen::MatrixXd> llt(covariances[g]);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument(
            "mixture: covariance not positive definite for component " +
            std::to_string(g + 1));
    }
  }
}

Dataset sample(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = spec.sample_size;
  const int d = spec.dim();
  const int G = spec.n_components();
  RandomStream rng(seed);

  std::vector<Eigen::MatrixXd> chol(G);
  std::vector<Eigen::VectorXd> noise_sd(G);
  for (int g = 0; g < G; ++g) {
    if (spec.factor_form())
      noise_sd[g] = spec.uniquenesses[g].cwiseSqrt();
    else
      chol[g] = Eigen::LLT<Eigen::MatrixXd>(spec.covariances[g]).matrixL();
  }

  Dataset out;
  out.observations.resize(n, d);
  out.labels.resize(n);
  Eigen::VectorXd u(spec.factor_form() ? spec.loadings[0].cols() : 0);
  Eigen::VectorXd e(d);
  for (int i = 0; i < n; ++i) {
    const int g = rng.categorical(spec.weights);
    out.labels[static_cast<size_t>(i)] = g + 1;
    for (long j = 0; j < e.size(); ++j) e[j] = rng.normal();
    if (spec.factor_form()) {
      for (long j = 0; j < u.size(); ++j) u[j] = rng.normal();
      out.observations.row(i) =
          (spec.means[g] + spec.loadings[g] * u +
           noise_sd[g].cwiseProduct(e))
              .transpose();
    } else {
      out.observations.row(i) = (spec.means[g] + chol[g] * e).transpose();
    }
  }
  return out;
}

MixtureSpec builtin_mixture(int id) {
  MixtureSpec spec;
  auto iso = [](int d, double v) { return Eigen::VectorXd::Constant(d, v); };
  switch (id) {
    case 1: {
      spec.weights = Eigen::Vector3d(0.3, 0.4, 0.3);
      spec.means = {iso(6, 0.0), iso(6, 5.0), iso(6, 10.0)};
      spec.loadings = {
          from_rows({{0.50, 1.00},
                     {1.00, 0.45},
                     {0.05, -0.50},
                     {-0.60, 0.50},
                     {0.50, 0.10},
                     {1.00, -0.15}}),
          from_rows({{0.10, 0.20},
                     {0.20, 0.50},
                     {1.00, -1.00},
                     {-0.20, 0.50},
                     {1.00, 0.70},
                     {1.20, -0.30}}),
          from_rows({{0.10, 0.20},
                     {0.20, 0.00},
                     {1.00, 0.00},
                     {-0.20, 0.00},
                     {1.00, 0.00},
                     {0.00, -1.30}})};
      spec.uniquenesses = {iso(6, 0.1), iso(6, 0.4), iso(6, 0.2)};
      spec.sample_size = 150;
      spec.default_factors = 2;
      return spec;
    }
    case 2: {
      spec.weights.resize(4);
      spec.weights << 0.2, 0.3, 0.35, 0.15;
      spec.means = {iso(7, 0.0), iso(7, 5.0), iso(7, 10.0), iso(7, 15.0)};
      spec.loadings = {
          from_rows({{0.30, 0.60},
                     {0.60, 0.27},
                     {0.03, -0.30},
                     {-0.36, 0.30},
                     {0.30, 0.06},
                     {0.60, -0.09},
                     {-0.63, 1.50}}),
          from_rows({{0.08, 0.16},
                     {0.16, 0.40},
                     {0.80, -0.80},
                     {-0.16, 0.40},
                     {0.80, 0.56},
                     {0.96, -0.24},
                     {1.60, -0.24}}),
          from_rows({{0.07, 0.14},
                     {0.14, 0.00},
                     {0.70, 0.00},
                     {-0.14, 0.00},
                     {0.70, 0.00},
                     {0.00, -0.91},
                     {0.70, -0.70}}),
          from_rows({{0.04, 0.08},
                     {0.08, 0.00},
                     {0.40, 0.00},
                     {-0.08, 0.00},
                     {0.40, 0.00},
                     {0.00, -0.52},
                     {-0.40, 0.80}})};
      spec.uniquenesses = {iso(7, 0.2), iso(7, 0.25), iso(7, 0.15),
                           iso(7, 0.1)};
      spec.sample_size = 100;
      spec.default_factors = 2;
      return spec;
    }
    case 3: {
      spec.weights = Eigen::Vector2d(0.5, 0.5);
      spec.means = {Eigen::Vector3d(0.0, 0.0, 0.0),
                    Eigen::Vector3d(2.0, 2.0, 6.0)};
      spec.covariances = {from_rows({{4.0, -1.8, -1.0},
                                     {-1.8, 2.0, 0.9},
                                     {-1.0, 0.9, 2.0}}),
                          from_rows({{4.0, 1.8, 0.8},
                                     {1.8, 2.0, 0.5},
                                     {0.8, 0.5, 2.0}})};
      spec.sample_size = 100;
      spec.default_factors = 2;
      return spec;
    }
    default:
      throw std::invalid_argument("mixture: unknown builtin id " +
                                  std::to_string(id));
  }
}

std::vector<int> random_partition(int n, int G, std::uint64_t seed) {
  if (n < G || G < 1)
    throw std::invalid_argument("partition: need n >= G >= 1");
  for (std::uint64_t attempt = 0;; ++attempt) {
    RandomStream rng(RandomStream::derive(seed, attempt));
    std::vector<int> labels(static_cast<size_t>(n));
    std::vector<char> seen(static_cast<size_t>(G), 0);
    for (int i = 0; i < n; ++i) {
      const int g = rng.uniform_int(G);
      labels[static_cast<size_t>(i)] = g + 1;
      seen[static_cast<size_t>(g)] = 1;
    }
    if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }))
      return labels;
  }
}

FitResult right_maximum_reference(const Dataset& data, int n_factors,
                                  const FitConfig& config) {
  if (!data.has_labels())
    throw std::invalid_argument("reference: dataset carries no labels");
  const int G = *std::max_element(data.labels.begin(), data.labels.end());
  return fit(data, G, n_factors, data.labels, config);
}

double misclassification_error(const std::vector<int>& predicted,
                               const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw std::invalid_argument("misclassification: label lengths disagree");
  int G = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 1 || truth[i] < 1)
      throw std::invalid_argument("misclassification: labels must be >= 1");
    G = std::max({G, predicted[i], truth[i]});
  }
  const long n = static_cast<long>(truth.size());
  std::vector<std::vector<long long>> agree(
      static_cast<size_t>(G), std::vector<long long>(static_cast<size_t>(G), 0));
  for (size_t i = 0; i < truth.size(); ++i)
    ++agree[static_cast<size_t>(predicted[i] - 1)]
           [static_cast<size_t>(truth[i] - 1)];

  long long best = 0;
  if (G <= 8) {
    std::vector<int> perm(static_cast<size_t>(G));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      long long total = 0;
      for (int p = 0; p < G; ++p)
        total += agree[static_cast<size_t>(p)]
                      [static_cast<size_t>(perm[static_cast<size_t>(p)])];
      best = std::max(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<std::vector<long long>> cost(
        static_cast<size_t>(G),
        std::vector<long long>(static_cast<size_t>(G), 0));
    for (int p = 0; p < G; ++p)
      for (int t = 0; t < G; ++t)
        cost[static_cast<size_t>(p)][static_cast<size_t>(t)] =
            n - agree[static_cast<size_t>(p)][static_cast<size_t>(t)];
    best = static_cast<long long>(G) * n - min_cost_assignment(cost);
  }
  return static_cast<double>(n - best) / static_cast<double>(n);
}

std::vector<BoundsSetting> parse_bounds_list(const std::string& text,
                                             double default_lower) {
  std::vector<BoundsSetting> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    const auto last = token.find_last_not_of(" \t");
    if (first == std::string::npos)
      throw std::invalid_argument("bounds list: empty entry");
    token = token.substr(first, last - first + 1);
    if (token == "unbounded") {
      out.push_back({token, std::nullopt});
      continue;
    }
    EigenBounds b;
    const auto colon = token.find(':');
    try {
      if (colon == std::string::npos) {
        b.lower = default_lower;
        b.upper = std::stod(token);
      } else {
        b.lower = std::stod(token.substr(0, colon));
        const std::string up = token.substr(colon + 1);
        b.upper = up == "inf" ? std::numeric_limits<double>::infinity()
                              : std::stod(up);
      }
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bounds list: cannot parse '" + token + "'");
    }
    b.validate();
    out.push_back({token, b});
  }
  if (out.empty()) throw std::invalid_argument("bounds list: no entries");
  return out;
}

std::array<double, 5> five_number_summary(std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("summary: no values");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double p) {
    const double h = p * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
  };
  return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75),
          values.back()};
}

std::string ExperimentReport::runs_csv() const {
  std::ostringstream out;
  out << "restart,bounds_label,converged,loglik,iterations,miscl_error,"
         "right_max\n";
  for (const auto& r : runs) {
    out << r.restart << ',' << r.bounds_label << ','
        << (r.status == RunStatus::converged ? 1 : 0) << ','
        << format_real(r.loglik) << ',' << r.iterations << ','
        << format_real(r.miscl_error) << ',' << (r.right_max ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string ExperimentReport::summary_csv() const {
  std::ostringstream out;
  out << "bounds_label,runs,converged,failed,right_max_count,right_max_pct,"
         "miscl_min,miscl_q1,miscl_median,miscl_q3,miscl_max\n";
  for (const auto& s : summaries) {
    out << s.bounds_label << ',' << s.runs << ',' << s.converged << ','
        << s.failed << ',' << s.right_max_count << ','
        << format_real(s.right_max_pct);
    for (double v : s.miscl_summary) out << ',' << format_real(v);
    out << '\n';
  }
  return out.str();
}

const SummaryRow& ExperimentReport::summary(
    const std::string& bounds_label) const {
  for (const auto& s : summaries)
    if (s.bounds_label == bounds_label) return s;
  throw std::invalid_argument("report: no summary for '" + bounds_label + "'");
}

ExperimentReport run_experiment(const Dataset& data, int n_components,
                                int n_factors,
                                const std::vector<BoundsSetting>& settings,
                                const ExperimentConfig& config) {
  if (!data.has_labels())
    throw std::invalid_argument("experiment: dataset carries no labels");
  if (settings.empty())
    throw std::invalid_argument("experiment: no bounds settings");
  if (config.restarts < 1)
    throw std::invalid_argument("experiment: restarts must be >= 1");

  FitConfig reference_config = config.base;
  reference_config.bounds.reset();
  const FitResult reference =
      right_maximum_reference(data, n_factors, reference_config);

  const int n = static_cast<int>(data.n_rows());
  std::vector<std::vector<int>> partitions = config.initial_partitions;
  if (partitions.empty()) {
    partitions.reserve(static_cast<size_t>(config.restarts));
    for (int r = 0; r < config.restarts; ++r)
      partitions.push_back(random_partition(
          n, n_components, RandomStream::derive(config.seed, r)));
  } else if (static_cast<int>(partitions.size()) != config.restarts) {
    throw std::invalid_argument("experiment: need one partition per restart");
  }

  const size_t n_jobs = settings.size() * static_cast<size_t>(config.restarts);
  std::vector<RestartRecord> records(n_jobs);
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const size_t job = next.fetch_add(1);
      if (job >= n_jobs) return;
      const size_t s = job / static_cast<size_t>(config.restarts);
      const int r = static_cast<int>(job % static_cast<size_t>(config.restarts));
      RestartRecord rec;
      rec.restart = r + 1;
      rec.bounds_label = settings[s].label;
      FitConfig fc = config.base;
      fc.bounds = settings[s].bounds;
      try {
        const FitResult res = fit(data, n_components, n_factors,
                                  partitions[static_cast<size_t>(r)], fc);
        rec.status = res.converged ? RunStatus::converged
                                   : RunStatus::no_convergence;
        rec.loglik = res.final_loglik();
        rec.iterations = res.outer_iterations;
        rec.miscl_error = misclassification_error(res.hard_labels, data.labels);
        rec.right_max =
            res.converged &&
            std::abs(rec.loglik - reference.final_loglik()) <=
                config.right_max_loglik_tol &&
            misclassification_error(res.hard_labels, reference.hard_labels) <=
                config.right_max_miscl_tol;
      } catch (const std::exception& e) {
        rec.status = RunStatus::failed;
        rec.loglik = kNaN;
        rec.iterations = 0;
        rec.miscl_error = kNaN;
        rec.right_max = false;
        rec.error = e.what();
      }
      records[job] = std::move(rec);
    }
  };

  size_t n_workers = config.workers > 0
                         ? static_cast<size_t>(config.workers)
                         : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_jobs);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  report.reference_loglik = reference.final_loglik();
  report.reference_labels = reference.hard_labels;
  report.runs = std::move(records);
  for (size_t s = 0; s < settings.size(); ++s) {
    SummaryRow row;
    row.bounds_label = settings[s].label;
    row.runs = config.restarts;
    std::vector<double> miscl;
    for (int r = 0; r < config.restarts; ++r) {
      const RestartRecord& rec =
          report.runs[s * static_cast<size_t>(config.restarts) +
                      static_cast<size_t>(r)];
      if (rec.status == RunStatus::converged) ++row.converged;
      if (rec.status == RunStatus::failed)
        ++row.failed;
      else
        miscl.push_back(rec.miscl_error);
      if (rec.right_max) ++row.right_max_count;
    }
    row.right_max_pct =
        100.0 * static_cast<double>(row.right_max_count) / row.runs;
    row.miscl_summary = miscl.empty()
                            ? std::array<double, 5>{kNaN, kNaN, kNaN, kNaN, kNaN}
                            : five_number_summary(std::move(miscl));
    report.summaries.push_back(std::move(row));
  }
  return report;
}

ExperimentReport run_experiment(const MixtureSpec& spec, int n_factors,
                                const std::vector<BoundsSetting>& settings,
                                const ExperimentConfig& config) {
  const Dataset data = sample(spec, config.seed);
  return run_experiment(data, spec.n_components(), n_factors, settings, config);
}

}  // namespace mgfa
