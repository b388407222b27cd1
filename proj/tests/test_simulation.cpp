#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

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

// Brute-force misclassification over all label permutations; make sure G
// stays tiny when calling.
double enumerated_misclassification(const std::vector<int>& pred,
                                    const std::vector<int>& truth, int G) {
  std::vector<int> perm(G);
  std::iota(perm.begin(), perm.end(), 1);
  long best = static_cast<long>(truth.size()) + 1;
  do {
    long mism = 0;
    for (size_t i = 0; i < truth.size(); ++i)
      if (perm[static_cast<size_t>(pred[i] - 1)] != truth[i]) ++mism;
    best = std::min(best, mism);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("sampling: deterministic for a fixed seed") {
  const MixtureSpec spec = builtin_mixture(1);
  const Dataset a = sample(spec, 12345);
  const Dataset b = sample(spec, 12345);
  CHECK(a.observations == b.observations);
  CHECK(a.labels == b.labels);
  const Dataset c = sample(spec, 12346);
  CHECK(a.observations != c.observations);
}

TEST_CASE("sampling: single-component mean concentrates") {
  MixtureSpec spec;
  spec.weights = Eigen::VectorXd::Ones(1);
  spec.means = {Eigen::Vector3d(1.0, -2.0, 0.5)};
  spec.loadings = {Eigen::MatrixXd::Zero(3, 1)};
  spec.uniquenesses = {Eigen::VectorXd::Ones(3)};
  spec.sample_size = 10000;
  const Dataset data = sample(spec, 7);
  const Eigen::VectorXd mean = data.observations.colwise().mean().transpose();
  CHECK((mean - spec.means[0]).cwiseAbs().maxCoeff() <=
        4.0 / std::sqrt(10000.0));
}

TEST_CASE("sampling: per-class covariance approaches the generating model") {
  MixtureSpec spec = builtin_mixture(1);
  spec.sample_size = 150000;
  const Dataset data = sample(spec, 99);
  for (int g = 0; g < 3; ++g) {
    Eigen::MatrixXd x(spec.sample_size, 6);
    long count = 0;
    for (long i = 0; i < data.n_rows(); ++i)
      if (data.labels[static_cast<size_t>(i)] == g + 1)
        x.row(count++) = data.observations.row(i);
    REQUIRE(count > 1000);
    const Eigen::MatrixXd block = x.topRows(count);
    const Eigen::VectorXd mean = block.colwise().mean().transpose();
    const Eigen::MatrixXd centered = block.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(count - 1);
    const Eigen::MatrixXd want = spec.covariance(g);
    CHECK((cov - want).norm() <= 0.02 * want.norm());
  }


  // Direct-covariance route.
  MixtureSpec direct = builtin_mixture(3);
  direct.sample_size = 150000;
  const Dataset d3 = sample(direct, 17);
  Eigen::MatrixXd x(direct.sample_size, 3);
  long count = 0;
  for (long i = 0; i < d3.n_rows(); ++i)
    if (d3.labels[static_cast<size_t>(i)] == 1)
      x.row(count++) = d3.observations.row(i);
  const Eigen::MatrixXd block = x.topRows(count);
  const Eigen::VectorXd mean = block.colwise().mean().transpose();
  const Eigen::MatrixXd centered = block.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(count - 1);
  CHECK((cov - direct.covariances[0]).norm() <=
        0.02 * direct.covariances[0].norm());
}

TEST_CASE("builtin mixtures: shapes and transcription spectra") {
  const MixtureSpec m1 = builtin_mixture(1);
  CHECK(m1.n_components() == 3);
  CHECK(m1.dim() == 6);
  CHECK(m1.default_factors == 2);
  CHECK(m1.sample_size == 150);
  double top1 = 0.0;
  for (int g = 0; g < 3; ++g)
    top1 = std::max(top1, eigenvalues_desc(m1.covariance(g))[0]);
  CHECK(std::abs(top1 - 4.18) <= 0.01);

  const MixtureSpec m2 = builtin_mixture(2);
  CHECK(m2.n_components() == 4);
  CHECK(m2.dim() == 7);
  CHECK(m2.sample_size == 100);
  CHECK(std::abs(m2.weights.sum() - 1.0) <= 1e-15);
  double top2 = 0.0;
  for (int g = 0; g < 4; ++g)
    top2 = std::max(top2, eigenvalues_desc(m2.covariance(g))[0]);
  // Frozen from the transcribed loading/uniqueness blocks.
  CHECK(top2 == doctest::Approx(5.2451).epsilon(1e-3));

  const MixtureSpec m3 = builtin_mixture(3);
  CHECK(m3.n_components() == 2);
  CHECK(m3.dim() == 3);
  CHECK_FALSE(m3.factor_form());
  const Eigen::VectorXd ev1 = eigenvalues_desc(m3.covariances[0]);
  CHECK(std::abs(ev1[0] - 5.55) <= 0.01);
  CHECK(std::abs(ev1[1] - 1.61) <= 0.01);
  CHECK(std::abs(ev1[2] - 0.84) <= 0.01);
  const Eigen::VectorXd ev2 = eigenvalues_desc(m3.covariances[1]);
  CHECK(std::abs(ev2[0] - 5.33) <= 0.01);
  CHECK(std::abs(ev2[1] - 1.73) <= 0.01);
  CHECK(std::abs(ev2[2] - 0.94) <= 0.01);

  CHECK_THROWS_AS(builtin_mixture(0), std::invalid_argument);
  CHECK_THROWS_AS(builtin_mixture(4), std::invalid_argument);
}

TEST_CASE("builtin mixtures: transcription checksum") {
  // Guards the frozen parameter blocks against accidental edits.
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  const auto mix = [&h](double v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
    for (size_t b = 0; b < sizeof v; ++b) {
      h ^= bytes[b];
      h *= 1099511628211ULL;
    }
  };
  for (int id = 1; id <= 3; ++id) {
    const MixtureSpec spec = builtin_mixture(id);
    for (int g = 0; g < spec.n_components(); ++g) {
      mix(spec.weights[g]);
      for (long j = 0; j < spec.means[g].size(); ++j) mix(spec.means[g][j]);
      const Eigen::MatrixXd cov = spec.covariance(g);
      for (long r = 0; r < cov.rows(); ++r)
        for (long c = 0; c < cov.cols(); ++c) mix(cov(r, c));
    }
  }
  CHECK(h == 8666733033121437932ULL);
}

TEST_CASE("random partition: basic contracts") {
  CHECK(random_partition(5, 1, 3) == std::vector<int>{1, 1, 1, 1, 1});
  CHECK(random_partition(10, 3, 7) == random_partition(10, 3, 7));
  CHECK_THROWS_AS(random_partition(2, 3, 0), std::invalid_argument);

  const std::vector<int> big = random_partition(100000, 4, 11);
  std::array<int, 4> freq{};
  for (int v : big) ++freq[static_cast<size_t>(v - 1)];
  for (int g = 0; g < 4; ++g)
    CHECK(std::abs(freq[static_cast<size_t>(g)] / 100000.0 - 0.25) <= 0.01);

  // Tight case exercises the regeneration path.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::vector<int> labels = random_partition(4, 4, seed);
    CHECK(std::set<int>(labels.begin(), labels.end()).size() == 4);
  }
}

TEST_CASE("misclassification: identical and permuted labelings") {
  const std::vector<int> t = {1, 2, 3, 1, 2, 3};
  CHECK(misclassification_error(t, t) == 0.0);
  const std::vector<int> p = {2, 3, 1, 2, 3, 1};
  CHECK(misclassification_error(p, t) == 0.0);
}

TEST_CASE("misclassification: hand example") {
  const std::vector<int> truth = {1, 1, 2, 2};
  const std::vector<int> pred = {2, 2, 2, 1};
  CHECK(misclassification_error(pred, truth) == doctest::Approx(0.25));
  CHECK(misclassification_error(truth, pred) == doctest::Approx(0.25));
}

TEST_CASE("misclassification: relabeling symmetry property") {
  RandomStream rng(191);
  for (int rep = 0; rep < 20; ++rep) {
    const int G = 2 + rng.uniform_int(4);
    const int n = 30;
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[static_cast<size_t>(i)] = 1 + rng.uniform_int(G);
      pred[static_cast<size_t>(i)] = 1 + rng.uniform_int(G);
    }
    const double base = misclassification_error(pred, truth);
    std::vector<int> perm(G);
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(rep));
    std::vector<int> relabeled(n);
    for (int i = 0; i < n; ++i)
      relabeled[static_cast<size_t>(i)] =
          perm[static_cast<size_t>(pred[static_cast<size_t>(i)] - 1)];
    CHECK(misclassification_error(relabeled, truth) == doctest::Approx(base));
    CHECK(misclassification_error(truth, pred) == doctest::Approx(base));
  }
}

TEST_CASE("misclassification: assignment path agrees with enumeration") {
  RandomStream rng(193);
  // G = 9 exceeds the enumeration cutoff inside the library but stays
  // enumerable here.
  const int G = 9, n = 40;
  std::vector<int> truth(n), pred(n);
  for (int i = 0; i < n; ++i) {
    truth[static_cast<size_t>(i)] = 1 + rng.uniform_int(G);
    pred[static_cast<size_t>(i)] = 1 + rng.uniform_int(G);
  }
  // Guarantee every class id appears so both labelings span 1..9.
  for (int g = 0; g < G; ++g) {
    truth[static_cast<size_t>(g)] = g + 1;
    pred[static_cast<size_t>(G + g)] = g + 1;
  }
  CHECK(misclassification_error(pred, truth) ==
        doctest::Approx(enumerated_misclassification(pred, truth, G)));
}

TEST_CASE("five number summary: ordering and interpolation") {
  const auto s = five_number_summary({0.4, 0.1, 0.3, 0.2});
  CHECK(s[0] == doctest::Approx(0.1));
  CHECK(s[1] == doctest::Approx(0.175));
  CHECK(s[2] == doctest::Approx(0.25));
  CHECK(s[3] == doctest::Approx(0.325));
  CHECK(s[4] == doctest::Approx(0.4));
  for (int i = 1; i < 5; ++i) CHECK(s[static_cast<size_t>(i)] >= s[static_cast<size_t>(i - 1)]);
}

TEST_CASE("bounds list parsing") {
  const auto settings = parse_bounds_list("0.01:6, 0.01:10 ,unbounded", 0.01);
  REQUIRE(settings.size() == 3);
  CHECK(settings[0].label == "0.01:6");
  REQUIRE(settings[0].bounds.has_value());
  CHECK(settings[0].bounds->lower == doctest::Approx(0.01));
  CHECK(settings[0].bounds->upper == doctest::Approx(6.0));
  CHECK_FALSE(settings[2].bounds.has_value());

  const auto bare = parse_bounds_list("15", 0.01);
  CHECK(bare[0].bounds->lower == doctest::Approx(0.01));
  CHECK(bare[0].bounds->upper == doctest::Approx(15.0));

  CHECK_THROWS_AS(parse_bounds_list("abc", 0.01), std::invalid_argument);
  CHECK_THROWS_AS(parse_bounds_list("5:1", 0.01), std::invalid_argument);
  CHECK_THROWS_AS(parse_bounds_list("", 0.01), std::invalid_argument);
}

TEST_CASE("reference run: separable data recovers the true classification") {
  MixtureSpec spec;
  spec.weights = Eigen::Vector2d(0.5, 0.5);
  spec.means = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(25, 25, 25)};
  spec.loadings = {0.1 * Eigen::MatrixXd::Ones(3, 1),
                   0.1 * Eigen::MatrixXd::Ones(3, 1)};
  spec.uniquenesses = {Eigen::VectorXd::Constant(3, 0.05),
                       Eigen::VectorXd::Constant(3, 0.05)};
  spec.sample_size = 50;
  const Dataset data = sample(spec, 4);
  const FitResult ref = right_maximum_reference(data, 1, FitConfig{});
  CHECK(misclassification_error(ref.hard_labels, data.labels) == 0.0);

  // Permuting the initializing labels permutes nothing observable.
  Dataset permuted = data;
  for (int& v : permuted.labels) v = v == 1 ? 2 : 1;
  const FitResult ref2 = right_maximum_reference(permuted, 1, FitConfig{});
  CHECK(ref2.final_loglik() ==
        doctest::Approx(ref.final_loglik()).epsilon(1e-8));
  CHECK(misclassification_error(ref2.hard_labels, ref.hard_labels) == 0.0);

  Dataset unlabeled = data;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(right_maximum_reference(unlabeled, 1, FitConfig{}),
                  std::invalid_argument);
}

TEST_CASE("experiment: injected true-label partition reaches the reference") {
  const MixtureSpec spec = builtin_mixture(3);
  ExperimentConfig cfg;
  cfg.restarts = 1;
  cfg.seed = 21;
  const Dataset data = sample(spec, cfg.seed);
  cfg.initial_partitions = {data.labels};
  const auto report = run_experiment(data, 2, 2, parse_bounds_list("unbounded"),
                                     cfg);
  CHECK(report.summary("unbounded").right_max_pct == doctest::Approx(100.0));
  CHECK(report.runs.size() == 1);
  CHECK(report.runs[0].right_max);
}

TEST_CASE("experiment: deterministic and worker-count independent") {
  const MixtureSpec spec = builtin_mixture(3);
  ExperimentConfig cfg;
  cfg.restarts = 6;
  cfg.seed = 77;
  const auto settings = parse_bounds_list("0.01:6,unbounded");

  cfg.workers = 1;
  const auto serial = run_experiment(spec, 2, settings, cfg);
  cfg.workers = 2;
  const auto parallel = run_experiment(spec, 2, settings, cfg);
  CHECK(serial.runs_csv() == parallel.runs_csv());
  CHECK(serial.summary_csv() == parallel.summary_csv());

  const auto again = run_experiment(spec, 2, settings, cfg);
  CHECK(again.runs_csv() == parallel.runs_csv());
}

TEST_CASE("experiment: per-run failures are recorded, not fatal") {
  const MixtureSpec spec = builtin_mixture(1);
  const Dataset data = sample(spec, 5);
  ExperimentConfig cfg;
  cfg.restarts = 1;
  cfg.seed = 1;
  // Partition giving the third component fewer members than the inner
  // factor dimension requires.
  std::vector<int> starving(150, 1);
  for (int i = 0; i < 40; ++i) starving[static_cast<size_t>(i)] = 2;
  starving[140] = 3;
  cfg.initial_partitions = {starving};
  const auto report =
      run_experiment(data, 3, 2, parse_bounds_list("unbounded"), cfg);
  REQUIRE(report.runs.size() == 1);
  CHECK(report.runs[0].status == RunStatus::failed);
  CHECK_FALSE(report.runs[0].right_max);
  CHECK(std::isnan(report.runs[0].loglik));
  CHECK(report.summary("unbounded").failed == 1);
  CHECK(!report.runs[0].error.empty());
}

TEST_CASE("experiment: shared partitions across bounds settings") {
  const MixtureSpec spec = builtin_mixture(3);
  ExperimentConfig cfg;
  cfg.restarts = 4;
  cfg.seed = 31;
  const auto report =
      run_experiment(spec, 2, parse_bounds_list("0.01:6,0.01:10"), cfg);
  // Every restart index appears once per setting.
  REQUIRE(report.runs.size() == 8);
  for (int r = 0; r < 4; ++r) {
    CHECK(report.runs[static_cast<size_t>(r)].restart == r + 1);
    CHECK(report.runs[static_cast<size_t>(4 + r)].restart == r + 1);
  }
  // CSV headers are stable.
  CHECK(report.runs_csv().rfind("restart,bounds_label,converged,loglik,"
                                "iterations,miscl_error,right_max\n",
                                0) == 0);
  CHECK(report.summary_csv().rfind("bounds_label,runs,converged,failed,"
                                   "right_max_count,right_max_pct,miscl_min,"
                                   "miscl_q1,miscl_median,miscl_q3,miscl_max\n",
                                   0) == 0);
}
