#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rblab/em.hpp"
#include "support.hpp"

using namespace rblab;

namespace {

DatasetMatrix two_clusters(Index n, Seed seed) {
  const Gmm g({GaussianComponentd(0.5, Eigen::Vector2d(-5, 0), Eigen::Matrix2d::Identity()),
               GaussianComponentd(0.5, Eigen::Vector2d(5, 0), Eigen::Matrix2d::Identity())});
  return sample(g, n, seed);
}

}  // namespace

TEST_SUITE("em_fit") {

TEST_CASE("one component returns the sample mean and biased covariance plus reg") {
  std::mt19937_64 rng(1);
  const Gmm g = test::random_gmm(rng, 3, 3);
  const DatasetMatrix data = sample(g, 400, 2);
  FitConfig cfg;
  cfg.n_components = 1;
  cfg.reg_covar = 1e-3;
  const FittedGmm f = fit_gmm(data, cfg);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (Index i = 0; i < data.size(); ++i) mean += data.rows.row(i).transpose();
  mean /= double(data.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
  for (Index i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd d = data.rows.row(i).transpose() - mean;
    cov += d * d.transpose();
  }
  cov /= double(data.size());
  cov.diagonal().array() += 1e-3;
  CHECK((f.model.component(0).mean() - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((f.model.component(0).covariance() - cov).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(f.model.component(0).weight() == doctest::Approx(1.0));
}

TEST_CASE("two separated clusters are recovered") {
  const DatasetMatrix data = two_clusters(2000, 3);
  FitConfig cfg;
  cfg.n_components = 2;
  cfg.seed = 9;
  const FittedGmm f = fit_gmm(data, cfg);
  std::vector<Eigen::VectorXd> means{f.model.component(0).mean(), f.model.component(1).mean()};
  std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) { return a(0) < b(0); });
  CHECK((means[0] - Eigen::Vector2d(-5, 0)).norm() < 0.2);
  CHECK((means[1] - Eigen::Vector2d(5, 0)).norm() < 0.2);
  CHECK(f.converged);
}

TEST_CASE("fewer rows than components is rejected") {
  DatasetMatrix data;
  data.rows = Eigen::MatrixXd::Random(3, 2);
  FitConfig cfg;
  cfg.n_components = 5;
  CHECK_THROWS_WITH_AS(fit_gmm(data, cfg), doctest::Contains("insufficient samples"), std::invalid_argument);
}

TEST_CASE("identical rows without regularization are degenerate") {
  DatasetMatrix data;
  data.rows = Eigen::MatrixXd::Ones(20, 2);
  FitConfig cfg;
  cfg.n_components = 1;
  cfg.reg_covar = 0;
  CHECK_THROWS_WITH(fit_gmm(data, cfg), doctest::Contains("degenerate covariance"));
  cfg.reg_covar = 1e-6;
  CHECK_NOTHROW(fit_gmm(data, cfg));
}

TEST_CASE("config validation") {
  DatasetMatrix data = two_clusters(50, 1);
  FitConfig cfg;
  cfg.rel_tol = 0;
  CHECK_THROWS_AS(fit_gmm(data, cfg), std::invalid_argument);
  cfg = {};
  cfg.reg_covar = -1;
  CHECK_THROWS_AS(fit_gmm(data, cfg), std::invalid_argument);
  cfg = {};
  cfg.n_components = 0;
  CHECK_THROWS_AS(fit_gmm(data, cfg), std::invalid_argument);
  cfg = {};
  cfg.n_restarts = 0;
  CHECK_THROWS_AS(fit_gmm(data, cfg), std::invalid_argument);
  CHECK(init_method_from_string("kmeans++") == InitMethod::kmeans_pp);
  CHECK(init_method_from_string("random_points") == InitMethod::random_points);
  CHECK_THROWS_AS(init_method_from_string("spectral"), std::invalid_argument);
}

TEST_CASE("responsibilities: single component is all ones") {
  const Gmm g = Gmm::gaussian(Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity());
  DatasetMatrix data = two_clusters(30, 4);
  const Eigen::MatrixXd r = responsibilities(g, data);
  CHECK(r.cols() == 1);
  CHECK((r.array() == 1.0).all());
}

TEST_CASE("responsibilities: nearer component dominates") {
  const Gmm g({GaussianComponentd(0.5, Eigen::VectorXd::Constant(1, -50), Eigen::MatrixXd::Identity(1, 1)),
               GaussianComponentd(0.5, Eigen::VectorXd::Constant(1, 50), Eigen::MatrixXd::Identity(1, 1))});
  DatasetMatrix data;
  data.rows = Eigen::MatrixXd::Constant(1, 1, -49);
  const Eigen::MatrixXd r = responsibilities(g, data);
  CHECK(r(0, 0) > 1 - 1e-12);
  data.rows(0, 0) = 1000;  // far outside both, still finite
  const Eigen::MatrixXd r2 = responsibilities(g, data);
  CHECK(r2(0, 1) > 1 - 1e-12);
  CHECK(r2.allFinite());
}

TEST_CASE("responsibilities match direct computation") {
  std::mt19937_64 rng(5);
  const Gmm g = test::random_gmm(rng, 3, 2);
  DatasetMatrix data;
  data.rows.resize(10, 2);
  for (Index i = 0; i < 10; ++i) data.rows.row(i) = oracle::random_vector(rng, 2, 3).transpose();
  const Eigen::MatrixXd r = responsibilities(g, data);
  const Eigen::MatrixXd o = oracle::responsibilities(test::to_oracle(g), data.rows);
  for (Index i = 0; i < 10; ++i) CHECK(std::abs(r.row(i).sum() - 1) < 1e-12);
  CHECK((r - o).cwiseAbs().maxCoeff() < 1e-9);
  DatasetMatrix wrong;
  wrong.rows = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(responsibilities(g, wrong), std::invalid_argument);
}

TEST_CASE("mean log-likelihood never decreases across iterations") {
  for (int problem = 0; problem < 30; ++problem) {
    std::mt19937_64 rng(100 + problem);
    const int k = 1 + problem % 4;
    const Gmm g = test::random_gmm(rng, k, 1 + problem % 3);
    const DatasetMatrix data = sample(g, 300, Seed(problem));
    FitConfig cfg;
    cfg.n_components = k + problem % 2;
    cfg.seed = Seed(problem);
    cfg.n_restarts = 2;
    cfg.init_method = problem % 3 == 0 ? InitMethod::random_points : InitMethod::kmeans_pp;
    const FittedGmm f = fit_gmm(data, cfg);
    for (std::size_t i = 1; i < f.log_likelihood_trace.size(); ++i)
      CHECK(f.log_likelihood_trace[i] >= f.log_likelihood_trace[i - 1] - 1e-9);
  }
}

TEST_CASE("reported log-likelihood is reproducible by re-evaluation") {
  std::mt19937_64 rng(7);
  const Gmm g = test::random_gmm(rng, 3, 2);
  const DatasetMatrix data = sample(g, 600, 8);
  FitConfig cfg;
  cfg.n_components = 3;
  const FittedGmm f = fit_gmm(data, cfg);
  CHECK(std::abs(mean_log_likelihood(f.model, data.rows) - f.final_log_likelihood) < 1e-9);
  CHECK(f.log_likelihood_trace.back() == f.final_log_likelihood);
  CHECK(f.restart_index >= 0);
  CHECK(f.restart_index < cfg.n_restarts);
  const FittedGmm again = fit_gmm(data, cfg);
  CHECK(again.final_log_likelihood == f.final_log_likelihood);
  CHECK(again.model.component(0).mean() == f.model.component(0).mean());
}

TEST_CASE("row permutation leaves the converged log-likelihood unchanged") {
  const Gmm g({GaussianComponentd(0.3, Eigen::Vector2d(-6, 0), Eigen::Matrix2d::Identity()),
               GaussianComponentd(0.3, Eigen::Vector2d(6, 1), Eigen::Matrix2d::Identity()),
               GaussianComponentd(0.4, Eigen::Vector2d(0, 8), Eigen::Matrix2d::Identity())});
  const DatasetMatrix data = sample(g, 600, 10);
  std::vector<Index> perm(600);
  std::iota(perm.begin(), perm.end(), Index(0));
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  DatasetMatrix shuffled;
  shuffled.rows.resize(600, 2);
  for (Index i = 0; i < 600; ++i) shuffled.rows.row(i) = data.rows.row(perm[std::size_t(i)]);
  FitConfig cfg;
  cfg.n_components = 3;
  cfg.n_restarts = 10;
  cfg.rel_tol = 1e-14;
  cfg.max_iter = 5000;
  const double a = fit_gmm(data, cfg).final_log_likelihood;
  const double b = fit_gmm(shuffled, cfg).final_log_likelihood;
  CHECK(std::abs(a - b) < 1e-9);
}

TEST_CASE("reg_covar bounds the smallest covariance eigenvalue") {
  std::mt19937_64 rng(11);
  const Gmm g = test::random_gmm(rng, 2, 2);
  DatasetMatrix data = sample(g, 40, 12);
  FitConfig cfg;
  cfg.n_components = 12;  // over-parameterized, clusters of one or two points
  cfg.seed = 4;
  const FittedGmm f = fit_gmm(data, cfg);
  for (const auto& c : f.model.components()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance());
    CHECK(es.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
  }
}

TEST_CASE("fit with the true count is nearly as likely as the true model") {
  for (Seed s = 0; s < 5; ++s) {
    std::mt19937_64 rng(200 + s);
    const Gmm g = test::random_gmm(rng, 3, 2, 4);
    const DatasetMatrix data = sample(g, 1000, s);
    FitConfig cfg;
    cfg.n_components = 3;
    cfg.seed = s;
    const FittedGmm f = fit_gmm(data, cfg);
    CHECK(f.final_log_likelihood >= mean_log_likelihood(g, data.rows) - 0.05);
  }
}

TEST_CASE("over-parameterized fits keep valid weights") {
  DatasetMatrix data = two_clusters(30, 6);
  FitConfig cfg;
  cfg.n_components = 25;
  const FittedGmm f = fit_gmm(data, cfg);
  CHECK(f.model.size() == 25);
  CHECK(f.model.weights().allFinite());
  CHECK((f.model.weights().array() > 0).all());
  CHECK(std::isfinite(f.final_log_likelihood));
}

}  // TEST_SUITE
