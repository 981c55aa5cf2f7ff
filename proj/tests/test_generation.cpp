#include <doctest.h>

#include <cmath>
#include <random>

#include "rblab/generation.hpp"
#include "support.hpp"

using namespace rblab;

namespace {

bool same_gmm(const Gmm& a, const Gmm& b) {
  if (a.size() != b.size()) return false;
  for (Index k = 0; k < a.size(); ++k)
    if (a.component(k).weight() != b.component(k).weight() || a.component(k).mean() != b.component(k).mean() ||
        a.component(k).covariance() != b.component(k).covariance())
      return false;
  return true;
}

Eigen::MatrixXd random_invertible(std::mt19937_64& rng, Index d) {
  Eigen::MatrixXd a = oracle::random_spd(rng, d, 0.2);
  a(0, d - 1) += 0.7;  // not symmetric
  return a;
}

}  // namespace

TEST_SUITE("generation_sim") {

TEST_CASE("default ground truth has four equal-weight components") {
  const GenerationConfig cfg;
  const Gmm gt = build_gt_gmm(cfg);
  CHECK(gt.size() == 4);
  CHECK(gt.dim() == 2);
  for (const auto& c : gt.components()) {
    CHECK(c.weight() == 0.25);
    CHECK((c.mean().array().abs() <= cfg.mean_box).all());
  }
}

TEST_CASE("ground truth edge cases and determinism") {
  GenerationConfig cfg;
  cfg.k_anchor = 1;
  cfg.j_unsampled = 0;
  CHECK(build_gt_gmm(cfg).size() == 1);
  GenerationConfig a;
  a.master_seed = 77;
  CHECK(same_gmm(build_gt_gmm(a), build_gt_gmm(a)));
  GenerationConfig b = a;
  b.master_seed = 78;
  CHECK_FALSE(same_gmm(build_gt_gmm(a), build_gt_gmm(b)));
}

TEST_CASE("covariances follow the placement rule") {
  GenerationConfig cfg;
  cfg.dim = 3;
  cfg.cov_scale = 2;
  const Gmm gt = build_gt_gmm(cfg);
  for (const auto& c : gt.components()) {
    // cov_scale·(AAᵀ + dI)/d has every eigenvalue ≥ cov_scale.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance());
    CHECK(es.eigenvalues().minCoeff() >= 2 - 1e-12);
  }
}

TEST_CASE("model M component counts") {
  GenerationConfig cfg;
  CHECK(build_model_m(build_gt_gmm(cfg), cfg).size() == 6);
  cfg.l_irrelevant = 13;
  const Gmm m = build_model_m(build_gt_gmm(cfg), cfg);
  CHECK(m.size() == 17);
  for (const auto& c : m.components()) CHECK(c.weight() == doctest::Approx(1.0 / 17));
}

TEST_CASE("model M with no irrelevant part equals the ground truth") {
  GenerationConfig cfg;
  cfg.l_irrelevant = 0;
  const Gmm gt = build_gt_gmm(cfg);
  CHECK(same_gmm(build_model_m(gt, cfg), gt));
}

TEST_CASE("model M keeps the ground-truth components first") {
  GenerationConfig cfg;
  const Gmm gt = build_gt_gmm(cfg);
  const Gmm m = build_model_m(gt, cfg);
  for (Index k = 0; k < gt.size(); ++k) {
    CHECK(m.component(k).mean() == gt.component(k).mean());
    CHECK(m.component(k).covariance() == gt.component(k).covariance());
  }
  GenerationConfig wrong = cfg;
  wrong.dim = 3;
  CHECK_THROWS_AS(build_model_m(gt, wrong), std::invalid_argument);
}

TEST_CASE("anchor sampling") {
  GenerationConfig cfg;
  const Gmm gt = build_gt_gmm(cfg);
  const DatasetMatrix a = sample_anchor(gt, cfg);
  CHECK(a.size() == 100);
  CHECK(a.provenance == Provenance::anchor);
  for (int l : a.component_labels) {
    CHECK(l >= 0);
    CHECK(l < cfg.k_anchor);
  }
  GenerationConfig one = cfg;
  one.k_anchor = 1;
  one.n_per_anchor_component = 1;
  const DatasetMatrix b = sample_anchor(build_gt_gmm(one), one);
  CHECK(b.size() == 1);
  CHECK(b.component_labels.at(0) == 0);
  GenerationConfig big = cfg;
  big.k_anchor = 5;
  CHECK_THROWS_AS(sample_anchor(gt, big), std::invalid_argument);
}

TEST_CASE("anchor rows come from their labelled component") {
  GenerationConfig cfg;
  cfg.n_per_anchor_component = 4000;
  const Gmm gt = build_gt_gmm(cfg);
  const DatasetMatrix a = sample_anchor(gt, cfg);
  for (int k = 0; k < cfg.k_anchor; ++k) {
    const Eigen::MatrixXd rows = a.rows.middleRows(k * 4000, 4000);
    const Eigen::VectorXd m = rows.colwise().mean().transpose();
    const Eigen::MatrixXd& cov = gt.component(k).covariance();
    for (Index j = 0; j < 2; ++j) CHECK(std::abs(m(j) - gt.component(k).mean()(j)) < 5 * std::sqrt(cov(j, j) / 4000));
  }
}

TEST_CASE("synthetic sampling") {
  GenerationConfig cfg;
  const Gmm gt = build_gt_gmm(cfg);
  const Gmm m = build_model_m(gt, cfg);
  const DatasetMatrix s = sample_synthetic(m, cfg);
  CHECK(s.size() == 1000);
  CHECK(s.provenance == Provenance::synthetic);
  // With no noise the rows are the raw draws.
  const DatasetMatrix raw = sample(m, 1000, s.seed);
  CHECK(s.rows == raw.rows);
}

TEST_CASE("revision noise adds its variance to the covariance") {
  GenerationConfig cfg;
  cfg.n_resample = 100000;
  cfg.noise_scale = 0.7;
  Eigen::Matrix2d sigma;
  sigma << 1.5, 0.4, 0.4, 0.9;
  const Gmm m = Gmm::gaussian(Eigen::Vector2d(1, 2), sigma);
  const DatasetMatrix s = sample_synthetic(m, cfg);
  const Eigen::RowVectorXd mean = s.rows.colwise().mean();
  const Eigen::MatrixXd centered = s.rows.rowwise() - mean;
  const Eigen::MatrixXd emp = centered.transpose() * centered / double(s.size());
  const Eigen::Matrix2d expected = sigma + 0.49 * Eigen::Matrix2d::Identity();
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      const double se =
          std::sqrt((expected(i, i) * expected(j, j) + expected(i, j) * expected(i, j)) / double(s.size()));
      CHECK(std::abs(emp(i, j) - expected(i, j)) < 5 * se);
    }
}

TEST_CASE("synthetic draws never depend on the anchor draw") {
  GenerationConfig cfg;
  cfg.master_seed = 5;
  const Gmm gt = build_gt_gmm(cfg);
  const Gmm m = build_model_m(gt, cfg);
  const DatasetMatrix before = sample_synthetic(m, cfg);
  GenerationConfig more = cfg;
  more.n_per_anchor_component = 80;  // different anchor rows
  const DatasetMatrix anchor_a = sample_anchor(gt, cfg);
  const DatasetMatrix anchor_b = sample_anchor(gt, more);
  CHECK(anchor_a.rows != anchor_b.rows.topRows(anchor_a.size()));
  CHECK(sample_synthetic(m, more).rows == before.rows);
}

TEST_CASE("stages use separate random streams") {
  GenerationConfig cfg;
  cfg.master_seed = 9;
  GenerationConfig more_l = cfg;
  more_l.l_irrelevant = 6;
  CHECK(same_gmm(build_gt_gmm(cfg), build_gt_gmm(more_l)));
  CHECK(sample_anchor(build_gt_gmm(cfg), cfg).rows == sample_anchor(build_gt_gmm(more_l), more_l).rows);
  GenerationConfig more_j = cfg;
  more_j.j_unsampled = 5;
  const Gmm a = build_gt_gmm(cfg), b = build_gt_gmm(more_j);
  for (Index k = 0; k < a.size(); ++k) CHECK(a.component(k).mean() == b.component(k).mean());
  // The irrelevant components do not move when J changes.
  const Gmm ma = build_model_m(a, cfg), mb = build_model_m(b, more_j);
  CHECK(ma.component(a.size()).mean() == mb.component(b.size()).mean());
}

TEST_CASE("config validation") {
  GenerationConfig cfg;
  cfg.k_anchor = 0;
  CHECK_THROWS_AS(build_gt_gmm(cfg), std::invalid_argument);
  cfg = {};
  cfg.j_unsampled = -1;
  CHECK_THROWS_AS(build_gt_gmm(cfg), std::invalid_argument);
  cfg = {};
  cfg.dim = 0;
  CHECK_THROWS_AS(build_gt_gmm(cfg), std::invalid_argument);
  cfg = {};
  cfg.noise_scale = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.n_per_anchor_component = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("noise convolution and first-K restriction") {
  GenerationConfig cfg;
  const Gmm m = build_model_m(build_gt_gmm(cfg), cfg);
  const Gmm noisy = convolve_isotropic_noise(m, 0.5);
  for (Index k = 0; k < m.size(); ++k) {
    const Eigen::MatrixXd expected = m.component(k).covariance() + 0.25 * Eigen::MatrixXd::Identity(2, 2);
    CHECK(noisy.component(k).covariance() == expected);
    CHECK(noisy.component(k).mean() == m.component(k).mean());
  }
  CHECK(same_gmm(convolve_isotropic_noise(m, 0), m));
  const Gmm anchor_dist = restrict_to_first(build_gt_gmm(cfg), cfg.k_anchor);
  CHECK(anchor_dist.size() == 2);
  CHECK(anchor_dist.component(0).weight() == 0.5);
  CHECK_THROWS_AS(restrict_to_first(m, 0), std::invalid_argument);
  CHECK_THROWS_AS(restrict_to_first(m, 7), std::invalid_argument);
}

TEST_CASE("identity pushforward equals the base density") {
  std::mt19937_64 rng(1);
  const Gmm g = test::random_gmm(rng, 3, 2);
  const AffineTransform id = AffineTransform::identity(2);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = oracle::random_vector(rng, 2, 3);
    CHECK(std::abs(pushforward_log_pdf(g, id, x) - g.log_pdf(x)) < 1e-12);
  }
}

TEST_CASE("pushforward of a Gaussian is the transformed Gaussian") {
  std::mt19937_64 rng(2);
  const Index d = 3;
  const Eigen::VectorXd mu = oracle::random_vector(rng, d);
  const Eigen::MatrixXd sigma = oracle::random_spd(rng, d);
  const Eigen::MatrixXd a = random_invertible(rng, d);
  const Eigen::VectorXd b = oracle::random_vector(rng, d);
  const AffineTransform t(a, b);
  const oracle::Gaussian image{1.0, a * mu + b, a * sigma * a.transpose()};
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd x = image.mean + oracle::random_vector(rng, d, 2);
    worst = std::max(worst, std::abs(pushforward_log_pdf(Gmm::gaussian(mu, sigma), t, x) -
                                     std::log(oracle::normal_density(image, x))));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("pushforward of a mixture transforms each component") {
  std::mt19937_64 rng(3);
  const Gmm base = test::random_gmm(rng, 3, 2);
  const Eigen::MatrixXd a = random_invertible(rng, 2);
  const Eigen::VectorXd b = oracle::random_vector(rng, 2);
  const AffineTransform t(a, b);
  std::vector<oracle::Gaussian> image;
  for (const auto& c : base.components()) image.push_back({c.weight(), a * c.mean() + b, a * c.covariance() * a.transpose()});
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd x = a * (base.component(i % 3).mean() + oracle::random_vector(rng, 2, 2)) + b;
    worst = std::max(worst, std::abs(pushforward_log_pdf(base, t, x) - std::log(oracle::mixture_density(image, x))));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("pushforward integrates to one in d=1") {
  const Gmm base({GaussianComponentd(0.4, Eigen::VectorXd::Constant(1, -1), Eigen::MatrixXd::Constant(1, 1, 0.5)),
                  GaussianComponentd(0.6, Eigen::VectorXd::Constant(1, 2), Eigen::MatrixXd::Constant(1, 1, 1.5))});
  const AffineTransform t(Eigen::MatrixXd::Constant(1, 1, -2.5), Eigen::VectorXd::Constant(1, 3));
  const int cells = 20000;
  const double lo = -40, hi = 40, h = (hi - lo) / cells;
  double total = 0;
  for (int i = 0; i < cells; ++i) total += std::exp(pushforward_log_pdf(base, t, Eigen::VectorXd::Constant(1, lo + (i + 0.5) * h)));
  CHECK(std::abs(total * h - 1) < 1e-3);
}

TEST_CASE("singular transforms are rejected") {
  Eigen::Matrix2d s;
  s << 1, 2, 2, 4;
  CHECK_THROWS_AS(AffineTransform(s, Eigen::Vector2d::Zero()), std::invalid_argument);
  CHECK_THROWS_AS(AffineTransform(Eigen::Matrix2d::Identity(), Eigen::Vector3d::Zero()), std::invalid_argument);
  const Gmm g = Gmm::gaussian(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
  CHECK_THROWS_AS(pushforward_log_pdf(g, AffineTransform::identity(3), Eigen::Vector3d::Zero()), std::invalid_argument);
}

}  // TEST_SUITE
