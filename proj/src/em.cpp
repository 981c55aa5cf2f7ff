#include "rblab/em.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace rblab {

namespace {

constexpr double kEmptyMass = 1e-10;
constexpr double kTieTolerance = 1e-12;
constexpr int kLloydIterations = 10;

struct Parameters {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
};

Gmm to_model(const Parameters& p) {
  std::vector<GaussianComponentd> comps;
  comps.reserve(p.means.size());
  try {
    for (std::size_t k = 0; k < p.means.size(); ++k)
      comps.emplace_back(p.weights(Index(k)), p.means[k], p.covariances[k]);
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("degenerate covariance");
  }
  return Gmm(std::move(comps));
}

Eigen::MatrixXd biased_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / double(x.rows());
}

/// Weighted moment updates. A component whose responsibility mass falls
/// below kEmptyMass is re-seeded at the next row of `reseed_order` with the
/// pooled data covariance.
Parameters m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, double reg_covar,
                  const std::vector<Index>& reseed_order) {
  const Index n = x.rows(), d = x.cols(), k_count = resp.cols();
  const Eigen::MatrixXd reg = reg_covar * Eigen::MatrixXd::Identity(d, d);
  Parameters p;
  p.weights.resize(k_count);
  p.means.resize(std::size_t(k_count));
  p.covariances.resize(std::size_t(k_count));
  std::size_t next_reseed = 0;
  Eigen::MatrixXd pooled;
  for (Index k = 0; k < k_count; ++k) {
    const double mass = resp.col(k).sum();
    auto& mu = p.means[std::size_t(k)];
    auto& cov = p.covariances[std::size_t(k)];
    if (mass < kEmptyMass) {
      if (pooled.size() == 0) pooled = biased_covariance(x);
      mu = x.row(reseed_order[next_reseed++ % reseed_order.size()]).transpose();
      cov = pooled + reg;
      p.weights(k) = 1.0 / double(n);
      continue;
    }
    mu = x.transpose() * resp.col(k) / mass;
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = centered.transpose() * (centered.array().colwise() * resp.col(k).array()).matrix() / mass;
    cov = 0.5 * (cov + cov.transpose()) + reg;
    p.weights(k) = mass / double(n);
  }
  p.weights /= p.weights.sum();
  return p;
}

std::vector<Index> kmeans_pp_centers(const Eigen::MatrixXd& x, int k_count, Engine& engine) {
  const Index n = x.rows();
  std::vector<Index> centers;
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.push_back(first(engine));
  Eigen::VectorXd d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (int(centers.size()) < k_count) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0) {
      double u = unit(engine) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2(pick);
        if (u < 0) break;
      }
    } else {
      pick = first(engine);
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

/// Hard assignment to the nearest centre; ties go to the lower index.
std::vector<Index> assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers) {
  std::vector<Index> labels(std::size_t(x.rows()));
  for (Index r = 0; r < x.rows(); ++r) {
    Index best = 0;
    (centers.rowwise() - x.row(r)).rowwise().squaredNorm().minCoeff(&best);
    labels[std::size_t(r)] = best;
  }
  return labels;
}

Parameters initialize(const Eigen::MatrixXd& x, const FitConfig& config, Engine& engine) {
  const Index n = x.rows();
  const int k_count = config.n_components;
  std::vector<Index> seeds;
  if (config.init_method == InitMethod::kmeans_pp) {
    seeds = kmeans_pp_centers(x, k_count, engine);
  } else {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index(0));
    std::shuffle(all.begin(), all.end(), engine);
    seeds.assign(all.begin(), all.begin() + k_count);
  }
  Eigen::MatrixXd centers(k_count, x.cols());
  for (int k = 0; k < k_count; ++k) centers.row(k) = x.row(seeds[std::size_t(k)]);

  std::vector<Index> labels = assign(x, centers);
  if (config.init_method == InitMethod::kmeans_pp) {
    for (int it = 0; it < kLloydIterations; ++it) {
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k_count, x.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k_count);
      for (Index r = 0; r < n; ++r) {
        sums.row(labels[std::size_t(r)]) += x.row(r);
        counts(labels[std::size_t(r)]) += 1;
      }
      for (int k = 0; k < k_count; ++k)
        if (counts(k) > 0) centers.row(k) = sums.row(k) / counts(k);
      auto next = assign(x, centers);
      if (next == labels) break;
      labels = std::move(next);
    }
  }

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k_count);
  for (Index r = 0; r < n; ++r) resp(r, labels[std::size_t(r)]) = 1.0;

  // Empty initial clusters take the rows farthest from their centre.
  Eigen::VectorXd dist(n);
  for (Index r = 0; r < n; ++r) dist(r) = (x.row(r) - centers.row(labels[std::size_t(r)])).squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(a) > dist(b); });
  return m_step(x, resp, config.reg_covar, order);
}

struct Evaluation {
  Eigen::MatrixXd log_terms;  // n×K
  Eigen::VectorXd log_pdf;    // n
  double mean = 0;
};

Evaluation evaluate(const Gmm& model, const Eigen::MatrixXd& x) {
  Evaluation e;
  e.log_terms = model.weighted_log_densities(x);
  e.log_pdf.resize(x.rows());
  for (Index r = 0; r < x.rows(); ++r) e.log_pdf(r) = log_sum_exp(e.log_terms.row(r));
  e.mean = e.log_pdf.mean();
  if (!std::isfinite(e.mean)) throw std::runtime_error("degenerate covariance");
  return e;
}

FittedGmm run_once(const Eigen::MatrixXd& x, const FitConfig& config, int restart) {
  Engine engine = make_engine(derive_seed(config.seed, {std::uint64_t(restart)}));
  Gmm model = to_model(initialize(x, config, engine));
  Evaluation eval = evaluate(model, x);
  FittedGmm fit{model, eval.mean, 0, false, restart, {eval.mean}};

  std::vector<Index> by_density(std::size_t(x.rows()));
  for (int it = 0; it < config.max_iter; ++it) {
    const Eigen::MatrixXd resp = (eval.log_terms.colwise() - eval.log_pdf).array().exp();
    std::iota(by_density.begin(), by_density.end(), Index(0));
    std::stable_sort(by_density.begin(), by_density.end(),
                     [&](Index a, Index b) { return eval.log_pdf(a) < eval.log_pdf(b); });
    Gmm next = to_model(m_step(x, resp, config.reg_covar, by_density));
    Evaluation next_eval = evaluate(next, x);
    const double gain = next_eval.mean - eval.mean;
    const double scale = std::max(std::abs(eval.mean), 1e-300);
    model = std::move(next);
    eval = std::move(next_eval);
    fit.n_iter = it + 1;
    fit.log_likelihood_trace.push_back(eval.mean);
    if (gain < config.rel_tol * scale) {
      fit.converged = true;
      break;
    }
  }
  fit.model = std::move(model);
  fit.final_log_likelihood = eval.mean;
  return fit;
}

}  // namespace

void FitConfig::validate() const {
  if (n_components < 1) throw std::invalid_argument("fit: n_components must be at least 1");
  if (max_iter < 1) throw std::invalid_argument("fit: max_iter must be at least 1");
  if (!(rel_tol > 0)) throw std::invalid_argument("fit: rel_tol must be positive");
  if (!(reg_covar >= 0)) throw std::invalid_argument("fit: reg_covar must be nonnegative");
  if (n_restarts < 1) throw std::invalid_argument("fit: n_restarts must be at least 1");
}

double mean_log_likelihood(const Gmm& model, const Eigen::MatrixXd& rows) {
  return model.log_pdf_rows(rows).mean();
}

Eigen::MatrixXd responsibilities(const Gmm& model, const DatasetMatrix& data) {
  if (data.dim() != model.dim()) throw std::invalid_argument("responsibilities: dimension mismatch");
  const Eigen::MatrixXd terms = model.weighted_log_densities(data.rows);
  Eigen::MatrixXd out(terms.rows(), terms.cols());
  for (Index r = 0; r < terms.rows(); ++r) {
    const double norm = log_sum_exp(terms.row(r));
    out.row(r) = (terms.row(r).array() - norm).exp();
  }
  return out;
}

FittedGmm fit_gmm(const DatasetMatrix& data, const FitConfig& config) {
  config.validate();
  if (data.dim() < 1) throw std::invalid_argument("fit: data has no columns");
  if (data.size() < config.n_components) throw std::invalid_argument("insufficient samples");

  std::optional<FittedGmm> best;
  for (int restart = 0; restart < config.n_restarts; ++restart) {
    FittedGmm fit = run_once(data.rows, config, restart);
    if (!best || fit.final_log_likelihood > best->final_log_likelihood + kTieTolerance) best = std::move(fit);
  }
  return std::move(*best);
}

const char* to_string(InitMethod m) {
  return m == InitMethod::kmeans_pp ? "kmeans_pp" : "random_points";
}

InitMethod init_method_from_string(const std::string& s) {
  if (s == "kmeans_pp" || s == "kmeans++") return InitMethod::kmeans_pp;
  if (s == "random_points") return InitMethod::random_points;
  throw std::invalid_argument("unknown init method '" + s + "'");
}

}  // namespace rblab
