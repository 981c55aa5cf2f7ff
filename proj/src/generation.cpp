#include "rblab/generation.hpp"

#include <stdexcept>

namespace rblab {

namespace {

constexpr std::uint64_t kGtStream = tag("gt");
constexpr std::uint64_t kModelStream = tag("model_m");
constexpr std::uint64_t kAnchorStream = tag("anchor");
constexpr std::uint64_t kSyntheticStream = tag("synthetic");
constexpr std::uint64_t kNoiseStream = tag("noise");

/// Each component draws from its own stream so that changing K, J or L never
/// moves the components that remain.
GaussianComponentd place_component(const GenerationConfig& config, Seed seed, double weight) {
  Engine engine = make_engine(seed);
  std::uniform_real_distribution<double> box(-config.mean_box, config.mean_box);
  std::normal_distribution<double> normal;
  const Index d = config.dim;
  Eigen::VectorXd mean(d);
  for (Index i = 0; i < d; ++i) mean(i) = box(engine);
  Eigen::MatrixXd a(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) a(i, j) = normal(engine);
  Eigen::MatrixXd cov = config.cov_scale * (a * a.transpose() + double(d) * Eigen::MatrixXd::Identity(d, d)) / double(d);
  cov = 0.5 * (cov + cov.transpose());
  return GaussianComponentd(weight, std::move(mean), std::move(cov));
}

}  // namespace

void GenerationConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("generation: dim must be at least 1");
  if (k_anchor < 1) throw std::invalid_argument("generation: K must be at least 1");
  if (j_unsampled < 0 || l_irrelevant < 0) throw std::invalid_argument("generation: J and L must be nonnegative");
  if (n_per_anchor_component < 1) throw std::invalid_argument("generation: N must be at least 1");
  if (n_resample < 1) throw std::invalid_argument("generation: n_resample must be at least 1");
  if (!(noise_scale >= 0)) throw std::invalid_argument("generation: noise_scale must be nonnegative");
  if (!(mean_box >= 0)) throw std::invalid_argument("generation: mean_box must be nonnegative");
  if (!(cov_scale > 0)) throw std::invalid_argument("generation: cov_scale must be positive");
}

AffineTransform::AffineTransform(Eigen::MatrixXd matrix, Eigen::VectorXd offset)
    : matrix_(std::move(matrix)), offset_(std::move(offset)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() != offset_.size() || offset_.size() == 0)
    throw std::invalid_argument("AffineTransform: matrix must be square and match the offset length");
  lu_.compute(matrix_);
  const double det = lu_.determinant();
  if (!(std::abs(det) > 1e-12)) throw std::invalid_argument("AffineTransform: matrix is singular");
  log_abs_det_ = std::log(std::abs(det));
}

AffineTransform AffineTransform::identity(Index d) {
  return AffineTransform(Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d));
}

Gmm build_gt_gmm(const GenerationConfig& config) {
  config.validate();
  const int count = config.gt_components();
  std::vector<GaussianComponentd> comps;
  for (int k = 0; k < count; ++k)
    comps.push_back(place_component(config, derive_seed(config.master_seed, {kGtStream, std::uint64_t(k)}),
                                    1.0 / count));
  return Gmm(std::move(comps));
}

Gmm build_model_m(const Gmm& gt, const GenerationConfig& config) {
  config.validate();
  if (gt.dim() != config.dim) throw std::invalid_argument("build_model_m: gt dimension differs from config");
  const int count = int(gt.size()) + config.l_irrelevant;
  const double w = 1.0 / count;
  std::vector<GaussianComponentd> comps;
  for (const auto& c : gt.components()) comps.push_back(c.with_weight(w));
  for (int l = 0; l < config.l_irrelevant; ++l)
    comps.push_back(place_component(config, derive_seed(config.master_seed, {kModelStream, std::uint64_t(l)}), w));
  return Gmm(std::move(comps));
}

DatasetMatrix sample_anchor(const Gmm& gt, const GenerationConfig& config) {
  config.validate();
  if (config.k_anchor > gt.size()) throw std::invalid_argument("sample_anchor: K exceeds the number of components");
  const Index n = config.n_per_anchor_component;
  const Seed seed = derive_seed(config.master_seed, {kAnchorStream});
  Engine engine = make_engine(seed);
  std::normal_distribution<double> normal;

  DatasetMatrix out;
  out.rows.resize(n * config.k_anchor, gt.dim());
  out.component_labels.reserve(std::size_t(out.rows.rows()));
  out.provenance = Provenance::anchor;
  out.seed = seed;
  Eigen::VectorXd z(gt.dim());
  Index r = 0;
  for (int k = 0; k < config.k_anchor; ++k) {
    for (Index i = 0; i < n; ++i, ++r) {
      for (Index j = 0; j < z.size(); ++j) z(j) = normal(engine);
      out.rows.row(r) = gt.component(k).transform_standard(z).transpose();
      out.component_labels.push_back(k);
    }
  }
  return out;
}

DatasetMatrix sample_synthetic(const Gmm& m, const GenerationConfig& config) {
  config.validate();
  DatasetMatrix out = sample(m, config.n_resample, derive_seed(config.master_seed, {kSyntheticStream}),
                             Provenance::synthetic);
  if (config.noise_scale > 0) {
    Engine engine = make_engine(derive_seed(config.master_seed, {kNoiseStream}));
    std::normal_distribution<double> noise(0.0, config.noise_scale);
    for (Index r = 0; r < out.size(); ++r)
      for (Index j = 0; j < out.dim(); ++j) out.rows(r, j) += noise(engine);
  }
  return out;
}

Gmm restrict_to_first(const Gmm& g, int k) {
  if (k < 1 || k > g.size()) throw std::invalid_argument("restrict_to_first: k out of range");
  double total = 0;
  for (int i = 0; i < k; ++i) total += g.component(i).weight();
  if (!(total > 0)) throw std::invalid_argument("restrict_to_first: retained weight is zero");
  std::vector<GaussianComponentd> comps;
  for (int i = 0; i < k; ++i) comps.push_back(g.component(i).with_weight(g.component(i).weight() / total));
  return Gmm(std::move(comps));
}

Gmm convolve_isotropic_noise(const Gmm& g, double noise_scale) {
  if (!(noise_scale >= 0)) throw std::invalid_argument("convolve_isotropic_noise: noise_scale must be nonnegative");
  const Eigen::MatrixXd add = noise_scale * noise_scale * Eigen::MatrixXd::Identity(g.dim(), g.dim());
  std::vector<GaussianComponentd> comps;
  for (const auto& c : g.components()) comps.emplace_back(c.weight(), c.mean(), c.covariance() + add);
  return Gmm(std::move(comps));
}

double pushforward_log_pdf(const Gmm& base, const AffineTransform& t, const Eigen::VectorXd& x) {
  if (t.dim() != base.dim() || x.size() != base.dim())
    throw std::invalid_argument("pushforward_log_pdf: dimension mismatch");
  return base.log_pdf(t.inverse_apply(x)) - t.log_abs_det();
}

}  // namespace rblab
