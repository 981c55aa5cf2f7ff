#include "rblab/estimators.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rblab {

namespace {

constexpr Index kMinMcSamples = 100;
constexpr double kGridSigmas = 8.0;

McEstimate summarize(const Eigen::VectorXd& v, Seed seed) {
  const Index n = v.size();
  double sum = 0;
  for (Index i = 0; i < n; ++i) sum += v(i);
  const double mean = sum / double(n);
  double ss = 0;
  for (Index i = 0; i < n; ++i) ss += (v(i) - mean) * (v(i) - mean);
  const double sd = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
  return {mean, sd / std::sqrt(double(n)), n, seed};
}

void require_budget(Index n, const char* what) {
  if (n < kMinMcSamples)
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(kMinMcSamples) + " samples");
}

Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& rows, double bandwidth) {
  const Index n = rows.rows();
  Eigen::MatrixXd k(n, n);
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) k(i, j) = k(j, i) = std::exp(-(rows.row(i) - rows.row(j)).squaredNorm() * inv);
  }
  return k;
}

/// H K H with H = I − 11ᵀ/n.
Eigen::MatrixXd double_center(const Eigen::MatrixXd& k) {
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = row_mean.mean();
  Eigen::MatrixXd c = k;
  c.colwise() -= row_mean;
  c.rowwise() -= col_mean;
  return c.array() + grand;
}

bool row_less(const Eigen::MatrixXd& m, Index a, Index b) {
  for (Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(b, j) < m(a, j)) return false;
  }
  return false;
}

/// Σ_ij kc(i,j)·l(perm i, perm j) in a fixed loop order.
double permuted_alignment(const Eigen::MatrixXd& kc, const Eigen::MatrixXd& l, const std::vector<Index>& perm) {
  const Index n = kc.rows();
  double s = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) s += kc(i, j) * l(perm[std::size_t(i)], perm[std::size_t(j)]);
  return s;
}

}  // namespace

McEstimate mc_kl(const Gmm& p, const Gmm& q, Index n, Seed seed) {
  if (p.dim() != q.dim()) throw std::invalid_argument("mc_kl: dimension mismatch");
  require_budget(n, "mc_kl");
  const DatasetMatrix draws = sample(p, n, seed);
  return summarize(p.log_pdf_rows(draws.rows) - q.log_pdf_rows(draws.rows), seed);
}

McEstimate mc_entropy(const Gmm& p, Index n, Seed seed) {
  require_budget(n, "mc_entropy");
  const DatasetMatrix draws = sample(p, n, seed);
  return summarize(-p.log_pdf_rows(draws.rows), seed);
}

McEstimate delta_h(const Gmm& anchor_model, const Gmm& gen_model, Index n, Seed seed) {
  if (anchor_model.dim() != gen_model.dim()) throw std::invalid_argument("delta_h: dimension mismatch");
  const McEstimate a = mc_entropy(anchor_model, n, derive_seed(seed, {0}));
  const McEstimate g = mc_entropy(gen_model, n, derive_seed(seed, {1}));
  return {a.value - g.value, std::hypot(a.std_error, g.std_error), n, seed};
}

McEstimate tv_distance(const Gmm& p, const Gmm& q, TvMethod method, Index budget, Seed seed) {
  if (p.dim() != q.dim()) throw std::invalid_argument("tv_distance: dimension mismatch");
  if (method == TvMethod::importance) {
    require_budget(budget, "tv_distance");
    const DatasetMatrix draws = sample(p, budget, seed);
    const Eigen::VectorXd log_ratio = q.log_pdf_rows(draws.rows) - p.log_pdf_rows(draws.rows);
    McEstimate e = summarize(0.5 * (1.0 - log_ratio.array().exp()).abs().matrix(), seed);
    e.value = std::clamp(e.value, 0.0, 1.0);
    return e;
  }

  const Index d = p.dim();
  if (d > 2) throw std::invalid_argument("grid method limited to d≤2");
  if (budget < 2) throw std::invalid_argument("tv_distance: grid needs at least 2 cells per axis");
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const Gmm* g : {&p, &q}) {
    for (const auto& c : g->components()) {
      const Eigen::VectorXd reach = kGridSigmas * c.covariance().diagonal().cwiseSqrt();
      lo = lo.cwiseMin(c.mean() - reach);
      hi = hi.cwiseMax(c.mean() + reach);
    }
  }
  const Eigen::VectorXd step = (hi - lo) / double(budget);
  const double cell_volume = step.prod();

  // One grid line (fixed second coordinate) at a time.
  const Index lines = d == 2 ? budget : 1;
  Eigen::MatrixXd pts(budget, d);
  for (Index i = 0; i < budget; ++i) pts(i, 0) = lo(0) + (double(i) + 0.5) * step(0);
  double l1 = 0;
  for (Index line = 0; line < lines; ++line) {
    if (d == 2) pts.col(1).setConstant(lo(1) + (double(line) + 0.5) * step(1));
    const Eigen::VectorXd diff =
        p.log_pdf_rows(pts).array().exp() - q.log_pdf_rows(pts).array().exp();
    l1 += diff.cwiseAbs().sum();
  }
  const double tv = std::clamp(0.5 * l1 * cell_volume, 0.0, 1.0);
  Index cells = budget;
  if (d == 2) cells *= budget;
  return {tv, 0.0, cells, seed};
}

double median_nonzero_distance(const Eigen::MatrixXd& rows) {
  std::vector<double> dist;
  const Index n = rows.rows();
  dist.reserve(std::size_t(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double v = (rows.row(i) - rows.row(j)).norm();
      if (v > 0) dist.push_back(v);
    }
  if (dist.empty()) throw std::invalid_argument("degenerate kernel bandwidth");
  std::sort(dist.begin(), dist.end());
  const std::size_t m = dist.size();
  return m % 2 == 1 ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
}

HsicResult hsic(const DatasetMatrix& x, const DatasetMatrix& y, int n_permutations, Seed seed) {
  const Index n = x.size();
  if (y.size() != n) throw std::invalid_argument("hsic: x and y must have the same number of rows");
  if (n < 4) throw std::invalid_argument("hsic: need at least 4 paired rows");
  if (n_permutations < 0) throw std::invalid_argument("hsic: n_permutations must be nonnegative");

  // The statistic is invariant under joint row permutation; evaluating in a
  // canonical row order makes it invariant bit for bit.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (row_less(x.rows, a, b)) return true;
    if (row_less(x.rows, b, a)) return false;
    return row_less(y.rows, a, b);
  });
  Eigen::MatrixXd xs(n, x.dim()), ys(n, y.dim());
  for (Index i = 0; i < n; ++i) {
    xs.row(i) = x.rows.row(order[std::size_t(i)]);
    ys.row(i) = y.rows.row(order[std::size_t(i)]);
  }

  HsicResult result;
  result.bandwidth_x = median_nonzero_distance(xs);
  result.bandwidth_y = median_nonzero_distance(ys);
  const Eigen::MatrixXd kc = double_center(gaussian_gram(xs, result.bandwidth_x));
  const Eigen::MatrixXd l = gaussian_gram(ys, result.bandwidth_y);
  const double norm = double(n) * double(n);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  result.statistic = permuted_alignment(kc, l, perm) / norm;
  result.n_permutations = n_permutations;

  if (n_permutations > 0) {
    Engine engine = make_engine(seed);
    int at_least = 0;
    for (int t = 0; t < n_permutations; ++t) {
      std::shuffle(perm.begin(), perm.end(), engine);
      if (permuted_alignment(kc, l, perm) / norm >= result.statistic) ++at_least;
    }
    result.permutation_p = double(at_least + 1) / double(n_permutations + 1);
  }
  return result;
}

}  // namespace rblab
