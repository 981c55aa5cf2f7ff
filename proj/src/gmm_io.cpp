#include <cstdio>
#include <fstream>
#include <sstream>

#include "rblab/io.hpp"

namespace rblab {

using nlohmann::json;

json to_json(const Gmm& g) {
  json comps = json::array();
  for (const auto& c : g.components()) {
    json cov = json::array();
    for (Index i = 0; i < c.dim(); ++i) {
      json row = json::array();
      for (Index j = 0; j < c.dim(); ++j) row.push_back(c.covariance()(i, j));
      cov.push_back(std::move(row));
    }
    json mean = json::array();
    for (Index i = 0; i < c.dim(); ++i) mean.push_back(c.mean()(i));
    comps.push_back({{"weight", c.weight()}, {"mean", std::move(mean)}, {"covariance", std::move(cov)}});
  }
  return {{"dim", g.dim()}, {"components", std::move(comps)}};
}

Gmm gmm_from_json(const json& j) {
  try {
    const Index d = j.at("dim").get<Index>();
    if (d < 1) throw std::invalid_argument("gmm: dim must be positive");
    std::vector<GaussianComponentd> comps;
    for (const auto& c : j.at("components")) {
      const auto& mean = c.at("mean");
      const auto& cov = c.at("covariance");
      if (Index(mean.size()) != d || Index(cov.size()) != d)
        throw std::invalid_argument("gmm: component shape does not match dim");
      Eigen::VectorXd mu(d);
      Eigen::MatrixXd sigma(d, d);
      for (Index i = 0; i < d; ++i) {
        mu(i) = mean.at(std::size_t(i)).get<double>();
        const auto& row = cov.at(std::size_t(i));
        if (Index(row.size()) != d) throw std::invalid_argument("gmm: covariance row length does not match dim");
        for (Index k = 0; k < d; ++k) sigma(i, k) = row.at(std::size_t(k)).get<double>();
      }
      comps.emplace_back(c.at("weight").get<double>(), std::move(mu), std::move(sigma));
    }
    return Gmm(std::move(comps));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("gmm: malformed model file: ") + e.what());
  }
}

void save_gmm(const std::filesystem::path& path, const Gmm& g) {
  write_file_atomic(path, to_json(g).dump(2) + "\n");
}

Gmm load_gmm(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return gmm_from_json(j);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rblab
