#include "cursor/reduce.hpp"

#include <algorithm>
#include <cmath>

namespace cursor {

PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, Eigen::Index k) {
  require(x.rows() >= 1 && x.cols() >= 1, "pca_fit: empty matrix");
  require(k >= 1 && k <= std::min(x.rows(), x.cols()), "pca_fit: k must lie in [1, min(N, D)]");
  require_finite(x, "pca_fit input");

  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;

  m.components.resize(k, x.cols());
  m.explained_variance.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Vector axis = v.col(c);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0.0) axis = -axis;
    m.components.row(c) = axis.transpose();
    m.explained_variance[c] = s[c] * s[c] / denom;
  }
  return m;
}

Vector pca_transform(const PcaModel& m, const Eigen::Ref<const Vector>& x) {
  if (x.size() != m.input_dim()) throw InvalidArgument("pca_transform: dimension mismatch");
  return m.components * (x - m.mean);
}

Vector pca_inverse(const PcaModel& m, const Eigen::Ref<const Vector>& y) {
  if (y.size() != m.k()) throw InvalidArgument("pca_inverse: dimension mismatch");
  return m.mean + m.components.transpose() * y;
}

Matrix pca_transform_rows(const PcaModel& m, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != m.input_dim()) throw InvalidArgument("pca_transform: dimension mismatch");
  return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

Eigen::Index default_reduced_dim(Eigen::Index dim, Eigen::Index full_default) {
  return std::max<Eigen::Index>(1, std::min(full_default, dim / 3));
}

nlohmann::json to_json(const PcaModel& m) {
  std::vector<std::vector<double>> comps;
  for (Eigen::Index c = 0; c < m.k(); ++c) {
    comps.emplace_back(m.components.row(c).begin(), m.components.row(c).end());
  }
  return {{"input_dim", m.input_dim()},
          {"k", m.k()},
          {"mean", std::vector<double>(m.mean.begin(), m.mean.end())},
          {"explained_variance", std::vector<double>(m.explained_variance.begin(), m.explained_variance.end())},
          {"components", comps}};
}

PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto var = j.at("explained_variance").get<std::vector<double>>();
  const auto comps = j.at("components").get<std::vector<std::vector<double>>>();
  m.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.explained_variance = Eigen::Map<const Vector>(var.data(), static_cast<Eigen::Index>(var.size()));
  m.components.resize(static_cast<Eigen::Index>(comps.size()), m.mean.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    require(static_cast<Eigen::Index>(comps[c].size()) == m.mean.size(), "pca json: component length mismatch");
    for (std::size_t i = 0; i < comps[c].size(); ++i) m.components(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = comps[c][i];
  }
  require(m.explained_variance.size() == m.components.rows(), "pca json: variance length mismatch");
  return m;
}

}  // namespace cursor
