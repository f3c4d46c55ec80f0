#pragma once

#include "cursor/common.hpp"

#include "json.hpp"

namespace cursor {

/// Principal axes of a data matrix. Rows of `components` are orthonormal and
/// ordered by descending explained variance; each row's largest-magnitude
/// entry is positive.
struct PcaModel {
  Vector mean;
  Matrix components;  ///< k x input_dim
  Vector explained_variance;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index k() const { return components.rows(); }
};

PcaModel pca_fit(const Eigen::Ref<const Matrix>& x, Eigen::Index k);
Vector pca_transform(const PcaModel& m, const Eigen::Ref<const Vector>& x);
Vector pca_inverse(const PcaModel& m, const Eigen::Ref<const Vector>& y);
/// Row-wise transform of a matrix.
Matrix pca_transform_rows(const PcaModel& m, const Eigen::Ref<const Matrix>& x);

/// Reduced dimension scaled from the full-size default (20 of 203 responses,
/// 10 of 512 latents) to a smaller input: min(full_default, dim / 3), at least 1.
Eigen::Index default_reduced_dim(Eigen::Index dim, Eigen::Index full_default);

nlohmann::json to_json(const PcaModel& m);
PcaModel pca_from_json(const nlohmann::json& j);

}  // namespace cursor
