#include "cursor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cursor {

const LatentPoint& HiddenTruth::target() const {
  if (targets.size() != 1) throw InvalidArgument("hidden truth holds " + std::to_string(targets.size()) + " targets");
  return targets.front();
}

StimulusResponseDataset::StimulusResponseDataset(Matrix stimuli, Matrix responses, std::optional<HiddenTruth> truth,
                                                 nlohmann::json provenance)
    : truth_(std::move(truth)), provenance_(std::move(provenance)) {
  require(stimuli.rows() >= 1, "dataset: at least one pair required");
  require(stimuli.rows() == responses.rows(), "dataset: stimuli and responses differ in length");
  require(stimuli.cols() >= 1 && responses.cols() >= 1, "dataset: dimensions must be positive");
  require_finite(stimuli, "dataset stimuli");
  require_finite(responses, "dataset responses");
  if (truth_) {
    const auto n = stimuli.rows();
    require(!truth_->targets.empty(), "dataset: hidden truth without targets");
    require(truth_->distances.size() == n, "dataset: hidden distances differ in length");
    if (truth_->target_index.empty()) truth_->target_index.assign(static_cast<std::size_t>(n), 0);
    require(static_cast<Eigen::Index>(truth_->target_index.size()) == n, "dataset: target index differs in length");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto t = truth_->target_index[static_cast<std::size_t>(i)];
      require(t < truth_->targets.size(), "dataset: target index out of range");
      const auto& target = truth_->targets[t];
      require(target.dim() == stimuli.cols(), "dataset: hidden target dimension mismatch");
      const double expected = (stimuli.row(i).transpose() - target.coords()).norm();
      const double given = truth_->distances[i];
      require(std::abs(expected - given) <= 1e-6 * std::max(1.0, expected),
              "dataset: hidden distance disagrees with stimulus geometry at row " + std::to_string(i));
    }
  }
  stimuli_ = std::make_shared<const Matrix>(std::move(stimuli));
  responses_ = std::make_shared<const Matrix>(std::move(responses));
}

LatentPoint StimulusResponseDataset::stimulus(std::size_t i) const {
  return LatentPoint(stimuli_->row(static_cast<Eigen::Index>(i)).transpose());
}

StimulusResponseDataset StimulusResponseDataset::select(const std::vector<std::size_t>& rows) const {
  require(!rows.empty(), "dataset: selection is empty");
  Matrix s(static_cast<Eigen::Index>(rows.size()), latent_dim());
  Matrix r(static_cast<Eigen::Index>(rows.size()), response_dim());
  std::optional<HiddenTruth> truth;
  if (truth_) {
    truth = HiddenTruth{truth_->targets, {}, Vector(static_cast<Eigen::Index>(rows.size()))};
    truth->target_index.reserve(rows.size());
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(rows[k] < size(), "dataset: row index out of range");
    const auto i = static_cast<Eigen::Index>(rows[k]);
    s.row(static_cast<Eigen::Index>(k)) = stimuli_->row(i);
    r.row(static_cast<Eigen::Index>(k)) = responses_->row(i);
    if (truth) {
      truth->target_index.push_back(truth_->target_index[rows[k]]);
      truth->distances[static_cast<Eigen::Index>(k)] = truth_->distances[i];
    }
  }
  return StimulusResponseDataset(std::move(s), std::move(r), std::move(truth), provenance_);
}

StimulusResponseDataset StimulusResponseDataset::with_responses(Matrix responses) const {
  require(responses.rows() == stimuli_->rows(), "dataset: replacement responses differ in length");
  require_finite(responses, "dataset responses");
  StimulusResponseDataset copy = *this;
  copy.responses_ = std::make_shared<const Matrix>(std::move(responses));
  return copy;
}

StimulusResponseDataset StimulusResponseDataset::with_provenance(nlohmann::json provenance) const {
  StimulusResponseDataset copy = *this;
  copy.provenance_ = std::move(provenance);
  return copy;
}

Matrix HypothesisDataset::gather_responses(const std::vector<std::size_t>& pairs) const {
  Matrix out(static_cast<Eigen::Index>(pairs.size()), responses->cols());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = responses->row(static_cast<Eigen::Index>(order[pairs[k]]));
  }
  return out;
}

Vector HypothesisDataset::gather_distances(const std::vector<std::size_t>& pairs) const {
  Vector out(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) out[static_cast<Eigen::Index>(k)] = distances[static_cast<Eigen::Index>(pairs[k])];
  return out;
}

HypothesisDataset build_hypothesis_dataset(const StimulusResponseDataset& ds, const LatentPoint& h) {
  if (h.dim() != ds.latent_dim()) throw InvalidArgument("build_hypothesis_dataset: dimension mismatch");
  HypothesisDataset gd;
  gd.responses = ds.shared_responses();
  gd.order.resize(ds.size());
  std::iota(gd.order.begin(), gd.order.end(), std::size_t{0});
  gd.distances = similarity_to_rows(h, ds.stimuli());
  gd.hypothesis = h;
  return gd;
}

HypothesisDataset shuffle_pairs(const HypothesisDataset& gd, Seed perm_seed) {
  const std::size_t n = gd.size();
  if (n < 2) throw InvalidArgument("shuffle_pairs: at least two pairs required");
  Rng rng(perm_seed);
  std::vector<std::size_t> sigma;
  bool identity = true;
  while (identity) {
    sigma = random_permutation(n, rng);
    for (std::size_t i = 0; i < n && identity; ++i) identity = sigma[i] == i;
  }
  HypothesisDataset out = gd;
  for (std::size_t i = 0; i < n; ++i) out.order[i] = gd.order[sigma[i]];
  return out;
}

std::vector<std::size_t> canonical_order(const StimulusResponseDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Matrix& s = ds.stimuli();
  const Matrix& r = ds.responses();
  auto row_less = [](const Matrix& m, Eigen::Index a, Eigen::Index b) -> int {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(a, j) < m(b, j)) return -1;
      if (m(b, j) < m(a, j)) return 1;
    }
    return 0;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    const int c = row_less(s, ia, ib);
    if (c != 0) return c < 0;
    return row_less(r, ia, ib) < 0;
  });
  return idx;
}

Vector window_epoch(const EpochTensor& ep, double t_start_ms, double t_end_ms, int n_windows) {
  require(ep.channels > 0 && ep.timepoints > 0, "window_epoch: empty epoch");
  require(ep.sample_rate_hz > 0.0, "window_epoch: sample rate must be positive");
  require(ep.data.rows() == ep.channels && ep.data.cols() == ep.timepoints, "window_epoch: data shape mismatch");
  require(n_windows >= 1, "window_epoch: n_windows must be >= 1");
  require(t_start_ms < t_end_ms, "window_epoch: empty time range");
  const double span_lo = ep.time_ms(0);
  // The epoch covers [t0, t0 + timepoints / rate).
  const double span_hi = ep.time_ms(ep.timepoints);
  require(t_start_ms >= span_lo && t_end_ms <= span_hi, "window_epoch: window range outside the epoch");

  const double width = (t_end_ms - t_start_ms) / n_windows;
  Vector features(static_cast<Eigen::Index>(ep.channels) * n_windows);
  std::vector<int> counts(static_cast<std::size_t>(n_windows), 0);
  Matrix sums = Matrix::Zero(ep.channels, n_windows);
  for (int s = 0; s < ep.timepoints; ++s) {
    const double t = ep.time_ms(s);
    if (t < t_start_ms || t > t_end_ms) continue;
    int w = static_cast<int>(std::floor((t - t_start_ms) / width));
    // Half-open windows, the last one closed at t_end.
    if (w >= n_windows) w = n_windows - 1;
    if (w < n_windows - 1 && t >= t_start_ms + (w + 1) * width) ++w;
    while (w > 0 && t < t_start_ms + w * width) --w;
    ++counts[static_cast<std::size_t>(w)];
    sums.col(w) += ep.data.col(s);
  }
  for (int w = 0; w < n_windows; ++w) {
    if (counts[static_cast<std::size_t>(w)] == 0) {
      throw InvalidArgument("window_epoch: window " + std::to_string(w) + " contains no samples");
    }
  }
  for (int c = 0; c < ep.channels; ++c) {
    for (int w = 0; w < n_windows; ++w) {
      features[static_cast<Eigen::Index>(c) * n_windows + w] = sums(c, w) / counts[static_cast<std::size_t>(w)];
    }
  }
  return features;
}

Standardizer Standardizer::fit(const Eigen::Ref<const Matrix>& x) {
  require(x.rows() >= 1 && x.cols() >= 1, "standardize_fit: empty matrix");
  Standardizer s;
  s.means = x.colwise().mean().transpose();
  s.stds = Vector::Zero(x.cols());
  if (x.rows() > 1) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double ss = (x.col(j).array() - s.means[j]).square().sum();
      s.stds[j] = std::sqrt(ss / static_cast<double>(x.rows() - 1));
    }
  }
  return s;
}

Matrix Standardizer::apply(const Eigen::Ref<const Matrix>& x) const {
  require(x.cols() == means.size(), "standardize_apply: column count mismatch");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (stds[j] <= kStdFloor) {
      out.col(j).setZero();
    } else {
      out.col(j) = (x.col(j).array() - means[j]) / stds[j];
    }
  }
  return out;
}

Standardizer standardize_fit(const Eigen::Ref<const Matrix>& x) { return Standardizer::fit(x); }

Matrix standardize_apply(const Eigen::Ref<const Matrix>& x, const Standardizer& params) { return params.apply(x); }

StimulusResponseDataset subsample(const StimulusResponseDataset& ds, std::size_t n, Seed seed) {
  require(n >= 1 && n <= ds.size(), "subsample: n must lie in [1, N]");
  Rng rng(seed);
  auto perm = random_permutation(ds.size(), rng);
  perm.resize(n);
  return ds.select(perm);
}

StimulusResponseDataset ablate_near_target(const StimulusResponseDataset& ds, double threshold) {
  require(ds.has_truth(), "ablate_near_target: hidden truth required");
  require(std::isfinite(threshold) && threshold >= 0.0, "ablate_near_target: threshold must be >= 0");
  const auto& d = ds.hidden_truth()->distances;
  std::vector<std::size_t> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] >= threshold) keep.push_back(static_cast<std::size_t>(i));
  }
  if (keep.empty()) throw InvalidArgument("ablate_near_target: no pairs at or beyond the threshold");
  return ds.select(keep);
}

}  // namespace cursor
