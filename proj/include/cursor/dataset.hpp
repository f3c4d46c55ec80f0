#pragma once

#include "cursor/common.hpp"
#include "cursor/latent.hpp"

#include "json.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace cursor {

/// Ground truth kept alongside a dataset for evaluation only. Scoring never reads it.
struct HiddenTruth {
  std::vector<LatentPoint> targets;
  /// Which target each pair was acquired under.
  std::vector<std::uint32_t> target_index;
  /// Distance of each stimulus to its own target.
  Vector distances;

  bool single_target() const { return targets.size() == 1; }
  /// The target of a single-target dataset.
  const LatentPoint& target() const;
};

/// Interaction record of stimulus/response pairs. Immutable after construction;
/// the response matrix is shared with derived hypothesis datasets.
class StimulusResponseDataset {
 public:
  StimulusResponseDataset(Matrix stimuli, Matrix responses, std::optional<HiddenTruth> truth = std::nullopt,
                          nlohmann::json provenance = nlohmann::json::object());

  std::size_t size() const { return static_cast<std::size_t>(stimuli_->rows()); }
  Eigen::Index latent_dim() const { return stimuli_->cols(); }
  Eigen::Index response_dim() const { return responses_->cols(); }

  const Matrix& stimuli() const { return *stimuli_; }
  const Matrix& responses() const { return *responses_; }
  std::shared_ptr<const Matrix> shared_responses() const { return responses_; }
  LatentPoint stimulus(std::size_t i) const;

  const std::optional<HiddenTruth>& hidden_truth() const { return truth_; }
  bool has_truth() const { return truth_.has_value(); }
  const nlohmann::json& provenance() const { return provenance_; }

  /// New dataset holding the given rows in the given order.
  StimulusResponseDataset select(const std::vector<std::size_t>& rows) const;
  /// Same pairs with responses replaced (e.g. by a reduced representation).
  StimulusResponseDataset with_responses(Matrix responses) const;
  StimulusResponseDataset with_provenance(nlohmann::json provenance) const;

 private:
  std::shared_ptr<const Matrix> stimuli_;
  std::shared_ptr<const Matrix> responses_;
  std::optional<HiddenTruth> truth_;
  nlohmann::json provenance_;
};

/// Responses paired with hypothesis-induced distances. `order[i]` is the
/// response row paired with distances[i].
struct HypothesisDataset {
  std::shared_ptr<const Matrix> responses;
  std::vector<std::size_t> order;
  Vector distances;
  LatentPoint hypothesis;

  std::size_t size() const { return order.size(); }
  /// Gathers paired response rows for the given pair indices.
  Matrix gather_responses(const std::vector<std::size_t>& pairs) const;
  Vector gather_distances(const std::vector<std::size_t>& pairs) const;
};

HypothesisDataset build_hypothesis_dataset(const StimulusResponseDataset& ds, const LatentPoint& h);

/// Re-pairs responses under a seeded permutation that is never the identity.
HypothesisDataset shuffle_pairs(const HypothesisDataset& gd, Seed perm_seed);

/// Row order sorting pairs lexicographically by (stimulus, response) values.
std::vector<std::size_t> canonical_order(const StimulusResponseDataset& ds);

/// Multichannel epoch, channels x timepoints, time-locked to stimulus onset.
struct EpochTensor {
  int channels = 0;
  int timepoints = 0;
  double sample_rate_hz = 0.0;
  double t0_ms = 0.0;
  Matrix data;

  double time_ms(int sample) const { return t0_ms + 1000.0 * sample / sample_rate_hz; }
};

/// Mean amplitude per channel in equidistant windows; channel-major features.
Vector window_epoch(const EpochTensor& ep, double t_start_ms = 50.0, double t_end_ms = 800.0, int n_windows = 7);

inline constexpr double kStdFloor = 1e-12;

/// Per-column standardization parameters. Sample std (ddof = 1); columns whose
/// std is at or below the floor map to zero.
struct Standardizer {
  Vector means;
  Vector stds;

  static Standardizer fit(const Eigen::Ref<const Matrix>& x);
  Matrix apply(const Eigen::Ref<const Matrix>& x) const;
};

Standardizer standardize_fit(const Eigen::Ref<const Matrix>& x);
Matrix standardize_apply(const Eigen::Ref<const Matrix>& x, const Standardizer& params);

/// n pairs drawn uniformly without replacement.
StimulusResponseDataset subsample(const StimulusResponseDataset& ds, std::size_t n, Seed seed);

/// Keeps pairs whose hidden distance is at least `threshold`.
StimulusResponseDataset ablate_near_target(const StimulusResponseDataset& ds, double threshold);

}  // namespace cursor
