#pragma once

#include "cursor/common.hpp"
#include "cursor/dataset.hpp"
#include "cursor/estimators.hpp"
#include "cursor/latent.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cursor {

enum class RatioMode { ratio_of_mean_rmses, mean_of_fold_ratios };

/// Which pairing the numerator-side ("aligned") branch trains on.
enum class ScoreMode {
  /// Aligned pairs against one shuffled control.
  cursor,
  /// Both branches trained on shuffled pairs (independent permutations).
  shuffled_control,
};

struct ScoreConfig {
  EstimatorSpec estimator;
  CvConfig cv;
  Seed perm_seed = 1;
  double denom_floor = 1e-12;
  RatioMode ratio_mode = RatioMode::ratio_of_mean_rmses;
  /// Permutations averaged in the shuffled branch; 1 reproduces a single control.
  int n_permutations = 1;
  ScoreMode mode = ScoreMode::cursor;
};

struct ScoreSeeds {
  Seed cv_seed = 0;
  Seed perm_seed = 0;
  /// Permutation applied to the aligned branch under the shuffled control.
  std::optional<Seed> control_perm_seed;
  int n_permutations = 1;
};

struct ScoreReport {
  LatentPoint hypothesis;
  double score = 0.0;
  double rmse_aligned = 0.0;
  double rmse_shuffled = 0.0;
  std::vector<double> per_fold_aligned;
  std::vector<double> per_fold_shuffled;
  ScoreSeeds seeds;
  ScoreMode mode = ScoreMode::cursor;
  /// Set when the aligned RMSE fell below the denominator floor.
  bool degenerate = false;
  std::uint64_t split_digest_aligned = 0;
  std::uint64_t split_digest_shuffled = 0;
  /// Set on batch entries whose evaluation failed.
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

/// Scoring engine bound to one dataset and one configuration. Pairs are put
/// in canonical order, so results do not depend on the input row order. Fold
/// designs are factorized once and reused for every hypothesis.
class Scorer {
 public:
  Scorer(const StimulusResponseDataset& ds, const ScoreConfig& cfg);

  ScoreReport score(const LatentPoint& h) const;
  const ScoreConfig& config() const { return cfg_; }
  std::size_t size() const { return static_cast<std::size_t>(stimuli_.rows()); }

 private:
  struct Branch {
    std::vector<std::size_t> order;
    std::vector<PreparedDesign> designs;
    std::vector<Matrix> eval_x;
  };

  Branch make_branch(const HypothesisDataset& gd) const;
  std::vector<double> run_branch(const Branch& b, const Vector& d) const;

  ScoreConfig cfg_;
  Matrix stimuli_;
  std::vector<FoldSplit> folds_;
  std::uint64_t digest_ = 0;
  Branch aligned_;
  std::vector<Branch> shuffled_;
  std::optional<Seed> control_seed_;
};

ScoreReport score(const StimulusResponseDataset& ds, const LatentPoint& h, const ScoreConfig& cfg);
ScoreReport score_shuffled_control(const StimulusResponseDataset& ds, const LatentPoint& h, const ScoreConfig& cfg);

/// Per-hypothesis configuration used by score_batch for entry `index`.
ScoreConfig batch_entry_config(const ScoreConfig& cfg, std::size_t index);

/// Scores every hypothesis on a bounded worker pool. Failed entries carry an
/// error marker instead of aborting the batch. Output order matches input.
std::vector<ScoreReport> score_batch(const StimulusResponseDataset& ds, const std::vector<LatentPoint>& hypotheses,
                                     const ScoreConfig& cfg, unsigned worker_count = 1);

std::string to_string(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& text);
nlohmann::json to_json(const ScoreConfig& cfg);
ScoreConfig score_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoreReport& report);

}  // namespace cursor
