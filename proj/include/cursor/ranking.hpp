#pragma once

#include "cursor/cursor.hpp"
#include "cursor/dataset.hpp"
#include "cursor/latent.hpp"

#include "json.hpp"

#include <optional>
#include <vector>

namespace cursor {

struct HypothesisSet {
  std::vector<LatentPoint> hypotheses;
  std::optional<std::size_t> includes_target_at;
  Seed seed = 0;
};

/// Hypotheses at uniformly drawn distances in [0, d_max] from the target.
/// With include_target the target itself takes a seeded slot, for L entries total.
HypothesisSet build_hypothesis_set(const LatentPoint& target, int L, double d_max, Seed seed,
                                   bool include_target = true);

/// Sample Pearson correlation. Throws when either input has zero variance.
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Seeded tie-break keys in [-0.5, 0.5), one per score.
std::vector<double> tie_break_keys(std::size_t n, Seed tie_seed);

/// Number of entries scoring at least as high as the target, itself included.
/// Exact ties are resolved by the seeded keys, as if each score were nudged by
/// an infinitesimal multiple of its key.
int target_rank(const std::vector<double>& scores, std::size_t target_index, Seed tie_seed);

inline constexpr double kTieBreakMagnitude = 1e-12;

struct RankReport {
  double pearson_r = 0.0;
  /// True when raw scores had zero variance and r was taken over tie-broken scores.
  bool r_from_tie_break = false;
  int target_rank = 0;
  double d_top_rank = 0.0;
  std::size_t top_index = 0;
  std::vector<double> scores;
  std::vector<double> distances;
  Seed tie_seed = 0;
};

/// Metrics for precomputed scores. `target_index` may be empty when the set
/// does not contain the target, in which case target_rank is reported as 0.
RankReport rank_scores(const std::vector<double>& scores, const std::vector<double>& target_distances,
                       std::optional<std::size_t> target_index, Seed tie_seed);

struct RankResult {
  RankReport report;
  std::vector<ScoreReport> details;
};

RankResult rank_report(const StimulusResponseDataset& ds, const HypothesisSet& hset, const ScoreConfig& cfg,
                       const LatentPoint& true_target, unsigned workers = 1, Seed tie_seed = 0);

nlohmann::json to_json(const RankReport& r);

}  // namespace cursor
