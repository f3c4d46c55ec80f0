#include "cursor/ranking.hpp"

#include <cmath>
#include <numeric>

namespace cursor {

HypothesisSet build_hypothesis_set(const LatentPoint& target, int L, double d_max, Seed seed, bool include_target) {
  require(L >= 2, "build_hypothesis_set: L must be >= 2");
  require(std::isfinite(d_max) && d_max > 0.0, "build_hypothesis_set: d_max must be positive");
  HypothesisSet set;
  set.seed = seed;
  Rng rng(derive_seed(seed, {0}));
  std::uniform_real_distribution<double> uniform(0.0, d_max);
  const int n_random = include_target ? L - 1 : L;
  std::size_t target_slot = 0;
  if (include_target) {
    std::uniform_int_distribution<int> slot(0, L - 1);
    target_slot = static_cast<std::size_t>(slot(rng));
  }
  set.hypotheses.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < n_random; ++l) {
    if (include_target && set.hypotheses.size() == target_slot) {
      set.hypotheses.push_back(target);
    }
    const double d = uniform(rng);
    set.hypotheses.push_back(point_at_distance(target, d, derive_seed(seed, {1, static_cast<std::uint64_t>(l)})));
  }
  if (include_target && set.hypotheses.size() == target_slot) set.hypotheses.push_back(target);
  if (include_target) set.includes_target_at = target_slot;
  return set;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "pearson_correlation: length mismatch");
  require(a.size() >= 2, "pearson_correlation: at least two values required");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw RuntimeError("pearson_correlation: undefined for zero variance");
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> tie_break_keys(std::size_t n, Seed tie_seed) {
  Rng rng(tie_seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> keys(n);
  for (auto& k : keys) k = u(rng);
  return keys;
}

namespace {

// Strict order on (score, key); keys make ties between distinct entries
// vanishingly unlikely, and the index settles the rest.
bool ranks_above(const std::vector<double>& s, const std::vector<double>& k, std::size_t a, std::size_t b) {
  if (s[a] != s[b]) return s[a] > s[b];
  if (k[a] != k[b]) return k[a] > k[b];
  return a < b;
}

}  // namespace

int target_rank(const std::vector<double>& scores, std::size_t target_index, Seed tie_seed) {
  require(target_index < scores.size(), "target_rank: target index out of range");
  for (double s : scores) require(!std::isnan(s), "target_rank: NaN score");
  const auto keys = tie_break_keys(scores.size(), tie_seed);
  int rank = 1;
  for (std::size_t h = 0; h < scores.size(); ++h) {
    if (h != target_index && ranks_above(scores, keys, h, target_index)) ++rank;
  }
  return rank;
}

RankReport rank_scores(const std::vector<double>& scores, const std::vector<double>& target_distances,
                       std::optional<std::size_t> target_index, Seed tie_seed) {
  require(scores.size() == target_distances.size(), "rank_scores: length mismatch");
  require(scores.size() >= 2, "rank_scores: at least two hypotheses required");
  RankReport r;
  r.scores = scores;
  r.distances = target_distances;
  r.tie_seed = tie_seed;
  const auto keys = tie_break_keys(scores.size(), tie_seed);

  try {
    r.pearson_r = pearson_correlation(scores, target_distances);
  } catch (const RuntimeError&) {
    std::vector<double> nudged(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) nudged[i] = scores[i] + kTieBreakMagnitude * keys[i];
    r.pearson_r = pearson_correlation(nudged, target_distances);
    r.r_from_tie_break = true;
  }

  if (target_index) r.target_rank = target_rank(scores, *target_index, tie_seed);
  std::size_t top = 0;
  for (std::size_t h = 1; h < scores.size(); ++h) {
    if (ranks_above(scores, keys, h, top)) top = h;
  }
  r.top_index = top;
  r.d_top_rank = target_distances[top];
  return r;
}

RankResult rank_report(const StimulusResponseDataset& ds, const HypothesisSet& hset, const ScoreConfig& cfg,
                       const LatentPoint& true_target, unsigned workers, Seed tie_seed) {
  RankResult out;
  out.details = score_batch(ds, hset.hypotheses, cfg, workers);
  std::vector<double> scores, distances;
  for (std::size_t i = 0; i < out.details.size(); ++i) {
    const auto& rep = out.details[i];
    if (!rep.ok()) throw RuntimeError("rank_report: hypothesis " + std::to_string(i) + " failed: " + *rep.error);
    scores.push_back(rep.score);
    distances.push_back(similarity(true_target, hset.hypotheses[i]));
  }
  out.report = rank_scores(scores, distances, hset.includes_target_at, tie_seed);
  return out;
}

nlohmann::json to_json(const RankReport& r) {
  return {{"pearson_r", r.pearson_r},     {"r_from_tie_break", r.r_from_tie_break},
          {"target_rank", r.target_rank}, {"d_top_rank", r.d_top_rank},
          {"top_index", r.top_index},     {"scores", r.scores},
          {"distances", r.distances},     {"tie_seed", r.tie_seed}};
}

}  // namespace cursor
