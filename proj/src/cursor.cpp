#include "cursor/cursor.hpp"

#include <cmath>
#include <numeric>

namespace cursor {

namespace {

constexpr std::uint64_t kControlKey = 0xc0a7201ULL;

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Seed permutation_seed(Seed base, int m) { return m == 0 ? base : derive_seed(base, {static_cast<std::uint64_t>(m)}); }

}  // namespace

Scorer::Scorer(const StimulusResponseDataset& ds, const ScoreConfig& cfg) : cfg_(cfg) {
  require(cfg.denom_floor > 0.0, "score: denom_floor must be positive");
  require(cfg.n_permutations >= 1, "score: n_permutations must be >= 1");
  require(ds.size() >= static_cast<std::size_t>(cfg.cv.n_folds), "score: fewer pairs than folds");

  const auto canon = canonical_order(ds);
  stimuli_.resize(static_cast<Eigen::Index>(canon.size()), ds.latent_dim());
  Matrix responses(static_cast<Eigen::Index>(canon.size()), ds.response_dim());
  for (std::size_t k = 0; k < canon.size(); ++k) {
    stimuli_.row(static_cast<Eigen::Index>(k)) = ds.stimuli().row(static_cast<Eigen::Index>(canon[k]));
    responses.row(static_cast<Eigen::Index>(k)) = ds.responses().row(static_cast<Eigen::Index>(canon[k]));
  }

  folds_ = make_folds(canon.size(), cfg.cv);
  digest_ = folds_digest(folds_);

  // Response pairing does not depend on the hypothesis, so a placeholder
  // hypothesis is enough to derive the permuted orders.
  HypothesisDataset base;
  base.responses = std::make_shared<const Matrix>(std::move(responses));
  base.order.resize(canon.size());
  std::iota(base.order.begin(), base.order.end(), std::size_t{0});
  base.distances = Vector::Zero(static_cast<Eigen::Index>(canon.size()));

  if (cfg.mode == ScoreMode::shuffled_control) {
    control_seed_ = derive_seed(cfg.perm_seed, {kControlKey});
    aligned_ = make_branch(shuffle_pairs(base, *control_seed_));
  } else {
    aligned_ = make_branch(base);
  }
  for (int m = 0; m < cfg.n_permutations; ++m) {
    shuffled_.push_back(make_branch(shuffle_pairs(base, permutation_seed(cfg.perm_seed, m))));
  }
}

Scorer::Branch Scorer::make_branch(const HypothesisDataset& gd) const {
  Branch b;
  b.order = gd.order;
  b.designs.reserve(folds_.size());
  b.eval_x.reserve(folds_.size());
  for (const auto& fold : folds_) {
    b.designs.emplace_back(cfg_.estimator, gd.gather_responses(fold.train));
    b.eval_x.push_back(gd.gather_responses(cfg_.cv.evaluate_on_train ? fold.train : fold.validation));
  }
  return b;
}

std::vector<double> Scorer::run_branch(const Branch& b, const Vector& d) const {
  std::vector<double> per_fold;
  per_fold.reserve(folds_.size());
  for (std::size_t f = 0; f < folds_.size(); ++f) {
    const auto& fold = folds_[f];
    Vector y_train(static_cast<Eigen::Index>(fold.train.size()));
    for (std::size_t k = 0; k < fold.train.size(); ++k) y_train[static_cast<Eigen::Index>(k)] = d[static_cast<Eigen::Index>(fold.train[k])];
    const auto& eval = cfg_.cv.evaluate_on_train ? fold.train : fold.validation;
    Vector y_eval(static_cast<Eigen::Index>(eval.size()));
    for (std::size_t k = 0; k < eval.size(); ++k) y_eval[static_cast<Eigen::Index>(k)] = d[static_cast<Eigen::Index>(eval[k])];
    const auto est = b.designs[f].fit(y_train);
    per_fold.push_back(rmse(predict(est, b.eval_x[f]), y_eval));
  }
  return per_fold;
}

ScoreReport Scorer::score(const LatentPoint& h) const {
  if (h.dim() != stimuli_.cols()) throw InvalidArgument("score: hypothesis dimension mismatch");
  // Distances are paired with pair indices; branches differ only in which
  // response row each pair carries.
  const Vector d = similarity_to_rows(h, stimuli_);

  ScoreReport r;
  r.hypothesis = h;
  r.mode = cfg_.mode;
  r.seeds = {cfg_.cv.seed, cfg_.perm_seed, control_seed_, cfg_.n_permutations};
  r.per_fold_aligned = run_branch(aligned_, d);
  r.per_fold_shuffled.assign(folds_.size(), 0.0);
  for (const auto& branch : shuffled_) {
    const auto pf = run_branch(branch, d);
    for (std::size_t f = 0; f < pf.size(); ++f) r.per_fold_shuffled[f] += pf[f];
  }
  if (shuffled_.size() > 1) {
    for (auto& v : r.per_fold_shuffled) v /= static_cast<double>(shuffled_.size());
  }
  r.rmse_aligned = mean_of(r.per_fold_aligned);
  r.rmse_shuffled = mean_of(r.per_fold_shuffled);
  r.split_digest_aligned = digest_;
  r.split_digest_shuffled = digest_;

  if (cfg_.ratio_mode == RatioMode::ratio_of_mean_rmses) {
    r.degenerate = r.rmse_aligned < cfg_.denom_floor;
    r.score = r.rmse_shuffled / std::max(r.rmse_aligned, cfg_.denom_floor);
  } else {
    double acc = 0.0;
    for (std::size_t f = 0; f < folds_.size(); ++f) {
      r.degenerate = r.degenerate || r.per_fold_aligned[f] < cfg_.denom_floor;
      acc += r.per_fold_shuffled[f] / std::max(r.per_fold_aligned[f], cfg_.denom_floor);
    }
    r.score = acc / static_cast<double>(folds_.size());
  }
  return r;
}

ScoreReport score(const StimulusResponseDataset& ds, const LatentPoint& h, const ScoreConfig& cfg) {
  ScoreConfig c = cfg;
  c.mode = ScoreMode::cursor;
  return Scorer(ds, c).score(h);
}

ScoreReport score_shuffled_control(const StimulusResponseDataset& ds, const LatentPoint& h, const ScoreConfig& cfg) {
  ScoreConfig c = cfg;
  c.mode = ScoreMode::shuffled_control;
  return Scorer(ds, c).score(h);
}

ScoreConfig batch_entry_config(const ScoreConfig& cfg, std::size_t index) {
  ScoreConfig c = cfg;
  c.cv.seed = derive_seed(cfg.cv.seed, {index});
  c.perm_seed = derive_seed(cfg.perm_seed, {index});
  return c;
}

std::vector<ScoreReport> score_batch(const StimulusResponseDataset& ds, const std::vector<LatentPoint>& hypotheses,
                                     const ScoreConfig& cfg, unsigned worker_count) {
  require(!hypotheses.empty(), "score_batch: empty hypothesis list");
  std::vector<ScoreReport> out(hypotheses.size());
  parallel_for(hypotheses.size(), worker_count, [&](std::size_t i) {
    const auto c = batch_entry_config(cfg, i);
    try {
      out[i] = Scorer(ds, c).score(hypotheses[i]);
    } catch (const std::exception& e) {
      ScoreReport failed;
      failed.hypothesis = hypotheses[i];
      failed.mode = c.mode;
      failed.seeds = {c.cv.seed, c.perm_seed, std::nullopt, c.n_permutations};
      failed.score = std::numeric_limits<double>::quiet_NaN();
      failed.error = e.what();
      out[i] = std::move(failed);
    }
  });
  return out;
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::cursor ? "cursor" : "shuffled_control"; }

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "cursor") return ScoreMode::cursor;
  if (text == "shuffled_control") return ScoreMode::shuffled_control;
  throw InvalidArgument("unknown score mode '" + text + "'");
}

nlohmann::json to_json(const ScoreConfig& cfg) {
  return {{"estimator", to_string(cfg.estimator)},
          {"standardize_inputs", cfg.estimator.standardize_inputs},
          {"standardize_targets", cfg.estimator.standardize_targets},
          {"cv", to_json(cfg.cv)},
          {"perm_seed", cfg.perm_seed},
          {"denom_floor", cfg.denom_floor},
          {"ratio_mode", cfg.ratio_mode == RatioMode::ratio_of_mean_rmses ? "ratio_of_mean_rmses" : "mean_of_fold_ratios"},
          {"n_permutations", cfg.n_permutations},
          {"mode", to_string(cfg.mode)}};
}

ScoreConfig score_config_from_json(const nlohmann::json& j) {
  ScoreConfig cfg;
  cfg.estimator = parse_estimator(j.value("estimator", std::string("ols")));
  cfg.estimator.standardize_inputs = j.value("standardize_inputs", true);
  cfg.estimator.standardize_targets = j.value("standardize_targets", true);
  if (j.contains("cv")) cfg.cv = cv_config_from_json(j.at("cv"));
  cfg.perm_seed = j.value("perm_seed", cfg.perm_seed);
  cfg.denom_floor = j.value("denom_floor", cfg.denom_floor);
  const auto ratio = j.value("ratio_mode", std::string("ratio_of_mean_rmses"));
  if (ratio == "ratio_of_mean_rmses") {
    cfg.ratio_mode = RatioMode::ratio_of_mean_rmses;
  } else if (ratio == "mean_of_fold_ratios") {
    cfg.ratio_mode = RatioMode::mean_of_fold_ratios;
  } else {
    throw InvalidArgument("unknown ratio mode '" + ratio + "'");
  }
  cfg.n_permutations = j.value("n_permutations", cfg.n_permutations);
  cfg.mode = parse_score_mode(j.value("mode", std::string("cursor")));
  return cfg;
}

nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json seeds = {{"cv_seed", r.seeds.cv_seed},
                          {"perm_seed", r.seeds.perm_seed},
                          {"n_permutations", r.seeds.n_permutations}};
  if (r.seeds.control_perm_seed) seeds["control_perm_seed"] = *r.seeds.control_perm_seed;
  nlohmann::json j = {{"mode", to_string(r.mode)},
                      {"seeds", seeds},
                      {"hypothesis", std::vector<double>(r.hypothesis.coords().begin(), r.hypothesis.coords().end())}};
  if (r.error) {
    j["error"] = *r.error;
    return j;
  }
  j["score"] = r.score;
  j["rmse_aligned"] = r.rmse_aligned;
  j["rmse_shuffled"] = r.rmse_shuffled;
  j["per_fold_aligned"] = r.per_fold_aligned;
  j["per_fold_shuffled"] = r.per_fold_shuffled;
  j["degenerate"] = r.degenerate;
  j["split_digest_aligned"] = r.split_digest_aligned;
  j["split_digest_shuffled"] = r.split_digest_shuffled;
  return j;
}

}  // namespace cursor
