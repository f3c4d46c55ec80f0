#pragma once

#include "cursor/common.hpp"
#include "cursor/cursor.hpp"
#include "cursor/dataset.hpp"
#include "cursor/reduce.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cursor {

enum class BudgetMode { evaluations, generations };

struct CmaConfig {
  int dim = 10;
  Vector bounds_lo;  ///< empty: -15 in every dimension
  Vector bounds_hi;  ///< empty: +15 in every dimension
  int population_size = 0;  ///< 0: 4 + floor(3 ln dim)
  double sigma0 = 0.0;  ///< 0: a third of the smallest bound half-width
  int max_evaluations = 1000;
  BudgetMode budget_mode = BudgetMode::evaluations;
  int max_generations = 0;  ///< used with BudgetMode::generations
  double min_sigma = 1e-10;
  /// Start of the search; the box centre when unset.
  std::optional<Vector> initial_mean;
  Seed seed = 0;

  /// Symmetric box [-half_width, half_width]^dim.
  static CmaConfig with_bounds(int dim, double half_width);
};

struct Evaluation {
  int index = 0;
  int generation = 0;
  Vector point;
  double score = 0.0;
  bool non_finite = false;
  std::optional<double> distance_to_target;
};

struct OptimizationTrace {
  std::vector<Evaluation> evaluations;
  std::size_t best_index = 0;
  int generations = 0;
  std::string stop_reason;
  /// Smallest covariance eigenvalue observed at each generation.
  std::vector<double> min_cov_eigenvalue;
  Seed seed = 0;

  const Evaluation& best() const { return evaluations.at(best_index); }
  /// Best score seen up to and including each evaluation.
  std::vector<double> best_so_far_scores() const;
};

using Objective = std::function<double(const Vector&)>;

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one
/// plus rank-mu covariance updates, maximizing `objective`. Candidates are
/// clamped into the box before evaluation and the clamped points drive the
/// update. Evaluations inside a generation may run concurrently.
OptimizationTrace cmaes_maximize(const Objective& objective, const CmaConfig& cfg, unsigned workers = 1);

struct Reduction {
  PcaModel responses;
  PcaModel latents;
};

/// PCA models for responses and latents fit on the analyzed dataset.
Reduction fit_reduction(const StimulusResponseDataset& ds, Eigen::Index response_components,
                        Eigen::Index latent_components);

struct Recovery {
  LatentPoint estimate;
  OptimizationTrace trace;
};

/// Maximizes the score over the reduced latent space. Responses are scored in
/// their reduced representation; hypotheses are mapped back through the latent
/// PCA. When the dataset has a single hidden target the trace logs the distance
/// of every candidate to it.
Recovery recover_target(const StimulusResponseDataset& ds, const ScoreConfig& cfg, const CmaConfig& cma,
                        const PcaModel& pca_e, const PcaModel& pca_z, unsigned workers = 1);

nlohmann::json to_json(const Evaluation& e);
nlohmann::json to_json(const CmaConfig& cfg);
CmaConfig cma_config_from_json(const nlohmann::json& j);

}  // namespace cursor
