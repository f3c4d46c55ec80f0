#pragma once

#include "cursor/cursor.hpp"
#include "cursor/dataset.hpp"
#include "cursor/optimize.hpp"
#include "cursor/ranking.hpp"
#include "cursor/synth.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cursor {

/// How a hypothesis is scored: an estimator plus the scoring mode. Labels are
/// "ols", "dummy", "ridge:<lambda>", and the shuffled-control variants with an
/// "s-" prefix ("s-ols" is the shuffled linear regression control).
struct ScoringMethod {
  std::string label;
  EstimatorSpec estimator;
  ScoreMode mode = ScoreMode::cursor;
};

ScoringMethod parse_scoring_method(const std::string& label);

struct GeneratorPlan {
  int latent_dim = 32;
  ResponseModelConfig response;
  GeneratorGeometry geometry;
  int trajectories_per_target = 10;
  int points_per_trajectory = 300;
};

struct HypothesisPlan {
  int L = 60;
  double d_max = kMaxStimulusDistance;
  bool include_target = true;
};

struct OptimizationPlan {
  int budget = 1000;
  double bound = 15.0;
  /// 0 selects the scaled default.
  int latent_components = 0;
  int response_components = 0;
  int population_size = 0;
  double sigma0 = 0.0;
};

struct ExperimentPlan {
  Seed master_seed = 0;
  GeneratorPlan generator;
  /// Load one dataset from disk instead of generating per cell.
  std::optional<std::string> dataset_path;
  std::vector<std::string> estimators = {"ols", "s-ols", "dummy"};
  CvConfig cv;
  HypothesisPlan hypotheses;
  /// Empty: the reference ladder scaled to the dataset size.
  std::vector<std::size_t> sizes;
  std::vector<double> ablation_thresholds = {0.0, 5.0, 10.0, 20.0, 30.0};
  OptimizationPlan optimization;
  int targets = 5;
  int replicates = 3;
};

/// Parses and validates a plan document; unknown keys are rejected.
ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentPlan& plan);
/// 16 hex digits identifying the resolved plan.
std::string plan_hash(const ExperimentPlan& plan);

/// Seeds for one (target, replicate) cell, all derived from the master seed.
struct CellSeeds {
  Seed target = 0;
  Seed dataset = 0;
  Seed hypotheses = 0;
  Seed cv = 0;
  Seed perm = 0;
  Seed tie = 0;
  Seed subsample = 0;
  Seed cma = 0;
};

CellSeeds cell_seeds(Seed master, int target, int replicate);
/// Shared by every cell of a plan: one simulated encoding.
ResponseModel plan_response_model(const ExperimentPlan& plan);
StimulusResponseDataset cell_dataset(const ExperimentPlan& plan, int target, int replicate);
ScoreConfig cell_score_config(const ExperimentPlan& plan, const ScoringMethod& method, const CellSeeds& seeds);

/// The reference dataset-size ladder, 100 .. 9234 pairs.
const std::vector<std::size_t>& reference_size_ladder();
/// Ladder rescaled to n pairs, deduplicated, descending.
std::vector<std::size_t> scaled_size_ladder(std::size_t n, std::size_t min_size);

struct SweepRow {
  int target = 0;
  int replicate = 0;
  std::size_t size = 0;
  std::string estimator;
  RankReport report;
  std::vector<ScoreReport> details;
};

std::vector<SweepRow> run_size_sweep(const ExperimentPlan& plan, unsigned workers = 1);

enum class AblationVariant { optimize, rank };

struct AblationRow {
  int target = 0;
  int replicate = 0;
  double threshold = 0.0;
  std::string condition;  ///< "ablated" or "control"
  std::string estimator;
  std::size_t n = 0;
  bool skipped = false;
  std::string skip_reason;
  /// Optimization variant: distance of the recovered point to the target.
  std::optional<double> final_distance;
  /// Ranking variant.
  std::optional<RankReport> rank;
};

std::vector<AblationRow> run_ablation(const ExperimentPlan& plan, AblationVariant variant, unsigned workers = 1);

/// Distances of every stimulus to a recovered target, and their error
/// against the hidden distances when those exist.
struct LabelRecovery {
  Vector distances;
  std::optional<double> rmse;
  std::optional<double> rmse_percent_of_range;
};

LabelRecovery recover_labels(const StimulusResponseDataset& ds, const LatentPoint& estimate);

/// Full optimization for one dataset: fits the reduction, runs CMA-ES over the
/// reduced latent space and returns the recovery.
Recovery optimize_dataset(const StimulusResponseDataset& ds, const ScoreConfig& cfg, const OptimizationPlan& opt,
                          Seed cma_seed, unsigned workers = 1, Reduction* reduction_out = nullptr);

/// One metric observation keyed by its condition labels.
struct MetricRecord {
  std::map<std::string, std::string> keys;
  std::map<std::string, double> metrics;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  ///< sample std; 0 for a single observation
  std::size_t n = 0;
};

struct SummaryRow {
  std::map<std::string, std::string> keys;
  std::map<std::string, MetricSummary> metrics;
};

/// Mean and sample std of every metric per group, groups in first-seen order.
std::vector<SummaryRow> aggregate(const std::vector<MetricRecord>& records, const std::vector<std::string>& group_by);

MetricRecord to_record(const SweepRow& row);

}  // namespace cursor
