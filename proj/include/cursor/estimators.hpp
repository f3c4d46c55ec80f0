#pragma once

#include "cursor/common.hpp"
#include "cursor/dataset.hpp"

#include "json.hpp"

#include <memory>
#include <vector>

namespace cursor {

enum class EstimatorKind { ols, ridge, dummy_mean };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::ols;
  double lambda = 0.0;
  bool standardize_inputs = true;
  bool standardize_targets = true;

  static EstimatorSpec ols() { return {}; }
  static EstimatorSpec ridge(double lambda) { return {EstimatorKind::ridge, lambda}; }
  static EstimatorSpec dummy() { return {EstimatorKind::dummy_mean}; }
};

std::string to_string(const EstimatorSpec& spec);
/// Parses "ols", "dummy" or "ridge:<lambda>".
EstimatorSpec parse_estimator(const std::string& text);

/// Affine per-column scaler captured at fit time. Unlike Standardizer it may
/// be an identity scaling when standardization is turned off.
struct Scaler {
  Vector offset;
  Vector scale;  ///< zero marks a constant column
};

struct FittedEstimator {
  EstimatorSpec spec;
  Vector weights;  ///< in scaled space; empty for the dummy
  double intercept = 0.0;  ///< in scaled target space
  Scaler input_scaler;
  double target_offset = 0.0;
  double target_scale = 1.0;

  /// Weights and intercept mapped back to raw input and target units.
  std::pair<Vector, double> raw_coefficients() const;
};

/// Solver for repeated fits against a fixed training design. Holds the scaled
/// design and its factorization so that fitting many target vectors costs one
/// back-substitution each.
class PreparedDesign {
 public:
  PreparedDesign(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x);
  FittedEstimator fit(const Eigen::Ref<const Vector>& y) const;
  Eigen::Index rows() const { return rows_; }

 private:
  EstimatorSpec spec_;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  Scaler scaler_;
  Eigen::MatrixXd scaled_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
  Eigen::LDLT<Eigen::MatrixXd> ridge_;
};

FittedEstimator fit(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y);
Vector predict(const FittedEstimator& est, const Eigen::Ref<const Matrix>& x);
double rmse(const Eigen::Ref<const Vector>& y_hat, const Eigen::Ref<const Vector>& y);

enum class CvMode { random_splits, kfold };

struct CvConfig {
  int n_folds = 10;
  double train_fraction = 0.9;
  Seed seed = 0;
  CvMode mode = CvMode::random_splits;
  /// Score on the training split instead of the held-out split.
  bool evaluate_on_train = false;
};

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded fold assignment over indices 0..n-1.
std::vector<FoldSplit> make_folds(std::size_t n, const CvConfig& cv);

/// Order-sensitive digest of a split list.
std::uint64_t folds_digest(const std::vector<FoldSplit>& folds);

struct CvResult {
  double mean_rmse = 0.0;
  std::vector<double> per_fold;
};

CvResult cv_rmse(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                 const CvConfig& cv);
CvResult cv_rmse(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                 const std::vector<FoldSplit>& folds, bool evaluate_on_train = false);

/// Cross-validation over a hypothesis dataset with caller-supplied folds.
CvResult cv_rmse(const EstimatorSpec& spec, const HypothesisDataset& gd, const std::vector<FoldSplit>& folds,
                 bool evaluate_on_train = false);

nlohmann::json to_json(const CvConfig& cv);
CvConfig cv_config_from_json(const nlohmann::json& j);

}  // namespace cursor
