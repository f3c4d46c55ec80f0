#include "cursor/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cursor {

namespace {

// Relative pivot threshold below which the design is treated as rank deficient.
constexpr double kRankThreshold = 1e-10;

double sample_std(const Eigen::Ref<const Vector>& v, double mean) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

Eigen::MatrixXd apply_scaler(const Scaler& s, const Eigen::Ref<const Matrix>& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (s.scale[j] == 0.0) {
      out.col(j).setZero();
    } else {
      out.col(j) = (x.col(j).array() - s.offset[j]) / s.scale[j];
    }
  }
  return out;
}

}  // namespace

std::string to_string(const EstimatorSpec& spec) {
  switch (spec.kind) {
    case EstimatorKind::ols:
      return "ols";
    case EstimatorKind::dummy_mean:
      return "dummy";
    case EstimatorKind::ridge: {
      std::ostringstream os;
      os << "ridge:" << spec.lambda;
      return os.str();
    }
  }
  return "unknown";
}

EstimatorSpec parse_estimator(const std::string& text) {
  if (text == "ols" || text == "lr") return EstimatorSpec::ols();
  if (text == "dummy") return EstimatorSpec::dummy();
  if (text.rfind("ridge", 0) == 0) {
    double lambda = 1.0;
    if (text.size() > 5) {
      require(text[5] == ':', "estimator: expected ridge:<lambda>");
      std::size_t used = 0;
      lambda = std::stod(text.substr(6), &used);
      require(used == text.size() - 6, "estimator: bad ridge lambda");
    }
    require(lambda >= 0.0, "estimator: ridge lambda must be >= 0");
    return EstimatorSpec::ridge(lambda);
  }
  throw InvalidArgument("unknown estimator '" + text + "'");
}

std::pair<Vector, double> FittedEstimator::raw_coefficients() const {
  const auto d = input_scaler.offset.size();
  Vector w = Vector::Zero(d);
  double b = target_offset + target_scale * intercept;
  if (weights.size() == d) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (input_scaler.scale[j] != 0.0) w[j] = target_scale * weights[j] / input_scaler.scale[j];
    }
    b -= w.dot(input_scaler.offset);
  }
  return {w, b};
}

PreparedDesign::PreparedDesign(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x)
    : spec_(spec), rows_(x.rows()), cols_(x.cols()) {
  require(x.cols() >= 1, "fit: no input columns");
  require_finite(x, "fit inputs");
  if (spec.kind == EstimatorKind::dummy_mean) {
    require(x.rows() >= 1, "fit: at least one row required");
    scaler_.offset = Vector::Zero(cols_);
    scaler_.scale = Vector::Ones(cols_);
    return;
  }
  require(x.rows() >= 2, "fit: linear estimators need at least two rows");
  require(spec.kind != EstimatorKind::ridge || (std::isfinite(spec.lambda) && spec.lambda >= 0.0),
          "fit: ridge lambda must be >= 0");
  scaler_.offset = x.colwise().mean().transpose();
  scaler_.scale = Vector::Ones(cols_);
  if (spec.standardize_inputs) {
    for (Eigen::Index j = 0; j < cols_; ++j) {
      const double s = sample_std(x.col(j), scaler_.offset[j]);
      scaler_.scale[j] = s <= kStdFloor ? 0.0 : s;
    }
  }
  scaled_ = apply_scaler(scaler_, x);
  if (spec.kind == EstimatorKind::ols) {
    cod_.setThreshold(kRankThreshold);
    cod_.compute(scaled_);
  } else {
    Eigen::MatrixXd gram = scaled_.transpose() * scaled_;
    gram.diagonal().array() += spec.lambda;
    ridge_.compute(gram);
  }
}

FittedEstimator PreparedDesign::fit(const Eigen::Ref<const Vector>& y) const {
  require(y.size() == rows_, "fit: target length differs from row count");
  require_finite(y, "fit targets");
  FittedEstimator est;
  est.spec = spec_;
  est.input_scaler = scaler_;
  est.target_offset = y.mean();
  Vector y_scaled = y.array() - est.target_offset;
  if (spec_.standardize_targets) {
    const double s = sample_std(y, est.target_offset);
    if (s <= kStdFloor) {
      y_scaled.setZero();
    } else {
      est.target_scale = s;
      y_scaled /= s;
    }
  }
  switch (spec_.kind) {
    case EstimatorKind::dummy_mean:
      break;
    case EstimatorKind::ols:
      est.weights = cod_.solve(y_scaled);
      break;
    case EstimatorKind::ridge:
      est.weights = ridge_.solve(scaled_.transpose() * y_scaled);
      break;
  }
  return est;
}

FittedEstimator fit(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y) {
  require(x.rows() == y.size(), "fit: X and y differ in length");
  return PreparedDesign(spec, x).fit(y);
}

Vector predict(const FittedEstimator& est, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != est.input_scaler.offset.size()) throw InvalidArgument("predict: column count differs from fit");
  if (est.spec.kind == EstimatorKind::dummy_mean || est.weights.size() == 0) {
    return Vector::Constant(x.rows(), est.target_offset + est.target_scale * est.intercept);
  }
  const Eigen::MatrixXd xs = apply_scaler(est.input_scaler, x);
  Vector y = xs * est.weights;
  y.array() += est.intercept;
  return (est.target_scale * y).array() + est.target_offset;
}

double rmse(const Eigen::Ref<const Vector>& y_hat, const Eigen::Ref<const Vector>& y) {
  if (y_hat.size() != y.size()) throw InvalidArgument("rmse: length mismatch");
  require(y.size() >= 1, "rmse: empty input");
  return std::sqrt((y_hat - y).squaredNorm() / static_cast<double>(y.size()));
}

std::vector<FoldSplit> make_folds(std::size_t n, const CvConfig& cv) {
  require(cv.n_folds >= 1, "cv: n_folds must be positive");
  require(cv.train_fraction > 0.0 && cv.train_fraction < 1.0, "cv: train_fraction must lie in (0, 1)");
  require(n >= static_cast<std::size_t>(cv.n_folds), "cv: fewer samples than folds");
  require(n >= 2, "cv: at least two samples required");
  std::vector<FoldSplit> folds(static_cast<std::size_t>(cv.n_folds));
  if (cv.mode == CvMode::random_splits) {
    auto n_train = static_cast<std::size_t>(std::llround(cv.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    for (int f = 0; f < cv.n_folds; ++f) {
      Rng rng(derive_seed(cv.seed, {static_cast<std::uint64_t>(f)}));
      auto perm = random_permutation(n, rng);
      auto& fold = folds[static_cast<std::size_t>(f)];
      fold.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
      fold.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
      std::sort(fold.train.begin(), fold.train.end());
      std::sort(fold.validation.begin(), fold.validation.end());
    }
  } else {
    require(cv.n_folds >= 2, "cv: k-fold mode needs at least two folds");
    Rng rng(cv.seed);
    const auto perm = random_permutation(n, rng);
    std::vector<int> assignment(n);
    for (std::size_t k = 0; k < n; ++k) assignment[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(cv.n_folds));
    for (std::size_t i = 0; i < n; ++i) {
      for (int f = 0; f < cv.n_folds; ++f) {
        auto& fold = folds[static_cast<std::size_t>(f)];
        (assignment[i] == f ? fold.validation : fold.train).push_back(i);
      }
    }
  }
  return folds;
}

std::uint64_t folds_digest(const std::vector<FoldSplit>& folds) {
  std::uint64_t h = mix64(folds.size());
  for (const auto& f : folds) {
    for (auto i : f.train) h = mix64(h ^ (2 * i));
    for (auto i : f.validation) h = mix64(h ^ (2 * i + 1));
    h = mix64(h ^ 0xf01dULL);
  }
  return h;
}

namespace {

Matrix gather_rows(const Eigen::Ref<const Matrix>& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

Vector gather(const Eigen::Ref<const Vector>& y, const std::vector<std::size_t>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(rows[k])];
  return out;
}

CvResult summarize(std::vector<double> per_fold) {
  CvResult r;
  r.mean_rmse = std::accumulate(per_fold.begin(), per_fold.end(), 0.0) / static_cast<double>(per_fold.size());
  r.per_fold = std::move(per_fold);
  return r;
}

}  // namespace

CvResult cv_rmse(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                 const std::vector<FoldSplit>& folds, bool evaluate_on_train) {
  require(x.rows() == y.size(), "cv_rmse: X and y differ in length");
  require(!folds.empty(), "cv_rmse: no folds");
  std::vector<double> per_fold;
  per_fold.reserve(folds.size());
  for (const auto& fold : folds) {
    const auto est = fit(spec, gather_rows(x, fold.train), gather(y, fold.train));
    const auto& eval = evaluate_on_train ? fold.train : fold.validation;
    per_fold.push_back(rmse(predict(est, gather_rows(x, eval)), gather(y, eval)));
  }
  return summarize(std::move(per_fold));
}

CvResult cv_rmse(const EstimatorSpec& spec, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                 const CvConfig& cv) {
  require(x.rows() == y.size(), "cv_rmse: X and y differ in length");
  return cv_rmse(spec, x, y, make_folds(static_cast<std::size_t>(y.size()), cv), cv.evaluate_on_train);
}

CvResult cv_rmse(const EstimatorSpec& spec, const HypothesisDataset& gd, const std::vector<FoldSplit>& folds,
                 bool evaluate_on_train) {
  require(!folds.empty(), "cv_rmse: no folds");
  std::vector<double> per_fold;
  per_fold.reserve(folds.size());
  for (const auto& fold : folds) {
    const auto est = fit(spec, gd.gather_responses(fold.train), gd.gather_distances(fold.train));
    const auto& eval = evaluate_on_train ? fold.train : fold.validation;
    per_fold.push_back(rmse(predict(est, gd.gather_responses(eval)), gd.gather_distances(eval)));
  }
  return summarize(std::move(per_fold));
}

nlohmann::json to_json(const CvConfig& cv) {
  return {{"n_folds", cv.n_folds},
          {"train_fraction", cv.train_fraction},
          {"seed", cv.seed},
          {"mode", cv.mode == CvMode::random_splits ? "random_splits" : "kfold"},
          {"evaluate_on_train", cv.evaluate_on_train}};
}

CvConfig cv_config_from_json(const nlohmann::json& j) {
  CvConfig cv;
  cv.n_folds = j.value("n_folds", cv.n_folds);
  cv.train_fraction = j.value("train_fraction", cv.train_fraction);
  cv.seed = j.value("seed", cv.seed);
  const auto mode = j.value("mode", std::string("random_splits"));
  if (mode == "random_splits") {
    cv.mode = CvMode::random_splits;
  } else if (mode == "kfold") {
    cv.mode = CvMode::kfold;
  } else {
    throw InvalidArgument("cv: unknown mode '" + mode + "'");
  }
  cv.evaluate_on_train = j.value("evaluate_on_train", cv.evaluate_on_train);
  return cv;
}

}  // namespace cursor
