#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

using namespace cursor;
using testing::random_matrix;
using testing::random_vector;

namespace {

Vector column_std(const Eigen::MatrixXd& x) {
  Vector s(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).mean();
    s[j] = std::sqrt((x.col(j).array() - m).square().sum() / static_cast<double>(x.rows() - 1));
  }
  return s;
}

/// Standardized least squares through an SVD pseudoinverse.
struct OlsOracle {
  Eigen::MatrixXd xs;
  Vector ys;
  Vector w;

  OlsOracle(const Eigen::MatrixXd& x, const Vector& y) {
    const Vector mx = x.colwise().mean();
    const Vector sx = column_std(x);
    xs = x.rowwise() - mx.transpose();
    for (Eigen::Index j = 0; j < x.cols(); ++j) xs.col(j) /= sx[j];
    const double my = y.mean();
    const double sy = std::sqrt((y.array() - my).square().sum() / static_cast<double>(y.size() - 1));
    ys = (y.array() - my) / sy;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    Vector inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > 1e-10 * s[0]) inv[i] = 1.0 / s[i];
    }
    w = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * ys;
  }
};

}  // namespace

TEST_CASE("OLS matches a pseudoinverse oracle") {
  for (Seed s = 0; s < 20; ++s) {
    const Matrix x = random_matrix(50, 8, s);
    const Vector y = random_vector(50, 1000 + s) + x * random_vector(8, 2000 + s);
    const auto est = fit(EstimatorSpec::ols(), x, y);
    const OlsOracle oracle(x, y);
    CHECK((est.weights - oracle.w).cwiseAbs().maxCoeff() < 1e-8);
    const Vector r = oracle.ys - oracle.xs * est.weights;
    CHECK((oracle.xs.transpose() * r).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("exact linear fit") {
  Matrix x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const Vector y = 2.0 * Eigen::Map<const Vector>(x.data(), 6);
  const auto est = fit(EstimatorSpec::ols(), x, y);
  CHECK((predict(est, x) - y).cwiseAbs().maxCoeff() < 1e-9);
  const auto [w, b] = est.raw_coefficients();
  CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(b) < 1e-12);
}

TEST_CASE("dummy estimator predicts the training mean") {
  Matrix x = random_matrix(3, 2, 1);
  Vector y(3);
  y << 1, 2, 3;
  const auto est = fit(EstimatorSpec::dummy(), x, y);
  const Vector p = predict(est, random_matrix(7, 2, 9));
  CHECK((p.array() == 2.0).all());
  // Inputs are ignored entirely.
  Matrix corrupted = x;
  corrupted(0, 0) = 1e6;
  CHECK(predict(fit(EstimatorSpec::dummy(), corrupted, y), x) == p.head(3));
}

TEST_CASE("rank-deficient OLS returns the minimum-norm solution") {
  Matrix x = random_matrix(30, 4, 3);
  x.col(3) = x.col(0) * 2.0 + x.col(1);
  const Vector y = random_vector(30, 4);
  const auto est = fit(EstimatorSpec::ols(), x, y);
  const OlsOracle oracle(x, y);
  CHECK((est.weights - oracle.w).cwiseAbs().maxCoeff() < 1e-8);

  // Duplicated column: weight splits evenly.
  Matrix d = random_matrix(25, 2, 5);
  Matrix dd(25, 3);
  dd << d, d.col(0);
  const auto e2 = fit(EstimatorSpec::ols(), dd, random_vector(25, 6));
  CHECK(e2.weights[0] == doctest::Approx(e2.weights[2]).epsilon(1e-9));
}

TEST_CASE("constant columns are ignored") {
  Matrix x = random_matrix(20, 3, 8);
  x.col(1).setConstant(4.0);
  const Vector y = x.col(0) * 3.0;
  const auto est = fit(EstimatorSpec::ols(), x, y);
  CHECK(est.weights[1] == 0.0);
  CHECK((predict(est, x) - y).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ridge(0) equals OLS on full-rank problems") {
  for (Seed s = 0; s < 10; ++s) {
    const Matrix x = random_matrix(40, 6, s);
    const Vector y = random_vector(40, 50 + s);
    const auto a = fit(EstimatorSpec::ols(), x, y);
    const auto b = fit(EstimatorSpec::ridge(0.0), x, y);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("ridge matches the regularized normal equations") {
  const Matrix x = random_matrix(30, 5, 1);
  const Vector y = random_vector(30, 2);
  const double lambda = 3.5;
  const auto est = fit(EstimatorSpec::ridge(lambda), x, y);
  const OlsOracle o(x, y);
  const Eigen::MatrixXd a = o.xs.transpose() * o.xs + lambda * Eigen::MatrixXd::Identity(5, 5);
  const Vector w = a.colPivHouseholderQr().solve(o.xs.transpose() * o.ys);
  CHECK((est.weights - w).cwiseAbs().maxCoeff() < 1e-10);
  // Shrinkage.
  CHECK(est.weights.norm() < fit(EstimatorSpec::ols(), x, y).weights.norm());
}

TEST_CASE("standardized predictions are invariant to input scaling") {
  const Matrix x = random_matrix(40, 5, 11);
  const Vector y = random_vector(40, 12);
  const Matrix test = random_matrix(10, 5, 13);
  const Vector a = predict(fit(EstimatorSpec::ols(), x, y), test);
  const Matrix x10 = 10.0 * x;
  const Vector b = predict(fit(EstimatorSpec::ols(), x10, y), 10.0 * test);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("raw coefficients reproduce predictions") {
  const Matrix x = random_matrix(30, 4, 21);
  const Vector y = random_vector(30, 22).array() + 5.0;
  for (const auto& spec : {EstimatorSpec::ols(), EstimatorSpec::ridge(2.0), EstimatorSpec::dummy()}) {
    const auto est = fit(spec, x, y);
    const auto [w, b] = est.raw_coefficients();
    const Matrix t = random_matrix(6, 4, 23);
    const Vector direct = (t * w).array() + b;
    CHECK((predict(est, t) - direct).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fit and predict validate their inputs") {
  Matrix x = random_matrix(5, 2, 1);
  Vector y = random_vector(5, 2);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(fit(EstimatorSpec::ols(), x, y), InvalidArgument);
  const auto est = fit(EstimatorSpec::ols(), random_matrix(5, 2, 1), y);
  CHECK_THROWS_AS(predict(est, random_matrix(3, 3, 1)), InvalidArgument);
  CHECK_THROWS_AS(fit(EstimatorSpec::ols(), random_matrix(1, 2, 1), random_vector(1, 1)), InvalidArgument);
  CHECK_NOTHROW(fit(EstimatorSpec::dummy(), random_matrix(1, 2, 1), random_vector(1, 1)));
  CHECK_THROWS_AS(fit(EstimatorSpec::ridge(-1.0), random_matrix(5, 2, 1), y), InvalidArgument);
}

TEST_CASE("parse_estimator") {
  CHECK(parse_estimator("ols").kind == EstimatorKind::ols);
  CHECK(parse_estimator("lr").kind == EstimatorKind::ols);
  CHECK(parse_estimator("dummy").kind == EstimatorKind::dummy_mean);
  CHECK(parse_estimator("ridge:0.5").lambda == 0.5);
  CHECK(to_string(parse_estimator("ridge:0.5")) == "ridge:0.5");
  CHECK_THROWS_AS(parse_estimator("svr"), InvalidArgument);
  CHECK_THROWS_AS(parse_estimator("ridge:-2"), InvalidArgument);
  CHECK_THROWS_AS(parse_estimator("ridge:1x"), InvalidArgument);
}

TEST_CASE("rmse") {
  const Vector a = random_vector(10, 1);
  CHECK(rmse(a, a) == 0.0);
  Vector z = Vector::Zero(2), y(2);
  y << 3, 4;
  CHECK(rmse(z, y) == doctest::Approx(3.5355339059327378).epsilon(1e-15));
  const Vector b = random_vector(10, 2);
  double ss = 0.0;
  for (int i = 0; i < 10; ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::abs(rmse(a, b) - std::sqrt(ss / 10.0)) < 1e-12);
  CHECK_THROWS_AS(rmse(a, y), InvalidArgument);
}

TEST_CASE("random-split folds") {
  CvConfig cv;
  cv.seed = 4;
  const auto folds = make_folds(100, cv);
  REQUIRE(folds.size() == 10);
  for (const auto& f : folds) {
    CHECK(f.train.size() == 90);
    CHECK(f.validation.size() == 10);
    std::vector<int> seen(100, 0);
    for (auto i : f.train) seen[i] += 1;
    for (auto i : f.validation) seen[i] += 1;
    for (int s : seen) CHECK(s == 1);
  }
  CHECK(folds_digest(folds) == folds_digest(make_folds(100, cv)));
  cv.seed = 5;
  CHECK(folds_digest(folds) != folds_digest(make_folds(100, cv)));
  CHECK_THROWS_AS(make_folds(9, CvConfig{}), InvalidArgument);
}

TEST_CASE("k-fold partitions") {
  CvConfig cv;
  cv.mode = CvMode::kfold;
  cv.seed = 1;
  const auto folds = make_folds(103, cv);
  std::vector<int> validated(103, 0);
  for (const auto& f : folds) {
    CHECK(f.train.size() + f.validation.size() == 103);
    CHECK((f.validation.size() == 10 || f.validation.size() == 11));
    for (auto i : f.validation) validated[i] += 1;
  }
  for (int v : validated) CHECK(v == 1);
}

TEST_CASE("cv_rmse matches a fold-by-fold recomputation") {
  const Matrix x = random_matrix(80, 4, 31);
  const Vector y = x * random_vector(4, 32) + random_vector(80, 33);
  CvConfig cv;
  cv.seed = 9;
  for (const auto& spec : {EstimatorSpec::ols(), EstimatorSpec::dummy()}) {
    const auto res = cv_rmse(spec, x, y, cv);
    const auto folds = make_folds(80, cv);
    double total = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      Matrix xt(static_cast<Eigen::Index>(folds[f].train.size()), 4);
      Vector yt(xt.rows());
      for (std::size_t k = 0; k < folds[f].train.size(); ++k) {
        xt.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(folds[f].train[k]));
        yt[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(folds[f].train[k])];
      }
      double ss = 0.0;
      if (spec.kind == EstimatorKind::dummy_mean) {
        const double m = yt.mean();
        for (auto i : folds[f].validation) ss += (y[static_cast<Eigen::Index>(i)] - m) * (y[static_cast<Eigen::Index>(i)] - m);
      } else {
        const auto est = fit(spec, xt, yt);
        for (auto i : folds[f].validation) {
          const double p = predict(est, x.row(static_cast<Eigen::Index>(i)))[0];
          ss += (y[static_cast<Eigen::Index>(i)] - p) * (y[static_cast<Eigen::Index>(i)] - p);
        }
      }
      const double r = std::sqrt(ss / static_cast<double>(folds[f].validation.size()));
      CHECK(std::abs(res.per_fold[f] - r) < 1e-12);
      total += r;
    }
    CHECK(std::abs(res.mean_rmse - total / 10.0) < 1e-12);
    CHECK(cv_rmse(spec, x, y, cv).per_fold == res.per_fold);
  }
}

TEST_CASE("noise-free linear targets cross-validate to zero error") {
  const Matrix x = random_matrix(200, 5, 41);
  const Vector y = x * random_vector(5, 42);
  CHECK(cv_rmse(EstimatorSpec::ols(), x, y, CvConfig{}).mean_rmse < 1e-6);
}

TEST_CASE("scalers see only training rows") {
  const Matrix x = random_matrix(60, 3, 51);
  const Vector y = random_vector(60, 52);
  CvConfig cv;
  cv.seed = 2;
  const auto folds = make_folds(60, cv);
  const auto& f = folds[0];
  Matrix corrupted = x;
  Vector yc = y;
  for (auto i : f.validation) {
    corrupted.row(static_cast<Eigen::Index>(i)).setConstant(1e5);
    yc[static_cast<Eigen::Index>(i)] = -1e5;
  }
  auto take = [&](const Matrix& m, const Vector& v) {
    Matrix xt(static_cast<Eigen::Index>(f.train.size()), m.cols());
    Vector yt(xt.rows());
    for (std::size_t k = 0; k < f.train.size(); ++k) {
      xt.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(f.train[k]));
      yt[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(f.train[k])];
    }
    return fit(EstimatorSpec::ols(), xt, yt);
  };
  const auto a = take(x, y);
  const auto b = take(corrupted, yc);
  CHECK(a.weights == b.weights);
  CHECK(a.input_scaler.offset == b.input_scaler.offset);
  CHECK(a.input_scaler.scale == b.input_scaler.scale);
  CHECK(a.target_offset == b.target_offset);
}

TEST_CASE("training-set evaluation flag") {
  const Matrix x = random_matrix(60, 20, 61);
  const Vector y = random_vector(60, 62);
  CvConfig cv;
  cv.evaluate_on_train = true;
  const auto train = cv_rmse(EstimatorSpec::ols(), x, y, cv);
  cv.evaluate_on_train = false;
  const auto held = cv_rmse(EstimatorSpec::ols(), x, y, cv);
  CHECK(train.mean_rmse < held.mean_rmse);
}
