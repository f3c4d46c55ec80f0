#include "cursor/latent.hpp"

#include <cmath>

namespace cursor {

LatentPoint::LatentPoint(Vector coords) : coords_(std::move(coords)) {
  require(coords_.size() > 0, "LatentPoint: dimension must be positive");
  require_finite(coords_, "LatentPoint");
}

LatentPoint LatentPoint::zeros(Eigen::Index dim) { return LatentPoint(Vector::Zero(dim)); }

double similarity(const LatentPoint& h, const LatentPoint& z) {
  if (h.dim() != z.dim()) throw InvalidArgument("similarity: dimension mismatch");
  return (h.coords() - z.coords()).norm();
}

Vector similarity_to_rows(const LatentPoint& h, const Matrix& stimuli) {
  if (h.dim() != stimuli.cols()) throw InvalidArgument("similarity: dimension mismatch");
  Vector d(stimuli.rows());
  for (Eigen::Index i = 0; i < stimuli.rows(); ++i) {
    d[i] = (stimuli.row(i).transpose() - h.coords()).norm();
  }
  return d;
}

Vector random_unit_direction(Eigen::Index dim, Seed seed) {
  require(dim > 0, "random_unit_direction: dimension must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector u(dim);
  double norm = 0.0;
  // A zero draw has probability zero but would leave the direction undefined.
  while (norm == 0.0) {
    for (auto& x : u) x = normal(rng);
    norm = u.norm();
  }
  return u / norm;
}

LatentPoint random_latent(Eigen::Index dim, Seed seed) {
  require(dim > 0, "random_latent: dimension must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector z(dim);
  for (auto& x : z) x = normal(rng);
  return LatentPoint(std::move(z));
}

LatentPoint point_at_distance(const LatentPoint& target, double d, Seed seed) {
  require(std::isfinite(d) && d >= 0.0, "point_at_distance: distance must be finite and >= 0");
  if (d == 0.0) return target;
  return LatentPoint(target.coords() + d * random_unit_direction(target.dim(), seed));
}

std::vector<double> trajectory_distances(const TrajectorySpec& spec) {
  require(spec.n_points >= 1, "sample_trajectory: n_points must be >= 1");
  require(std::isfinite(spec.d_min) && std::isfinite(spec.d_max), "sample_trajectory: non-finite bounds");
  require(spec.d_min >= 0.0, "sample_trajectory: d_min must be >= 0");
  require(spec.d_min <= spec.d_max, "sample_trajectory: d_min > d_max");
  require(spec.d_max <= spec.max_allowed_distance, "sample_trajectory: d_max exceeds the allowed range");

  const int n = spec.n_points;
  std::vector<double> d(static_cast<std::size_t>(n));
  if (n == 1) {
    d[0] = spec.d_min;
    return d;
  }
  if (spec.spacing == Spacing::uniform) {
    const double step = (spec.d_max - spec.d_min) / (n - 1);
    for (int i = 0; i < n; ++i) d[i] = spec.d_min + step * i;
    d[n - 1] = spec.d_max;
    return d;
  }

  // Logarithmic: a zero lower bound is pinned as the first sample and the rest
  // are geometric between the floor and d_max.
  int first = 0;
  double lo = spec.d_min;
  if (lo == 0.0) {
    d[0] = 0.0;
    first = 1;
    lo = std::min(spec.log_floor, spec.d_max);
    require(spec.log_floor > 0.0, "sample_trajectory: log floor must be positive");
  }
  const int m = n - first;
  if (m == 1) {
    d[first] = spec.d_max;
    return d;
  }
  const double log_lo = std::log(lo);
  const double log_hi = std::log(spec.d_max);
  for (int i = 0; i < m; ++i) {
    d[first + i] = std::exp(log_lo + (log_hi - log_lo) * i / (m - 1));
  }
  d[first] = lo;
  d[n - 1] = spec.d_max;
  return d;
}

std::vector<TrajectoryPoint> sample_trajectory(const TrajectorySpec& spec) {
  require(spec.target.dim() > 0, "sample_trajectory: target not set");
  const auto distances = trajectory_distances(spec);
  const Vector u = random_unit_direction(spec.target.dim(), spec.direction_seed);
  std::vector<TrajectoryPoint> out;
  out.reserve(distances.size());
  for (double d : distances) {
    out.push_back({d == 0.0 ? spec.target : LatentPoint(spec.target.coords() + d * u), d});
  }
  return out;
}

}  // namespace cursor
