#pragma once

#include "cursor/common.hpp"

#include <vector>

namespace cursor {

/// Acquisition range of stimulus distances from the target.
inline constexpr double kMaxStimulusDistance = 46.16;

/// A stimulus or hypothesis embedding in the latent space.
class LatentPoint {
 public:
  LatentPoint() = default;
  explicit LatentPoint(Vector coords);
  static LatentPoint zeros(Eigen::Index dim);

  const Vector& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }

  friend bool operator==(const LatentPoint& a, const LatentPoint& b) {
    return a.coords_.size() == b.coords_.size() && a.coords_ == b.coords_;
  }

 private:
  Vector coords_;
};

/// Euclidean distance between a hypothesis and a stimulus embedding.
double similarity(const LatentPoint& h, const LatentPoint& z);

/// Distance from `h` to every row of `stimuli`.
Vector similarity_to_rows(const LatentPoint& h, const Matrix& stimuli);

/// Standard-normal vector normalized to unit length.
Vector random_unit_direction(Eigen::Index dim, Seed seed);

/// Standard-normal latent sample, the prior the generator is sampled from.
LatentPoint random_latent(Eigen::Index dim, Seed seed);

/// target + d * u with u a seeded uniform direction on the sphere.
LatentPoint point_at_distance(const LatentPoint& target, double d, Seed seed);

enum class Spacing { logarithmic, uniform };

struct TrajectorySpec {
  LatentPoint target;
  int n_points = 10;
  double d_min = 0.0;
  double d_max = kMaxStimulusDistance;
  Spacing spacing = Spacing::logarithmic;
  Seed direction_seed = 0;
  /// Smallest nonzero distance used by logarithmic spacing when d_min == 0.
  double log_floor = 1.0;
  /// Upper limit enforced on d_max.
  double max_allowed_distance = kMaxStimulusDistance;
};

struct TrajectoryPoint {
  LatentPoint point;
  double distance = 0.0;
};

/// Distances used along one trajectory, without placing points.
std::vector<double> trajectory_distances(const TrajectorySpec& spec);

/// Points along a single ray from the target at the requested distances.
std::vector<TrajectoryPoint> sample_trajectory(const TrajectorySpec& spec);

}  // namespace cursor
