#pragma once

#include "cursor/experiments.hpp"

#include <random>

namespace testing {

using namespace cursor;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Seed seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, Seed seed, double scale = 1.0) {
  Matrix m = random_matrix(n, 1, seed, scale);
  return Eigen::Map<Vector>(m.data(), n);
}

/// Small single-target synthetic dataset.
inline StimulusResponseDataset small_dataset(Seed seed, double noise = 1.0, int trajectories = 4, int points = 30,
                                             int latent_dim = 8, int response_dim = 12) {
  ResponseModelConfig cfg;
  cfg.response_dim = response_dim;
  cfg.noise_sigma = noise;
  cfg.nuisance_rank = 3;
  cfg.seed = derive_seed(seed, {1});
  const auto target = random_latent(latent_dim, derive_seed(seed, {2}));
  return generate_dataset({target}, trajectories, points, ResponseModel(cfg), derive_seed(seed, {3}));
}

}  // namespace testing
