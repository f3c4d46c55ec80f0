#pragma once

#include "cursor/common.hpp"
#include "cursor/dataset.hpp"
#include "cursor/latent.hpp"

#include "json.hpp"

#include <vector>

namespace cursor {

enum class Link { linear, saturating };

/// Knobs of the simulated encoding. The desk-scale defaults are listed here;
/// the reference noise levels live in config/reference.json.
struct ResponseModelConfig {
  int response_dim = 64;
  double signal_gain = 1.0;
  int signal_rank = 3;
  double noise_sigma = 1.0;
  int nuisance_rank = 8;
  double nuisance_gain = 0.0;
  Link link = Link::linear;
  double tau = 10.0;
  Seed seed = 0;
};

/// Low-rank linear encoding of the target distance plus structured nuisance
/// and isotropic noise:
///   e = gain * g(d) * sum_k w_k + nuisance_gain * B eta + noise_sigma * eps
class ResponseModel {
 public:
  explicit ResponseModel(const ResponseModelConfig& config);

  const ResponseModelConfig& config() const { return config_; }
  int response_dim() const { return config_.response_dim; }
  /// response_dim x signal_rank, orthonormal columns.
  const Matrix& signal_dirs() const { return signal_dirs_; }
  /// response_dim x nuisance_rank, orthonormal columns.
  const Matrix& nuisance_basis() const { return nuisance_basis_; }

  double link(double d) const;

 private:
  ResponseModelConfig config_;
  Matrix signal_dirs_;
  Matrix nuisance_basis_;
};

Vector simulate_response(const ResponseModel& model, double d, Seed trial_seed);

struct GeneratorGeometry {
  double d_min = 0.0;
  double d_max = kMaxStimulusDistance;
  Spacing spacing = Spacing::logarithmic;
  double log_floor = 1.0;
};

/// One trajectory per (target, trajectory index), one simulated response per
/// stimulus. Per-trial seeds are keyed by (master_seed, target, trajectory, point).
StimulusResponseDataset generate_dataset(const std::vector<LatentPoint>& targets, int trajectories_per_target,
                                         int points_per_trajectory, const ResponseModel& model, Seed master_seed,
                                         const GeneratorGeometry& geometry = {});

nlohmann::json to_json(const ResponseModelConfig& config);
ResponseModelConfig response_model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorGeometry& geometry);
GeneratorGeometry generator_geometry_from_json(const nlohmann::json& j);

}  // namespace cursor
