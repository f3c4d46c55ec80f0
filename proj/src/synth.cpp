#include "cursor/synth.hpp"

#include <cmath>

namespace cursor {

namespace {

Matrix orthonormal_columns(int rows, int cols, Seed seed) {
  if (cols == 0) return Matrix(rows, 0);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

}  // namespace

ResponseModel::ResponseModel(const ResponseModelConfig& config) : config_(config) {
  require(config.response_dim >= 1, "ResponseModel: response_dim must be positive");
  require(config.signal_rank >= 1 && config.signal_rank <= config.response_dim,
          "ResponseModel: signal_rank must lie in [1, response_dim]");
  require(config.nuisance_rank >= 0 && config.nuisance_rank <= config.response_dim,
          "ResponseModel: nuisance_rank must lie in [0, response_dim]");
  require(std::isfinite(config.signal_gain) && config.signal_gain >= 0.0, "ResponseModel: signal_gain must be >= 0");
  require(std::isfinite(config.noise_sigma) && config.noise_sigma >= 0.0, "ResponseModel: noise_sigma must be >= 0");
  require(std::isfinite(config.nuisance_gain) && config.nuisance_gain >= 0.0,
          "ResponseModel: nuisance_gain must be >= 0");
  require(config.link == Link::linear || config.tau > 0.0, "ResponseModel: tau must be positive");
  signal_dirs_ = orthonormal_columns(config.response_dim, config.signal_rank, derive_seed(config.seed, {1}));
  nuisance_basis_ = orthonormal_columns(config.response_dim, config.nuisance_rank, derive_seed(config.seed, {2}));
}

double ResponseModel::link(double d) const {
  return config_.link == Link::linear ? d : std::tanh(d / config_.tau);
}

Vector simulate_response(const ResponseModel& model, double d, Seed trial_seed) {
  require(std::isfinite(d), "simulate_response: distance must be finite");
  const auto& cfg = model.config();
  Vector e = (cfg.signal_gain * model.link(d)) * model.signal_dirs().rowwise().sum();
  Rng rng(trial_seed);
  std::normal_distribution<double> normal;
  if (cfg.nuisance_rank > 0) {
    Vector eta(cfg.nuisance_rank);
    for (auto& x : eta) x = normal(rng);
    if (cfg.nuisance_gain != 0.0) e += cfg.nuisance_gain * (model.nuisance_basis() * eta);
  }
  if (cfg.noise_sigma != 0.0) {
    for (auto& x : e) x += cfg.noise_sigma * normal(rng);
  }
  return e;
}

StimulusResponseDataset generate_dataset(const std::vector<LatentPoint>& targets, int trajectories_per_target,
                                         int points_per_trajectory, const ResponseModel& model, Seed master_seed,
                                         const GeneratorGeometry& geometry) {
  require(!targets.empty(), "generate_dataset: empty target list");
  require(trajectories_per_target >= 1, "generate_dataset: trajectories_per_target must be >= 1");
  require(points_per_trajectory >= 1, "generate_dataset: points_per_trajectory must be >= 1");
  const auto dz = targets.front().dim();
  for (const auto& t : targets) require(t.dim() == dz, "generate_dataset: targets differ in dimension");

  const auto n = static_cast<Eigen::Index>(targets.size()) * trajectories_per_target * points_per_trajectory;
  Matrix stimuli(n, dz);
  Matrix responses(n, model.response_dim());
  HiddenTruth truth{targets, {}, Vector(n)};
  truth.target_index.reserve(static_cast<std::size_t>(n));

  Eigen::Index row = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (int j = 0; j < trajectories_per_target; ++j) {
      TrajectorySpec spec;
      spec.target = targets[t];
      spec.n_points = points_per_trajectory;
      spec.d_min = geometry.d_min;
      spec.d_max = geometry.d_max;
      spec.max_allowed_distance = std::max(kMaxStimulusDistance, geometry.d_max);
      spec.spacing = geometry.spacing;
      spec.log_floor = geometry.log_floor;
      spec.direction_seed = derive_seed(master_seed, {1, t, static_cast<std::uint64_t>(j)});
      const auto points = sample_trajectory(spec);
      for (int p = 0; p < points_per_trajectory; ++p, ++row) {
        const auto& tp = points[static_cast<std::size_t>(p)];
        stimuli.row(row) = tp.point.coords().transpose();
        truth.distances[row] = tp.distance;
        truth.target_index.push_back(static_cast<std::uint32_t>(t));
        const Seed trial = derive_seed(master_seed, {2, t, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(p)});
        responses.row(row) = simulate_response(model, tp.distance, trial).transpose();
      }
    }
  }

  nlohmann::json provenance = {
      {"generator", "synthetic"},
      {"master_seed", master_seed},
      {"trajectories_per_target", trajectories_per_target},
      {"points_per_trajectory", points_per_trajectory},
      {"n_targets", targets.size()},
      {"geometry", to_json(geometry)},
      {"response_model", to_json(model.config())},
  };
  return StimulusResponseDataset(std::move(stimuli), std::move(responses), std::move(truth), std::move(provenance));
}

nlohmann::json to_json(const ResponseModelConfig& c) {
  return {{"response_dim", c.response_dim},   {"signal_gain", c.signal_gain},
          {"signal_rank", c.signal_rank},     {"noise_sigma", c.noise_sigma},
          {"nuisance_rank", c.nuisance_rank}, {"nuisance_gain", c.nuisance_gain},
          {"link", c.link == Link::linear ? "linear" : "saturating"},
          {"tau", c.tau},                     {"seed", c.seed}};
}

ResponseModelConfig response_model_config_from_json(const nlohmann::json& j) {
  ResponseModelConfig c;
  c.response_dim = j.value("response_dim", c.response_dim);
  c.signal_gain = j.value("signal_gain", c.signal_gain);
  c.signal_rank = j.value("signal_rank", c.signal_rank);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.nuisance_rank = j.value("nuisance_rank", c.nuisance_rank);
  c.nuisance_gain = j.value("nuisance_gain", c.nuisance_gain);
  const auto link = j.value("link", std::string("linear"));
  if (link == "linear") {
    c.link = Link::linear;
  } else if (link == "saturating") {
    c.link = Link::saturating;
  } else {
    throw InvalidArgument("response model: unknown link '" + link + "'");
  }
  c.tau = j.value("tau", c.tau);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const GeneratorGeometry& g) {
  return {{"d_min", g.d_min},
          {"d_max", g.d_max},
          {"spacing", g.spacing == Spacing::logarithmic ? "logarithmic" : "uniform"},
          {"log_floor", g.log_floor}};
}

GeneratorGeometry generator_geometry_from_json(const nlohmann::json& j) {
  GeneratorGeometry g;
  g.d_min = j.value("d_min", g.d_min);
  g.d_max = j.value("d_max", g.d_max);
  const auto spacing = j.value("spacing", std::string("logarithmic"));
  if (spacing == "logarithmic") {
    g.spacing = Spacing::logarithmic;
  } else if (spacing == "uniform") {
    g.spacing = Spacing::uniform;
  } else {
    throw InvalidArgument("geometry: unknown spacing '" + spacing + "'");
  }
  g.log_floor = j.value("log_floor", g.log_floor);
  return g;
}

}  // namespace cursor
