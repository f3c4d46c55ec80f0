#include "cursor/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cursor {

CmaConfig CmaConfig::with_bounds(int dim, double half_width) {
  CmaConfig c;
  c.dim = dim;
  c.bounds_lo = Vector::Constant(dim, -half_width);
  c.bounds_hi = Vector::Constant(dim, half_width);
  return c;
}

std::vector<double> OptimizationTrace::best_so_far_scores() const {
  std::vector<double> out;
  out.reserve(evaluations.size());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : evaluations) {
    if (!e.non_finite && e.score > best) best = e.score;
    out.push_back(best);
  }
  return out;
}

namespace {

struct Strategy {
  int n = 0;
  int lambda = 0;
  int mu = 0;
  Vector weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;

  Strategy(int dim, int population) : n(dim), lambda(population) {
    mu = lambda / 2;
    weights.resize(mu);
    for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
    weights /= weights.sum();
    mu_eff = 1.0 / weights.squaredNorm();
    const double nd = n;
    c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
    d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
    c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
    c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
    c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
    chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
  }
};

}  // namespace

OptimizationTrace cmaes_maximize(const Objective& objective, const CmaConfig& cfg, unsigned workers) {
  const int n = cfg.dim;
  require(n >= 1, "cmaes: dim must be positive");
  const Vector lo = cfg.bounds_lo.size() ? cfg.bounds_lo : Vector::Constant(n, -15.0);
  const Vector hi = cfg.bounds_hi.size() ? cfg.bounds_hi : Vector::Constant(n, 15.0);
  require(lo.size() == n && hi.size() == n, "cmaes: bounds dimension mismatch");
  require(((hi - lo).array() > 0.0).all(), "cmaes: bounds_lo must be below bounds_hi");
  const int lambda = cfg.population_size > 0 ? cfg.population_size : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  require(lambda >= 2, "cmaes: population must be >= 2");
  const double sigma0 = cfg.sigma0 > 0.0 ? cfg.sigma0 : ((hi - lo).minCoeff() / 2.0) / 3.0;
  if (cfg.budget_mode == BudgetMode::evaluations) {
    require(cfg.max_evaluations >= 1, "cmaes: max_evaluations must be positive");
  } else {
    require(cfg.max_generations >= 1, "cmaes: max_generations must be positive");
  }

  const Strategy s(n, lambda);
  Vector mean = cfg.initial_mean ? *cfg.initial_mean : Vector((lo + hi) / 2.0);
  require(mean.size() == n, "cmaes: initial mean dimension mismatch");
  mean = mean.cwiseMax(lo).cwiseMin(hi);
  double sigma = sigma0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  Vector scales = Vector::Ones(n);
  Vector p_sigma = Vector::Zero(n);
  Vector p_c = Vector::Zero(n);

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal;

  OptimizationTrace trace;
  trace.seed = cfg.seed;
  double best_score = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int gen = 0;; ++gen) {
    int batch = lambda;
    if (cfg.budget_mode == BudgetMode::evaluations) {
      const int remaining = cfg.max_evaluations - static_cast<int>(trace.evaluations.size());
      if (remaining <= 0) {
        trace.stop_reason = "max_evaluations";
        break;
      }
      batch = std::min(batch, remaining);
    } else if (gen >= cfg.max_generations) {
      trace.stop_reason = "max_generations";
      break;
    }
    if (sigma < cfg.min_sigma) {
      trace.stop_reason = "min_sigma";
      break;
    }

    std::vector<Vector> candidates(static_cast<std::size_t>(batch));
    for (auto& x : candidates) {
      Vector z(n);
      for (auto& v : z) v = normal(rng);
      x = (mean + sigma * (basis * scales.asDiagonal() * z)).cwiseMax(lo).cwiseMin(hi);
    }
    std::vector<double> fitness(candidates.size());
    parallel_for(candidates.size(), workers, [&](std::size_t k) { fitness[k] = objective(candidates[k]); });

    const auto first = trace.evaluations.size();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      Evaluation e;
      e.index = static_cast<int>(first + k);
      e.generation = gen;
      e.point = candidates[k];
      e.score = fitness[k];
      e.non_finite = !std::isfinite(fitness[k]);
      if (!e.non_finite && (!have_best || e.score > best_score)) {
        best_score = e.score;
        trace.best_index = first + k;
        have_best = true;
      }
      trace.evaluations.push_back(std::move(e));
    }
    trace.generations = gen + 1;
    // A truncated final generation is evaluated but does not update the state.
    if (batch < lambda) continue;

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t k) {
      return std::isfinite(fitness[k]) ? fitness[k] : -std::numeric_limits<double>::infinity();
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });

    const Vector old_mean = mean;
    Eigen::MatrixXd steps(n, s.mu);
    for (int i = 0; i < s.mu; ++i) steps.col(i) = (candidates[order[static_cast<std::size_t>(i)]] - old_mean) / sigma;
    const Vector step = steps * s.weights;
    mean = old_mean + sigma * step;

    const Vector inv_sqrt_step = basis * scales.cwiseInverse().asDiagonal() * basis.transpose() * step;
    p_sigma = (1.0 - s.c_sigma) * p_sigma + std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * inv_sqrt_step;
    const double ps_norm = p_sigma.norm();
    const double decay = 1.0 - std::pow(1.0 - s.c_sigma, 2.0 * (gen + 1));
    const bool h_sigma = ps_norm / std::sqrt(decay) < (1.4 + 2.0 / (n + 1.0)) * s.chi_n;
    p_c = (1.0 - s.c_c) * p_c + (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * step;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < s.mu; ++i) rank_mu += s.weights[i] * steps.col(i) * steps.col(i).transpose();
    const double delta_h = (1.0 - (h_sigma ? 1.0 : 0.0)) * s.c_c * (2.0 - s.c_c);
    cov = (1.0 - s.c_1 - s.c_mu) * cov + s.c_1 * (p_c * p_c.transpose() + delta_h * cov) + s.c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose());

    sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw RuntimeError("cmaes: covariance eigendecomposition failed");
    trace.min_cov_eigenvalue.push_back(eig.eigenvalues().minCoeff());
    if (eig.eigenvalues().minCoeff() <= 0.0) throw RuntimeError("cmaes: covariance lost positive definiteness");
    basis = eig.eigenvectors();
    scales = eig.eigenvalues().cwiseSqrt();
  }
  if (!have_best) trace.best_index = 0;
  return trace;
}

Reduction fit_reduction(const StimulusResponseDataset& ds, Eigen::Index response_components,
                        Eigen::Index latent_components) {
  return {pca_fit(ds.responses(), response_components), pca_fit(ds.stimuli(), latent_components)};
}

Recovery recover_target(const StimulusResponseDataset& ds, const ScoreConfig& cfg, const CmaConfig& cma,
                        const PcaModel& pca_e, const PcaModel& pca_z, unsigned workers) {
  require(pca_e.input_dim() == ds.response_dim(), "recover_target: response PCA dimension mismatch");
  require(pca_z.input_dim() == ds.latent_dim(), "recover_target: latent PCA dimension mismatch");
  require(cma.dim == pca_z.k(), "recover_target: CMA-ES dimension differs from latent components");

  const auto reduced = ds.with_responses(pca_transform_rows(pca_e, ds.responses()));
  const Scorer scorer(reduced, cfg);
  const Objective objective = [&](const Vector& y) { return scorer.score(LatentPoint(pca_inverse(pca_z, y))).score; };

  Recovery out;
  out.trace = cmaes_maximize(objective, cma, workers);
  out.estimate = LatentPoint(pca_inverse(pca_z, out.trace.best().point));
  if (ds.has_truth() && ds.hidden_truth()->single_target()) {
    const auto& target = ds.hidden_truth()->target();
    for (auto& e : out.trace.evaluations) {
      e.distance_to_target = similarity(target, LatentPoint(pca_inverse(pca_z, e.point)));
    }
  }
  return out;
}

nlohmann::json to_json(const Evaluation& e) {
  nlohmann::json j = {{"index", e.index},
                      {"generation", e.generation},
                      {"point", std::vector<double>(e.point.begin(), e.point.end())},
                      {"non_finite", e.non_finite}};
  if (e.non_finite) {
    j["score"] = nullptr;
  } else {
    j["score"] = e.score;
  }
  if (e.distance_to_target) j["distance_to_target"] = *e.distance_to_target;
  return j;
}

nlohmann::json to_json(const CmaConfig& c) {
  nlohmann::json j = {{"dim", c.dim},
                      {"bounds_lo", std::vector<double>(c.bounds_lo.begin(), c.bounds_lo.end())},
                      {"bounds_hi", std::vector<double>(c.bounds_hi.begin(), c.bounds_hi.end())},
                      {"population_size", c.population_size},
                      {"sigma0", c.sigma0},
                      {"max_evaluations", c.max_evaluations},
                      {"budget_mode", c.budget_mode == BudgetMode::evaluations ? "evaluations" : "generations"},
                      {"max_generations", c.max_generations},
                      {"min_sigma", c.min_sigma},
                      {"seed", c.seed}};
  if (c.initial_mean) j["initial_mean"] = std::vector<double>(c.initial_mean->begin(), c.initial_mean->end());
  return j;
}

CmaConfig cma_config_from_json(const nlohmann::json& j) {
  CmaConfig c;
  c.dim = j.value("dim", c.dim);
  auto vec = [&](const char* key) {
    const auto v = j.value(key, std::vector<double>{});
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  c.bounds_lo = vec("bounds_lo");
  c.bounds_hi = vec("bounds_hi");
  c.population_size = j.value("population_size", c.population_size);
  c.sigma0 = j.value("sigma0", c.sigma0);
  c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
  c.budget_mode = j.value("budget_mode", std::string("evaluations")) == "generations" ? BudgetMode::generations
                                                                                     : BudgetMode::evaluations;
  c.max_generations = j.value("max_generations", c.max_generations);
  c.min_sigma = j.value("min_sigma", c.min_sigma);
  c.seed = j.value("seed", c.seed);
  if (j.contains("initial_mean")) c.initial_mean = vec("initial_mean");
  return c;
}

}  // namespace cursor
