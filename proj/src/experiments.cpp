#include "cursor/experiments.hpp"

#include "cursor/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace cursor {

ScoringMethod parse_scoring_method(const std::string& label) {
  ScoringMethod m;
  m.label = label;
  std::string base = label;
  if (label.rfind("s-", 0) == 0) {
    m.mode = ScoreMode::shuffled_control;
    base = label.substr(2);
  }
  m.estimator = parse_estimator(base);
  return m;
}

namespace {

const std::set<std::string> kPlanKeys = {"master_seed", "generator",   "dataset",   "estimators",
                                         "cv",          "hypotheses",  "sizes",     "ablation_thresholds",
                                         "optimization", "targets",    "replicates"};

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    require(allowed.count(key) > 0, where + ": unknown key '" + key + "'");
  }
}

}  // namespace

ExperimentPlan plan_from_json(const nlohmann::json& j) {
  reject_unknown(j, kPlanKeys, "plan");
  ExperimentPlan p;
  try {
    p.master_seed = j.value("master_seed", p.master_seed);
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      reject_unknown(g, {"latent_dim", "response", "geometry", "trajectories_per_target", "points_per_trajectory"},
                     "plan.generator");
      p.generator.latent_dim = g.value("latent_dim", p.generator.latent_dim);
      if (g.contains("response")) p.generator.response = response_model_config_from_json(g.at("response"));
      if (g.contains("geometry")) p.generator.geometry = generator_geometry_from_json(g.at("geometry"));
      p.generator.trajectories_per_target = g.value("trajectories_per_target", p.generator.trajectories_per_target);
      p.generator.points_per_trajectory = g.value("points_per_trajectory", p.generator.points_per_trajectory);
    }
    if (j.contains("dataset")) p.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("estimators")) p.estimators = j.at("estimators").get<std::vector<std::string>>();
    if (j.contains("cv")) p.cv = cv_config_from_json(j.at("cv"));
    if (j.contains("hypotheses")) {
      const auto& h = j.at("hypotheses");
      reject_unknown(h, {"L", "d_max", "include_target"}, "plan.hypotheses");
      p.hypotheses.L = h.value("L", p.hypotheses.L);
      p.hypotheses.d_max = h.value("d_max", p.hypotheses.d_max);
      p.hypotheses.include_target = h.value("include_target", p.hypotheses.include_target);
    }
    if (j.contains("sizes")) p.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    if (j.contains("ablation_thresholds")) p.ablation_thresholds = j.at("ablation_thresholds").get<std::vector<double>>();
    if (j.contains("optimization")) {
      const auto& o = j.at("optimization");
      reject_unknown(o, {"budget", "bound", "latent_components", "response_components", "population_size", "sigma0"},
                     "plan.optimization");
      p.optimization.budget = o.value("budget", p.optimization.budget);
      p.optimization.bound = o.value("bound", p.optimization.bound);
      p.optimization.latent_components = o.value("latent_components", p.optimization.latent_components);
      p.optimization.response_components = o.value("response_components", p.optimization.response_components);
      p.optimization.population_size = o.value("population_size", p.optimization.population_size);
      p.optimization.sigma0 = o.value("sigma0", p.optimization.sigma0);
    }
    p.targets = j.value("targets", p.targets);
    p.replicates = j.value("replicates", p.replicates);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("plan: ") + e.what());
  }

  require(p.generator.latent_dim >= 1, "plan.generator.latent_dim must be positive");
  require(p.generator.trajectories_per_target >= 1, "plan.generator.trajectories_per_target must be positive");
  require(p.generator.points_per_trajectory >= 1, "plan.generator.points_per_trajectory must be positive");
  require(!p.estimators.empty(), "plan.estimators must not be empty");
  for (const auto& e : p.estimators) parse_scoring_method(e);
  require(p.hypotheses.L >= 2, "plan.hypotheses.L must be >= 2");
  require(p.hypotheses.d_max > 0.0, "plan.hypotheses.d_max must be positive");
  for (auto s : p.sizes) require(s >= static_cast<std::size_t>(p.cv.n_folds), "plan.sizes: size below the fold count");
  for (auto t : p.ablation_thresholds) require(t >= 0.0, "plan.ablation_thresholds must be >= 0");
  require(p.optimization.budget >= 1, "plan.optimization.budget must be positive");
  require(p.optimization.bound > 0.0, "plan.optimization.bound must be positive");
  require(p.targets >= 1, "plan.targets must be positive");
  require(p.replicates >= 1, "plan.replicates must be positive");
  return p;
}

nlohmann::json to_json(const ExperimentPlan& p) {
  nlohmann::json j = {
      {"master_seed", p.master_seed},
      {"generator",
       {{"latent_dim", p.generator.latent_dim},
        {"response", to_json(p.generator.response)},
        {"geometry", to_json(p.generator.geometry)},
        {"trajectories_per_target", p.generator.trajectories_per_target},
        {"points_per_trajectory", p.generator.points_per_trajectory}}},
      {"estimators", p.estimators},
      {"cv", to_json(p.cv)},
      {"hypotheses", {{"L", p.hypotheses.L}, {"d_max", p.hypotheses.d_max}, {"include_target", p.hypotheses.include_target}}},
      {"sizes", p.sizes},
      {"ablation_thresholds", p.ablation_thresholds},
      {"optimization",
       {{"budget", p.optimization.budget},
        {"bound", p.optimization.bound},
        {"latent_components", p.optimization.latent_components},
        {"response_components", p.optimization.response_components},
        {"population_size", p.optimization.population_size},
        {"sigma0", p.optimization.sigma0}}},
      {"targets", p.targets},
      {"replicates", p.replicates}};
  if (p.dataset_path) j["dataset"] = *p.dataset_path;
  return j;
}

std::string plan_hash(const ExperimentPlan& plan) {
  const std::string text = to_json(plan).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = mix64(h ^ c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CellSeeds cell_seeds(Seed master, int target, int replicate) {
  const auto t = static_cast<std::uint64_t>(target);
  const auto r = static_cast<std::uint64_t>(replicate);
  return {derive_seed(master, {10, t}),    derive_seed(master, {12, t, r}), derive_seed(master, {13, t, r}),
          derive_seed(master, {14, t, r}), derive_seed(master, {15, t, r}), derive_seed(master, {16, t, r}),
          derive_seed(master, {17, t, r}), derive_seed(master, {18, t, r})};
}

ResponseModel plan_response_model(const ExperimentPlan& plan) {
  auto cfg = plan.generator.response;
  cfg.seed = derive_seed(plan.master_seed, {11});
  return ResponseModel(cfg);
}

StimulusResponseDataset cell_dataset(const ExperimentPlan& plan, int target, int replicate) {
  if (plan.dataset_path) {
    auto ds = io::read_dataset(*plan.dataset_path);
    require(ds.has_truth() && ds.hidden_truth()->single_target(),
            "plan.dataset must be a single-target dataset with hidden truth");
    return ds;
  }
  const auto seeds = cell_seeds(plan.master_seed, target, replicate);
  const auto z = random_latent(plan.generator.latent_dim, seeds.target);
  const auto model = plan_response_model(plan);
  return generate_dataset({z}, plan.generator.trajectories_per_target, plan.generator.points_per_trajectory, model,
                          seeds.dataset, plan.generator.geometry);
}

ScoreConfig cell_score_config(const ExperimentPlan& plan, const ScoringMethod& method, const CellSeeds& seeds) {
  ScoreConfig cfg;
  cfg.estimator = method.estimator;
  cfg.mode = method.mode;
  cfg.cv = plan.cv;
  cfg.cv.seed = seeds.cv;
  cfg.perm_seed = seeds.perm;
  return cfg;
}

const std::vector<std::size_t>& reference_size_ladder() {
  static const std::vector<std::size_t> ladder = {9234, 9000, 8000, 7000, 6000, 5000, 4000, 3000, 2000, 1000, 500, 100};
  return ladder;
}

std::vector<std::size_t> scaled_size_ladder(std::size_t n, std::size_t min_size) {
  std::vector<std::size_t> out;
  for (auto s : reference_size_ladder()) {
    const auto scaled = static_cast<std::size_t>(std::llround(static_cast<double>(s) * static_cast<double>(n) / 9234.0));
    if (scaled >= min_size && scaled <= n && (out.empty() || out.back() != scaled)) out.push_back(scaled);
  }
  return out;
}

std::vector<SweepRow> run_size_sweep(const ExperimentPlan& plan, unsigned workers) {
  std::vector<SweepRow> rows;
  for (int t = 0; t < plan.targets; ++t) {
    for (int r = 0; r < plan.replicates; ++r) {
      const auto seeds = cell_seeds(plan.master_seed, t, r);
      const auto ds = cell_dataset(plan, t, r);
      const auto& target = ds.hidden_truth()->target();
      const auto hset = build_hypothesis_set(target, plan.hypotheses.L, plan.hypotheses.d_max, seeds.hypotheses,
                                             plan.hypotheses.include_target);
      auto sizes = plan.sizes.empty() ? scaled_size_ladder(ds.size(), static_cast<std::size_t>(plan.cv.n_folds)) : plan.sizes;
      for (auto size : sizes) {
        require(size <= ds.size(), "size sweep: size exceeds the dataset");
        require(size >= static_cast<std::size_t>(plan.cv.n_folds), "size sweep: size below the fold count");
        const auto sub = size == ds.size() ? ds : subsample(ds, size, derive_seed(seeds.subsample, {size}));
        for (const auto& label : plan.estimators) {
          const auto method = parse_scoring_method(label);
          auto result = rank_report(sub, hset, cell_score_config(plan, method, seeds), target, workers, seeds.tie);
          rows.push_back({t, r, size, label, std::move(result.report), std::move(result.details)});
        }
      }
    }
  }
  return rows;
}

Recovery optimize_dataset(const StimulusResponseDataset& ds, const ScoreConfig& cfg, const OptimizationPlan& opt,
                          Seed cma_seed, unsigned workers, Reduction* reduction_out) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::Index kz = opt.latent_components > 0 ? opt.latent_components : default_reduced_dim(ds.latent_dim(), 10);
  Eigen::Index ke = opt.response_components > 0 ? opt.response_components : default_reduced_dim(ds.response_dim(), 20);
  kz = std::min({kz, n, ds.latent_dim()});
  ke = std::min({ke, n, ds.response_dim()});
  const auto reduction = fit_reduction(ds, ke, kz);
  auto cma = CmaConfig::with_bounds(static_cast<int>(kz), opt.bound);
  cma.max_evaluations = opt.budget;
  cma.population_size = opt.population_size;
  cma.sigma0 = opt.sigma0;
  cma.seed = cma_seed;
  auto rec = recover_target(ds, cfg, cma, reduction.responses, reduction.latents, workers);
  if (reduction_out) *reduction_out = reduction;
  return rec;
}

std::vector<AblationRow> run_ablation(const ExperimentPlan& plan, AblationVariant variant, unsigned workers) {
  std::vector<AblationRow> rows;
  for (int t = 0; t < plan.targets; ++t) {
    for (int r = 0; r < plan.replicates; ++r) {
      const auto seeds = cell_seeds(plan.master_seed, t, r);
      const auto ds = cell_dataset(plan, t, r);
      const auto& target = ds.hidden_truth()->target();
      for (const double threshold : plan.ablation_thresholds) {
        std::optional<StimulusResponseDataset> ablated;
        std::string reason;
        try {
          ablated = ablate_near_target(ds, threshold);
          if (ablated->size() < static_cast<std::size_t>(plan.cv.n_folds)) {
            reason = "fewer pairs than folds";
            ablated.reset();
          }
        } catch (const InvalidArgument& e) {
          reason = e.what();
        }
        for (const auto& label : plan.estimators) {
          const auto method = parse_scoring_method(label);
          const auto cfg = cell_score_config(plan, method, seeds);
          if (!ablated) {
            for (const char* condition : {"ablated", "control"}) {
              rows.push_back({t, r, threshold, condition, label, 0, true, reason, std::nullopt, std::nullopt});
            }
            continue;
          }
          const auto n = ablated->size();
          const auto control = n == ds.size() ? ds : subsample(ds, n, derive_seed(seeds.subsample, {n, 0xab1a7eULL}));
          for (const auto& [condition, data] :
               {std::pair<const char*, const StimulusResponseDataset*>{"ablated", &*ablated}, {"control", &control}}) {
            AblationRow row{t, r, threshold, condition, label, n, false, {}, std::nullopt, std::nullopt};
            if (variant == AblationVariant::optimize) {
              const auto rec = optimize_dataset(*data, cfg, plan.optimization, seeds.cma, workers);
              row.final_distance = similarity(target, rec.estimate);
            } else {
              const auto hset = build_hypothesis_set(target, plan.hypotheses.L, plan.hypotheses.d_max,
                                                     seeds.hypotheses, plan.hypotheses.include_target);
              row.rank = rank_report(*data, hset, cfg, target, workers, seeds.tie).report;
            }
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

LabelRecovery recover_labels(const StimulusResponseDataset& ds, const LatentPoint& estimate) {
  LabelRecovery out;
  out.distances = similarity_to_rows(estimate, ds.stimuli());
  if (ds.has_truth()) {
    const auto& truth = ds.hidden_truth()->distances;
    out.rmse = rmse(out.distances, truth);
    const double range = truth.maxCoeff() - truth.minCoeff();
    if (range > 0.0) out.rmse_percent_of_range = 100.0 * *out.rmse / range;
  }
  return out;
}

std::vector<SummaryRow> aggregate(const std::vector<MetricRecord>& records, const std::vector<std::string>& group_by) {
  require(!records.empty(), "aggregate: no records");
  std::vector<SummaryRow> out;
  std::vector<std::map<std::string, std::vector<double>>> values;
  for (const auto& rec : records) {
    std::map<std::string, std::string> keys;
    for (const auto& k : group_by) {
      const auto it = rec.keys.find(k);
      keys[k] = it == rec.keys.end() ? "" : it->second;
    }
    auto pos = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) { return s.keys == keys; });
    std::size_t idx = static_cast<std::size_t>(pos - out.begin());
    if (pos == out.end()) {
      out.push_back({keys, {}});
      values.emplace_back();
    }
    for (const auto& [name, v] : rec.metrics) values[idx][name].push_back(v);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    for (const auto& [name, vs] : values[g]) {
      MetricSummary s;
      s.n = vs.size();
      double sum = 0.0;
      for (double v : vs) sum += v;
      s.mean = sum / static_cast<double>(s.n);
      if (s.n > 1) {
        double ss = 0.0;
        for (double v : vs) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
      }
      out[g].metrics[name] = s;
    }
  }
  return out;
}

MetricRecord to_record(const SweepRow& row) {
  MetricRecord rec;
  rec.keys = {{"estimator", row.estimator},
              {"size", std::to_string(row.size)},
              {"target", std::to_string(row.target)},
              {"replicate", std::to_string(row.replicate)}};
  rec.metrics = {{"pearson_r", row.report.pearson_r},
                 {"target_rank", static_cast<double>(row.report.target_rank)},
                 {"d_top_rank", row.report.d_top_rank}};
  return rec;
}

}  // namespace cursor
