#include "commands.hpp"

#include "cursor/experiments.hpp"
#include "cursor/io.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace cursor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::filesystem::path Context::out_dir() const {
  require(!globals.out.empty(), "--out is required");
  fs::create_directories(globals.out);
  return globals.out;
}

void Context::write_manifest(const std::filesystem::path& dir) const {
  std::ofstream f(dir / "manifest.toml", std::ios::binary);
  if (!f) throw RuntimeError("cannot write manifest in " + dir.string());
  // Keep the global options and the subcommand that ran.
  std::istringstream text(app->config_to_str(true, false));
  std::vector<std::string> idle;
  for (const auto* sub : app->get_subcommands([](const CLI::App* s) { return !s->parsed(); })) {
    idle.push_back(sub->get_name());
  }
  bool skipping = false;
  for (std::string line; std::getline(text, line);) {
    if (!line.empty() && line.front() == '[') {
      skipping = std::find(idle.begin(), idle.end(), line.substr(1, line.find(']') - 1)) != idle.end();
    }
    const bool foreign = std::any_of(idle.begin(), idle.end(),
                                     [&](const std::string& name) { return line.rfind(name + ".", 0) == 0; });
    const bool unset = line.size() > 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0;
    if (!skipping && !foreign && !unset) f << line << "\n";
  }
  for (const auto& msg : failures) f << "# failure: " << msg << "\n";
}

namespace {

std::string num(double v) { return io::format_number(v); }

template <typename T>
std::string str(T v) {
  return std::to_string(v);
}

/// Replaces the recorded value of an option so that the manifest echoes the
/// value actually used.
void pin_option(CLI::Option* opt, const std::string& value) {
  opt->clear();
  opt->add_result(value);
}

StimulusResponseDataset load_dataset(const std::string& path) { return io::read_dataset(path); }

StimulusResponseDataset load_single_target(const std::string& path) {
  auto ds = load_dataset(path);
  require(ds.has_truth() && ds.hidden_truth()->single_target(),
          path + ": a single-target dataset with hidden truth is required");
  return ds;
}

struct CvOptions {
  int folds = 10;
  std::string mode = "random_splits";
  int permutations = 1;

  void add(CLI::App* sub) {
    sub->add_option("--folds", folds, "cross-validation folds")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--cv-mode", mode, "random_splits or kfold")
        ->capture_default_str()
        ->check(CLI::IsMember({"random_splits", "kfold"}));
    sub->add_option("--permutations", permutations, "shuffled controls averaged per score")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  ScoreConfig config(const std::string& estimator, const CellSeeds& seeds) const {
    const auto method = parse_scoring_method(estimator);
    ScoreConfig cfg;
    cfg.estimator = method.estimator;
    cfg.mode = method.mode;
    cfg.cv.n_folds = folds;
    cfg.cv.mode = mode == "kfold" ? CvMode::kfold : CvMode::random_splits;
    cfg.cv.seed = seeds.cv;
    cfg.perm_seed = seeds.perm;
    cfg.n_permutations = permutations;
    return cfg;
  }
};

struct PlanOption {
  std::string path;
  CLI::Option* opt = nullptr;

  void add(CLI::App* sub) {
    opt = sub->add_option("--plan", path, "experiment plan (JSON); runs every cell of the plan")
              ->check(CLI::ExistingFile);
  }
  bool given() const { return !path.empty(); }

  /// Loads the plan, applies the global seed when one was given, creates the
  /// run directory and copies the resolved plan into it.
  std::pair<ExperimentPlan, fs::path> open(Context& ctx) {
    ExperimentPlan plan = given() ? plan_from_json(io::read_json(path)) : ExperimentPlan{};
    auto* seed_opt = ctx.app->get_option("--seed");
    if (seed_opt->count() > 0) plan.master_seed = ctx.globals.seed;
    pin_option(seed_opt, str(plan.master_seed));
    ctx.globals.seed = plan.master_seed;

    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    auto dir = ctx.out_dir() / (plan_hash(plan) + "-" + stamp);
    for (int k = 1; fs::exists(dir); ++k) dir = ctx.out_dir() / (plan_hash(plan) + "-" + stamp + "-" + str(k));
    fs::create_directories(dir);
    const auto copy = fs::absolute(dir / "plan.json");
    io::write_json(to_json(plan), copy);
    if (opt) pin_option(opt, copy.string());
    path = copy.string();
    return {plan, dir};
  }
};

json tagged(json j, const Context& ctx, const std::string& hash = {}) {
  j["master_seed"] = ctx.globals.seed;
  if (!hash.empty()) j["plan_hash"] = hash;
  return j;
}

/// Mean and std of each ranking metric per (estimator, n).
io::Table ranking_table(const std::vector<MetricRecord>& records, Seed master_seed, const std::string& hash) {
  io::Table t;
  t.header = {"estimator",       "n",   "d_top_rank_mean", "d_top_rank_std", "r_mean", "r_std",
              "target_rank_mean", "target_rank_std", "count",          "master_seed", "plan_hash"};
  for (const auto& row : aggregate(records, {"estimator", "n"})) {
    const auto& d = row.metrics.at("d_top_rank");
    const auto& r = row.metrics.at("pearson_r");
    const auto& k = row.metrics.at("target_rank");
    t.rows.push_back({row.keys.at("estimator"), row.keys.at("n"), num(d.mean), num(d.std), num(r.mean), num(r.std),
                      num(k.mean), num(k.std), str(d.n), str(master_seed), hash});
  }
  return t;
}

/// Tidy metric-vs-size table.
io::Table size_table(const std::vector<MetricRecord>& records) {
  io::Table t;
  t.header = {"estimator", "n", "metric", "mean", "std", "count"};
  for (const auto& row : aggregate(records, {"estimator", "n"})) {
    for (const auto& [name, m] : row.metrics) {
      t.rows.push_back({row.keys.at("estimator"), row.keys.at("n"), name, num(m.mean), num(m.std), str(m.n)});
    }
  }
  return t;
}

MetricRecord rank_record(const std::string& estimator, std::size_t n, const RankReport& r) {
  return {{{"estimator", estimator}, {"n", str(n)}},
          {{"pearson_r", r.pearson_r}, {"target_rank", static_cast<double>(r.target_rank)}, {"d_top_rank", r.d_top_rank}}};
}

/// Distance-vs-evaluation rows; best-so-far follows the best score.
void append_trace_rows(io::Table& t, const std::vector<std::string>& prefix, const OptimizationTrace& trace) {
  double best = 0.0;
  bool seen = false;
  std::optional<double> best_distance;
  for (const auto& e : trace.evaluations) {
    if (!e.non_finite && (!seen || e.score > best)) {
      best = e.score;
      best_distance = e.distance_to_target;
      seen = true;
    }
    auto row = prefix;
    row.push_back(str(e.index));
    row.push_back(e.non_finite ? "nan" : num(e.score));
    row.push_back(num(best));
    row.push_back(e.distance_to_target ? num(*e.distance_to_target) : "");
    row.push_back(best_distance ? num(*best_distance) : "");
    t.rows.push_back(std::move(row));
  }
}

std::vector<std::string> trace_header(std::vector<std::string> prefix) {
  for (const char* c : {"evaluation", "score", "best_score", "distance", "best_distance"}) prefix.emplace_back(c);
  return prefix;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      require(used == item.size() || item.find_first_not_of(" \t", used) == std::string::npos, "bad number");
    } catch (const std::exception&) {
      throw InvalidArgument("--point: cannot parse '" + item + "'");
    }
  }
  require(!v.empty(), "--point: empty");
  return v;
}

LatentPoint to_point(const std::vector<double>& v) {
  return LatentPoint(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

OptimizationPlan optimization_flags(CLI::App* sub, OptimizationPlan& o) {
  sub->add_option("--budget", o.budget, "objective evaluations")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--bounds", o.bound, "half-width of the search box per reduced dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--latent-components", o.latent_components, "reduced latent dimension, 0 for the default")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--response-components", o.response_components, "reduced response dimension, 0 for the default")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--popsize", o.population_size, "CMA-ES population, 0 for the default")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--sigma0", o.sigma0, "initial step size, 0 for the default")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  return o;
}

}  // namespace

// ---------------------------------------------------------------- generate

Runner add_generate(CLI::App& app, Context&) {
  struct Opts {
    int targets = 1;
    int trajectories = 10;
    int points = 300;
    int latent_dim = 32;
    ResponseModelConfig response;
    std::string link = "linear";
    GeneratorGeometry geometry;
    std::string spacing = "logarithmic";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("generate", "simulate a stimulus-response dataset")->configurable();
  sub->add_option("--targets", o->targets, "hidden targets")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--trajectories", o->trajectories, "trajectories per target")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--points", o->points, "points per trajectory")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--latent-dim", o->latent_dim)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--response-dim", o->response.response_dim)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--signal-gain", o->response.signal_gain)->capture_default_str();
  sub->add_option("--signal-rank", o->response.signal_rank)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--noise", o->response.noise_sigma)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--nuisance-rank", o->response.nuisance_rank)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--nuisance-gain", o->response.nuisance_gain)->capture_default_str();
  sub->add_option("--link", o->link)->capture_default_str()->check(CLI::IsMember({"linear", "saturating"}));
  sub->add_option("--tau", o->response.tau)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--spacing", o->spacing)->capture_default_str()->check(CLI::IsMember({"logarithmic", "uniform"}));
  sub->add_option("--d-min", o->geometry.d_min)->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--d-max", o->geometry.d_max)->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--log-floor", o->geometry.log_floor)->capture_default_str()->check(CLI::PositiveNumber);

  return [o](Context& ctx) {
    const Seed seed = ctx.globals.seed;
    auto cfg = o->response;
    cfg.link = o->link == "linear" ? Link::linear : Link::saturating;
    cfg.seed = derive_seed(seed, {11});
    auto geometry = o->geometry;
    geometry.spacing = o->spacing == "logarithmic" ? Spacing::logarithmic : Spacing::uniform;

    // Target t uses the same seeds as cell t of a plan with this master seed.
    std::vector<LatentPoint> targets;
    for (int t = 0; t < o->targets; ++t) targets.push_back(random_latent(o->latent_dim, cell_seeds(seed, t, 0).target));
    auto ds = generate_dataset(targets, o->trajectories, o->points, ResponseModel(cfg), cell_seeds(seed, 0, 0).dataset,
                               geometry);
    auto prov = ds.provenance();
    prov["seed"] = seed;
    ds = ds.with_provenance(prov);

    const auto dir = ctx.out_dir();
    const auto file = dir / (ctx.globals.format == "bin" ? "dataset.bin" : "dataset.csv");
    io::write_dataset(ds, file);
    ctx.write_manifest(dir);
    std::cout << file.string() << ": " << ds.size() << " pairs\n";
  };
}

// ---------------------------------------------------------------- score

Runner add_score(CLI::App& app, Context&) {
  struct Opts {
    std::string data;
    std::string estimator = "ols";
    std::string point;
    double distance = -1.0;
    CvOptions cv;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("score", "score one hypothesis")->configurable();
  sub->add_option("--data", o->data, "dataset file")->required()->check(CLI::ExistingFile);
  sub->add_option("--estimator", o->estimator, "ols, ridge:<lambda>, dummy; prefix s- for the shuffled control")
      ->capture_default_str();
  auto* point = sub->add_option("--point", o->point, "hypothesis coordinates, comma separated");
  auto* dist = sub->add_option("--distance", o->distance, "hypothesis at this distance from the hidden target")
                   ->check(CLI::NonNegativeNumber);
  point->excludes(dist);
  o->cv.add(sub);

  return [o](Context& ctx) {
    const auto ds = load_dataset(o->data);
    const auto seeds = cell_seeds(ctx.globals.seed, 0, 0);
    LatentPoint h;
    if (!o->point.empty()) {
      h = to_point(parse_point(o->point));
    } else {
      require(ds.has_truth() && ds.hidden_truth()->single_target(),
              "score: --point is required for datasets without a single hidden target");
      const auto& z = ds.hidden_truth()->target();
      h = o->distance > 0.0 ? point_at_distance(z, o->distance, derive_seed(ctx.globals.seed, {20})) : z;
    }
    const auto cfg = o->cv.config(o->estimator, seeds);
    const auto report =
        cfg.mode == ScoreMode::shuffled_control ? score_shuffled_control(ds, h, cfg) : score(ds, h, cfg);
    auto j = tagged(to_json(report), ctx);
    j["estimator"] = o->estimator;
    j["config"] = to_json(cfg);
    if (ds.has_truth() && ds.hidden_truth()->single_target()) {
      j["distance_to_target"] = similarity(h, ds.hidden_truth()->target());
    }
    const auto dir = ctx.out_dir();
    io::write_json(j, dir / "score.json");
    ctx.write_manifest(dir);
    std::cout << "score " << num(report.score) << "\n";
  };
}

// ---------------------------------------------------------------- rank

Runner add_rank(CLI::App& app, Context&) {
  struct Opts {
    std::string data;
    std::vector<std::string> estimators;
    int L = 60;
    double d_max = kMaxStimulusDistance;
    bool exclude_target = false;
    CvOptions cv;
    PlanOption plan;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("rank", "rank a hypothesis set around the hidden target")->configurable();
  auto* data = sub->add_option("--data", o->data, "dataset file with a hidden target")->check(CLI::ExistingFile);
  sub->add_option("--estimator", o->estimators, "one or more scoring methods (default ols)");
  sub->add_option("--L", o->L, "hypotheses")->capture_default_str()->check(CLI::Range(2, 1000000));
  sub->add_option("--d-max", o->d_max, "largest hypothesis distance")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_flag("--exclude-target", o->exclude_target, "leave the target out of the set");
  o->cv.add(sub);
  o->plan.add(sub);
  o->plan.opt->excludes(data);

  return [o](Context& ctx) {
    if (o->plan.given()) {
      auto [plan, dir] = o->plan.open(ctx);
      const auto hash = plan_hash(plan);
      const auto rows = run_size_sweep(plan, ctx.globals.workers);
      std::vector<json> lines;
      std::vector<MetricRecord> records;
      io::Table score_rows;
      score_rows.header = {"target", "replicate", "n", "estimator", "hypothesis", "distance", "score"};
      for (const auto& r : rows) {
        auto j = tagged(to_json(r.report), ctx, hash);
        j["target"] = r.target;
        j["replicate"] = r.replicate;
        j["n"] = r.size;
        j["estimator"] = r.estimator;
        lines.push_back(std::move(j));
        records.push_back(rank_record(r.estimator, r.size, r.report));
        for (std::size_t l = 0; l < r.report.scores.size(); ++l) {
          score_rows.rows.push_back({str(r.target), str(r.replicate), str(r.size), r.estimator, str(l),
                               num(r.report.distances[l]), num(r.report.scores[l])});
        }
      }
      io::write_jsonl(lines, dir / "sweep.jsonl");
      io::write_csv(ranking_table(records, plan.master_seed, hash), dir / "ranking.csv");
      io::write_csv(size_table(records), dir / "size_sweep.csv");
      io::write_csv(score_rows, dir / "hypothesis_scores.csv");
      ctx.write_manifest(dir);
      std::cout << dir.string() << "\n";
      return;
    }
    require(!o->data.empty(), "rank: --data or --plan is required");
    if (o->estimators.empty()) o->estimators = {"ols"};
    const auto ds = load_single_target(o->data);
    const auto seeds = cell_seeds(ctx.globals.seed, 0, 0);
    const auto& z = ds.hidden_truth()->target();
    const auto hset = build_hypothesis_set(z, o->L, o->d_max, seeds.hypotheses, !o->exclude_target);

    io::Table table;
    table.header = {"estimator", "n", "L", "pearson_r", "target_rank", "d_top_rank", "top_index", "master_seed"};
    io::Table score_rows;
    score_rows.header = {"estimator", "hypothesis", "distance", "score"};
    std::vector<json> lines;
    std::vector<json> details;
    for (const auto& label : o->estimators) {
      const auto cfg = o->cv.config(label, seeds);
      RankResult result;
      try {
        result = rank_report(ds, hset, cfg, z, ctx.globals.workers, seeds.tie);
      } catch (const RuntimeError& e) {
        ctx.failures.push_back("rank " + label + ": " + e.what());
        continue;
      }
      const auto& r = result.report;
      table.rows.push_back({label, str(ds.size()), str(o->L), num(r.pearson_r), str(r.target_rank), num(r.d_top_rank),
                            str(r.top_index), str(ctx.globals.seed)});
      for (std::size_t l = 0; l < r.scores.size(); ++l) {
        score_rows.rows.push_back({label, str(l), num(r.distances[l]), num(r.scores[l])});
      }
      auto j = tagged(to_json(r), ctx);
      j["estimator"] = label;
      j["n"] = ds.size();
      j["config"] = to_json(cfg);
      lines.push_back(std::move(j));
      for (std::size_t l = 0; l < result.details.size(); ++l) {
        auto d = to_json(result.details[l]);
        d["estimator"] = label;
        d["hypothesis_index"] = l;
        details.push_back(std::move(d));
      }
    }
    const auto dir = ctx.out_dir();
    io::write_csv(table, dir / "rank.csv");
    io::write_csv(score_rows, dir / "scores.csv");
    io::write_jsonl(lines, dir / "rank.jsonl");
    io::write_jsonl(details, dir / "details.jsonl");
    ctx.write_manifest(dir);
    for (const auto& row : table.rows) std::cout << row[0] << " R=" << row[3] << " rank=" << row[4] << " d=" << row[5] << "\n";
    if (!ctx.failures.empty()) throw RuntimeError(std::to_string(ctx.failures.size()) + " estimator(s) failed");
  };
}

// ---------------------------------------------------------------- optimize

Runner add_optimize(CLI::App& app, Context&) {
  struct Opts {
    std::string data;
    std::string estimator = "ols";
    OptimizationPlan opt;
    CvOptions cv;
    PlanOption plan;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("optimize", "search the reduced latent space for the best-scoring point")->configurable();
  auto* data = sub->add_option("--data", o->data, "dataset file")->check(CLI::ExistingFile);
  sub->add_option("--estimator", o->estimator)->capture_default_str();
  optimization_flags(sub, o->opt);
  o->cv.add(sub);
  o->plan.add(sub);
  o->plan.opt->excludes(data);

  return [o](Context& ctx) {
    if (o->plan.given()) {
      auto [plan, dir] = o->plan.open(ctx);
      const auto hash = plan_hash(plan);
      std::vector<json> lines;
      io::Table trace_rows;
      trace_rows.header = trace_header({"target", "replicate", "estimator"});
      for (int t = 0; t < plan.targets; ++t) {
        for (int r = 0; r < plan.replicates; ++r) {
          const auto seeds = cell_seeds(plan.master_seed, t, r);
          const auto ds = cell_dataset(plan, t, r);
          for (const auto& label : plan.estimators) {
            const auto cfg = cell_score_config(plan, parse_scoring_method(label), seeds);
            const auto rec = optimize_dataset(ds, cfg, plan.optimization, seeds.cma, ctx.globals.workers);
            const auto labels = recover_labels(ds, rec.estimate);
            json j = {{"target", t},
                      {"replicate", r},
                      {"estimator", label},
                      {"evaluations", rec.trace.evaluations.size()},
                      {"best_score", rec.trace.best().score},
                      {"final_distance", similarity(ds.hidden_truth()->target(), rec.estimate)},
                      {"label_rmse", *labels.rmse},
                      {"label_rmse_percent", labels.rmse_percent_of_range.value_or(0.0)}};
            lines.push_back(tagged(j, ctx, hash));
            append_trace_rows(trace_rows, {str(t), str(r), label}, rec.trace);
          }
        }
      }
      io::write_jsonl(lines, dir / "optimize.jsonl");
      io::write_csv(trace_rows, dir / "traces.csv");
      ctx.write_manifest(dir);
      std::cout << dir.string() << "\n";
      return;
    }
    require(!o->data.empty(), "optimize: --data or --plan is required");
    const auto ds = load_dataset(o->data);
    const auto seeds = cell_seeds(ctx.globals.seed, 0, 0);
    const auto cfg = o->cv.config(o->estimator, seeds);
    Reduction reduction;
    const auto rec = optimize_dataset(ds, cfg, o->opt, seeds.cma, ctx.globals.workers, &reduction);

    const auto dir = ctx.out_dir();
    std::vector<json> trace;
    for (const auto& e : rec.trace.evaluations) trace.push_back(to_json(e));
    io::write_jsonl(trace, dir / "trace.jsonl");
    io::Table trace_rows;
    trace_rows.header = trace_header({});
    append_trace_rows(trace_rows, {}, rec.trace);
    io::write_csv(trace_rows, dir / "traces.csv");
    io::write_pca_binary(reduction.responses, dir / "pca_responses.bin");
    io::write_pca_binary(reduction.latents, dir / "pca_latents.bin");

    const auto& best = rec.trace.best();
    json summary = {{"estimator", o->estimator},
                    {"config", to_json(cfg)},
                    {"evaluations", rec.trace.evaluations.size()},
                    {"generations", rec.trace.generations},
                    {"stop_reason", rec.trace.stop_reason},
                    {"best_index", rec.trace.best_index},
                    {"best_score", best.score},
                    {"best_point", std::vector<double>(best.point.begin(), best.point.end())},
                    {"estimate", std::vector<double>(rec.estimate.coords().begin(), rec.estimate.coords().end())}};
    if (ds.has_truth() && ds.hidden_truth()->single_target()) {
      summary["distance_to_target"] = similarity(ds.hidden_truth()->target(), rec.estimate);
    }
    io::write_json(tagged(summary, ctx), dir / "summary.json");
    ctx.write_manifest(dir);
    std::cout << "best score " << num(best.score);
    if (summary.contains("distance_to_target")) std::cout << ", distance " << num(summary["distance_to_target"]);
    std::cout << "\n";
  };
}

// ---------------------------------------------------------------- ablate

Runner add_ablate(CLI::App& app, Context&) {
  struct Opts {
    std::string data;
    std::string variant = "optimize";
    std::vector<double> thresholds;
    std::vector<std::string> estimators;
    PlanOption plan;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("ablate", "near-target ablation against size-matched controls")->configurable();
  auto* data = sub->add_option("--data", o->data, "single-target dataset instead of generated cells")
                   ->check(CLI::ExistingFile);
  sub->add_option("--variant", o->variant)->capture_default_str()->check(CLI::IsMember({"optimize", "rank"}));
  sub->add_option("--thresholds", o->thresholds, "ablation thresholds, overriding the plan");
  sub->add_option("--estimator", o->estimators, "scoring methods, overriding the plan");
  o->plan.add(sub);
  o->plan.opt->excludes(data);

  return [o](Context& ctx) {
    ExperimentPlan plan;
    fs::path dir;
    if (o->data.empty()) {
      std::tie(plan, dir) = o->plan.open(ctx);
    } else {
      plan.dataset_path = o->data;
      plan.targets = 1;
      plan.replicates = 1;
      plan.master_seed = ctx.globals.seed;
      dir = ctx.out_dir();
    }
    if (!o->thresholds.empty()) plan.ablation_thresholds = o->thresholds;
    if (!o->estimators.empty()) plan.estimators = o->estimators;
    for (auto t : plan.ablation_thresholds) require(t >= 0.0, "ablate: thresholds must be >= 0");
    for (const auto& e : plan.estimators) parse_scoring_method(e);
    const auto hash = plan_hash(plan);
    const auto variant = o->variant == "rank" ? AblationVariant::rank : AblationVariant::optimize;
    const auto rows = run_ablation(plan, variant, ctx.globals.workers);

    io::Table table;
    table.header = {"target",     "replicate",   "threshold", "condition", "estimator", "n",
                    "skipped",    "final_distance", "pearson_r", "target_rank", "d_top_rank", "master_seed",
                    "plan_hash"};
    std::vector<json> lines;
    for (const auto& r : rows) {
      table.rows.push_back({str(r.target), str(r.replicate), num(r.threshold), r.condition, r.estimator, str(r.n),
                            r.skipped ? "1" : "0", r.final_distance ? num(*r.final_distance) : "",
                            r.rank ? num(r.rank->pearson_r) : "", r.rank ? str(r.rank->target_rank) : "",
                            r.rank ? num(r.rank->d_top_rank) : "", str(plan.master_seed), hash});
      json j = {{"target", r.target},   {"replicate", r.replicate}, {"threshold", r.threshold},
                {"condition", r.condition}, {"estimator", r.estimator}, {"n", r.n},
                {"skipped", r.skipped}};
      if (r.skipped) {
        j["skip_reason"] = r.skip_reason;
        ctx.failures.push_back("threshold " + num(r.threshold) + " skipped: " + r.skip_reason);
      }
      if (r.final_distance) j["final_distance"] = *r.final_distance;
      if (r.rank) j["rank"] = to_json(*r.rank);
      lines.push_back(tagged(j, ctx, hash));
    }
    io::write_csv(table, dir / "ablation.csv");
    io::write_jsonl(lines, dir / "ablation.jsonl");
    ctx.write_manifest(dir);
    std::cout << dir.string() << "\n";
  };
}

// ---------------------------------------------------------------- recover

Runner add_recover(CLI::App& app, Context&) {
  struct Opts {
    std::string data;
    std::string estimate;
    std::string point;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("recover", "reconstruct distance labels from a recovered target")->configurable();
  sub->add_option("--data", o->data, "dataset file")->required()->check(CLI::ExistingFile);
  auto* est = sub->add_option("--estimate", o->estimate, "summary.json written by optimize")->check(CLI::ExistingFile);
  auto* point = sub->add_option("--point", o->point, "recovered coordinates, comma separated");
  est->excludes(point);

  return [o](Context& ctx) {
    require(!o->estimate.empty() || !o->point.empty(), "recover: --estimate or --point is required");
    const auto ds = load_dataset(o->data);
    std::vector<double> coords;
    if (!o->estimate.empty()) {
      const auto j = io::read_json(o->estimate);
      require(j.contains("estimate"), o->estimate + ": no 'estimate' field");
      coords = j.at("estimate").get<std::vector<double>>();
    } else {
      coords = parse_point(o->point);
    }
    require(static_cast<Eigen::Index>(coords.size()) == ds.latent_dim(), "recover: estimate dimension mismatch");
    const auto rec = recover_labels(ds, to_point(coords));

    io::Table labels;
    labels.header = {"index", "distance"};
    if (ds.has_truth()) labels.header.push_back("true_distance");
    for (Eigen::Index i = 0; i < rec.distances.size(); ++i) {
      labels.rows.push_back({str(i), num(rec.distances[i])});
      if (ds.has_truth()) labels.rows.back().push_back(num(ds.hidden_truth()->distances[i]));
    }
    json j = tagged(json::object(), ctx);
    j["n"] = ds.size();
    if (rec.rmse) j["rmse"] = *rec.rmse;
    if (rec.rmse_percent_of_range) j["rmse_percent_of_range"] = *rec.rmse_percent_of_range;
    const auto dir = ctx.out_dir();
    io::write_csv(labels, dir / "labels.csv");
    io::write_json(j, dir / "recovery.json");
    ctx.write_manifest(dir);
    if (rec.rmse) std::cout << "rmse " << num(*rec.rmse) << "\n";
  };
}

// ---------------------------------------------------------------- report

Runner add_report(CLI::App& app, Context&) {
  auto runs = std::make_shared<std::vector<std::string>>();
  auto* sub = app.add_subcommand("report", "merge run directories into tables and figure data")->configurable();
  sub->add_option("--runs", *runs, "run directories")->required()->check(CLI::ExistingDirectory);

  return [runs](Context& ctx) {
    std::vector<MetricRecord> records;
    io::Table score_rows;
    score_rows.header = {"run", "target", "replicate", "n", "estimator", "hypothesis", "distance", "score"};
    io::Table trace_rows;
    trace_rows.header = {"run", "target", "replicate", "estimator", "evaluation", "best_distance"};
    io::Table opt;
    opt.header = {"run", "target", "replicate", "estimator", "final_distance", "label_rmse"};
    bool any = false;
    for (const auto& run : *runs) {
      const fs::path dir = run;
      for (const char* name : {"rank.jsonl", "sweep.jsonl"}) {
        if (!fs::exists(dir / name)) continue;
        any = true;
        for (const auto& j : io::read_jsonl(dir / name)) {
          const auto est = j.at("estimator").get<std::string>();
          const auto n = j.at("n").get<std::size_t>();
          RankReport r;
          r.pearson_r = j.at("pearson_r").get<double>();
          r.target_rank = j.at("target_rank").get<int>();
          r.d_top_rank = j.at("d_top_rank").get<double>();
          records.push_back(rank_record(est, n, r));
          const auto scores = j.at("scores").get<std::vector<double>>();
          const auto dists = j.at("distances").get<std::vector<double>>();
          const auto t = str(j.value("target", 0));
          const auto rep = str(j.value("replicate", 0));
          for (std::size_t l = 0; l < scores.size(); ++l) {
            score_rows.rows.push_back({run, t, rep, str(n), est, str(l), num(dists[l]), num(scores[l])});
          }
        }
      }
      if (fs::exists(dir / "trace.jsonl")) {
        any = true;
        const auto summary = fs::exists(dir / "summary.json") ? io::read_json(dir / "summary.json") : json::object();
        const auto est = summary.value("estimator", std::string());
        double best = 0.0;
        std::optional<double> best_distance;
        bool first = true;
        for (const auto& e : io::read_jsonl(dir / "trace.jsonl")) {
          if (!e.at("score").is_null() && (first || e.at("score").get<double>() > best)) {
            best = e.at("score").get<double>();
            if (e.contains("distance_to_target")) best_distance = e.at("distance_to_target").get<double>();
            first = false;
          }
          trace_rows.rows.push_back({run, "0", "0", est, str(e.at("index").get<int>()), best_distance ? num(*best_distance) : ""});
        }
        if (summary.contains("distance_to_target")) {
          opt.rows.push_back({run, "0", "0", est, num(summary.at("distance_to_target").get<double>()), ""});
        }
      }
      if (fs::exists(dir / "optimize.jsonl")) {
        any = true;
        for (const auto& j : io::read_jsonl(dir / "optimize.jsonl")) {
          opt.rows.push_back({run, str(j.at("target").get<int>()), str(j.at("replicate").get<int>()),
                              j.at("estimator").get<std::string>(), num(j.at("final_distance").get<double>()),
                              num(j.at("label_rmse").get<double>())});
        }
      }
      if (fs::exists(dir / "traces.csv") && fs::exists(dir / "optimize.jsonl")) {
        const auto t = io::read_csv(dir / "traces.csv");
        for (const auto& row : t.rows) trace_rows.rows.push_back({run, row[0], row[1], row[2], row[3], row[7]});
      }
    }
    require(any, "report: no rank, sweep or optimization results in the given runs");
    const auto dir = ctx.out_dir();
    if (!records.empty()) {
      io::write_csv(ranking_table(records, ctx.globals.seed, ""), dir / "ranking.csv");
      io::write_csv(size_table(records), dir / "size_sweep.csv");
      io::write_csv(score_rows, dir / "hypothesis_scores.csv");
    }
    if (!trace_rows.rows.empty()) io::write_csv(trace_rows, dir / "traces.csv");
    if (!opt.rows.empty()) io::write_csv(opt, dir / "optimization.csv");
    ctx.write_manifest(dir);
    std::cout << dir.string() << "\n";
  };
}

// ---------------------------------------------------------------- main

int run(int argc, char** argv) {
  CLI::App app{"cursor: unsupervised target recovery from unlabeled responses"};
  app.name("cursor");
  Context ctx;
  ctx.app = &app;
  ctx.globals.workers = default_worker_count();

  app.set_config("--config", "", "re-run from a manifest written by an earlier run");
  app.add_option("--seed", ctx.globals.seed, "master seed")->capture_default_str();
  app.add_option("--workers", ctx.globals.workers, "worker threads (CURSOR_WORKERS)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("-o,--out", ctx.globals.out, "output directory")->required();
  app.add_option("--format", ctx.globals.format, "dataset format")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "bin"}));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::vector<std::pair<CLI::App*, Runner>> commands;
  for (auto add : {add_generate, add_score, add_rank, add_optimize, add_ablate, add_recover, add_report}) {
    auto runner = add(app, ctx);
    commands.emplace_back(app.get_subcommands({}).back(), std::move(runner));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    for (auto& [sub, runner] : commands) {
      if (sub->parsed()) runner(ctx);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace cursor::cli
