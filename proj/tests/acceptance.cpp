// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "cursor/experiments.hpp"
#include "cursor/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace cursor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

Outcome dummy_identity() {
  Stopwatch sw;
  int exact = 0;
  for (int i = 0; i < 50; ++i) {
    Rng rng(derive_seed(1001, {static_cast<std::uint64_t>(i)}));
    const int dz = 4 + i % 7;
    const int de = 6 + i % 11;
    const int n = 40 + 7 * i;
    ResponseModelConfig cfg;
    cfg.response_dim = de;
    cfg.nuisance_rank = 2;
    cfg.noise_sigma = 0.1 + 0.2 * (i % 5);
    cfg.seed = rng();
    const auto target = random_latent(dz, rng());
    const auto ds = generate_dataset({target}, 4, n / 4, ResponseModel(cfg), rng(), {});
    ScoreConfig sc;
    sc.estimator = EstimatorSpec::dummy();
    sc.cv.seed = rng();
    sc.perm_seed = rng();
    if (i % 2) sc.cv.mode = CvMode::kfold;
    const auto h = random_latent(dz, rng());
    if (score(ds, h, sc).score == 1.0) ++exact;
  }
  const double t = sw.seconds();
  return {exact == 50 && t < 10.0, std::to_string(exact) + "/50 exactly 1.0, " + fmt("%.2f s", t)};
}

Outcome ols_oracle() {
  double worst_w = 0.0, worst_r = 0.0;
  for (int p = 0; p < 100; ++p) {
    Rng rng(derive_seed(2002, {static_cast<std::uint64_t>(p)}));
    const int d = 1 + static_cast<int>(rng() % 20);
    const int n = d + 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(200 - d - 1));
    const Matrix x = gaussian(n, d, rng, 1.0 + static_cast<double>(p % 4));
    const Vector y = x * gaussian(d, 1, rng).col(0) + gaussian(n, 1, rng).col(0);
    const auto est = fit(EstimatorSpec::ols(), x, y);

    // Pseudoinverse of the standardized design.
    Eigen::MatrixXd xs = x.rowwise() - x.colwise().mean();
    for (int j = 0; j < d; ++j) xs.col(j) /= std::sqrt(xs.col(j).squaredNorm() / (n - 1));
    const Vector yc = y.array() - y.mean();
    const Vector ys = yc / std::sqrt(yc.squaredNorm() / (n - 1));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector w = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() *
                     svd.matrixU().transpose() * ys;
    worst_w = std::max(worst_w, (est.weights - w).cwiseAbs().maxCoeff());
    worst_r = std::max(worst_r, (xs.transpose() * (ys - xs * est.weights)).cwiseAbs().maxCoeff());
  }
  return {worst_w < 1e-8 && worst_r < 1e-8,
          "max weight deviation " + fmt("%.2e", worst_w) + ", max |X'r| " + fmt("%.2e", worst_r)};
}

Outcome pca_suite() {
  double ortho = 0.0, round_trip = 0.0, variance = 0.0;
  bool monotone = true;
  for (int p = 0; p < 20; ++p) {
    Rng rng(derive_seed(3003, {static_cast<std::uint64_t>(p)}));
    const int d = 2 + p % 9;
    const int n = 30 + 5 * p;
    Matrix x = gaussian(n, d, rng);
    for (int j = 0; j < d; ++j) x.col(j) *= 1.0 + 0.8 * (d - j);
    const auto full = pca_fit(x, d);
    ortho = std::max(ortho, (full.components * full.components.transpose() - Eigen::MatrixXd::Identity(d, d))
                                .cwiseAbs()
                                .maxCoeff());
    for (int i = 0; i < 5; ++i) {
      const Vector v = gaussian(d, 1, rng, 3.0).col(0);
      round_trip = std::max(round_trip, (pca_inverse(full, pca_transform(full, v)) - v).cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.transpose() * c / (n - 1));
    for (int k = 0; k < d; ++k) {
      variance = std::max(variance, std::abs(full.explained_variance[k] - eig.eigenvalues()[d - 1 - k]));
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= d; ++k) {
      const auto m = pca_fit(x, k);
      const Matrix rec = (pca_transform_rows(m, x) * m.components).rowwise() + m.mean.transpose();
      const double err = (x - rec).squaredNorm();
      if (err > prev + 1e-9) monotone = false;
      prev = err;
    }
  }
  return {ortho < 1e-9 && round_trip < 1e-9 && variance < 1e-8 && monotone,
          "orthonormality " + fmt("%.1e", ortho) + ", round trip " + fmt("%.1e", round_trip) + ", variances " +
              fmt("%.1e", variance) + (monotone ? ", error monotone in k" : ", error NOT monotone")};
}

Outcome cmaes_convergence() {
  Stopwatch sw;
  int sphere = 0, rosen = 0;
  for (Seed s = 0; s < 10; ++s) {
    Rng rng(derive_seed(4004, {s}));
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    auto cfg = CmaConfig::with_bounds(10, 15.0);
    Vector start(10);
    for (auto& v : start) v = u(rng);
    cfg.initial_mean = start;
    cfg.max_evaluations = 5000;
    cfg.min_sigma = 1e-14;
    cfg.seed = s;
    const auto tr = cmaes_maximize([](const Vector& x) { return -x.squaredNorm(); }, cfg);
    if (tr.best().point.norm() < 1e-6) ++sphere;

    auto rc = CmaConfig::with_bounds(2, 5.0);
    rc.initial_mean = Vector(start.head(2) / 3.0);
    rc.max_evaluations = 20000;
    rc.min_sigma = 1e-14;
    rc.seed = s;
    const auto rt = cmaes_maximize(
        [](const Vector& x) { return -(100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2)); }, rc);
    if ((rt.best().point - Vector::Ones(2)).norm() < 1e-3) ++rosen;
  }
  const double t = sw.seconds();
  return {sphere == 10 && rosen >= 9 && t < 60.0, "sphere " + std::to_string(sphere) + "/10, rosenbrock " +
                                                      std::to_string(rosen) + "/10, " + fmt("%.2f s", t)};
}

Outcome random_baselines() {
  Stopwatch sw;
  const int trials = 10000;
  const LatentPoint target = random_latent(32, 5005);
  double rank_sum = 0.0, dtop_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto ts = static_cast<std::uint64_t>(t);
    Rng rng(derive_seed(5005, {ts}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(60);
    for (auto& s : scores) s = u(rng);
    rank_sum += target_rank(scores, ts % 60, derive_seed(5006, {ts}));

    const auto set = build_hypothesis_set(target, 60, kMaxStimulusDistance, derive_seed(5007, {ts}), false);
    std::vector<double> dist;
    for (const auto& h : set.hypotheses) dist.push_back(similarity(target, h));
    dtop_sum += rank_scores(scores, dist, std::nullopt, derive_seed(5008, {ts})).d_top_rank;
  }
  const double rank = rank_sum / trials;
  const double dtop = dtop_sum / trials;
  const double t = sw.seconds();
  return {std::abs(rank - 30.5) <= 0.5 && std::abs(dtop - 23.08) <= 0.3 && t < 30.0,
          "mean rank " + fmt("%.3f", rank) + ", mean top-rank distance " + fmt("%.3f", dtop) + ", " +
              fmt("%.2f s", t)};
}

// ---------------------------------------------------------------------------
// Criteria on the reference configuration share one set of ranking results.

struct RankingSummary {
  std::vector<double> r, rank, dtop;
};

struct Reference {
  ExperimentPlan plan;
  std::map<std::string, RankingSummary> ranking;
  std::vector<double> ols_dtop;  // per target
  double ranking_seconds = 0.0;
  std::map<std::string, std::vector<LatentPoint>> estimates;
  std::vector<double> dummy_improvement;
  double optimize_seconds = 0.0;
};

Reference& reference() {
  static Reference ref = [] {
    Reference r;
    r.plan = plan_from_json(io::read_json(CURSOR_SOURCE_DIR "/config/reference.json"));
    return r;
  }();
  return ref;
}

Outcome synthetic_ranking() {
  auto& ref = reference();
  Stopwatch sw;
  const auto rows = run_size_sweep(ref.plan, 1);
  ref.ranking_seconds = sw.seconds();
  ref.ols_dtop.assign(static_cast<std::size_t>(ref.plan.targets), 0.0);
  for (const auto& row : rows) {
    auto& s = ref.ranking[row.estimator];
    s.r.push_back(row.report.pearson_r);
    s.rank.push_back(row.report.target_rank);
    s.dtop.push_back(row.report.d_top_rank);
    if (row.estimator == "ols") ref.ols_dtop[static_cast<std::size_t>(row.target)] = row.report.d_top_rank;
  }
  const double d_max = ref.plan.hypotheses.d_max;
  const auto& ols = ref.ranking.at("ols");
  bool pass = mean(ols.r) <= -0.6 && mean(ols.rank) <= 10.0 && mean(ols.dtop) <= 0.2 * d_max;
  std::string detail = "ols R " + fmt("%.3f", mean(ols.r)) + " rank " + fmt("%.2f", mean(ols.rank)) + " d_top " +
                       fmt("%.2f", mean(ols.dtop));
  for (const char* control : {"s-ols", "dummy"}) {
    const auto& c = ref.ranking.at(control);
    const double rank = mean(c.rank);
    pass = pass && std::abs(mean(c.r)) <= 0.15 && rank >= 24.0 && rank <= 37.0;
    detail += std::string("; ") + control + " R " + fmt("%.3f", mean(c.r)) + " rank " + fmt("%.2f", rank);
  }
  pass = pass && ref.ranking_seconds < 600.0;
  return {pass, detail + "; " + fmt("%.0f s", ref.ranking_seconds)};
}

void run_optimizations() {
  auto& ref = reference();
  if (!ref.estimates.empty()) return;
  Stopwatch sw;
  const auto& plan = ref.plan;
  for (int t = 0; t < plan.targets; ++t) {
    const auto seeds = cell_seeds(plan.master_seed, t, 0);
    const auto ds = cell_dataset(plan, t, 0);
    const auto& target = ds.hidden_truth()->target();
    for (const char* label : {"ols", "s-ols", "dummy"}) {
      const auto cfg = cell_score_config(plan, parse_scoring_method(label), seeds);
      const auto rec = optimize_dataset(ds, cfg, plan.optimization, seeds.cma, default_worker_count());
      ref.estimates[label].push_back(rec.estimate);
      if (std::string(label) == "dummy") {
        // Distance of the incumbent (best-scoring) point, first vs last evaluation.
        const auto& evs = rec.trace.evaluations;
        const double first = *evs.front().distance_to_target;
        const double last = similarity(target, rec.estimate);
        ref.dummy_improvement.push_back((first - last) / first);
      }
    }
  }
  ref.optimize_seconds = sw.seconds();
}

Outcome synthetic_optimization() {
  auto& ref = reference();
  run_optimizations();
  const auto& plan = ref.plan;
  int wins = 0;
  std::vector<double> dist;
  for (int t = 0; t < plan.targets; ++t) {
    const auto ds = cell_dataset(plan, t, 0);
    const double d = similarity(ds.hidden_truth()->target(), ref.estimates.at("ols")[static_cast<std::size_t>(t)]);
    dist.push_back(d);
    if (d <= ref.ols_dtop[static_cast<std::size_t>(t)]) ++wins;
  }
  const double worst_dummy = *std::max_element(ref.dummy_improvement.begin(), ref.dummy_improvement.end());
  const bool pass = wins >= 8 && worst_dummy < 0.10 && ref.optimize_seconds < 900.0;
  return {pass, "distance <= ranking d_top on " + std::to_string(wins) + "/10 (mean distance " +
                    fmt("%.2f", mean(dist)) + " vs mean d_top " + fmt("%.2f", mean(ref.ols_dtop)) +
                    "); dummy improvement max " + fmt("%.1f%%", 100.0 * worst_dummy) + "; " +
                    fmt("%.0f s", ref.optimize_seconds)};
}

Outcome near_target_ablation() {
  auto plan = reference().plan;
  plan.ablation_thresholds = {*std::max_element(plan.ablation_thresholds.begin(), plan.ablation_thresholds.end())};
  plan.estimators = {"ols"};
  const auto rows = run_ablation(plan, AblationVariant::optimize, default_worker_count());
  int worse = 0, compared = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const auto& a = rows[i];
    const auto& c = rows[i + 1];
    if (a.skipped || c.skipped) continue;
    ++compared;
    n = a.n;
    if (*a.final_distance > *c.final_distance) ++worse;
  }
  return {compared == plan.targets && worse >= 8, "threshold " + fmt("%g", plan.ablation_thresholds[0]) +
                                                       ": ablated worse on " + std::to_string(worse) + "/" +
                                                       std::to_string(compared) + " (last n " + std::to_string(n) + ")"};
}

Outcome label_recovery() {
  auto& ref = reference();
  run_optimizations();
  const auto& plan = ref.plan;
  int below = 0, beats = 0, bound = 0, runs = 0;
  double worst_pct = 0.0;
  for (int t = 0; t < plan.targets; ++t) {
    const auto ds = cell_dataset(plan, t, 0);
    const auto& target = ds.hidden_truth()->target();
    std::map<std::string, double> err;
    for (const char* label : {"ols", "s-ols", "dummy"}) {
      const auto& est = ref.estimates.at(label)[static_cast<std::size_t>(t)];
      const auto lr = recover_labels(ds, est);
      err[label] = *lr.rmse;
      ++runs;
      if (*lr.rmse <= similarity(target, est)) ++bound;
      if (std::string(label) == "ols") {
        worst_pct = std::max(worst_pct, *lr.rmse_percent_of_range);
        if (*lr.rmse_percent_of_range < 5.0) ++below;
      }
    }
    if (err["ols"] < err["s-ols"] && err["ols"] < err["dummy"]) ++beats;
  }
  return {below == 10 && beats == 10 && bound == runs,
          "below 5% of range on " + std::to_string(below) + "/10 (worst " + fmt("%.2f%%", worst_pct) +
              "), beats controls on " + std::to_string(beats) + "/10, triangle bound " + std::to_string(bound) + "/" +
              std::to_string(runs)};
}

// ---------------------------------------------------------------------------

class CliSandbox {
 public:
  CliSandbox() : root_(fs::temp_directory_path() / "cursor_acceptance_cli") {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + root_.string() + "' && '" CURSOR_CLI_PATH "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& rel) const {
    std::ifstream in(root_ / rel, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  /// Every regular file except the manifest, which records the output path.
  bool same_outputs(const fs::path& a, const fs::path& b, std::string& why) const {
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(root_ / a)) {
      if (!e.is_regular_file() || e.path().filename() == "manifest.toml") continue;
      const auto rel = fs::relative(e.path(), root_ / a);
      fs::path other = root_ / b / rel;
      if (!fs::exists(other)) {
        why = rel.string() + " missing in " + b.string();
        return false;
      }
      if (read(a / rel) != read(b / rel)) {
        why = rel.string() + " differs between " + a.string() + " and " + b.string();
        return false;
      }
      ++files;
    }
    if (files == 0) {
      why = a.string() + " is empty";
      return false;
    }
    return true;
  }

  /// The single run directory created under `out` by a plan-mode command.
  fs::path run_dir(const fs::path& out) const {
    for (const auto& e : fs::directory_iterator(root_ / out)) {
      if (e.is_directory()) return out / e.path().filename();
    }
    return out;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
};

Outcome cli_determinism() {
  CliSandbox cli;
  std::vector<std::string> failures;
  auto expect_ok = [&](const std::string& args) {
    if (cli.run(args) != 0) failures.push_back("'" + args + "' failed");
  };
  auto expect_same = [&](const fs::path& a, const fs::path& b) {
    std::string why;
    if (!cli.same_outputs(a, b, why)) failures.push_back(why);
  };

  const std::string gen =
      "generate --targets 1 --trajectories 4 --points 60 --latent-dim 12 --response-dim 16 --noise 2 --nuisance-gain 1";
  expect_ok("--seed 7 -o gen_a --format bin " + gen);
  expect_ok("--config gen_a/manifest.toml -o gen_b");
  expect_same("gen_a", "gen_b");
  expect_ok("--seed 7 -o data " + gen);
  const std::string data = "--data data/dataset.csv";

  const std::vector<std::pair<std::string, std::string>> runs = {
      {"score", "score " + data + " --distance 5"},
      {"rank", "rank " + data + " --estimator ols s-ols dummy --L 12"},
      {"optimize", "optimize " + data + " --budget 150"},
      {"ablate", "ablate " + data + " --variant rank --thresholds 0 5 --estimator ols"},
  };
  for (const auto& [name, args] : runs) {
    expect_ok("--workers 1 -o " + name + "_w1 " + args);
    expect_ok("--workers 8 -o " + name + "_w8 " + args);
    expect_ok("--config " + name + "_w1/manifest.toml -o " + name + "_re");
    expect_same(name + "_w1", name + "_w8");
    expect_same(name + "_w1", name + "_re");
  }
  expect_ok("-o recover_a recover " + data + " --estimate optimize_w1/summary.json");
  expect_ok("--config recover_a/manifest.toml -o recover_b");
  expect_same("recover_a", "recover_b");

  // Plan mode: a small plan, run twice through the manifest.
  auto plan = reference().plan;
  plan.generator.latent_dim = 12;
  plan.generator.response.response_dim = 16;
  plan.generator.trajectories_per_target = 3;
  plan.generator.points_per_trajectory = 50;
  plan.hypotheses.L = 8;
  plan.sizes = {150, 60};
  plan.targets = 2;
  io::write_json(to_json(plan), cli.root() / "plan.json");
  expect_ok("--workers 1 -o plan_a rank --plan plan.json");
  const auto dir_a = cli.run_dir("plan_a");
  expect_ok("--workers 8 --config " + (dir_a / "manifest.toml").string() + " -o plan_b");
  const auto dir_b = cli.run_dir("plan_b");
  if (cli.read(dir_a / "sweep.jsonl").empty() || cli.read(dir_a / "sweep.jsonl") != cli.read(dir_b / "sweep.jsonl")) {
    failures.push_back("plan-mode sweep.jsonl differs");
  }
  std::string detail = failures.empty() ? "generate, score, rank, optimize, ablate, recover and plan-mode rank "
                                          "reproduce bit-exactly from manifests and across --workers 1/8"
                                        : failures.front();
  if (failures.size() > 1) detail += " (+" + std::to_string(failures.size() - 1) + " more)";
  return {failures.empty(), detail};
}

Outcome windowing_anchor() {
  EpochTensor ep;
  ep.channels = 29;
  ep.sample_rate_hz = 250.0;
  ep.t0_ms = -200.0;
  ep.timepoints = 250;
  Rng rng(11011);
  ep.data = gaussian(29, 250, rng, 10.0);
  const Vector f = window_epoch(ep);

  double worst = 0.0;
  const double width = (800.0 - 50.0) / 7.0;
  for (int c = 0; c < 29; ++c) {
    for (int w = 0; w < 7; ++w) {
      const double lo = 50.0 + w * width;
      const double hi = 50.0 + (w + 1) * width;
      double sum = 0.0;
      int count = 0;
      for (int s = 0; s < ep.timepoints; ++s) {
        const double t = ep.time_ms(s);
        if (t >= lo && (t < hi || (w == 6 && t <= hi))) {
          sum += ep.data(c, s);
          ++count;
        }
      }
      worst = std::max(worst, std::abs(f[c * 7 + w] - sum / count));
    }
  }
  return {f.size() == 203 && worst <= 1e-12,
          std::to_string(f.size()) + " features, max oracle deviation " + fmt("%.1e", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dummy-score identity", dummy_identity},
      {"OLS oracle equivalence", ols_oracle},
      {"PCA suite", pca_suite},
      {"CMA-ES convergence", cmaes_convergence},
      {"random-baseline anchors", random_baselines},
      {"synthetic ranking", synthetic_ranking},
      {"synthetic optimization", synthetic_optimization},
      {"near-target ablation", near_target_ablation},
      {"label recovery", label_recovery},
      {"determinism and parallel safety", cli_determinism},
      {"windowing anchor", windowing_anchor},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << i + 1 << " [" << (o.pass ? "PASS" : "FAIL") << "] " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria pass"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
