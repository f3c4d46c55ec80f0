#include "doctest.h"
#include "helpers.hpp"

#include <cmath>

using namespace cursor;
using testing::random_vector;

namespace {

std::vector<double> uniform_values(std::size_t n, Seed seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  std::vector<double> neg, aff;
  for (double x : a) {
    neg.push_back(-x);
    aff.push_back(3 * x + 7);
  }
  CHECK(pearson_correlation(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pearson_correlation(a, aff) == doctest::Approx(1.0).epsilon(1e-15));
  // Hand formula: 3 / sqrt(2 * 42/9).
  CHECK(pearson_correlation({1, 2, 3}, {1, 2, 4}) == doctest::Approx(3.0 / std::sqrt(2.0 * 42.0 / 9.0)).epsilon(1e-14));
  CHECK(pearson_correlation({1, 2, 3}, {1, 2, 4}) == doctest::Approx(0.98198).epsilon(1e-5));
  CHECK_THROWS_AS(pearson_correlation({1, 1, 1}, {1, 2, 3}), RuntimeError);
  CHECK_THROWS_AS(pearson_correlation({1, 2}, {1, 2, 3}), InvalidArgument);
}

TEST_CASE("pearson is invariant to positive affine maps") {
  for (Seed s = 0; s < 20; ++s) {
    const auto a = uniform_values(30, s);
    const auto b = uniform_values(30, s + 100);
    std::vector<double> a2;
    for (double x : a) a2.push_back(4.5 * x - 2.0);
    CHECK(std::abs(pearson_correlation(a, b) - pearson_correlation(a2, b)) < 1e-12);
  }
}

TEST_CASE("target_rank examples") {
  CHECK(target_rank({0.5, 2.0, 1.0}, 2, 0) == 2);
  CHECK(target_rank({0.5, 2.0, 1.0}, 1, 0) == 1);
  CHECK(target_rank({0.5, 2.0, 1.0}, 0, 0) == 3);
  CHECK_THROWS_AS(target_rank({1.0}, 3, 0), InvalidArgument);
}

TEST_CASE("ties are broken by seed") {
  const std::vector<double> all_equal(60, 1.0);
  std::vector<int> ranks;
  for (Seed s = 0; s < 50; ++s) {
    const int r = target_rank(all_equal, 5, s);
    CHECK(r >= 1);
    CHECK(r <= 60);
    CHECK(r == target_rank(all_equal, 5, s));
    ranks.push_back(r);
  }
  CHECK(std::adjacent_find(ranks.begin(), ranks.end(), std::not_equal_to<>()) != ranks.end());
}

TEST_CASE("target_rank is invariant to increasing transforms") {
  for (Seed s = 0; s < 20; ++s) {
    const auto v = uniform_values(60, s);
    std::vector<double> ex, af;
    for (double x : v) {
      ex.push_back(std::exp(x));
      af.push_back(2.0 * x + 5.0);
    }
    const std::size_t t = s % 60;
    CHECK(target_rank(v, t, s) == target_rank(ex, t, s));
    CHECK(target_rank(v, t, s) == target_rank(af, t, s));
  }
}

TEST_CASE("rank_scores with scores equal to negative distance") {
  const auto d = uniform_values(60, 3);
  std::vector<double> dist = d;
  dist[17] = 0.0;
  std::vector<double> s;
  for (double x : dist) s.push_back(-x);
  const auto r = rank_scores(s, dist, std::size_t{17}, 0);
  CHECK(r.pearson_r == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(r.target_rank == 1);
  CHECK(r.d_top_rank == 0.0);
  CHECK(r.top_index == 17);
}

TEST_CASE("constant scores fall back to tie-broken correlation") {
  const auto dist = uniform_values(10, 4);
  const auto r = rank_scores(std::vector<double>(10, 1.0), dist, std::nullopt, 2);
  CHECK(r.r_from_tie_break);
  CHECK(std::abs(r.pearson_r) <= 1.0);
  CHECK(r.target_rank == 0);
}

TEST_CASE("uniform random scores give the chance rank") {
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto v = uniform_values(60, static_cast<Seed>(t));
    total += target_rank(v, static_cast<std::size_t>(t % 60), static_cast<Seed>(t));
  }
  CHECK(total / trials == doctest::Approx(30.5).epsilon(0.02));
}

TEST_CASE("hypothesis set construction") {
  const LatentPoint target(random_vector(16, 1));
  const auto set = build_hypothesis_set(target, 60, 46.16, 5);
  REQUIRE(set.hypotheses.size() == 60);
  REQUIRE(set.includes_target_at.has_value());
  CHECK(set.hypotheses[*set.includes_target_at] == target);
  for (const auto& h : set.hypotheses) CHECK(similarity(target, h) <= 46.16 * (1 + 1e-12));

  const auto two = build_hypothesis_set(target, 2, 10.0, 6);
  CHECK(two.hypotheses.size() == 2);

  const auto without = build_hypothesis_set(target, 60, 46.16, 5, false);
  CHECK(without.hypotheses.size() == 60);
  CHECK_FALSE(without.includes_target_at.has_value());

  CHECK(build_hypothesis_set(target, 60, 46.16, 5).hypotheses[3] == set.hypotheses[3]);
  CHECK_THROWS_AS(build_hypothesis_set(target, 1, 10.0, 0), InvalidArgument);
  CHECK_THROWS_AS(build_hypothesis_set(target, 10, 0.0, 0), InvalidArgument);
}

TEST_CASE("rank_report on informative data") {
  const auto ds = testing::small_dataset(21, 0.5, 6, 40);
  const auto& target = ds.hidden_truth()->target();
  const auto set = build_hypothesis_set(target, 20, 46.16, 3);
  const auto res = rank_report(ds, set, ScoreConfig{}, target, 4, 1);
  CHECK(res.details.size() == 20);
  CHECK(res.report.pearson_r < -0.6);
  CHECK(res.report.target_rank <= 3);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(res.report.distances[i] == doctest::Approx(similarity(target, set.hypotheses[i])));
  }
}
