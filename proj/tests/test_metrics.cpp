#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unilcd/metrics.hpp"
#include "unilcd/rng.hpp"

using namespace unilcd;

namespace {

EpisodeSummary perfect_local_episode() {
  EpisodeSummary ep;
  ep.rc = 100.0;
  ep.success = true;
  ep.collisions = 0;
  ep.meters = 30.0;
  ep.max_rd = 0.4;
  ep.n_local = 200;
  ep.n_cloud = 0;
  ep.energy = 0.15 * 200;
  ep.decision_seconds = 200 * 0.0153;
  ep.steps = 200;
  return ep;
}

EpisodeSummary random_episode(Rng& rng) {
  EpisodeSummary ep;
  ep.rc = rng.uniform(10.0, 100.0);
  ep.success = rng.uniform01() < 0.5;
  if (ep.success) ep.rc = 100.0;
  ep.collisions = static_cast<int>(rng.index_below(6));
  ep.meters = rng.uniform(5.0, 40.0);
  ep.max_rd = rng.uniform(0.0, 3.0);
  ep.n_local = 50 + static_cast<long>(rng.index_below(300));
  ep.n_cloud = static_cast<long>(rng.index_below(80));
  ep.energy = 0.15 * static_cast<double>(ep.n_local) + 1.5 * static_cast<double>(ep.n_cloud);
  ep.decision_seconds = rng.uniform(1.0, 30.0);
  ep.steps = ep.n_local + ep.n_cloud;
  return ep;
}

}  // namespace

TEST_CASE("deviation_penalty: threshold is strict") {
  MetricConfig cfg;
  CHECK(deviation_penalty(0.0, cfg) == 1.0);
  CHECK(deviation_penalty(1.5, cfg) == 1.0);
  CHECK(deviation_penalty(1.6, cfg) == 0.8);
}

TEST_CASE("navigation_score: pinned to the published rows") {
  MetricConfig cfg;
  CHECK(std::fabs(navigation_score(95.90, 0.02, 1.0, cfg) - 94.58) <= 0.01);
  CHECK(std::fabs(navigation_score(75.23, 0.16, 1.0, cfg) - 67.33) <= 0.01);
  CHECK(std::fabs(navigation_score(98.50, 0.03, 1.0, cfg) - 96.47) <= 0.01);
}

TEST_CASE("navigation_score: decreasing in IC, weakly in deviation") {
  MetricConfig cfg;
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double rc = rng.uniform(10, 100);
    const double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0);
    if (a != b)
      CHECK(navigation_score(rc, std::min(a, b), 1.0, cfg) >
            navigation_score(rc, std::max(a, b), 1.0, cfg));
    CHECK(navigation_score(rc, a, 0.8, cfg) <= navigation_score(rc, a, 1.0, cfg));
  }
}

TEST_CASE("energy_penalty: worked examples") {
  MetricConfig cfg;
  CHECK(energy_penalty(28.5, 90, 10, cfg) == doctest::Approx(1.0 - 28.5 / 165.0).epsilon(1e-9));
  CHECK(energy_penalty(28.5, 90, 10, cfg) == doctest::Approx(0.82727).epsilon(1e-4));
  // all-local: ratio independent of N
  CHECK(energy_penalty(0.15 * 70, 70, 0, cfg) == doctest::Approx(0.90909).epsilon(1e-4));
  CHECK(energy_penalty(0.15 * 700, 700, 0, cfg) == doctest::Approx(0.90909).epsilon(1e-4));
  // raw-mode cloud-only exceeds the normalizer and clamps to zero
  CHECK(energy_penalty(3.02482 * 50, 0, 50, cfg) == 0.0);
  CHECK_THROWS_AS(energy_penalty(1.0, 0, 0, cfg), std::invalid_argument);
}

TEST_CASE("ecological_navigation_score: product") {
  CHECK(ecological_navigation_score(0.0, 94.58) == 0.0);
  CHECK(ecological_navigation_score(1.0, 94.58) == doctest::Approx(94.58));
  CHECK(ecological_navigation_score(0.82727, 94.58) == doctest::Approx(78.24).epsilon(1e-3));
}

TEST_CASE("aggregate: single perfect all-local episode") {
  MetricConfig cfg;
  const AggregateReport rep = aggregate({perfect_local_episode()}, cfg);
  CHECK(rep.sr == 100.0);
  CHECK(rep.ic == 0.0);
  CHECK(rep.ns == doctest::Approx(100.0));
  CHECK(rep.rc == 100.0);
  CHECK(rep.ens == doctest::Approx(100.0 * (1.0 - 0.15 / 1.65)));
  CHECK(rep.fps == doctest::Approx(1.0 / 0.0153));
  CHECK(rep.energy_per_meter == doctest::Approx(0.15 * 200 / 30.0));
}

TEST_CASE("aggregate: duplicated episode equals the single-episode report") {
  MetricConfig cfg;
  const EpisodeSummary ep = perfect_local_episode();
  const AggregateReport one = aggregate({ep}, cfg);
  const AggregateReport two = aggregate({ep, ep}, cfg);
  CHECK(one.ens == doctest::Approx(two.ens));
  CHECK(one.ns == doctest::Approx(two.ns));
  CHECK(one.sr == doctest::Approx(two.sr));
  CHECK(one.rc == doctest::Approx(two.rc));
  CHECK(one.ic == doctest::Approx(two.ic));
  CHECK(one.energy_per_meter == doctest::Approx(two.energy_per_meter));
  CHECK(one.fps == doctest::Approx(two.fps));
}

TEST_CASE("aggregate: random batches match an independent recomputation") {
  MetricConfig cfg;
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<EpisodeSummary> eps;
    const int n = 1 + static_cast<int>(rng.index_below(40));
    for (int i = 0; i < n; ++i) eps.push_back(random_episode(rng));
    const AggregateReport rep = aggregate(eps, cfg);

    // straight-line recomputation, written independently of aggregate()
    double meters = 0, energy = 0, secs = 0, rc = 0, ns = 0, ens = 0;
    long cols = 0, steps = 0;
    int succ = 0;
    for (const auto& e : eps) {
      meters += e.meters;
      energy += e.energy;
      secs += e.decision_seconds;
      cols += e.collisions;
      steps += e.steps;
      rc += e.rc;
      succ += e.success ? 1 : 0;
      const double ic_i = e.meters > 0 ? e.collisions / e.meters : 0.0;
      const double prd = e.max_rd > 1.5 ? 0.8 : 1.0;
      const double ns_i = e.rc * std::pow(0.5, ic_i) * prd;
      ns += ns_i;
      double pe = 1.0 - e.energy / (1.65 * static_cast<double>(e.n_local + e.n_cloud));
      pe = std::clamp(pe, 0.0, 1.0);
      ens += pe * ns_i;
    }
    CHECK(rep.rc == doctest::Approx(rc / n).epsilon(1e-12));
    CHECK(rep.sr == doctest::Approx(100.0 * succ / n).epsilon(1e-12));
    CHECK(rep.ic == doctest::Approx(static_cast<double>(cols) / meters).epsilon(1e-12));
    CHECK(rep.ns == doctest::Approx(ns / n).epsilon(1e-12));
    CHECK(rep.ens == doctest::Approx(ens / n).epsilon(1e-12));
    CHECK(rep.energy_per_meter == doctest::Approx(energy / meters).epsilon(1e-12));
    CHECK(rep.fps == doctest::Approx(steps / secs).epsilon(1e-12));
    CHECK(rep.ens <= rep.ns + 1e-12);
  }
}

TEST_CASE("aggregate: IC pools sums instead of averaging ratios") {
  MetricConfig cfg;
  // skewed batch: one long clean episode, one short episode with collisions
  EpisodeSummary clean = perfect_local_episode();
  clean.meters = 39.0;
  EpisodeSummary dirty = perfect_local_episode();
  dirty.meters = 1.0;
  dirty.collisions = 2;
  const AggregateReport rep = aggregate({clean, dirty}, cfg);
  const double pooled = 2.0 / 40.0;
  const double mean_of_ratios = (0.0 / 39.0 + 2.0 / 1.0) / 2.0;
  CHECK(rep.ic == doctest::Approx(pooled));
  CHECK(rep.ic != doctest::Approx(mean_of_ratios));
  // J/m as well
  CHECK(rep.energy_per_meter ==
        doctest::Approx((clean.energy + dirty.energy) / 40.0));
}

TEST_CASE("aggregate: error cases") {
  MetricConfig cfg;
  CHECK_THROWS_AS(aggregate({}, cfg), std::invalid_argument);
  EpisodeSummary ep = perfect_local_episode();
  ep.meters = 0.0;
  ep.collisions = 0;
  CHECK_THROWS_AS(aggregate({ep}, cfg), std::invalid_argument);
}

TEST_CASE("aggregate: pooled NS mode is available behind the flag") {
  MetricConfig cfg;
  cfg.pooled_ns = true;
  Rng rng(23);
  std::vector<EpisodeSummary> eps{random_episode(rng), random_episode(rng)};
  const AggregateReport rep = aggregate(eps, cfg);
  const double pooled_ic = static_cast<double>(eps[0].collisions + eps[1].collisions) /
                           (eps[0].meters + eps[1].meters);
  const double worst_rd = std::max(eps[0].max_rd, eps[1].max_rd);
  const double expect = navigation_score((eps[0].rc + eps[1].rc) / 2.0, pooled_ic,
                                         deviation_penalty(worst_rd, cfg), cfg);
  CHECK(rep.ns == doctest::Approx(expect));
}
