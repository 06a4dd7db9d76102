#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace unilcd {

// Per-episode counters produced by the episode runner.
struct EpisodeSummary {
  double rc = 0.0;             // route completion, percent
  bool success = false;
  int collisions = 0;
  double meters = 0.0;         // meters actually traveled
  double max_rd = 0.0;         // max route deviation observed, m
  long n_local = 0;
  long n_cloud = 0;
  double energy = 0.0;         // J
  double decision_seconds = 0.0;
  long steps = 0;              // routing decisions
};

struct MetricConfig {
  double p_infraction = 0.5;  // collision penalty base
  double epsilon_rd = 1.5;    // route deviation threshold, m
  double e_local = 0.15;      // mirrors EnergyConfig
  double e_cloud = 1.5;
  bool pooled_ns = false;     // NS from pooled RC/IC instead of per-episode
};

// 0.8 beyond the deviation threshold, 1.0 otherwise (strict inequality).
inline double deviation_penalty(double max_rd, const MetricConfig& cfg) {
  if (max_rd < 0.0) throw std::invalid_argument("deviation_penalty: negative deviation");
  return max_rd > cfg.epsilon_rd ? 0.8 : 1.0;
}

// NS = RC * P_I^IC * P_RD.
inline double navigation_score(double rc, double ic, double p_rd, const MetricConfig& cfg) {
  if (rc < 0.0 || rc > 100.0) throw std::invalid_argument("navigation_score: RC out of range");
  if (ic < 0.0) throw std::invalid_argument("navigation_score: negative infraction rate");
  return rc * std::pow(cfg.p_infraction, ic) * p_rd;
}

// P_E = 1 - Energy / N_E with N_E = (E_local + E_cloud) * (N_local + N_cloud),
// clamped to [0, 1].
inline double energy_penalty(double energy, long n_local, long n_cloud, const MetricConfig& cfg) {
  const long total = n_local + n_cloud;
  if (total <= 0) throw std::invalid_argument("energy_penalty: no steps");
  const double norm = (cfg.e_local + cfg.e_cloud) * static_cast<double>(total);
  return std::clamp(1.0 - energy / norm, 0.0, 1.0);
}

inline double ecological_navigation_score(double p_e, double ns) { return p_e * ns; }

inline double episode_infraction_rate(const EpisodeSummary& ep) {
  if (ep.meters > 0.0) return static_cast<double>(ep.collisions) / ep.meters;
  return ep.collisions > 0 ? 1e9 : 0.0;
}

struct AggregateReport {
  double ens = 0.0;
  double ns = 0.0;
  double sr = 0.0;   // percent
  double rc = 0.0;   // percent
  double ic = 0.0;   // collisions per meter, pooled
  double energy_per_meter = 0.0;
  double fps = 0.0;
  int episodes = 0;
  std::string fingerprint;
};

// Pooled IC and J/m; NS and ENS averaged per episode.
inline AggregateReport aggregate(const std::vector<EpisodeSummary>& episodes, const MetricConfig& cfg) {
  if (episodes.empty()) throw std::invalid_argument("aggregate: empty episode list");
  AggregateReport rep;
  rep.episodes = static_cast<int>(episodes.size());
  double sum_meters = 0.0, sum_energy = 0.0, sum_seconds = 0.0;
  double sum_rc = 0.0, sum_ns = 0.0, sum_ens = 0.0;
  long sum_collisions = 0, sum_steps = 0, successes = 0;
  for (const EpisodeSummary& ep : episodes) {
    sum_meters += ep.meters;
    sum_energy += ep.energy;
    sum_seconds += ep.decision_seconds;
    sum_collisions += ep.collisions;
    sum_steps += ep.steps;
    sum_rc += ep.rc;
    successes += ep.success ? 1 : 0;
    const double ns_i = navigation_score(ep.rc, episode_infraction_rate(ep),
                                         deviation_penalty(ep.max_rd, cfg), cfg);
    sum_ns += ns_i;
    const double pe_i = energy_penalty(ep.energy, ep.n_local, ep.n_cloud, cfg);
    sum_ens += ecological_navigation_score(pe_i, ns_i);
  }
  if (sum_meters <= 0.0) throw std::invalid_argument("aggregate: zero meters traveled");
  const double n = static_cast<double>(episodes.size());
  rep.rc = sum_rc / n;
  rep.sr = 100.0 * static_cast<double>(successes) / n;
  rep.ic = static_cast<double>(sum_collisions) / sum_meters;
  if (cfg.pooled_ns) {
    double worst_rd = 0.0;
    for (const EpisodeSummary& ep : episodes) worst_rd = std::max(worst_rd, ep.max_rd);
    rep.ns = navigation_score(rep.rc, rep.ic, deviation_penalty(worst_rd, cfg), cfg);
  } else {
    rep.ns = sum_ns / n;
  }
  rep.ens = sum_ens / n;
  rep.energy_per_meter = sum_energy / sum_meters;
  rep.fps = sum_seconds > 0.0 ? static_cast<double>(sum_steps) / sum_seconds : 0.0;
  return rep;
}

}  // namespace unilcd
