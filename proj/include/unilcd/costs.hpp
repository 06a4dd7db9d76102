#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "unilcd/rng.hpp"

namespace unilcd {

enum class StepSource { kLocal = 0, kCloud = 1 };
enum class PayloadMode { kRaw, kEmbedding };

struct EnergyConfig {
  double e_local = 0.15;                 // J per local step (computation)
  double e_cloud = 1.5;                  // J per cloud step, computation + comm, embedding mode
  double joule_per_byte = 6.94e-5;
  double raw_comm_energy = 1.55;         // J, raw observation payload
  double embedding_comm_energy = 0.02518;  // J, embedding payload
  double joule_per_flop = 0.095;         // exposed for the flops-based estimator, unused by defaults
  PayloadMode payload_mode = PayloadMode::kEmbedding;

  // Recompute the communication share from payload bytes instead of the
  // stated joule figures (the two are mutually inconsistent).
  bool recompute_from_bytes = false;
  double raw_payload_bytes = 691200.0;     // 480*480*3
  double embedding_payload_bytes = 2304.0;  // 24*24 floats

  void validate() const {
    if (e_local < 0.0 || e_cloud < 0.0 || raw_comm_energy < 0.0 || embedding_comm_energy < 0.0)
      throw std::invalid_argument("energies must be non-negative");
    if (e_cloud < e_local) throw std::invalid_argument("e_cloud must be >= e_local");
  }
};

enum class LatencyModel { kGaussian, kPareto };
enum class LatencyProfile { kPaperSupp, kTableConsistent };

struct LatencyConfig {
  LatencyModel model = LatencyModel::kGaussian;
  double mu = 0.1;            // s, gaussian mean (table-consistent profile)
  double sigma = 0.02;        // s, gaussian std
  double pareto_xm = 0.1;     // s, pareto scale
  double pareto_shape = 3.0;
  double t_local_infer = 0.0153;  // s, from local-only FPS 65.40
  double t_cloud_infer = 0.040;   // s

  void validate() const {
    if (mu < 0.0 || sigma < 0.0 || t_local_infer < 0.0 || t_cloud_infer < 0.0)
      throw std::invalid_argument("times must be non-negative");
    if (pareto_xm <= 0.0 || pareto_shape <= 0.0) throw std::invalid_argument("bad pareto parameters");
  }
};

// Named round-trip presets: two published operating points that disagree
// with each other. "paper-supp" is the slow, high-variance link;
// "table-consistent" matches a cloud-only decision rate of about 7 FPS.
inline void apply_latency_profile(LatencyConfig& cfg, LatencyProfile profile) {
  cfg.model = LatencyModel::kGaussian;
  if (profile == LatencyProfile::kPaperSupp) {
    cfg.mu = 0.5;
    cfg.sigma = 0.1;
  } else {
    cfg.mu = 0.1;
    cfg.sigma = 0.02;
  }
}

inline double communication_energy(PayloadMode mode, const EnergyConfig& cfg) {
  if (cfg.recompute_from_bytes) {
    const double bytes = mode == PayloadMode::kRaw ? cfg.raw_payload_bytes : cfg.embedding_payload_bytes;
    return bytes * cfg.joule_per_byte;
  }
  return mode == PayloadMode::kRaw ? cfg.raw_comm_energy : cfg.embedding_comm_energy;
}

// Local steps cost e_local. Cloud steps cost e_cloud in embedding mode; raw
// mode swaps the communication share of e_cloud for the raw payload's.
inline double step_energy(StepSource source, const EnergyConfig& cfg) {
  if (source == StepSource::kLocal) return cfg.e_local;
  if (cfg.payload_mode == PayloadMode::kEmbedding && !cfg.recompute_from_bytes) return cfg.e_cloud;
  const double base_compute = cfg.e_cloud - cfg.embedding_comm_energy;
  return base_compute + communication_energy(cfg.payload_mode, cfg);
}

struct EnergyLedger {
  long n_local = 0;
  long n_cloud = 0;
  double total_joules = 0.0;
  std::vector<double> per_step;

  void add(StepSource source, double joules) {
    (source == StepSource::kLocal ? n_local : n_cloud) += 1;
    total_joules += joules;
    per_step.push_back(joules);
  }
};

// Episode energy. Embedding mode uses the closed form
// E_local * N_local + E_cloud * N_cloud; otherwise the per-step log is summed.
inline double episode_energy(const EnergyLedger& ledger, const EnergyConfig& cfg) {
  if (static_cast<std::size_t>(ledger.n_local + ledger.n_cloud) != ledger.per_step.size())
    throw std::invalid_argument("episode_energy: step counts do not match per-step log");
  if (cfg.payload_mode == PayloadMode::kEmbedding && !cfg.recompute_from_bytes)
    return cfg.e_local * static_cast<double>(ledger.n_local) +
           cfg.e_cloud * static_cast<double>(ledger.n_cloud);
  double sum = 0.0;
  for (double e : ledger.per_step) sum += e;
  return sum;
}

// One latency draw in seconds. Gaussian draws are clamped below at 0; pareto
// draws are x_m * U^(-1/shape).
inline double sample_latency(const LatencyConfig& cfg, Rng& rng) {
  if (cfg.model == LatencyModel::kGaussian) return std::max(0.0, rng.normal(cfg.mu, cfg.sigma));
  const double u = 1.0 - rng.uniform01();  // (0, 1]
  return cfg.pareto_xm * std::pow(u, -1.0 / cfg.pareto_shape);
}

// ceil((latency + extra_compute) / dt), at least 1 tick per cloud call.
inline int latency_to_ticks(double latency, double extra_compute, double dt) {
  if (latency < 0.0 || extra_compute < 0.0 || dt <= 0.0)
    throw std::invalid_argument("latency_to_ticks: bad inputs");
  const int ticks = static_cast<int>(std::ceil((latency + extra_compute) / dt));
  return std::max(1, ticks);
}

// Wall time attributed to one routing decision; feeds the FPS metric.
inline double decision_time(StepSource source, double sampled_latency, const LatencyConfig& cfg) {
  return source == StepSource::kLocal ? cfg.t_local_infer : sampled_latency + cfg.t_cloud_infer;
}

}  // namespace unilcd
