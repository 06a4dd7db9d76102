#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "unilcd/costs.hpp"
#include "unilcd/env.hpp"
#include "unilcd/metrics.hpp"
#include "unilcd/nn.hpp"
#include "unilcd/policies.hpp"
#include "unilcd/reward.hpp"
#include "unilcd/rng.hpp"

namespace unilcd {

struct HistoryEntry {
  double d = 0.0;
  double v = 0.0;
  int source = 0;  // 0 local, 1 cloud
};

// Ring buffer of the last k executed actions tagged with their source,
// zero-padded at episode start. Newest entry last.
class History {
 public:
  explicit History(int k) : entries_(static_cast<std::size_t>(k)) {
    if (k < 1) throw std::invalid_argument("history k must be >= 1");
  }

  void push(HistoryEntry e) {
    entries_.erase(entries_.begin());
    entries_.push_back(e);
  }

  void overwrite_last(HistoryEntry e) { entries_.back() = e; }

  const HistoryEntry& newest() const { return entries_.back(); }
  int k() const { return static_cast<int>(entries_.size()); }

  // Oldest to newest, (d, v, source) per entry: 3k numbers.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(entries_.size() * 3);
    for (const HistoryEntry& e : entries_) {
      out.push_back(e.d);
      out.push_back(e.v);
      out.push_back(static_cast<double>(e.source));
    }
    return out;
  }

 private:
  std::vector<HistoryEntry> entries_;
};

struct RouterState {
  std::vector<double> embedding;
  std::vector<double> history_flat;  // empty when history is disabled

  std::vector<double> input() const {
    std::vector<double> v = embedding;
    v.insert(v.end(), history_flat.begin(), history_flat.end());
    return v;
  }
};

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int update_epochs = 4;
  int minibatch_size = 256;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int episodes = 1000;
  std::vector<int> policy_hidden{16, 16};
  std::vector<int> value_hidden{256, 256};
  bool history_enabled = true;
  int history_k = 8;
  int eval_every = 50;
  int eval_seeds = 10;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("gae_lambda must be in [0, 1]");
    if (clip <= 0.0) throw std::invalid_argument("clip must be positive");
    if (episodes < 1 || update_epochs < 1 || minibatch_size < 1 || history_k < 1)
      throw std::invalid_argument("bad ppo configuration");
  }
};

// Policy and value networks plus the input layout they were built for.
struct RouterNets {
  MlpSpec policy_spec;
  MlpWeights policy;
  MlpSpec value_spec;
  MlpWeights value;
  int embedding_dim = 32;
  int history_k = 8;
  bool history_enabled = true;

  int input_width() const { return embedding_dim + (history_enabled ? 3 * history_k : 0); }
};

inline RouterNets make_router_nets(int embedding_dim, const PPOConfig& cfg, Rng& rng) {
  RouterNets nets;
  nets.embedding_dim = embedding_dim;
  nets.history_k = cfg.history_k;
  nets.history_enabled = cfg.history_enabled;
  const int width = nets.input_width();
  std::vector<int> pw{width};
  pw.insert(pw.end(), cfg.policy_hidden.begin(), cfg.policy_hidden.end());
  pw.push_back(2);
  nets.policy_spec = make_mlp_spec(pw, Activation::kTanh, OutputActivation::kSoftmax2);
  nets.policy = init_mlp(nets.policy_spec, rng);
  std::vector<int> vw{width};
  vw.insert(vw.end(), cfg.value_hidden.begin(), cfg.value_hidden.end());
  vw.push_back(1);
  nets.value_spec = make_mlp_spec(vw, Activation::kTanh, OutputActivation::kIdentity);
  nets.value = init_mlp(nets.value_spec, rng);
  return nets;
}

struct Decision {
  int choice = 0;  // 0 local, 1 cloud
  double log_prob = 0.0;
  double p_local = 0.5;
  double p_cloud = 0.5;
};

// Samples from the 2-way categorical during training; argmax in
// deterministic evaluation mode.
inline Decision decide(const MlpWeights& policy, const MlpSpec& spec,
                       const std::vector<double>& input, Rng& rng, bool deterministic) {
  if (input.size() != static_cast<std::size_t>(spec.input_width()))
    throw std::invalid_argument("decide: state width does not match network");
  const Tensor probs = forward(policy, spec, Tensor{{input.size()}, input}).output;
  Decision d;
  d.p_local = probs.values[0];
  d.p_cloud = probs.values[1];
  if (deterministic)
    d.choice = d.p_cloud > d.p_local ? 1 : 0;
  else
    d.choice = rng.uniform01() < d.p_local ? 0 : 1;
  d.log_prob = std::log(std::max(d.choice == 0 ? d.p_local : d.p_cloud, 1e-300));
  return d;
}

inline double value_estimate(const MlpWeights& value, const MlpSpec& spec,
                             const std::vector<double>& input) {
  if (input.size() != static_cast<std::size_t>(spec.input_width()))
    throw std::invalid_argument("value: state width does not match network");
  return forward(value, spec, Tensor{{input.size()}, input}).output.values[0];
}

struct RolloutStep {
  std::vector<double> input;
  int decision = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;        // episode boundary (terminal or truncated)
  bool truncated = false;   // ran out of steps; bootstrap with the critic
  double bootstrap_value = 0.0;
};

// On-policy buffer; cleared after every update.
struct RolloutBuffer {
  std::vector<RolloutStep> steps;

  void clear() { steps.clear(); }
  bool empty() const { return steps.empty(); }
  std::size_t size() const { return steps.size(); }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over contiguous episodes. Terminal steps
// bootstrap with 0, truncated steps with the stored critic value. Advantages
// come back raw; normalization happens inside the update.
inline GaeResult gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda) {
  if (buffer.empty()) throw std::invalid_argument("gae_advantages: empty buffer");
  if (!buffer.steps.back().done)
    throw std::invalid_argument("gae_advantages: buffer must end on an episode boundary");
  const std::size_t n = buffer.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_advantage = 0.0;
  double next_value = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const RolloutStep& s = buffer.steps[i];
    if (s.done) {
      next_value = s.truncated ? s.bootstrap_value : 0.0;
      next_advantage = 0.0;
    }
    const double delta = s.reward + gamma * next_value - s.value;
    out.advantages[i] = delta + gamma * lambda * next_advantage;
    out.returns[i] = out.advantages[i] + s.value;
    next_advantage = out.advantages[i];
    next_value = s.value;
  }
  return out;
}

// min(ratio * adv, clip(ratio, 1-c, 1+c) * adv)
inline double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  return std::min(ratio * advantage, clipped);
}

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  bool aborted = false;
  std::string diagnostics;
};

// Clipped-surrogate policy update with entropy bonus plus an MSE value fit,
// update_epochs passes over shuffled minibatches.
inline UpdateMetrics ppo_update(const RolloutBuffer& buffer, RouterNets& nets,
                                AdamWState& policy_opt, AdamWState& value_opt,
                                const PPOConfig& cfg, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("ppo_update: empty buffer");
  const std::size_t n = buffer.size();
  const std::size_t width = buffer.steps[0].input.size();

  GaeResult gae = gae_advantages(buffer, cfg.gamma, cfg.gae_lambda);

  // normalize advantages across the whole update
  double mean = 0.0;
  for (double a : gae.advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : gae.advantages) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n));
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i)
    adv[i] = stddev > 1e-12 ? (gae.advantages[i] - mean) / stddev : 0.0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  UpdateMetrics metrics;
  std::size_t batches = 0;
  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.minibatch_size));
      const std::size_t b = end - begin;

      Tensor inputs = Tensor::zeros({b, width});
      for (std::size_t r = 0; r < b; ++r) {
        const RolloutStep& s = buffer.steps[order[begin + r]];
        std::copy(s.input.begin(), s.input.end(),
                  inputs.values.begin() + static_cast<std::ptrdiff_t>(r * width));
      }

      // policy pass
      ForwardResult pol = forward(nets.policy, nets.policy_spec, inputs);
      Tensor upstream = Tensor::zeros({b, 2});
      double pg_loss = 0.0, entropy_sum = 0.0;
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t r = 0; r < b; ++r) {
        const RolloutStep& s = buffer.steps[order[begin + r]];
        const double a_norm = adv[order[begin + r]];
        const double p0 = pol.output.at(r, 0), p1 = pol.output.at(r, 1);
        const double p_a = s.decision == 0 ? p0 : p1;
        const double ratio = std::exp(std::log(std::max(p_a, 1e-300)) - s.log_prob);
        const double unclipped = ratio * a_norm;
        const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a_norm;
        pg_loss -= std::min(unclipped, clipped) * inv_b;
        if (unclipped <= clipped)  // gradient only flows through the unclipped branch
          upstream.at(r, static_cast<std::size_t>(s.decision)) -=
              a_norm * ratio / std::max(p_a, 1e-300) * inv_b;
        const double h = -(p0 > 0.0 ? p0 * std::log(p0) : 0.0) - (p1 > 0.0 ? p1 * std::log(p1) : 0.0);
        entropy_sum += h;
        if (p0 > 0.0) upstream.at(r, 0) += cfg.entropy_coef * (std::log(p0) + 1.0) * inv_b;
        if (p1 > 0.0) upstream.at(r, 1) += cfg.entropy_coef * (std::log(p1) + 1.0) * inv_b;
      }
      const double entropy_mean = entropy_sum * inv_b;
      const double policy_loss = pg_loss - cfg.entropy_coef * entropy_mean;

      // value pass
      ForwardResult val = forward(nets.value, nets.value_spec, inputs);
      Tensor vup = Tensor::zeros({b, 1});
      double v_loss = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        const double ret = gae.returns[order[begin + r]];
        const double diff = val.output.at(r, 0) - ret;
        v_loss += diff * diff * inv_b;
        vup.at(r, 0) = cfg.value_coef * 2.0 * diff * inv_b;
      }
      v_loss *= cfg.value_coef;

      if (!std::isfinite(policy_loss) || !std::isfinite(v_loss)) {
        metrics.aborted = true;
        metrics.diagnostics = "non-finite loss in ppo_update";
        return metrics;
      }

      BackwardResult pgrad = backward(nets.policy, nets.policy_spec, pol.cache, upstream);
      adamw_step(mlp_params(nets.policy), mlp_grad_ptrs(pgrad.gradients), policy_opt);
      BackwardResult vgrad = backward(nets.value, nets.value_spec, val.cache, vup);
      adamw_step(mlp_params(nets.value), mlp_grad_ptrs(vgrad.gradients), value_opt);

      metrics.policy_loss += policy_loss;
      metrics.value_loss += v_loss;
      metrics.entropy += entropy_mean;
      batches += 1;
    }
  }
  if (batches > 0) {
    metrics.policy_loss /= static_cast<double>(batches);
    metrics.value_loss /= static_cast<double>(batches);
    metrics.entropy /= static_cast<double>(batches);
  }
  return metrics;
}

enum class RewardForm { kMultiplicative, kAdditive };

// How routing decisions are produced during an episode.
struct RouterDriver {
  enum class Kind { kNets, kAlwaysLocal, kAlwaysCloud, kRandom };
  Kind kind = Kind::kNets;
  const RouterNets* nets = nullptr;
  bool deterministic = false;   // argmax instead of sampling
  double cloud_probability = 0.5;  // kRandom only

  static RouterDriver always_local() { return {Kind::kAlwaysLocal, nullptr, true, 0.0}; }
  static RouterDriver always_cloud() { return {Kind::kAlwaysCloud, nullptr, true, 1.0}; }
  static RouterDriver random(double p_cloud) { return {Kind::kRandom, nullptr, false, p_cloud}; }
  static RouterDriver from_nets(const RouterNets& n, bool det) { return {Kind::kNets, &n, det, 0.0}; }
};

// One line per routing decision.
struct TraceRecord {
  int decision_index = 0;
  int tick = 0;  // env tick at the end of the decision cycle
  double x = 0.0, y = 0.0, heading = 0.0;
  double d = 0.0, v = 0.0;  // executed action
  int source = 0;
  RewardBreakdown reward;
  double reward_scalar = 0.0;
  double d_geo = 0.0;      // at the decision's final tick
  double d_geo_max = 0.0;  // max over the cycle, including latency holds
  double step_energy_j = 0.0;
  double decision_seconds = 0.0;
  double advanced = 0.0;
  double progress = 0.0;
  StepEvents events;  // OR of the cycle's events
  int collisions_in_cycle = 0;
};

struct EpisodeOptions {
  Mode mode = Mode::kEval;
  std::uint64_t seed = 0;
  RewardForm reward_form = RewardForm::kMultiplicative;
  std::vector<TraceRecord>* trace = nullptr;
  RolloutBuffer* buffer = nullptr;  // filled only when driving with nets
};

struct EpisodeResult {
  EpisodeSummary summary;
  double total_reward = 0.0;
  StepEvents final_events;
};

// Alg-1 style episode loop. Each iteration is one routing decision: compute
// the embedding and local action, append (a_l, 0) to history, query the
// router; a cloud route samples a latency, holds the previous executed
// action while waiting, then executes the cloud action and overwrites the
// newest history entry with (a_c, 1). Energy is charged once per decision.
inline EpisodeResult run_episode(const WorldConfig& world, const SharedTrunk& trunk,
                                 const LocalHead& local, const CloudHead& cloud,
                                 const RouterDriver& driver, const RewardConfig& reward_cfg,
                                 const EnergyConfig& energy_cfg, const LatencyConfig& latency_cfg,
                                 const EpisodeOptions& opt) {
  if (driver.kind == RouterDriver::Kind::kNets && driver.nets == nullptr)
    throw std::invalid_argument("run_episode: nets driver without nets");
  if (driver.kind == RouterDriver::Kind::kNets &&
      driver.nets->embedding_dim != trunk.embedding_dim)
    throw std::invalid_argument("run_episode: embedding_dim mismatch between router and trunk");

  const ActionBounds bounds{world.d_m, world.m_v};
  auto episode = new_episode(world, mix_seed(opt.seed, 0x656e76), opt.mode);
  EnvState state = std::move(episode.first);
  Observation obs = std::move(episode.second);
  Rng ctrl(mix_seed(opt.seed, 0x637472));  // decision sampling + latency draws

  const int k = driver.nets ? driver.nets->history_k : 8;
  History history(k);
  Action prev_executed{0.0, 0.0};
  EnergyLedger ledger;
  double decision_seconds = 0.0;
  double max_rd = 0.0;
  double total_reward = 0.0;
  StepEvents final_events;
  int decision_index = 0;

  while (!state.done) {
    const std::vector<double> embedding = embed(trunk, obs);
    const Action a_local = local_act(local, embedding, obs.goal_x, obs.goal_y, bounds);
    history.push({a_local.d, a_local.v, 0});

    RouterState rstate;
    rstate.embedding = embedding;
    if (!driver.nets || driver.nets->history_enabled) rstate.history_flat = history.flatten();
    const std::vector<double> input = rstate.input();

    Decision decision;
    switch (driver.kind) {
      case RouterDriver::Kind::kNets:
        decision = decide(driver.nets->policy, driver.nets->policy_spec, input, ctrl,
                          driver.deterministic);
        break;
      case RouterDriver::Kind::kAlwaysLocal:
        decision = {0, 0.0, 1.0, 0.0};
        break;
      case RouterDriver::Kind::kAlwaysCloud:
        decision = {1, 0.0, 0.0, 1.0};
        break;
      case RouterDriver::Kind::kRandom:
        decision.choice = ctrl.uniform01() < driver.cloud_probability ? 1 : 0;
        break;
    }

    // run the decision cycle through the environment
    Action executed = prev_executed;
    StepOutcome outcome;
    StepEvents cycle_events;
    double cycle_max_rd = 0.0;
    const int collisions_before = state.collision_count;
    double latency = 0.0;
    const StepSource source = decision.choice == 0 ? StepSource::kLocal : StepSource::kCloud;

    auto absorb = [&cycle_events, &max_rd, &cycle_max_rd](const StepOutcome& o) {
      cycle_events.collision |= o.events.collision;
      cycle_events.reached_goal |= o.events.reached_goal;
      cycle_events.deviated |= o.events.deviated;
      cycle_events.out_of_steps |= o.events.out_of_steps;
      max_rd = std::max(max_rd, o.d_geo);
      cycle_max_rd = std::max(cycle_max_rd, o.d_geo);
    };

    if (source == StepSource::kLocal) {
      outcome = step(state, a_local, world);
      executed = a_local;
      absorb(outcome);
    } else {
      latency = sample_latency(latency_cfg, ctrl);
      const int ticks = latency_to_ticks(latency, latency_cfg.t_cloud_infer, world.dt);
      for (int h = 0; h + 1 < ticks && !state.done; ++h) {  // zero-order hold while waiting
        outcome = step(state, prev_executed, world);
        absorb(outcome);
      }
      if (!state.done) {
        const Action a_cloud = cloud_act(cloud, embedding, obs.goal_x, obs.goal_y, bounds);
        outcome = step(state, a_cloud, world);
        executed = a_cloud;
        absorb(outcome);
        history.overwrite_last({a_cloud.d, a_cloud.v, 1});
      }
    }

    const double energy_j = step_energy(source, energy_cfg);
    ledger.add(source, energy_j);
    const double dec_time = decision_time(source, latency, latency_cfg);
    decision_seconds += dec_time;

    const double exec_v = std::clamp(executed.v, 0.0, world.m_v);
    const RewardBreakdown breakdown =
        compose(outcome.d_geo, exec_v, energy_j, executed.d, cycle_events.collision, reward_cfg);
    const double reward_scalar =
        opt.reward_form == RewardForm::kMultiplicative ? breakdown.total : breakdown.additive;
    total_reward += reward_scalar;

    if (opt.trace) {
      TraceRecord rec;
      rec.decision_index = decision_index;
      rec.tick = state.step_index;
      rec.x = state.robot.position.x;
      rec.y = state.robot.position.y;
      rec.heading = state.robot.heading;
      rec.d = executed.d;
      rec.v = executed.v;
      rec.source = static_cast<int>(source);
      rec.reward = breakdown;
      rec.reward_scalar = reward_scalar;
      rec.d_geo = outcome.d_geo;
      rec.d_geo_max = cycle_max_rd;
      rec.step_energy_j = energy_j;
      rec.decision_seconds = dec_time;
      rec.advanced = outcome.advanced;
      rec.progress = route_progress(state, world.route);
      rec.events = cycle_events;
      rec.collisions_in_cycle = state.collision_count - collisions_before;
      opt.trace->push_back(rec);
    }

    if (opt.buffer && driver.kind == RouterDriver::Kind::kNets) {
      RolloutStep rs;
      rs.input = input;
      rs.decision = decision.choice;
      rs.log_prob = decision.log_prob;
      rs.value = value_estimate(driver.nets->value, driver.nets->value_spec, input);
      rs.reward = reward_scalar;
      rs.done = state.done;
      if (state.done) {
        const bool hard_stop = cycle_events.reached_goal || cycle_events.deviated ||
                               (opt.mode == Mode::kTrain && cycle_events.collision);
        rs.truncated = cycle_events.out_of_steps && !hard_stop;
        if (rs.truncated) {
          // critic bootstrap at the state the router would see next
          const std::vector<double> next_emb = embed(trunk, outcome.observation);
          const Action next_local = local_act(local, next_emb, outcome.observation.goal_x,
                                              outcome.observation.goal_y, bounds);
          History next_hist = history;
          next_hist.push({next_local.d, next_local.v, 0});
          RouterState ns;
          ns.embedding = next_emb;
          if (driver.nets->history_enabled) ns.history_flat = next_hist.flatten();
          rs.bootstrap_value = value_estimate(driver.nets->value, driver.nets->value_spec, ns.input());
        }
      }
      opt.buffer->steps.push_back(std::move(rs));
    }

    prev_executed = executed;
    obs = outcome.observation;
    final_events = cycle_events;
    decision_index += 1;
  }

  EpisodeResult result;
  result.total_reward = total_reward;
  result.final_events = final_events;
  result.summary.rc = 100.0 * route_progress(state, world.route);
  result.summary.success = final_events.reached_goal;
  if (result.summary.success) result.summary.rc = 100.0;
  result.summary.collisions = state.collision_count;
  result.summary.meters = state.meters_traveled;
  result.summary.max_rd = max_rd;
  result.summary.n_local = ledger.n_local;
  result.summary.n_cloud = ledger.n_cloud;
  result.summary.energy = episode_energy(ledger, energy_cfg);
  result.summary.decision_seconds = decision_seconds;
  result.summary.steps = ledger.n_local + ledger.n_cloud;
  return result;
}

struct TrainCurvePoint {
  int checkpoint_index = 0;
  int episode = 0;
  double mean_reward = 0.0;
  double ens_mean = 0.0;
  double ens_std = 0.0;
};

struct RouterTrainResult {
  RouterNets nets;
  std::vector<TrainCurvePoint> curve;
  bool diverged = false;
  int episodes_run = 0;
};

// Fixed evaluation seeds shared by every training run, so checkpoint curves
// and reward-form variants are directly comparable.
inline std::uint64_t eval_seed(int index) { return mix_seed(0x45564c5345454453ull, static_cast<std::uint64_t>(index)); }

inline double episode_ens(const EpisodeSummary& ep, const MetricConfig& metric_cfg) {
  const double ns = navigation_score(ep.rc, episode_infraction_rate(ep),
                                     deviation_penalty(ep.max_rd, metric_cfg), metric_cfg);
  return ecological_navigation_score(energy_penalty(ep.energy, ep.n_local, ep.n_cloud, metric_cfg), ns);
}

// Alternates one on-policy episode with one PPO update; every eval_every
// episodes runs a deterministic evaluation on the fixed seeds.
inline RouterTrainResult train_router(const std::vector<WorldConfig>& worlds,
                                      const SharedTrunk& trunk, const LocalHead& local,
                                      const CloudHead& cloud, const PPOConfig& cfg,
                                      const RewardConfig& reward_cfg, const EnergyConfig& energy_cfg,
                                      const LatencyConfig& latency_cfg, const MetricConfig& metric_cfg,
                                      RewardForm reward_form, std::uint64_t seed) {
  cfg.validate();
  if (worlds.empty()) throw std::invalid_argument("train_router: no worlds");

  Rng init_rng(mix_seed(seed, 0x70706f));
  RouterTrainResult result;
  result.nets = make_router_nets(trunk.embedding_dim, cfg, init_rng);

  AdamWState policy_opt, value_opt;
  policy_opt.lr = cfg.policy_lr;
  policy_opt.weight_decay = 0.0;
  value_opt.lr = cfg.value_lr;
  value_opt.weight_decay = 0.0;
  policy_opt.init(mlp_params(static_cast<const MlpWeights&>(result.nets.policy)));
  value_opt.init(mlp_params(static_cast<const MlpWeights&>(result.nets.value)));

  Rng update_rng(mix_seed(seed, 0x6d62));
  RolloutBuffer buffer;

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    const WorldConfig& world = worlds[static_cast<std::size_t>(ep - 1) % worlds.size()];
    EpisodeOptions opt;
    opt.mode = Mode::kTrain;
    opt.seed = mix_seed(seed, 0x747261696eull, static_cast<std::uint64_t>(ep));
    opt.reward_form = reward_form;
    opt.buffer = &buffer;
    const RouterDriver driver = RouterDriver::from_nets(result.nets, false);
    run_episode(world, trunk, local, cloud, driver, reward_cfg, energy_cfg, latency_cfg, opt);

    const RouterNets snapshot = result.nets;
    const UpdateMetrics metrics = ppo_update(buffer, result.nets, policy_opt, value_opt, cfg, update_rng);
    buffer.clear();
    if (metrics.aborted) {
      result.nets = snapshot;  // keep the last good checkpoint
      result.diverged = true;
      result.episodes_run = ep;
      return result;
    }

    if (ep % cfg.eval_every == 0) {
      double reward_sum = 0.0;
      std::vector<double> ens_values;
      for (int j = 0; j < cfg.eval_seeds; ++j) {
        const WorldConfig& eval_world = worlds[static_cast<std::size_t>(j) % worlds.size()];
        EpisodeOptions eval_opt;
        eval_opt.mode = Mode::kEval;
        eval_opt.seed = eval_seed(j);
        eval_opt.reward_form = reward_form;
        const RouterDriver eval_driver = RouterDriver::from_nets(result.nets, true);
        const EpisodeResult er = run_episode(eval_world, trunk, local, cloud, eval_driver,
                                             reward_cfg, energy_cfg, latency_cfg, eval_opt);
        reward_sum += er.total_reward;
        ens_values.push_back(episode_ens(er.summary, metric_cfg));
      }
      TrainCurvePoint point;
      point.checkpoint_index = ep / cfg.eval_every;
      point.episode = ep;
      point.mean_reward = reward_sum / static_cast<double>(cfg.eval_seeds);
      double mean_ens = 0.0;
      for (double e : ens_values) mean_ens += e;
      mean_ens /= static_cast<double>(ens_values.size());
      double var = 0.0;
      for (double e : ens_values) var += (e - mean_ens) * (e - mean_ens);
      point.ens_mean = mean_ens;
      point.ens_std = std::sqrt(var / static_cast<double>(ens_values.size()));
      result.curve.push_back(point);
    }
    result.episodes_run = ep;
  }
  return result;
}

}  // namespace unilcd
