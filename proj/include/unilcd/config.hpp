#pragma once

#include <json.hpp>

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "unilcd/costs.hpp"
#include "unilcd/env.hpp"
#include "unilcd/metrics.hpp"
#include "unilcd/policies.hpp"
#include "unilcd/reward.hpp"
#include "unilcd/router.hpp"
#include "unilcd/routes.hpp"

namespace unilcd {

using nlohmann::json;

inline int density_pedestrians(const std::string& density) {
  if (density == "low") return 5;
  if (density == "medium") return 15;
  if (density == "high") return 30;
  if (density == "crowd") return 70;
  throw ConfigError("unknown density '" + density + "' (expected low|medium|high|crowd)");
}

namespace cfgdetail {

// Tracks consumed keys so unknown ones can be rejected.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(&obj), path_(std::move(path)) {
    if (!obj_->is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  bool has(const char* key) const { return obj_->contains(key); }

  template <typename T>
  T value(const char* key, T def) {
    seen_.insert(key);
    if (!obj_->contains(key)) return def;
    try {
      return obj_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    if (!obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  void done() const {
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (seen_.find(it.key()) == seen_.end())
        throw ConfigError("unknown config key '" + path_ + "." + it.key() + "'");
    }
  }

 private:
  const json* obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace cfgdetail

struct EvalConfig {
  std::vector<int> routes{0, 1, 2, 3, 4};
  int episodes_per_route = 30;
  std::uint64_t seed = 20240;
  double p_infraction = 0.5;
  double epsilon_rd = 1.5;
  bool pooled_ns = false;
};

struct RewardSettings {
  RewardConfig base;       // m_v / d_m filled from env, m_e possibly auto
  bool m_e_auto = true;
};

// One document fully determines a run.
struct RunConfig {
  int schema_version = 1;
  WorldConfig env;                 // route/arena/pedestrian_count filled per episode
  PolicySizes sizes;
  std::string models_dir = "models";
  TrainHyper il;
  PPOConfig ppo;
  std::vector<int> train_routes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string train_density = "high";
  RewardSettings reward;
  EnergyConfig energy;
  LatencyConfig latency;
  std::string latency_profile = "table-consistent";
  EvalConfig eval;
};

inline PayloadMode parse_payload_mode(const std::string& s) {
  if (s == "raw") return PayloadMode::kRaw;
  if (s == "embedding") return PayloadMode::kEmbedding;
  throw ConfigError("payload mode must be raw|embedding, got '" + s + "'");
}

inline LatencyModel parse_latency_model(const std::string& s) {
  if (s == "gaussian") return LatencyModel::kGaussian;
  if (s == "pareto") return LatencyModel::kPareto;
  throw ConfigError("latency model must be gaussian|pareto, got '" + s + "'");
}

inline LatencyProfile parse_latency_profile(const std::string& s) {
  if (s == "paper-supp") return LatencyProfile::kPaperSupp;
  if (s == "table-consistent") return LatencyProfile::kTableConsistent;
  throw ConfigError("latency profile must be paper-supp|table-consistent, got '" + s + "'");
}

// Parse and validate a config document over the built-in defaults. Unknown
// keys anywhere are an error.
inline RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  cfgdetail::Section root(doc, "");
  const int version = root.value<int>("schema_version", 1);
  if (version != 1) throw ConfigError("unsupported schema_version");

  if (const json* env = root.sub("env")) {
    cfgdetail::Section s(*env, "env");
    cfg.env.dt = s.value("dt", cfg.env.dt);
    cfg.env.max_steps = s.value("max_steps", cfg.env.max_steps);
    cfg.env.robot_radius = s.value("robot_radius", cfg.env.robot_radius);
    cfg.env.pedestrian_radius = s.value("pedestrian_radius", cfg.env.pedestrian_radius);
    cfg.env.goal_radius = s.value("goal_radius", cfg.env.goal_radius);
    cfg.env.deviation_truncate = s.value("deviation_truncate", cfg.env.deviation_truncate);
    cfg.env.sensing_range = s.value("sensing_range", cfg.env.sensing_range);
    cfg.env.ray_count = s.value("ray_count", cfg.env.ray_count);
    cfg.env.d_m = s.value("d_m", cfg.env.d_m);
    cfg.env.m_v = s.value("m_v", cfg.env.m_v);
    cfg.env.route_length_max = s.value("route_length_max", cfg.env.route_length_max);
    cfg.env.spawn_half_width = s.value("spawn_half_width", cfg.env.spawn_half_width);
    cfg.env.arena_margin = s.value("arena_margin", cfg.env.arena_margin);
    cfg.env.ped_cross_spread = s.value("ped_cross_spread", cfg.env.ped_cross_spread);
    cfg.env.polyline_geodesic = s.value("polyline_geodesic", cfg.env.polyline_geodesic);
    const std::vector<double> speed = s.value<std::vector<double>>(
        "pedestrian_speed", {cfg.env.ped_speed_min, cfg.env.ped_speed_max});
    if (speed.size() != 2) throw ConfigError("env.pedestrian_speed must be [min, max]");
    cfg.env.ped_speed_min = speed[0];
    cfg.env.ped_speed_max = speed[1];
    s.done();
  }

  if (const json* models = root.sub("models")) {
    cfgdetail::Section s(*models, "models");
    cfg.sizes.embedding_dim = s.value("embedding_dim", cfg.sizes.embedding_dim);
    cfg.ppo.history_k = s.value("k", cfg.ppo.history_k);
    cfg.sizes.trunk_hidden = s.value("trunk_hidden", cfg.sizes.trunk_hidden);
    cfg.sizes.local_hidden = s.value("local_hidden", cfg.sizes.local_hidden);
    cfg.sizes.cloud_body = s.value("cloud_body", cfg.sizes.cloud_body);
    cfg.sizes.cloud_head_hidden = s.value("cloud_head_hidden", cfg.sizes.cloud_head_hidden);
    cfg.models_dir = s.value("dir", cfg.models_dir);
    if (const json* il = s.sub("il")) {
      cfgdetail::Section t(*il, "models.il");
      cfg.il.epochs = t.value("epochs", cfg.il.epochs);
      cfg.il.lr = t.value("lr", cfg.il.lr);
      cfg.il.weight_decay = t.value("weight_decay", cfg.il.weight_decay);
      cfg.il.batch_size = t.value("batch_size", cfg.il.batch_size);
      cfg.il.val_fraction = t.value("val_fraction", cfg.il.val_fraction);
      t.done();
    }
    s.done();
  }

  if (const json* ppo = root.sub("ppo")) {
    cfgdetail::Section s(*ppo, "ppo");
    cfg.ppo.gamma = s.value("gamma", cfg.ppo.gamma);
    cfg.ppo.gae_lambda = s.value("gae_lambda", cfg.ppo.gae_lambda);
    cfg.ppo.clip = s.value("clip", cfg.ppo.clip);
    cfg.ppo.update_epochs = s.value("update_epochs", cfg.ppo.update_epochs);
    cfg.ppo.minibatch_size = s.value("minibatch_size", cfg.ppo.minibatch_size);
    cfg.ppo.policy_lr = s.value("policy_lr", cfg.ppo.policy_lr);
    cfg.ppo.value_lr = s.value("value_lr", cfg.ppo.value_lr);
    cfg.ppo.entropy_coef = s.value("entropy_coef", cfg.ppo.entropy_coef);
    cfg.ppo.value_coef = s.value("value_coef", cfg.ppo.value_coef);
    cfg.ppo.episodes = s.value("episodes", cfg.ppo.episodes);
    cfg.ppo.policy_hidden = s.value("policy_hidden", cfg.ppo.policy_hidden);
    cfg.ppo.value_hidden = s.value("value_hidden", cfg.ppo.value_hidden);
    cfg.ppo.history_enabled = s.value("history_enabled", cfg.ppo.history_enabled);
    cfg.ppo.eval_every = s.value("eval_every", cfg.ppo.eval_every);
    cfg.ppo.eval_seeds = s.value("eval_seeds", cfg.ppo.eval_seeds);
    cfg.train_routes = s.value("train_routes", cfg.train_routes);
    cfg.train_density = s.value("train_density", cfg.train_density);
    s.done();
  }

  if (const json* reward = root.sub("reward")) {
    cfgdetail::Section s(*reward, "reward");
    cfg.reward.base.alpha = s.value("alpha", cfg.reward.base.alpha);
    cfg.reward.base.epsilon = s.value("epsilon", cfg.reward.base.epsilon);
    if (const json* me = s.sub("m_e")) {
      if (me->is_string() && me->get<std::string>() == "auto") {
        cfg.reward.m_e_auto = true;
      } else if (me->is_number()) {
        cfg.reward.base.m_e = me->get<double>();
        cfg.reward.m_e_auto = false;
      } else {
        throw ConfigError("reward.m_e must be a number or \"auto\"");
      }
    }
    cfg.reward.base.collision_penalty = s.value("collision_penalty", cfg.reward.base.collision_penalty);
    const std::vector<double> w = s.value<std::vector<double>>(
        "additive_weights", {cfg.reward.base.additive_weights.begin(), cfg.reward.base.additive_weights.end()});
    if (w.size() != 4) throw ConfigError("reward.additive_weights must have 4 entries");
    for (std::size_t i = 0; i < 4; ++i) cfg.reward.base.additive_weights[i] = w[i];
    cfg.reward.base.enable_geo = s.value("enable_geo", cfg.reward.base.enable_geo);
    cfg.reward.base.enable_speed = s.value("enable_speed", cfg.reward.base.enable_speed);
    cfg.reward.base.enable_energy = s.value("enable_energy", cfg.reward.base.enable_energy);
    cfg.reward.base.enable_action = s.value("enable_action", cfg.reward.base.enable_action);
    s.done();
  }

  if (const json* costs = root.sub("costs")) {
    cfgdetail::Section s(*costs, "costs");
    if (const json* energy = s.sub("energy")) {
      cfgdetail::Section t(*energy, "costs.energy");
      cfg.energy.e_local = t.value("e_local", cfg.energy.e_local);
      cfg.energy.e_cloud = t.value("e_cloud", cfg.energy.e_cloud);
      cfg.energy.joule_per_byte = t.value("joule_per_byte", cfg.energy.joule_per_byte);
      cfg.energy.raw_comm_energy = t.value("raw_comm_energy", cfg.energy.raw_comm_energy);
      cfg.energy.embedding_comm_energy = t.value("embedding_comm_energy", cfg.energy.embedding_comm_energy);
      cfg.energy.joule_per_flop = t.value("joule_per_flop", cfg.energy.joule_per_flop);
      cfg.energy.payload_mode = parse_payload_mode(
          t.value<std::string>("payload_mode", cfg.energy.payload_mode == PayloadMode::kRaw ? "raw" : "embedding"));
      cfg.energy.recompute_from_bytes = t.value("recompute_from_bytes", cfg.energy.recompute_from_bytes);
      cfg.energy.raw_payload_bytes = t.value("raw_payload_bytes", cfg.energy.raw_payload_bytes);
      cfg.energy.embedding_payload_bytes = t.value("embedding_payload_bytes", cfg.energy.embedding_payload_bytes);
      t.done();
    }
    if (const json* latency = s.sub("latency")) {
      cfgdetail::Section t(*latency, "costs.latency");
      cfg.latency_profile = t.value<std::string>("profile", cfg.latency_profile);
      apply_latency_profile(cfg.latency, parse_latency_profile(cfg.latency_profile));
      cfg.latency.model = parse_latency_model(
          t.value<std::string>("model", cfg.latency.model == LatencyModel::kPareto ? "pareto" : "gaussian"));
      cfg.latency.mu = t.value("mu", cfg.latency.mu);
      cfg.latency.sigma = t.value("sigma", cfg.latency.sigma);
      cfg.latency.pareto_xm = t.value("pareto_xm", cfg.latency.pareto_xm);
      cfg.latency.pareto_shape = t.value("pareto_shape", cfg.latency.pareto_shape);
      cfg.latency.t_local_infer = t.value("t_local_infer", cfg.latency.t_local_infer);
      cfg.latency.t_cloud_infer = t.value("t_cloud_infer", cfg.latency.t_cloud_infer);
      t.done();
    }
    s.done();
  } else {
    apply_latency_profile(cfg.latency, parse_latency_profile(cfg.latency_profile));
  }

  if (const json* eval = root.sub("eval")) {
    cfgdetail::Section s(*eval, "eval");
    cfg.eval.routes = s.value("routes", cfg.eval.routes);
    cfg.eval.episodes_per_route = s.value("episodes_per_route", cfg.eval.episodes_per_route);
    cfg.eval.seed = s.value("seed", cfg.eval.seed);
    cfg.eval.p_infraction = s.value("p_infraction", cfg.eval.p_infraction);
    cfg.eval.epsilon_rd = s.value("epsilon_rd", cfg.eval.epsilon_rd);
    cfg.eval.pooled_ns = s.value("pooled_ns", cfg.eval.pooled_ns);
    s.done();
  }

  root.done();

  cfg.reward.base.m_v = cfg.env.m_v;
  cfg.reward.base.d_m = cfg.env.d_m;
  cfg.energy.validate();
  cfg.latency.validate();
  cfg.ppo.validate();
  for (int r : cfg.train_routes)
    if (r < 0 || r >= kRouteFixtureCount) throw ConfigError("ppo.train_routes index out of range");
  for (int r : cfg.eval.routes)
    if (r < 0 || r >= kRouteFixtureCount) throw ConfigError("eval.routes index out of range");
  if (cfg.eval.episodes_per_route < 0) throw ConfigError("eval.episodes_per_route must be >= 0");
  return cfg;
}

inline RunConfig default_run_config() { return parse_run_config(json::object()); }

// Maximum per-step energy under the active payload mode; used when m_e is
// left on auto.
inline RewardConfig resolved_reward(const RunConfig& cfg) {
  RewardConfig r = cfg.reward.base;
  if (cfg.reward.m_e_auto)
    r.m_e = std::max(step_energy(StepSource::kLocal, cfg.energy), step_energy(StepSource::kCloud, cfg.energy));
  r.validate();
  return r;
}

// Mirrors the base energy figures; deliberately not payload-adjusted so raw
// transmission shows up as a (clamped) energy penalty.
inline MetricConfig resolved_metrics(const RunConfig& cfg) {
  MetricConfig m;
  m.p_infraction = cfg.eval.p_infraction;
  m.epsilon_rd = cfg.eval.epsilon_rd;
  m.e_local = cfg.energy.e_local;
  m.e_cloud = cfg.energy.e_cloud;
  m.pooled_ns = cfg.eval.pooled_ns;
  return m;
}

inline WorldConfig world_for(const RunConfig& cfg, int route_index, int pedestrian_count) {
  return make_world(route_index, pedestrian_count, cfg.env);
}

// Full resolved dump; nlohmann objects keep keys sorted so the result is
// canonical and hashable.
inline json run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["schema_version"] = cfg.schema_version;
  doc["env"] = {
      {"dt", cfg.env.dt},
      {"max_steps", cfg.env.max_steps},
      {"robot_radius", cfg.env.robot_radius},
      {"pedestrian_radius", cfg.env.pedestrian_radius},
      {"goal_radius", cfg.env.goal_radius},
      {"deviation_truncate", cfg.env.deviation_truncate},
      {"sensing_range", cfg.env.sensing_range},
      {"ray_count", cfg.env.ray_count},
      {"d_m", cfg.env.d_m},
      {"m_v", cfg.env.m_v},
      {"route_length_max", cfg.env.route_length_max},
      {"spawn_half_width", cfg.env.spawn_half_width},
      {"arena_margin", cfg.env.arena_margin},
      {"ped_cross_spread", cfg.env.ped_cross_spread},
      {"polyline_geodesic", cfg.env.polyline_geodesic},
      {"pedestrian_speed", {cfg.env.ped_speed_min, cfg.env.ped_speed_max}},
  };
  doc["models"] = {
      {"embedding_dim", cfg.sizes.embedding_dim},
      {"k", cfg.ppo.history_k},
      {"trunk_hidden", cfg.sizes.trunk_hidden},
      {"local_hidden", cfg.sizes.local_hidden},
      {"cloud_body", cfg.sizes.cloud_body},
      {"cloud_head_hidden", cfg.sizes.cloud_head_hidden},
      {"dir", cfg.models_dir},
      {"il",
       {{"epochs", cfg.il.epochs},
        {"lr", cfg.il.lr},
        {"weight_decay", cfg.il.weight_decay},
        {"batch_size", cfg.il.batch_size},
        {"val_fraction", cfg.il.val_fraction}}},
  };
  doc["ppo"] = {
      {"gamma", cfg.ppo.gamma},
      {"gae_lambda", cfg.ppo.gae_lambda},
      {"clip", cfg.ppo.clip},
      {"update_epochs", cfg.ppo.update_epochs},
      {"minibatch_size", cfg.ppo.minibatch_size},
      {"policy_lr", cfg.ppo.policy_lr},
      {"value_lr", cfg.ppo.value_lr},
      {"entropy_coef", cfg.ppo.entropy_coef},
      {"value_coef", cfg.ppo.value_coef},
      {"episodes", cfg.ppo.episodes},
      {"policy_hidden", cfg.ppo.policy_hidden},
      {"value_hidden", cfg.ppo.value_hidden},
      {"history_enabled", cfg.ppo.history_enabled},
      {"eval_every", cfg.ppo.eval_every},
      {"eval_seeds", cfg.ppo.eval_seeds},
      {"train_routes", cfg.train_routes},
      {"train_density", cfg.train_density},
  };
  doc["reward"] = {
      {"alpha", cfg.reward.base.alpha},
      {"epsilon", cfg.reward.base.epsilon},
      {"m_e", cfg.reward.m_e_auto ? json("auto") : json(cfg.reward.base.m_e)},
      {"collision_penalty", cfg.reward.base.collision_penalty},
      {"additive_weights", cfg.reward.base.additive_weights},
      {"enable_geo", cfg.reward.base.enable_geo},
      {"enable_speed", cfg.reward.base.enable_speed},
      {"enable_energy", cfg.reward.base.enable_energy},
      {"enable_action", cfg.reward.base.enable_action},
  };
  doc["costs"] = {
      {"energy",
       {{"e_local", cfg.energy.e_local},
        {"e_cloud", cfg.energy.e_cloud},
        {"joule_per_byte", cfg.energy.joule_per_byte},
        {"raw_comm_energy", cfg.energy.raw_comm_energy},
        {"embedding_comm_energy", cfg.energy.embedding_comm_energy},
        {"joule_per_flop", cfg.energy.joule_per_flop},
        {"payload_mode", cfg.energy.payload_mode == PayloadMode::kRaw ? "raw" : "embedding"},
        {"recompute_from_bytes", cfg.energy.recompute_from_bytes},
        {"raw_payload_bytes", cfg.energy.raw_payload_bytes},
        {"embedding_payload_bytes", cfg.energy.embedding_payload_bytes}}},
      {"latency",
       {{"profile", cfg.latency_profile},
        {"model", cfg.latency.model == LatencyModel::kPareto ? "pareto" : "gaussian"},
        {"mu", cfg.latency.mu},
        {"sigma", cfg.latency.sigma},
        {"pareto_xm", cfg.latency.pareto_xm},
        {"pareto_shape", cfg.latency.pareto_shape},
        {"t_local_infer", cfg.latency.t_local_infer},
        {"t_cloud_infer", cfg.latency.t_cloud_infer}}},
  };
  doc["eval"] = {
      {"routes", cfg.eval.routes},
      {"episodes_per_route", cfg.eval.episodes_per_route},
      {"seed", cfg.eval.seed},
      {"p_infraction", cfg.eval.p_infraction},
      {"epsilon_rd", cfg.eval.epsilon_rd},
      {"pooled_ns", cfg.eval.pooled_ns},
  };
  return doc;
}

}  // namespace unilcd
