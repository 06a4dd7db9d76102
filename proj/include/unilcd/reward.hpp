#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace unilcd {

struct RewardConfig {
  double alpha = 0.25;              // exponent scaling the multiplicative product
  double epsilon = 0.97;            // extreme-action clip threshold
  double m_v = 1.5;                 // max speed, m/s
  double d_m = 0.3;                 // max per-tick heading change, rad
  double m_e = 1.5;                 // max energy cost at one step, J
  double collision_penalty = 10.0;  // positive magnitude
  std::array<double, 4> additive_weights{0.25, 0.25, 0.25, 1.0};  // (geo, speed, energy, collision)

  // Ablation toggles; a disabled term drops out of the composition.
  bool enable_geo = true;
  bool enable_speed = true;
  bool enable_energy = true;
  bool enable_action = true;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
    if (collision_penalty <= 1.0) throw std::invalid_argument("collision_penalty must exceed 1");
    if (m_e <= 0.0 || m_v <= 0.0 || d_m <= 0.0) throw std::invalid_argument("bad reward bounds");
  }
};

struct RewardBreakdown {
  double r_geo = 0.0;
  double r_speed = 0.0;
  double r_energy = 0.0;
  double r_action = 0.0;  // 0 or 1
  bool collision = false;
  double total = 0.0;
  double additive = 0.0;
};

// 1 - tanh(d_geo): full reward on the route, decaying with deviation.
inline double geo_component(double d_geo) {
  if (d_geo < 0.0) throw std::invalid_argument("geo_component: negative distance");
  return 1.0 - std::tanh(d_geo);
}

inline double speed_component(double v, double m_v) {
  if (v < 0.0 || v > m_v) throw std::invalid_argument("speed_component: speed out of range");
  return v / m_v;
}

inline double energy_component(double e_step, double m_e) {
  if (e_step < 0.0 || e_step > m_e) throw std::invalid_argument("energy_component: energy out of range");
  return 1.0 - e_step / m_e;
}

// Zero out the step when either standardized action is at its extreme.
inline double action_clip(double r_speed, double d, double d_m, double epsilon) {
  const bool speed_ok = std::fabs(r_speed) < epsilon;
  const bool turn_ok = std::fabs(d / d_m) < epsilon;
  return speed_ok && turn_ok ? 1.0 : 0.0;
}

// Additive baseline: weighted sum of geo/speed/energy plus the collision
// term. Note no action-clip term in this form.
inline double compose_additive(double r_geo, double r_speed, double r_energy, bool collision,
                               const RewardConfig& cfg) {
  double r = 0.0;
  if (cfg.enable_geo) r += cfg.additive_weights[0] * r_geo;
  if (cfg.enable_speed) r += cfg.additive_weights[1] * r_speed;
  if (cfg.enable_energy) r += cfg.additive_weights[2] * r_energy;
  if (collision) r -= cfg.additive_weights[3] * cfg.collision_penalty;
  return r;
}

// total = (r_geo * r_speed * r_energy * r_action)^alpha - collision penalty.
inline RewardBreakdown compose(double d_geo, double v, double e_step, double d, bool collision,
                               const RewardConfig& cfg) {
  RewardBreakdown b;
  b.r_geo = geo_component(d_geo);
  b.r_speed = speed_component(v, cfg.m_v);
  b.r_energy = energy_component(e_step, cfg.m_e);
  b.r_action = action_clip(b.r_speed, d, cfg.d_m, cfg.epsilon);
  b.collision = collision;
  double product = 1.0;
  if (cfg.enable_geo) product *= b.r_geo;
  if (cfg.enable_speed) product *= b.r_speed;
  if (cfg.enable_energy) product *= b.r_energy;
  if (cfg.enable_action) product *= b.r_action;
  b.total = std::pow(product, cfg.alpha) - (collision ? cfg.collision_penalty : 0.0);
  b.additive = compose_additive(b.r_geo, b.r_speed, b.r_energy, collision, cfg);
  return b;
}

}  // namespace unilcd
