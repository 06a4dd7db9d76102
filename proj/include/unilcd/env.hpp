#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "unilcd/rng.hpp"

namespace unilcd {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

struct Aabb {
  Vec2 lo;
  Vec2 hi;

  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
  Vec2 clamp(Vec2 p) const {
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
  }
};

// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// Corridor bounds: route bounding box inflated by `margin`.
inline Aabb derive_arena(const std::vector<Vec2>& route, double margin) {
  Aabb box{{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()},
           {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()}};
  for (const Vec2& p : route) {
    box.lo.x = std::min(box.lo.x, p.x);
    box.lo.y = std::min(box.lo.y, p.y);
    box.hi.x = std::max(box.hi.x, p.x);
    box.hi.y = std::max(box.hi.y, p.y);
  }
  box.lo.x -= margin;
  box.lo.y -= margin;
  box.hi.x += margin;
  box.hi.y += margin;
  return box;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct WorldConfig {
  std::vector<Vec2> route;          // ordered waypoints, meters
  double route_length_max = 40.0;
  int pedestrian_count = 30;        // presets: 5 / 15 / 30 / 70
  double ped_speed_min = 0.5;       // m/s
  double ped_speed_max = 1.2;
  Aabb arena;                       // axis-aligned corridor bounds
  double dt = 0.1;                  // control tick, s
  int max_steps = 1500;
  double robot_radius = 0.4;
  double pedestrian_radius = 0.3;
  double goal_radius = 1.0;
  double deviation_truncate = 3.0;
  double sensing_range = 8.0;
  int ray_count = 16;               // forward 180 degrees
  double d_m = 0.3;                 // max per-tick heading change, rad
  double m_v = 1.5;                 // max speed, m/s
  bool polyline_geodesic = false;   // distance to polyline instead of nearest waypoint
  double spawn_half_width = 3.0;    // lateral extent of the pedestrian spawn strip
  double arena_margin = 4.0;        // used when deriving the arena from the route
  double ped_cross_spread = 0.6;    // rad; pedestrians cross the route at +-90 deg +- spread

  void validate() const {
    if (route.size() < 2) throw ConfigError("route needs at least 2 waypoints");
    if (dt <= 0.0) throw ConfigError("dt must be positive");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (deviation_truncate <= goal_radius) throw ConfigError("deviation_truncate must exceed goal_radius");
    if (pedestrian_count < 0) throw ConfigError("pedestrian_count must be >= 0");
    if (ped_speed_min < 0.0 || ped_speed_max < ped_speed_min) throw ConfigError("bad pedestrian speed range");
    if (ray_count < 2) throw ConfigError("ray_count must be >= 2");
    if (sensing_range <= 0.0 || d_m <= 0.0 || m_v <= 0.0) throw ConfigError("bad kinematic bounds");
    if (polyline_length(route) > route_length_max + 1e-9) throw ConfigError("route exceeds route_length_max");
    if (!(arena.lo.x < arena.hi.x && arena.lo.y < arena.hi.y)) throw ConfigError("degenerate arena");
    for (const Vec2& p : route)
      if (!arena.contains(p)) throw ConfigError("route leaves the arena");
  }
};

struct RobotState {
  Vec2 position;
  double heading = 0.0;  // wrapped to (-pi, pi]
  double speed = 0.0;    // in [0, m_v]
};

struct PedestrianState {
  Vec2 position;
  Vec2 velocity;
  int respawn_ticks = 0;  // > 0: despawned, re-enters when the countdown hits 0

  bool active() const { return respawn_ticks == 0; }
};

enum class Mode { kTrain, kEval };

struct EnvState {
  RobotState robot;
  std::vector<PedestrianState> pedestrians;
  int step_index = 0;
  std::size_t next_waypoint = 1;  // imminent waypoint index
  double meters_traveled = 0.0;
  int collision_count = 0;
  Rng rng{0};
  Mode mode = Mode::kTrain;
  bool done = false;
  double progress_arclen = 0.0;  // farthest arc length reached, monotone

  bool operator==(const EnvState& o) const {
    return robot.position == o.robot.position && robot.heading == o.robot.heading &&
           robot.speed == o.robot.speed && step_index == o.step_index &&
           next_waypoint == o.next_waypoint && meters_traveled == o.meters_traveled &&
           collision_count == o.collision_count && rng == o.rng && done == o.done &&
           progress_arclen == o.progress_arclen && pedestrians_equal(o);
  }

  bool pedestrians_equal(const EnvState& o) const {
    if (pedestrians.size() != o.pedestrians.size()) return false;
    for (std::size_t i = 0; i < pedestrians.size(); ++i) {
      if (!(pedestrians[i].position == o.pedestrians[i].position) ||
          !(pedestrians[i].velocity == o.pedestrians[i].velocity) ||
          pedestrians[i].respawn_ticks != o.pedestrians[i].respawn_ticks)
        return false;
    }
    return true;
  }
};

// Rays + ego-frame goal offset + normalized speed. Everything bounded.
struct Observation {
  std::vector<double> rays;  // clear distance fraction, 1 = nothing within range
  double goal_x = 0.0;       // ego frame, clamped to [-1, 1]
  double goal_y = 0.0;
  double speed_norm = 0.0;   // in [0, 1]

  std::vector<double> as_vector() const {
    std::vector<double> v = rays;
    v.push_back(goal_x);
    v.push_back(goal_y);
    v.push_back(speed_norm);
    return v;
  }
  static std::size_t width(int ray_count) { return static_cast<std::size_t>(ray_count) + 3; }
};

struct Action {
  double d = 0.0;  // heading change per tick, rad
  double v = 0.0;  // commanded speed, m/s
};

struct StepEvents {
  bool collision = false;
  bool reached_goal = false;
  bool deviated = false;
  bool out_of_steps = false;
};

struct StepOutcome {
  Observation observation;
  double d_geo = 0.0;     // route deviation, meters
  double advanced = 0.0;  // route progress gained this tick, meters
  StepEvents events;
  bool done = false;
};

// Distance from `position` to the route. Default is the minimum over
// waypoints; the polyline variant measures to the nearest segment.
inline double geodesic_distance(Vec2 position, const std::vector<Vec2>& route,
                                bool polyline = false) {
  if (route.empty()) throw std::invalid_argument("geodesic_distance: empty route");
  double best = std::numeric_limits<double>::max();
  if (!polyline || route.size() == 1) {
    for (const Vec2& w : route) best = std::min(best, (position - w).norm());
    return best;
  }
  for (std::size_t i = 1; i < route.size(); ++i) {
    const Vec2 a = route[i - 1], b = route[i];
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (position - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, (position - (a + ab * t)).norm());
  }
  return best;
}

namespace detail {

// Arc length of the nearest-point projection of `p` onto the route polyline.
inline double project_arclen(Vec2 p, const std::vector<Vec2>& route) {
  double best_d = std::numeric_limits<double>::max();
  double best_s = 0.0;
  double s = 0.0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    const Vec2 a = route[i - 1], b = route[i];
    const Vec2 ab = b - a;
    const double len = ab.norm();
    const double len2 = len * len;
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double d = (p - (a + ab * t)).norm();
    if (d < best_d) {
      best_d = d;
      best_s = s + t * len;
    }
    s += len;
  }
  return best_s;
}

// Smallest non-negative ray parameter hitting the disc, or +inf.
inline double ray_disc_hit(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 rel = center - origin;
  const double b = dir.dot(rel);
  const double cc = rel.dot(rel) - radius * radius;
  if (cc <= 0.0) return 0.0;  // origin inside the disc
  const double disc = b * b - cc;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = b - std::sqrt(disc);
  return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

// Distance along the ray until it exits the arena (origin assumed inside).
inline double ray_wall_hit(Vec2 origin, Vec2 dir, const Aabb& arena) {
  double t = std::numeric_limits<double>::infinity();
  if (dir.x > 0.0)
    t = std::min(t, (arena.hi.x - origin.x) / dir.x);
  else if (dir.x < 0.0)
    t = std::min(t, (arena.lo.x - origin.x) / dir.x);
  if (dir.y > 0.0)
    t = std::min(t, (arena.hi.y - origin.y) / dir.y);
  else if (dir.y < 0.0)
    t = std::min(t, (arena.lo.y - origin.y) / dir.y);
  return std::max(t, 0.0);
}

// Point at arc length `s` plus its left-hand normal.
inline void point_on_route(const std::vector<Vec2>& route, double s, Vec2& point, Vec2& normal) {
  double acc = 0.0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    const Vec2 a = route[i - 1], b = route[i];
    const double len = (b - a).norm();
    if (acc + len >= s || i + 1 == route.size()) {
      const double t = len > 0.0 ? std::clamp((s - acc) / len, 0.0, 1.0) : 0.0;
      point = a + (b - a) * t;
      const Vec2 dir = len > 0.0 ? (b - a) * (1.0 / len) : Vec2{1.0, 0.0};
      normal = {-dir.y, dir.x};
      return;
    }
    acc += len;
  }
  point = route.back();
  normal = {0.0, 1.0};
}

struct PedestrianSpawn {
  Vec2 position;
  Vec2 route_tangent;  // at the spawn arc length
};

// Uniform position in the corridor strip along the route, at least
// `clearance` away from `avoid`.
inline PedestrianSpawn spawn_in_strip(const WorldConfig& cfg, Rng& rng, Vec2 avoid,
                                      double clearance) {
  const double total = polyline_length(cfg.route);
  for (int attempt = 0; attempt < 256; ++attempt) {
    const double s = rng.uniform(0.0, total);
    const double lateral = rng.uniform(-cfg.spawn_half_width, cfg.spawn_half_width);
    Vec2 point, normal;
    point_on_route(cfg.route, s, point, normal);
    Vec2 pos = cfg.arena.clamp(point + normal * lateral);
    if ((pos - avoid).norm() >= clearance) return {pos, {normal.y, -normal.x}};
  }
  // Strip is essentially covered by the exclusion disc; fall back to a corner.
  return {cfg.arena.clamp(avoid + Vec2{clearance, clearance}), {1.0, 0.0}};
}

// Crossing traffic: pedestrians move roughly perpendicular to the route
// (either side), like cross-flows over a sidewalk.
inline Vec2 crossing_velocity(const WorldConfig& cfg, Rng& rng, Vec2 route_tangent) {
  const double base = std::atan2(route_tangent.y, route_tangent.x);
  const double side = rng.uniform01() < 0.5 ? kPi / 2.0 : -kPi / 2.0;
  const double angle = base + side + rng.uniform(-cfg.ped_cross_spread, cfg.ped_cross_spread);
  const double speed = rng.uniform(cfg.ped_speed_min, cfg.ped_speed_max);
  return {speed * std::cos(angle), speed * std::sin(angle)};
}

}  // namespace detail

inline Observation sense(const EnvState& state, const WorldConfig& config);

// Robot at the route start facing the first segment, pedestrians uniform in
// the corridor strip excluding a 2 m disc around the robot. Deterministic
// given (config, seed).
inline std::pair<EnvState, Observation> new_episode(const WorldConfig& config, std::uint64_t seed,
                                                    Mode mode) {
  config.validate();
  EnvState state;
  state.mode = mode;
  state.rng = Rng(seed);
  state.robot.position = config.route.front();
  const Vec2 first = config.route[1] - config.route[0];
  state.robot.heading = std::atan2(first.y, first.x);
  state.robot.speed = 0.0;
  state.next_waypoint = 1;
  state.pedestrians.reserve(static_cast<std::size_t>(config.pedestrian_count));
  for (int i = 0; i < config.pedestrian_count; ++i) {
    PedestrianState ped;
    const detail::PedestrianSpawn spawn =
        detail::spawn_in_strip(config, state.rng, state.robot.position, 2.0);
    ped.position = spawn.position;
    ped.velocity = detail::crossing_velocity(config, state.rng, spawn.route_tangent);
    state.pedestrians.push_back(ped);
  }
  return {state, sense(state, config)};
}

// Ray i points at heading + (i/(ray_count-1) - 1/2) * pi; the reading is the
// clear distance to the nearest pedestrian disc or arena wall, normalized by
// sensing_range and clamped to [0, 1].
inline Observation sense(const EnvState& state, const WorldConfig& config) {
  Observation obs;
  obs.rays.resize(static_cast<std::size_t>(config.ray_count));
  const Vec2 origin = state.robot.position;
  for (int i = 0; i < config.ray_count; ++i) {
    const double bearing = state.robot.heading +
                           (static_cast<double>(i) / (config.ray_count - 1) - 0.5) * kPi;
    const Vec2 dir{std::cos(bearing), std::sin(bearing)};
    double t = detail::ray_wall_hit(origin, dir, config.arena);
    for (const PedestrianState& ped : state.pedestrians) {
      if (!ped.active()) continue;
      t = std::min(t, detail::ray_disc_hit(origin, dir, ped.position, config.pedestrian_radius));
    }
    obs.rays[static_cast<std::size_t>(i)] = std::clamp(t / config.sensing_range, 0.0, 1.0);
  }
  const std::size_t target = std::min(state.next_waypoint, config.route.size() - 1);
  const Vec2 rel = config.route[target] - origin;
  const double c = std::cos(-state.robot.heading), s = std::sin(-state.robot.heading);
  obs.goal_x = std::clamp((rel.x * c - rel.y * s) / config.sensing_range, -1.0, 1.0);
  obs.goal_y = std::clamp((rel.x * s + rel.y * c) / config.sensing_range, -1.0, 1.0);
  obs.speed_norm = std::clamp(state.robot.speed / config.m_v, 0.0, 1.0);
  return obs;
}

inline double route_progress(const EnvState& state, const std::vector<Vec2>& route) {
  const double total = polyline_length(route);
  if (total <= 0.0) throw std::invalid_argument("route_progress: zero-length route");
  return std::clamp(state.progress_arclen / total, 0.0, 1.0);
}

// One control tick. Train-mode collisions terminate; eval-mode collisions
// despawn the pedestrian for a 2 s grace period and the episode continues.
inline StepOutcome step(EnvState& state, const Action& action, const WorldConfig& config) {
  if (state.done) throw UsageError("step: episode already done");

  // robot kinematics
  const double d = std::clamp(action.d, -config.d_m, config.d_m);
  const double v = std::clamp(action.v, 0.0, config.m_v);
  state.robot.heading = wrap_angle(state.robot.heading + d);
  state.robot.speed = v;
  const Vec2 before = state.robot.position;
  Vec2 pos = before + Vec2{std::cos(state.robot.heading), std::sin(state.robot.heading)} * (v * config.dt);
  pos = config.arena.clamp(pos);
  state.robot.position = pos;
  state.meters_traveled += (pos - before).norm();

  // pedestrians: straight lines with specular wall reflection
  for (PedestrianState& ped : state.pedestrians) {
    if (!ped.active()) {
      if (--ped.respawn_ticks == 0) {
        const detail::PedestrianSpawn spawn =
            detail::spawn_in_strip(config, state.rng, state.robot.position, 2.0);
        ped.position = spawn.position;
        ped.velocity = detail::crossing_velocity(config, state.rng, spawn.route_tangent);
      }
      continue;
    }
    Vec2 p = ped.position + ped.velocity * config.dt;
    if (p.x < config.arena.lo.x) { p.x = 2.0 * config.arena.lo.x - p.x; ped.velocity.x = -ped.velocity.x; }
    if (p.x > config.arena.hi.x) { p.x = 2.0 * config.arena.hi.x - p.x; ped.velocity.x = -ped.velocity.x; }
    if (p.y < config.arena.lo.y) { p.y = 2.0 * config.arena.lo.y - p.y; ped.velocity.y = -ped.velocity.y; }
    if (p.y > config.arena.hi.y) { p.y = 2.0 * config.arena.hi.y - p.y; ped.velocity.y = -ped.velocity.y; }
    ped.position = config.arena.clamp(p);
  }

  // collisions
  StepOutcome out;
  const double collide_dist = config.robot_radius + config.pedestrian_radius;
  const int grace_ticks = static_cast<int>(std::ceil(2.0 / config.dt));
  for (PedestrianState& ped : state.pedestrians) {
    if (!ped.active()) continue;
    if ((ped.position - state.robot.position).norm() < collide_dist) {
      out.events.collision = true;
      state.collision_count += 1;
      if (state.mode == Mode::kEval)
        ped.respawn_ticks = grace_ticks;
      else
        break;
    }
  }

  // waypoint bookkeeping and progress
  while (state.next_waypoint + 1 < config.route.size() &&
         (config.route[state.next_waypoint] - state.robot.position).norm() <= config.goal_radius)
    state.next_waypoint += 1;
  const double arclen = detail::project_arclen(state.robot.position, config.route);
  const double prev_progress = state.progress_arclen;
  state.progress_arclen = std::max(state.progress_arclen, arclen);
  out.advanced = state.progress_arclen - prev_progress;

  out.d_geo = geodesic_distance(state.robot.position, config.route, config.polyline_geodesic);
  state.step_index += 1;

  out.events.reached_goal = (config.route.back() - state.robot.position).norm() <= config.goal_radius;
  out.events.deviated = out.d_geo > config.deviation_truncate;
  out.events.out_of_steps = state.step_index >= config.max_steps;
  if (out.events.reached_goal) state.progress_arclen = polyline_length(config.route);

  const bool collision_terminates = state.mode == Mode::kTrain && out.events.collision;
  out.done = collision_terminates || out.events.reached_goal || out.events.deviated ||
             out.events.out_of_steps;
  state.done = out.done;
  out.observation = sense(state, config);
  return out;
}

// Pure pursuit toward the imminent waypoint; halts while any pedestrian is
// within 2 m and +-30 degrees of the heading, resumes once clear.
inline Action expert_action(const EnvState& state, const WorldConfig& config) {
  const std::size_t target = std::min(state.next_waypoint, config.route.size() - 1);
  const Vec2 rel = config.route[target] - state.robot.position;
  const double bearing_error = wrap_angle(std::atan2(rel.y, rel.x) - state.robot.heading);
  Action a;
  a.d = std::clamp(bearing_error, -config.d_m, config.d_m);
  a.v = config.m_v;
  for (const PedestrianState& ped : state.pedestrians) {
    if (!ped.active()) continue;
    const Vec2 to_ped = ped.position - state.robot.position;
    if (to_ped.norm() > 2.0) continue;
    const double off = wrap_angle(std::atan2(to_ped.y, to_ped.x) - state.robot.heading);
    if (std::fabs(off) <= kPi / 6.0) {
      a.v = 0.0;
      break;
    }
  }
  return a;
}

}  // namespace unilcd
