#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "unilcd/env.hpp"

namespace unilcd {

// Resample a polyline to (roughly) uniform spacing, keeping both endpoints.
inline std::vector<Vec2> resample_polyline(const std::vector<Vec2>& pts, double spacing) {
  if (pts.size() < 2) throw std::invalid_argument("resample_polyline: need 2+ points");
  std::vector<Vec2> out{pts.front()};
  double residual = spacing;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Vec2 a = pts[i - 1];
    const Vec2 b = pts[i];
    double seg = (b - a).norm();
    while (seg >= residual) {
      const Vec2 dir = (b - a) * (1.0 / seg);
      a = a + dir * residual;
      out.push_back(a);
      seg -= residual;
      residual = spacing;
    }
    residual -= seg;
  }
  if ((out.back() - pts.back()).norm() > 1e-9) out.push_back(pts.back());
  return out;
}

namespace detail {

inline std::vector<Vec2> dense_arc(Vec2 start, double heading, double radius, double sweep_rad,
                                   int samples = 256) {
  // positive sweep turns left
  std::vector<Vec2> pts;
  const double sign = sweep_rad >= 0.0 ? 1.0 : -1.0;
  const Vec2 center = start + Vec2{-std::sin(heading), std::cos(heading)} * (sign * radius);
  const double start_angle = std::atan2(start.y - center.y, start.x - center.x);
  for (int i = 0; i <= samples; ++i) {
    const double a = start_angle + sweep_rad * static_cast<double>(i) / samples;
    pts.push_back(center + Vec2{std::cos(a), std::sin(a)} * radius);
  }
  return pts;
}

inline void append(std::vector<Vec2>& dst, const std::vector<Vec2>& src) {
  dst.insert(dst.end(), src.begin() + 1, src.end());
}

inline std::vector<Vec2> straight(double length) {
  return {{0.0, 0.0}, {length, 0.0}};
}

inline std::vector<Vec2> l_bend(double leg1, double radius, double leg2, double turn_sign) {
  std::vector<Vec2> pts{{0.0, 0.0}, {leg1, 0.0}};
  append(pts, dense_arc({leg1, 0.0}, 0.0, radius, turn_sign * kPi / 2.0));
  const Vec2 end = pts.back();
  pts.push_back(end + Vec2{0.0, turn_sign * leg2});
  return pts;
}

inline std::vector<Vec2> sinusoid(double span, double amplitude, double wavelength) {
  std::vector<Vec2> pts;
  const int samples = 512;
  for (int i = 0; i <= samples; ++i) {
    const double x = span * static_cast<double>(i) / samples;
    pts.push_back({x, amplitude * std::sin(2.0 * kPi * x / wavelength)});
  }
  return pts;
}

inline std::vector<Vec2> arc_route(double radius, double sweep_deg) {
  return dense_arc({0.0, 0.0}, 0.0, radius, sweep_deg * kPi / 180.0);
}

inline std::vector<Vec2> zigzag() {
  std::vector<Vec2> pts{{0.0, 0.0}, {9.0, 0.0}};
  const double a1 = kPi / 3.0;  // 60 degrees up
  pts.push_back(pts.back() + Vec2{8.0 * std::cos(a1), 8.0 * std::sin(a1)});
  const double a2 = -kPi / 4.0;  // 45 degrees down
  pts.push_back(pts.back() + Vec2{10.0 * std::cos(a2), 10.0 * std::sin(a2)});
  return pts;
}

}  // namespace detail

constexpr int kRouteFixtureCount = 10;

// Ten fixed paths, waypoints ~1 m apart, each at most 40 m long. Half are
// straight or gentle, half bend hard enough that sloppy tracking under crowd
// pressure drifts off the corridor.
inline std::vector<Vec2> route_fixture(int index) {
  std::vector<Vec2> raw;
  switch (index) {
    case 0: raw = detail::straight(32.0); break;
    case 1: raw = detail::straight(39.0); break;
    case 2: raw = detail::l_bend(12.0, 3.0, 12.0, 1.0); break;
    case 3: raw = detail::sinusoid(27.0, 4.0, 16.0); break;
    case 4: raw = detail::arc_route(10.0, 150.0); break;
    case 5: raw = detail::zigzag(); break;
    case 6: raw = detail::straight(24.0); break;
    case 7: raw = detail::arc_route(7.0, 180.0); break;
    case 8: raw = detail::sinusoid(24.0, 3.0, 12.0); break;
    case 9: raw = detail::l_bend(11.0, 4.0, 11.0, -1.0); break;
    default: throw std::out_of_range("route_fixture: index must be in [0, 10)");
  }
  return resample_polyline(raw, 1.0);
}

// World for a fixture route; arena derived from the route bounds.
inline WorldConfig make_world(int route_index, int pedestrian_count, WorldConfig base = {}) {
  base.route = route_fixture(route_index);
  base.pedestrian_count = pedestrian_count;
  base.arena = derive_arena(base.route, base.arena_margin);
  base.validate();
  return base;
}

}  // namespace unilcd
