#include "uavsim/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <string>

namespace uavsim {

UrbanMap::UrbanMap(double x_max, double y_max, std::vector<Building> buildings)
    : x_max_(x_max), y_max_(y_max), buildings_(std::move(buildings)) {
  if (!(x_max_ > 0.0) || !(y_max_ > 0.0)) {
    throw std::invalid_argument("map bounds must be positive");
  }
  for (std::size_t i = 0; i < buildings_.size(); ++i) {
    const Building& b = buildings_[i];
    const std::string tag = "building " + std::to_string(i);
    if (!(b.x_lo < b.x_hi) || !(b.y_lo < b.y_hi)) {
      throw std::invalid_argument(tag + ": empty footprint");
    }
    if (!(b.height > 0.0)) {
      throw std::invalid_argument(tag + ": height must be positive");
    }
    if (b.x_lo < 0.0 || b.y_lo < 0.0 || b.x_hi > x_max_ || b.y_hi > y_max_) {
      throw std::invalid_argument(tag + ": footprint outside map boundary");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (b.overlaps(buildings_[j])) {
        throw std::invalid_argument(tag + " overlaps building " +
                                    std::to_string(j));
      }
    }
  }
}

namespace {

// Clips [t_lo, t_hi] against one slab lo <= origin + t*dir <= hi.
bool clip_slab(double origin, double dir, double lo, double hi, double& t_lo,
               double& t_hi) {
  if (dir == 0.0) return origin >= lo && origin <= hi;
  double t0 = (lo - origin) / dir;
  double t1 = (hi - origin) / dir;
  if (t0 > t1) std::swap(t0, t1);
  t_lo = std::max(t_lo, t0);
  t_hi = std::min(t_hi, t1);
  return t_lo <= t_hi;
}

}  // namespace

std::optional<Interval> segment_footprint_overlap(Vec2 p0, Vec2 p1,
                                                  const Building& b) {
  double t_lo = 0.0;
  double t_hi = 1.0;
  const Vec2 d = p1 - p0;
  if (!clip_slab(p0.x, d.x, b.x_lo, b.x_hi, t_lo, t_hi)) return std::nullopt;
  if (!clip_slab(p0.y, d.y, b.y_lo, b.y_hi, t_lo, t_hi)) return std::nullopt;
  return Interval{t_lo, t_hi};
}

LosVerdict classify_link(Vec3 uav, Vec2 user, const UrbanMap& map) {
  const Vec2 ground{uav.x, uav.y};
  const auto& buildings = map.buildings();
  if (ground == user) {
    // Vertical link: blocked only if the shared ground point is under a roof.
    for (std::size_t i = 0; i < buildings.size(); ++i) {
      if (buildings[i].contains(user)) return {false, i, 1.0};
    }
    return {};
  }
  for (std::size_t i = 0; i < buildings.size(); ++i) {
    const auto overlap = segment_footprint_overlap(ground, user, buildings[i]);
    if (!overlap) continue;
    const double z_min = uav.z * (1.0 - overlap->t_out);
    if (z_min <= buildings[i].height) return {false, i, overlap->t_out};
  }
  return {};
}

bool point_in_any_building(Vec2 p, const UrbanMap& map) {
  return std::ranges::any_of(map.buildings(),
                             [p](const Building& b) { return b.contains(p); });
}

bool segment_hits_any_building(Vec2 a, Vec2 b, const UrbanMap& map) {
  if (a == b) return point_in_any_building(a, map);
  return std::ranges::any_of(map.buildings(), [&](const Building& bld) {
    return segment_footprint_overlap(a, b, bld).has_value();
  });
}

namespace {

// Folds a coordinate into [0, limit] by repeated mirroring, computed in
// closed form on the 2*limit period.
double fold(double v, double limit) {
  if (v >= 0.0 && v <= limit) return v;
  if (!std::isfinite(v)) return v;
  const double period = 2.0 * limit;
  double t = std::fmod(std::abs(v), period);
  if (t > limit) t = period - t;
  return t;
}

}  // namespace

Vec2 reflect_into_bounds(Vec2 p, const UrbanMap& map) {
  return {fold(p.x, map.x_max()), fold(p.y, map.y_max())};
}

Vec2 push_out_of_buildings(Vec2 p, const UrbanMap& map) {
  constexpr double kClearance = 1e-6;
  for (std::size_t pass = 0; pass <= map.buildings().size(); ++pass) {
    const auto it = std::ranges::find_if(
        map.buildings(), [p](const Building& b) { return b.contains(p); });
    if (it == map.buildings().end()) return p;
    const Building& b = *it;
    // Candidate exits through each edge, nearest first.
    std::array<std::pair<double, Vec2>, 4> exits{{
        {p.x - b.x_lo, {b.x_lo - kClearance, p.y}},
        {b.x_hi - p.x, {b.x_hi + kClearance, p.y}},
        {p.y - b.y_lo, {p.x, b.y_lo - kClearance}},
        {b.y_hi - p.y, {p.x, b.y_hi + kClearance}},
    }};
    std::ranges::stable_sort(exits, {}, &std::pair<double, Vec2>::first);
    bool moved = false;
    for (const auto& [gap, q] : exits) {
      if (map.in_bounds(q)) {
        p = q;
        moved = true;
        break;
      }
    }
    if (!moved) return p;
  }
  return p;
}

}  // namespace uavsim
