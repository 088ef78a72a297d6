#ifndef UAVSIM_GEOMETRY_HPP_
#define UAVSIM_GEOMETRY_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace uavsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Vertical prism with an axis-aligned rectangular footprint. Containment
// uses the closed footprint.
struct Building {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
  double height = 0.0;

  bool contains(Vec2 p) const {
    return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi;
  }
  bool overlaps(const Building& other) const {
    return x_lo < other.x_hi && other.x_lo < x_hi && y_lo < other.y_hi &&
           other.y_lo < y_hi;
  }
};

// Rectangular world [0, x_max] x [0, y_max] with building prisms.
class UrbanMap {
 public:
  UrbanMap() = default;
  // Throws std::invalid_argument on degenerate bounds, malformed buildings,
  // footprints outside the boundary, or overlapping footprints.
  UrbanMap(double x_max, double y_max, std::vector<Building> buildings = {});

  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  const std::vector<Building>& buildings() const { return buildings_; }

  bool in_bounds(Vec2 p) const {
    return p.x >= 0.0 && p.x <= x_max_ && p.y >= 0.0 && p.y <= y_max_;
  }

 private:
  double x_max_ = 1.0;
  double y_max_ = 1.0;
  std::vector<Building> buildings_;
};

struct Interval {
  double t_in = 0.0;
  double t_out = 0.0;
};

struct LosVerdict {
  bool is_los = true;
  std::optional<std::size_t> blocking_building;
  double t_out = 0.0;
};

// Maximal sub-interval of [0,1] whose points of p0 + t (p1 - p0) lie in the
// closed footprint of `b`, by slab clipping on x then y.
std::optional<Interval> segment_footprint_overlap(Vec2 p0, Vec2 p1,
                                                  const Building& b);

// LoS/NLoS verdict for the segment from the UAV at (x, y, H) down to a
// ground user. A building blocks when the segment's height at the exit of
// its footprint, H (1 - t_out), does not clear the roof.
LosVerdict classify_link(Vec3 uav, Vec2 user, const UrbanMap& map);

bool point_in_any_building(Vec2 p, const UrbanMap& map);

// True if the ground segment a-b touches any footprint.
bool segment_hits_any_building(Vec2 a, Vec2 b, const UrbanMap& map);

// Mirrors coordinates across violated boundaries until inside the map.
Vec2 reflect_into_bounds(Vec2 p, const UrbanMap& map);

// Closest point outside every footprint, for points that fall inside one.
// Moves along the outward normal of the nearest edge; repeats if that lands
// in a neighbouring building.
Vec2 push_out_of_buildings(Vec2 p, const UrbanMap& map);

}  // namespace uavsim

#endif  // UAVSIM_GEOMETRY_HPP_
