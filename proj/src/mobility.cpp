#include "uavsim/mobility.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace uavsim {

void MobilityConfig::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw std::invalid_argument(std::string("mobility.") + field);
  };
  require(v_user_max >= 0.0, "v_user_max must be >= 0");
  require(r_dev_max >= 0.0, "r_dev_max must be >= 0");
  require(d_g >= 0.0, "d_g must be >= 0");
  require(p_join >= 0.0 && p_join <= 1.0, "p_join must lie in [0,1]");
  require(p_leave >= 0.0 && p_leave <= 1.0, "p_leave must lie in [0,1]");
  require(slot_duration > 0.0, "slot_duration must be > 0");
}

namespace {

Vec2 polar(Vec2 from, StepDraw d) {
  return {from.x + d.length * std::cos(d.angle),
          from.y + d.length * std::sin(d.angle)};
}

bool admissible(Vec2 anchor, Vec2 candidate, const UrbanMap& map) {
  return !point_in_any_building(candidate, map) &&
         !segment_hits_any_building(anchor, candidate, map);
}

}  // namespace

std::optional<Vec2> propose_move(Vec2 from, Vec2 anchor, StepDraw draw,
                                 const UrbanMap& map, Rng& rng) {
  Vec2 candidate = reflect_into_bounds(polar(from, draw), map);
  if (admissible(anchor, candidate, map)) return candidate;
  for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
    draw.length *= 0.5;
    draw.angle = rng.angle();
    candidate = reflect_into_bounds(polar(from, draw), map);
    if (admissible(anchor, candidate, map)) return candidate;
  }
  return std::nullopt;
}

GroupState step_reference_point(const GroupState& g, StepDraw draw,
                                const UrbanMap& map, Rng& rng) {
  GroupState next = g;
  if (auto p = propose_move(g.rp, g.rp, draw, map, rng)) next.rp = *p;
  return next;
}

GroupState step_reference_point(const GroupState& g, const MobilityConfig& cfg,
                                const UrbanMap& map, Rng& rng) {
  const double length = rng.uniform(0.0, cfg.v_user_max * cfg.slot_duration);
  const double angle = rng.angle();
  return step_reference_point(g, StepDraw{length, angle}, map, rng);
}

UserState step_group_member(const UserState& u, const GroupState& g,
                            StepDraw deviation, const UrbanMap& map,
                            Rng& rng) {
  UserState next = u;
  next.position = propose_move(g.rp, g.rp, deviation, map, rng).value_or(g.rp);
  return next;
}

UserState step_group_member(const UserState& u, const GroupState& g,
                            const MobilityConfig& cfg, const UrbanMap& map,
                            Rng& rng) {
  const double r = rng.uniform(0.0, cfg.r_dev_max);
  const double phi = rng.angle();
  return step_group_member(u, g, StepDraw{r, phi}, map, rng);
}

UserState step_individual(const UserState& u, StepDraw draw,
                          const UrbanMap& map, Rng& rng) {
  UserState next = u;
  if (auto p = propose_move(u.position, u.position, draw, map, rng)) {
    next.position = *p;
  }
  return next;
}

UserState step_individual(const UserState& u, const MobilityConfig& cfg,
                          const UrbanMap& map, Rng& rng) {
  const double length = rng.uniform(0.0, cfg.v_user_max * cfg.slot_duration);
  const double angle = rng.angle();
  return step_individual(u, StepDraw{length, angle}, map, rng);
}

std::vector<std::size_t> candidate_groups(const UserState& u,
                                          const std::vector<GroupState>& groups,
                                          const MobilityConfig& cfg) {
  std::vector<std::size_t> ids;
  for (const auto& g : groups) {
    if (distance(u.position, g.rp) <= cfg.d_g) ids.push_back(g.id);
  }
  return ids;
}

std::vector<UserState> apply_mode_transitions(
    const std::vector<UserState>& users, const std::vector<GroupState>& groups,
    const MobilityConfig& cfg, Rng& rng) {
  std::vector<UserState> next = users;
  for (auto& u : next) {
    if (!u.is_member()) {
      const auto candidates = candidate_groups(u, groups, cfg);
      if (candidates.empty()) continue;
      if (!rng.bernoulli(cfg.p_join)) continue;
      // Nearest reference point; ties resolved by the lowest group id.
      std::size_t best = candidates.front();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t id : candidates) {
        const double d = distance(u.position, groups[id].rp);
        if (d < best_dist || (d == best_dist && id < best)) {
          best = id;
          best_dist = d;
        }
      }
      u.group = best;
    } else {
      const double d = distance(u.position, groups[*u.group].rp);
      if (d > cfg.d_g && rng.bernoulli(cfg.p_leave)) u.group.reset();
    }
  }
  return next;
}

MobilityWorld step_world(const MobilityWorld& world, const MobilityConfig& cfg,
                         const UrbanMap& map, Rng& rng) {
  MobilityWorld next;
  next.users = apply_mode_transitions(world.users, world.groups, cfg, rng);
  next.groups.reserve(world.groups.size());
  for (const auto& g : world.groups) {
    next.groups.push_back(step_reference_point(g, cfg, map, rng));
  }
  for (auto& u : next.users) {
    if (u.is_member()) {
      u = step_group_member(u, next.groups[*u.group], cfg, map, rng);
    }
  }
  for (auto& u : next.users) {
    if (!u.is_member()) u = step_individual(u, cfg, map, rng);
  }
  return next;
}

std::size_t count_mobility_violations(const MobilityWorld& world,
                                      const MobilityConfig& cfg,
                                      const UrbanMap& map) {
  std::size_t violations = 0;
  auto check_point = [&](Vec2 p) {
    if (!map.in_bounds(p) || point_in_any_building(p, map)) ++violations;
  };
  for (const auto& g : world.groups) check_point(g.rp);
  for (const auto& u : world.users) {
    check_point(u.position);
    if (u.is_member()) {
      if (*u.group >= world.groups.size()) {
        ++violations;
      } else if (distance(u.position, world.groups[*u.group].rp) >
                 cfg.r_dev_max * (1.0 + 1e-12) + 1e-12) {
        ++violations;
      }
    }
  }
  return violations;
}

Vec2 sample_free_position(const UrbanMap& map, Rng& rng) {
  for (int i = 0; i < 100000; ++i) {
    const Vec2 p{rng.uniform(0.0, map.x_max()), rng.uniform(0.0, map.y_max())};
    if (!point_in_any_building(p, map)) return p;
  }
  throw std::runtime_error("map has no free space for user placement");
}

MobilityWorld initialize_world(const std::vector<std::size_t>& group_sizes,
                               std::size_t individuals,
                               const MobilityConfig& cfg, const UrbanMap& map,
                               Rng& rng) {
  MobilityWorld world;
  std::size_t next_id = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    GroupState group{g, sample_free_position(map, rng)};
    world.groups.push_back(group);
    for (std::size_t m = 0; m < group_sizes[g]; ++m) {
      UserState u{next_id++, group.rp, g};
      world.users.push_back(step_group_member(u, group, cfg, map, rng));
    }
  }
  for (std::size_t i = 0; i < individuals; ++i) {
    world.users.push_back(UserState{next_id++, sample_free_position(map, rng),
                                    std::nullopt});
  }
  return world;
}

}  // namespace uavsim
