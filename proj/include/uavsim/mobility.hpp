#ifndef UAVSIM_MOBILITY_HPP_
#define UAVSIM_MOBILITY_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "uavsim/geometry.hpp"
#include "uavsim/rng.hpp"

namespace uavsim {

// Hybrid group (reference-point) / random-walk user mobility.
struct MobilityConfig {
  double v_user_max = 2.0;   // m/s, cap on per-slot step length / slot
  double r_dev_max = 2.0;    // m, member deviation around its reference point
  double d_g = 20.0;         // m, attachment and detachment radius
  double p_join = 0.5;
  double p_leave = 0.5;
  double slot_duration = 1.0;  // s

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct GroupState {
  std::size_t id = 0;
  Vec2 rp;
};

struct UserState {
  std::size_t id = 0;
  Vec2 position;
  std::optional<std::size_t> group;  // empty: individual random walker

  bool is_member() const { return group.has_value(); }
};

// Forced kinematic draw: step length (m) and heading (rad).
struct StepDraw {
  double length = 0.0;
  double angle = 0.0;
};

// Attempts before a blocked mover gives up and stays put.
inline constexpr int kMaxRejectionAttempts = 8;

// Moves `from` by the polar step, reflects at the boundary, and rejects
// candidates inside buildings or whose segment from `anchor` crosses one.
// A rejected candidate is redrawn with a fresh heading and half the length.
// Returns std::nullopt if every attempt is blocked.
std::optional<Vec2> propose_move(Vec2 from, Vec2 anchor, StepDraw draw,
                                 const UrbanMap& map, Rng& rng);

GroupState step_reference_point(const GroupState& g, const MobilityConfig& cfg,
                                const UrbanMap& map, Rng& rng);
GroupState step_reference_point(const GroupState& g, StepDraw draw,
                                const UrbanMap& map, Rng& rng);

// Re-places a member around its (already moved) reference point. Falls back
// to the reference point itself if no deviation is admissible.
UserState step_group_member(const UserState& u, const GroupState& g,
                            const MobilityConfig& cfg, const UrbanMap& map,
                            Rng& rng);
UserState step_group_member(const UserState& u, const GroupState& g,
                            StepDraw deviation, const UrbanMap& map, Rng& rng);

UserState step_individual(const UserState& u, const MobilityConfig& cfg,
                          const UrbanMap& map, Rng& rng);
UserState step_individual(const UserState& u, StepDraw draw,
                          const UrbanMap& map, Rng& rng);

// Ids of groups whose reference point lies within d_g (closed ball).
std::vector<std::size_t> candidate_groups(const UserState& u,
                                          const std::vector<GroupState>& groups,
                                          const MobilityConfig& cfg);

// Join/leave transitions for one slot, evaluated on the current positions.
std::vector<UserState> apply_mode_transitions(
    const std::vector<UserState>& users, const std::vector<GroupState>& groups,
    const MobilityConfig& cfg, Rng& rng);

struct MobilityWorld {
  std::vector<UserState> users;
  std::vector<GroupState> groups;
};

// One slot: transitions, reference points, members, then individuals.
MobilityWorld step_world(const MobilityWorld& world, const MobilityConfig& cfg,
                         const UrbanMap& map, Rng& rng);

// Counts invariant violations (bounds, buildings, deviation radius).
std::size_t count_mobility_violations(const MobilityWorld& world,
                                      const MobilityConfig& cfg,
                                      const UrbanMap& map);

// Uniform position in the map outside all buildings (rejection sampling).
Vec2 sample_free_position(const UrbanMap& map, Rng& rng);

// Random initial world: `group_sizes[g]` members around each reference
// point plus `individuals` random walkers. User ids follow group order.
MobilityWorld initialize_world(const std::vector<std::size_t>& group_sizes,
                               std::size_t individuals,
                               const MobilityConfig& cfg, const UrbanMap& map,
                               Rng& rng);

}  // namespace uavsim

#endif  // UAVSIM_MOBILITY_HPP_
