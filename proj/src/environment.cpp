#include <cmath>
#include <stdexcept>

#include "uavsim/rl.hpp"

namespace uavsim {

MdpState build_state(Vec2 uav, const std::vector<Vec2>& users, const UrbanMap& map) {
  MdpState s(2 + 2 * static_cast<Eigen::Index>(users.size()));
  s[0] = uav.x / map.x_max();
  s[1] = uav.y / map.y_max();
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto j = 2 + 2 * static_cast<Eigen::Index>(i);
    s[j] = users[i].x / map.x_max();
    s[j + 1] = users[i].y / map.y_max();
  }
  return s;
}

std::vector<Vec2> denormalize_state(const MdpState& state, const UrbanMap& map) {
  std::vector<Vec2> out;
  for (Eigen::Index j = 0; j + 1 < state.size(); j += 2) {
    out.push_back({state[j] * map.x_max(), state[j + 1] * map.y_max()});
  }
  return out;
}

Vec2 clip_action(Vec2 raw, double v_max, double delta) {
  const double cap = v_max * delta;
  const double n = raw.norm();
  if (n <= cap) return raw;
  return (cap / n) * raw;
}

double compute_reward(const std::vector<double>& rates,
                      const std::vector<double>& slacks, Vec2 action,
                      const RewardWeights& w, const AllocParams& params) {
  constexpr double kMbps = 1e6;
  const double r_min = params.r_min / kMbps;
  double utility = 0.0;
  double qos = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double r = rates[i] / kMbps;
    utility += std::log(w.eps + r);
    qos += std::max(0.0, r_min + slacks[i] / kMbps - r);
    total += r;
  }
  const double fronthaul = std::max(0.0, total - params.c_fronthaul / kMbps);
  return utility - w.lambda_qos * qos - w.eta_fronthaul * fronthaul -
         w.mu_action * action.squared_norm();
}

double infeasible_penalty(const RewardWeights& w, const AllocParams& params,
                          std::size_t num_users) {
  double typical = static_cast<double>(num_users) *
                   std::abs(std::log(w.eps + params.r_min / 1e6));
  if (!(typical > 0.0)) typical = 1.0;
  return -w.penalty_factor * typical;
}

Vec2 kmeans_init(const std::vector<Vec2>& users, const UrbanMap& map) {
  if (users.empty()) throw std::invalid_argument("kmeans_init needs at least one user");
  Vec2 c;
  for (Vec2 u : users) c = c + u;
  c = (1.0 / static_cast<double>(users.size())) * c;
  return push_out_of_buildings(c, map);
}

namespace {

UrbanMap tall_buildings(const UrbanMap& map, double altitude) {
  std::vector<Building> tall;
  for (const Building& b : map.buildings()) {
    if (b.height >= altitude) tall.push_back(b);
  }
  return UrbanMap(map.x_max(), map.y_max(), std::move(tall));
}

}  // namespace

UavEnvironment::UavEnvironment(const ScenarioConfig& cfg, std::uint64_t seed,
                               AllocatorKind allocator,
                               bool terminate_on_infeasible)
    : cfg_(cfg),
      tall_(tall_buildings(cfg.map, cfg.altitude)),
      allocator_(allocator),
      terminate_on_infeasible_(terminate_on_infeasible),
      mobility_rng_(derive_seed(seed, "mobility")),
      fading_rng_(derive_seed(seed, "fading")),
      uav_rng_(derive_seed(seed, "uav")) {
  cfg_.validate();
  Rng init(derive_seed(seed, "init"));
  world_ = initialize_world(cfg_.group_sizes, cfg_.individuals, cfg_.mobility,
                            cfg_.map, init);
  uav_ = kmeans_init(user_positions(), cfg_.map);
}

std::vector<Vec2> UavEnvironment::user_positions() const {
  std::vector<Vec2> out;
  out.reserve(world_.users.size());
  for (const UserState& u : world_.users) out.push_back(u.position);
  return out;
}

MdpState UavEnvironment::state() const {
  return build_state(uav_, user_positions(), cfg_.map);
}

Vec2 UavEnvironment::move_uav(Vec2 action) {
  const double length = action.norm();
  if (length == 0.0) return uav_;
  const Vec2 target = reflect_into_bounds(uav_ + action, tall_);
  if (!point_in_any_building(target, tall_) &&
      !segment_hits_any_building(uav_, target, tall_)) {
    return target;
  }
  const StepDraw draw{length, std::atan2(action.y, action.x)};
  return propose_move(uav_, uav_, draw, tall_, uav_rng_).value_or(uav_);
}

SlotRecord UavEnvironment::step(Vec2 raw_action) {
  if (done_) throw std::logic_error("step called on a finished episode");
  SlotRecord rec;
  rec.slot = slot_;
  rec.action = clip_action(raw_action, cfg_.v_max, cfg_.slot_duration);
  uav_ = move_uav(rec.action);
  rec.uav = uav_;

  world_ = step_world(world_, cfg_.mobility, cfg_.map, mobility_rng_);
  rec.users = world_.users;

  std::vector<double> a;
  a.reserve(world_.users.size());
  for (const UserState& u : world_.users) {
    rec.links.push_back(compute_link(uav_, cfg_.altitude, u.position, cfg_.map,
                                     cfg_.channel, fading_rng_));
    a.push_back(rec.links.back().snr_coeff);
  }
  rec.alloc = allocator_ == AllocatorKind::kHeuristic
                  ? allocate_slot(a, cfg_.alloc)
                  : dual_ascent_baseline(a, cfg_.alloc);

  if (rec.alloc.status == AllocStatus::kInfeasible && terminate_on_infeasible_) {
    rec.reward = infeasible_penalty(cfg_.reward, cfg_.alloc, a.size());
    rec.terminal = true;
    done_ = true;
  } else {
    rec.reward = compute_reward(rec.alloc.rate, rec.alloc.slack, rec.action,
                                cfg_.reward, cfg_.alloc);
  }
  ++slot_;
  if (slot_ >= cfg_.horizon) done_ = true;
  return rec;
}

const char* to_string(BaselineKind kind) {
  return kind == BaselineKind::kStationaryCentroid ? "stationary-centroid"
                                                   : "follow-centroid";
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "stationary-centroid" || s == "stationary") {
    return BaselineKind::kStationaryCentroid;
  }
  if (s == "follow-centroid" || s == "follow") return BaselineKind::kFollowCentroid;
  throw std::invalid_argument("unknown baseline '" + s + "'");
}

Vec2 baseline_action(BaselineKind kind, const UavEnvironment& env) {
  if (kind == BaselineKind::kStationaryCentroid) return {};
  const auto users = env.user_positions();
  Vec2 c;
  for (Vec2 u : users) c = c + u;
  c = (1.0 / static_cast<double>(users.size())) * c;
  const Vec2 d = c - env.uav();
  const double dist = d.norm();
  if (dist == 0.0) return {};
  const double cfg_step = env.config().max_step();
  const double step = std::min(cfg_step, dist);
  return (step / dist) * d;
}

}  // namespace uavsim
