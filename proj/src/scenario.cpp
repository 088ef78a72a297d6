#include "uavsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "uavsim/rng.hpp"

namespace uavsim {

using nlohmann::json;

namespace {

[[noreturn]] void reject(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

// Walks one JSON object, reading known keys and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) reject(path_, "expected an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) reject(field(key), "unknown key");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) reject(field(key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) reject(field(key), "must be finite");
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) reject(field(key), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) {
        out = static_cast<Int>(v.get<std::uint64_t>());
        return;
      }
      if (v.get<std::int64_t>() < 0) reject(field(key), "must be >= 0");
    }
    out = static_cast<Int>(v.get<std::int64_t>());
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) reject(field(key), "expected true or false");
    out = v.get<bool>();
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) reject(field(key), "expected a string");
    out = v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Re-runs a validator and prefixes its message with the block name.
template <typename F>
void validated(const std::string& block, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    reject(block, e.what());
  }
}

UrbanMap read_map(const json& j, const UrbanMap& base) {
  ObjectReader r(j, "map");
  double x_max = base.x_max();
  double y_max = base.y_max();
  r.number("x_max", x_max);
  r.number("y_max", y_max);
  std::vector<Building> buildings = base.buildings();
  if (r.has("buildings")) {
    const json& list = r.at("buildings");
    if (!list.is_array()) reject("map.buildings", "expected an array");
    buildings.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      ObjectReader b(list[i], "map.buildings[" + std::to_string(i) + "]");
      Building bd;
      for (const char* key : {"x_lo", "x_hi", "y_lo", "y_hi", "height"}) {
        if (!b.has(key)) reject(b.field(key), "missing");
      }
      b.number("x_lo", bd.x_lo);
      b.number("x_hi", bd.x_hi);
      b.number("y_lo", bd.y_lo);
      b.number("y_hi", bd.y_hi);
      b.number("height", bd.height);
      buildings.push_back(bd);
    }
  }
  try {
    return UrbanMap(x_max, y_max, std::move(buildings));
  } catch (const std::invalid_argument& e) {
    reject("map", e.what());
  }
}

void read_fading(ObjectReader& r, FadingMode& mode) {
  std::string s;
  if (!r.has("fading")) return;
  r.string("fading", s);
  if (s == "instantaneous") {
    mode = FadingMode::kInstantaneous;
  } else if (s == "mean") {
    mode = FadingMode::kMean;
  } else {
    reject(r.field("fading"), "expected \"instantaneous\" or \"mean\"");
  }
}

const char* fading_name(FadingMode mode) {
  return mode == FadingMode::kMean ? "mean" : "instantaneous";
}

double linear_to_db(double x) { return 10.0 * std::log10(x); }

json to_json(const ScenarioConfig& c) {
  json buildings = json::array();
  for (const Building& b : c.map.buildings()) {
    buildings.push_back({{"x_lo", b.x_lo}, {"x_hi", b.x_hi}, {"y_lo", b.y_lo},
                         {"y_hi", b.y_hi}, {"height", b.height}});
  }
  return json{
      {"version", kScenarioSchemaVersion},
      {"name", c.name},
      {"seed", c.seed},
      {"map", {{"x_max", c.map.x_max()}, {"y_max", c.map.y_max()}, {"buildings", buildings}}},
      {"users", {{"group_sizes", c.group_sizes}, {"individuals", c.individuals}}},
      {"mobility",
       {{"v_user_max", c.mobility.v_user_max},
        {"r_dev_max", c.mobility.r_dev_max},
        {"d_g", c.mobility.d_g},
        {"p_join", c.mobility.p_join},
        {"p_leave", c.mobility.p_leave}}},
      {"channel",
       {{"beta0_db", linear_to_db(c.channel.beta0)},
        {"alpha_los", c.channel.alpha_los},
        {"alpha_nlos", c.channel.alpha_nlos},
        {"kappa", c.channel.kappa},
        {"noise_psd_dbm_per_hz", linear_to_db(c.channel.noise_psd) + 30.0},
        {"fading", fading_name(c.channel.fading_mode)}}},
      {"allocation",
       {{"b_total", c.alloc.b_total},
        {"p_total", c.alloc.p_total},
        {"r_min", c.alloc.r_min},
        {"c_fronthaul", c.alloc.c_fronthaul},
        {"delta_b", c.alloc.delta_b},
        {"delta_s", c.alloc.delta_s},
        {"max_iters", c.alloc.max_iters},
        {"s_cap", c.alloc.s_cap},
        {"rebalance_init", c.alloc.rebalance_init},
        {"surplus_placement", c.alloc.surplus_placement}}},
      {"uav", {{"altitude", c.altitude}, {"v_max", c.v_max}}},
      {"slot_duration", c.slot_duration},
      {"horizon", c.horizon},
      {"reward",
       {{"eps", c.reward.eps},
        {"lambda_qos", c.reward.lambda_qos},
        {"eta_fronthaul", c.reward.eta_fronthaul},
        {"mu_action", c.reward.mu_action},
        {"penalty_factor", c.reward.penalty_factor}}},
      {"ppo",
       {{"gamma", c.ppo.gamma},
        {"lambda_gae", c.ppo.lambda_gae},
        {"clip", c.ppo.clip},
        {"learning_rate", c.ppo.learning_rate},
        {"epochs", c.ppo.epochs},
        {"minibatch", c.ppo.minibatch},
        {"entropy_coef", c.ppo.entropy_coef},
        {"episodes_per_update", c.ppo.episodes_per_update},
        {"iterations", c.ppo.iterations},
        {"value_coef", c.ppo.value_coef},
        {"max_grad_norm", c.ppo.max_grad_norm},
        {"hidden", c.ppo.hidden},
        {"init_log_std", c.ppo.init_log_std}}},
  };
}

}  // namespace

void RewardWeights::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("reward.") + what);
  };
  require(eps > 0.0, "eps must be > 0");
  require(lambda_qos > 0.0, "lambda_qos must be > 0");
  require(eta_fronthaul > 0.0, "eta_fronthaul must be > 0");
  require(mu_action > 0.0, "mu_action must be > 0");
  require(penalty_factor > 0.0, "penalty_factor must be > 0");
}

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ppo.") + what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  require(lambda_gae > 0.0 && lambda_gae <= 1.0, "lambda_gae must be in (0, 1]");
  require(clip > 0.0 && clip < 1.0, "clip must be in (0, 1)");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(epochs > 0, "epochs must be > 0");
  require(minibatch > 0, "minibatch must be > 0");
  require(entropy_coef >= 0.0, "entropy_coef must be >= 0");
  require(episodes_per_update > 0, "episodes_per_update must be > 0");
  require(iterations > 0, "iterations must be > 0");
  require(value_coef > 0.0, "value_coef must be > 0");
  require(max_grad_norm >= 0.0, "max_grad_norm must be >= 0 (0 disables)");
  require(!hidden.empty(), "hidden must list at least one layer");
  require(std::ranges::all_of(hidden, [](int h) { return h > 0; }),
          "hidden layer sizes must be > 0");
  require(std::isfinite(init_log_std), "init_log_std must be finite");
}

std::size_t ScenarioConfig::num_users() const {
  std::size_t k = individuals;
  for (std::size_t g : group_sizes) k += g;
  return k;
}

void ScenarioConfig::validate() const {
  if (num_users() < 1) reject("users", "K = sum(group_sizes) + individuals must be >= 1");
  if (std::ranges::any_of(group_sizes, [](std::size_t g) { return g == 0; })) {
    reject("users.group_sizes", "groups must have at least one member");
  }
  if (!(altitude > 0.0)) reject("uav.altitude", "must be > 0");
  if (!(v_max >= 0.0)) reject("uav.v_max", "must be >= 0");
  if (!(slot_duration > 0.0)) reject("slot_duration", "must be > 0");
  if (horizon < 1) reject("horizon", "must be >= 1");
  if (mobility.slot_duration != slot_duration) {
    reject("mobility", "slot duration must match the scenario slot_duration");
  }
  validated("mobility", [&] { mobility.validate(); });
  validated("channel", [&] { (void)channel.validate(); });
  validated("allocation", [&] { alloc.validate(); });
  validated("reward", [&] { reward.validate(); });
  validated("ppo", [&] { ppo.validate(); });
}

UrbanMap generate_grid_map(double x_max, double y_max, int rows, int cols,
                           double h_lo, double h_hi, std::uint64_t seed) {
  Rng rng(seed);
  const double cell_w = x_max / cols;
  const double cell_h = y_max / rows;
  std::vector<Building> buildings;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      // Footprint between 35% and 60% of the cell, centre jittered so that
      // a street of at least 20% of the cell separates neighbours.
      const double w = cell_w * rng.uniform(0.35, 0.6);
      const double h = cell_h * rng.uniform(0.35, 0.6);
      const double cx = (c + 0.5) * cell_w + rng.uniform(-0.5, 0.5) * (0.8 * cell_w - w);
      const double cy = (r + 0.5) * cell_h + rng.uniform(-0.5, 0.5) * (0.8 * cell_h - h);
      // Round to centimetres so the stored preset file is exact.
      auto cm = [](double v) { return std::round(v * 100.0) / 100.0; };
      buildings.push_back({cm(cx - 0.5 * w), cm(cx + 0.5 * w), cm(cy - 0.5 * h),
                           cm(cy + 0.5 * h), cm(rng.uniform(h_lo, h_hi))});
    }
  }
  return UrbanMap(x_max, y_max, std::move(buildings));
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.map = generate_grid_map(300.0, 300.0, 3, 4, 20.0, 60.0,
                            derive_seed(0, "paper-s4-map"));
  c.group_sizes = {4, 4, 4};
  c.individuals = 10;
  c.mobility = MobilityConfig{};
  c.channel = ChannelConfig{};
  c.channel.beta0 = db_to_linear(-50.0);
  c.channel.noise_psd = dbm_per_hz_to_watt_per_hz(-170.0);
  // With instantaneous Rayleigh fading a shadowed user misses the 1 Mbit/s
  // floor in almost every episode; the presets allocate on the mean gain.
  c.channel.fading_mode = FadingMode::kMean;
  c.alloc = AllocParams{};
  c.altitude = 100.0;
  c.v_max = 16.0;
  c.slot_duration = 1.0;
  c.horizon = 120;
  if (name == "paper-s4") {
    c.name = name;
  } else if (name == "paper-s4-k20") {
    c.name = name;
    c.group_sizes = {4, 4};
    c.individuals = 12;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() { return {"paper-s4", "paper-s4-k20"}; }

ScenarioConfig scenario_from_json_text(const std::string& text,
                                       const ScenarioConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  ScenarioConfig c = base;
  {
    ObjectReader r(j, "");
    int version = kScenarioSchemaVersion;
    r.integer("version", version);
    if (version != kScenarioSchemaVersion) {
      reject("version", "unsupported schema version " + std::to_string(version));
    }
    r.string("name", c.name);
    r.integer("seed", c.seed);
    if (r.has("map")) c.map = read_map(r.at("map"), c.map);
    if (r.has("users")) {
      ObjectReader u(r.at("users"), "users");
      if (u.has("group_sizes")) {
        const json& g = u.at("group_sizes");
        if (!g.is_array()) reject("users.group_sizes", "expected an array");
        c.group_sizes.clear();
        for (const json& v : g) {
          if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            reject("users.group_sizes", "entries must be non-negative integers");
          }
          c.group_sizes.push_back(v.get<std::size_t>());
        }
      }
      u.integer("individuals", c.individuals);
    }
    if (r.has("mobility")) {
      ObjectReader m(r.at("mobility"), "mobility");
      m.number("v_user_max", c.mobility.v_user_max);
      m.number("r_dev_max", c.mobility.r_dev_max);
      m.number("d_g", c.mobility.d_g);
      m.number("p_join", c.mobility.p_join);
      m.number("p_leave", c.mobility.p_leave);
    }
    if (r.has("channel")) {
      ObjectReader ch(r.at("channel"), "channel");
      if (ch.has("beta0_db")) {
        double db = 0.0;
        ch.number("beta0_db", db);
        c.channel.beta0 = db_to_linear(db);
      }
      ch.number("alpha_los", c.channel.alpha_los);
      ch.number("alpha_nlos", c.channel.alpha_nlos);
      ch.number("kappa", c.channel.kappa);
      if (ch.has("noise_psd_dbm_per_hz")) {
        double dbm = 0.0;
        ch.number("noise_psd_dbm_per_hz", dbm);
        c.channel.noise_psd = dbm_per_hz_to_watt_per_hz(dbm);
      }
      read_fading(ch, c.channel.fading_mode);
    }
    if (r.has("allocation")) {
      ObjectReader a(r.at("allocation"), "allocation");
      a.number("b_total", c.alloc.b_total);
      a.number("p_total", c.alloc.p_total);
      a.number("r_min", c.alloc.r_min);
      a.number("c_fronthaul", c.alloc.c_fronthaul);
      a.number("delta_b", c.alloc.delta_b);
      a.number("delta_s", c.alloc.delta_s);
      a.integer("max_iters", c.alloc.max_iters);
      a.number("s_cap", c.alloc.s_cap);
      a.boolean("rebalance_init", c.alloc.rebalance_init);
      a.boolean("surplus_placement", c.alloc.surplus_placement);
    }
    if (r.has("uav")) {
      ObjectReader u(r.at("uav"), "uav");
      u.number("altitude", c.altitude);
      u.number("v_max", c.v_max);
    }
    r.number("slot_duration", c.slot_duration);
    r.integer("horizon", c.horizon);
    if (r.has("reward")) {
      ObjectReader w(r.at("reward"), "reward");
      w.number("eps", c.reward.eps);
      w.number("lambda_qos", c.reward.lambda_qos);
      w.number("eta_fronthaul", c.reward.eta_fronthaul);
      w.number("mu_action", c.reward.mu_action);
      w.number("penalty_factor", c.reward.penalty_factor);
    }
    if (r.has("ppo")) {
      ObjectReader p(r.at("ppo"), "ppo");
      p.number("gamma", c.ppo.gamma);
      p.number("lambda_gae", c.ppo.lambda_gae);
      p.number("clip", c.ppo.clip);
      p.number("learning_rate", c.ppo.learning_rate);
      p.integer("epochs", c.ppo.epochs);
      p.integer("minibatch", c.ppo.minibatch);
      p.number("entropy_coef", c.ppo.entropy_coef);
      p.integer("episodes_per_update", c.ppo.episodes_per_update);
      p.integer("iterations", c.ppo.iterations);
      p.number("value_coef", c.ppo.value_coef);
      p.number("max_grad_norm", c.ppo.max_grad_norm);
      if (p.has("hidden")) {
        const json& h = p.at("hidden");
        if (!h.is_array()) reject("ppo.hidden", "expected an array");
        c.ppo.hidden.clear();
        for (const json& v : h) {
          if (!v.is_number_integer()) reject("ppo.hidden", "entries must be integers");
          c.ppo.hidden.push_back(v.get<int>());
        }
      }
      p.number("init_log_std", c.ppo.init_log_std);
    }
  }
  c.mobility.slot_duration = c.slot_duration;
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path, const ScenarioConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return scenario_from_json_text(text.str(), base);
}

ScenarioConfig load_scenario(const std::string& path) {
  return load_scenario(path, preset("paper-s4"));
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

std::string scenario_fingerprint(const ScenarioConfig& cfg) {
  json j = to_json(cfg);
  j.erase("seed");
  j.erase("ppo");
  j.erase("name");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace uavsim
