#include "uavsim/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace uavsim {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw std::runtime_error("malformed number '" + s + "' in csv");
  }
  return v;
}

bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

void quantize_record(SlotRecord& r) {
  r.uav = {quantize(r.uav.x), quantize(r.uav.y)};
  r.action = {quantize(r.action.x), quantize(r.action.y)};
  r.reward = quantize(r.reward);
  for (UserState& u : r.users) u.position = {quantize(u.position.x), quantize(u.position.y)};
  for (auto* v : {&r.alloc.bandwidth, &r.alloc.power, &r.alloc.slack, &r.alloc.rate}) {
    for (double& x : *v) x = quantize(x);
  }
}

// Groups of four (at most three), the remaining users walk individually.
void split_users(std::size_t k, std::vector<std::size_t>& groups, std::size_t& individuals) {
  groups.clear();
  std::size_t left = k;
  while (groups.size() < 3 && left >= 4 && left - 4 >= 1) {
    groups.push_back(4);
    left -= 4;
  }
  individuals = left;
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double quantize(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

MetricsSummary compute_metrics(const EpisodeTrace& trace, const AllocParams& params) {
  MetricsSummary m;
  m.episode_length = static_cast<int>(trace.slots.size());
  const std::size_t k = trace.num_users;
  if (trace.slots.empty() || k == 0) return m;
  std::vector<double> user_mean(k, 0.0);
  double sum_rate = 0.0;
  double violations = 0.0;
  double binding = 0.0;
  double los = 0.0;
  for (const SlotRecord& s : trace.slots) {
    double slot_rate = 0.0;
    bool violated = false;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = s.alloc.rate[i];
      slot_rate += r;
      user_mean[i] += r;
      if (r < params.r_min * (1.0 - 1e-6)) violated = true;
      if (s.links[i].is_los) los += 1.0;
    }
    sum_rate += slot_rate;
    if (violated) violations += 1.0;
    if (slot_rate >= params.c_fronthaul * (1.0 - 1e-6)) binding += 1.0;
  }
  const double n = static_cast<double>(trace.slots.size());
  m.mean_sum_rate = sum_rate / n;
  m.qos_violation_fraction = violations / n;
  m.fronthaul_binding_fraction = binding / n;
  m.los_fraction = los / (n * static_cast<double>(k));
  double s1 = 0.0;
  double s2 = 0.0;
  for (double x : user_mean) {
    s1 += x / n;
    s2 += (x / n) * (x / n);
  }
  m.jain_index = s2 > 0.0 ? s1 * s1 / (static_cast<double>(k) * s2) : 1.0;
  return m;
}

std::string PolicySpec::name() const {
  return trained != nullptr ? "trained" : to_string(baseline);
}

EpisodeResult run_episode(const ScenarioConfig& cfg, const PolicySpec& policy,
                          std::uint64_t seed, const EpisodeOptions& options) {
  UavEnvironment env(cfg, seed, options.allocator, options.terminate_on_infeasible);
  EpisodeResult result;
  result.trace.num_users = cfg.num_users();
  while (!env.done()) {
    const Vec2 action = policy.trained != nullptr
                            ? act_online(*policy.trained, env.state())
                            : baseline_action(policy.baseline, env);
    SlotRecord rec = env.step(action);
    quantize_record(rec);
    result.trace.terminated = rec.terminal;
    result.trace.slots.push_back(std::move(rec));
  }
  result.metrics = compute_metrics(result.trace, cfg.alloc);
  return result;
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  out << "slot,uav_x,uav_y,action_x,action_y,sum_rate,reward,status,terminal";
  for (std::size_t i = 0; i < trace.num_users; ++i) {
    for (const char* f : {"x", "y", "group", "los", "b", "p", "s", "r"}) {
      out << ",u" << i << '_' << f;
    }
  }
  out << '\n';
  for (const SlotRecord& s : trace.slots) {
    double total = 0.0;
    for (double r : s.alloc.rate) total += r;
    out << s.slot << ',' << format_number(s.uav.x) << ',' << format_number(s.uav.y) << ','
        << format_number(s.action.x) << ',' << format_number(s.action.y) << ','
        << format_number(total) << ',' << format_number(s.reward) << ','
        << to_string(s.alloc.status) << ',' << (s.terminal ? 1 : 0);
    for (std::size_t i = 0; i < trace.num_users; ++i) {
      const UserState& u = s.users[i];
      out << ',' << format_number(u.position.x) << ',' << format_number(u.position.y) << ','
          << (u.group ? static_cast<long long>(*u.group) : -1LL) << ','
          << (s.links[i].is_los ? 1 : 0) << ',' << format_number(s.alloc.bandwidth[i])
          << ',' << format_number(s.alloc.power[i]) << ','
          << format_number(s.alloc.slack[i]) << ',' << format_number(s.alloc.rate[i]);
    }
    out << '\n';
  }
}

EpisodeTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw std::runtime_error("trace csv is empty");
  const auto header = split_csv_line(line);
  constexpr std::size_t kFixed = 9;
  if (header.size() < kFixed || (header.size() - kFixed) % 8 != 0 || header[0] != "slot") {
    throw std::runtime_error("trace csv header not recognised");
  }
  EpisodeTrace trace;
  trace.num_users = (header.size() - kFixed) / 8;
  while (next_line(in, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw std::runtime_error("trace csv row has wrong width");
    SlotRecord s;
    s.slot = static_cast<int>(parse_double(cells[0]));
    s.uav = {parse_double(cells[1]), parse_double(cells[2])};
    s.action = {parse_double(cells[3]), parse_double(cells[4])};
    s.reward = parse_double(cells[6]);
    s.alloc.status = alloc_status_from_string(cells[7]);
    s.terminal = parse_double(cells[8]) != 0.0;
    for (std::size_t i = 0; i < trace.num_users; ++i) {
      const std::size_t c = kFixed + 8 * i;
      UserState u;
      u.id = i;
      u.position = {parse_double(cells[c]), parse_double(cells[c + 1])};
      const double g = parse_double(cells[c + 2]);
      if (g >= 0.0) u.group = static_cast<std::size_t>(g);
      s.users.push_back(u);
      LinkBudget link;
      link.is_los = parse_double(cells[c + 3]) != 0.0;
      s.links.push_back(link);
      s.alloc.bandwidth.push_back(parse_double(cells[c + 4]));
      s.alloc.power.push_back(parse_double(cells[c + 5]));
      s.alloc.slack.push_back(parse_double(cells[c + 6]));
      s.alloc.rate.push_back(parse_double(cells[c + 7]));
    }
    trace.terminated = s.terminal;
    trace.slots.push_back(std::move(s));
  }
  return trace;
}

void write_summary_csv(std::ostream& out, const MetricsSummary& m) {
  out << "metric,value\n"
      << "mean_sum_rate," << format_number(m.mean_sum_rate) << '\n'
      << "jain_index," << format_number(m.jain_index) << '\n'
      << "qos_violation_fraction," << format_number(m.qos_violation_fraction) << '\n'
      << "los_fraction," << format_number(m.los_fraction) << '\n'
      << "fronthaul_binding_fraction," << format_number(m.fronthaul_binding_fraction) << '\n'
      << "episode_length," << m.episode_length << '\n';
}

MetricsSummary read_summary_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line) || line != "metric,value") {
    throw std::runtime_error("summary csv header not recognised");
  }
  std::map<std::string, double> values;
  while (next_line(in, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw std::runtime_error("summary csv row has wrong width");
    values[cells[0]] = parse_double(cells[1]);
  }
  auto get = [&](const char* key) {
    const auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error(std::string("summary csv lacks ") + key);
    return it->second;
  };
  MetricsSummary m;
  m.mean_sum_rate = get("mean_sum_rate");
  m.jain_index = get("jain_index");
  m.qos_violation_fraction = get("qos_violation_fraction");
  m.los_fraction = get("los_fraction");
  m.fronthaul_binding_fraction = get("fronthaul_binding_fraction");
  m.episode_length = static_cast<int>(get("episode_length"));
  return m;
}

std::size_t validate_trace(const EpisodeTrace& trace, const AllocParams& params,
                           std::string* detail) {
  std::size_t bad = 0;
  for (const SlotRecord& s : trace.slots) {
    std::string what;
    if (count_allocation_violations(s.alloc, params, &what) > 0) {
      if (bad == 0 && detail != nullptr) {
        *detail = "slot " + std::to_string(s.slot) + ": " + what;
      }
      ++bad;
    }
  }
  return bad;
}

void write_text_file(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_table_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    out << (i ? "," : "") << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

Table read_table_csv(std::istream& in) {
  Table t;
  std::string line;
  if (!next_line(in, line)) throw std::runtime_error("table csv is empty");
  t.header = split_csv_line(line);
  while (next_line(in, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw std::runtime_error("table csv row has wrong width");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table sweep_altitude_speed(const ScenarioConfig& cfg, const std::vector<double>& altitudes,
                           const std::vector<double>& speeds,
                           const std::vector<std::uint64_t>& seeds,
                           const SweepOptions& options) {
  if (altitudes.empty() || speeds.empty() || seeds.empty()) {
    throw std::invalid_argument("altitude/speed sweep needs nonempty lists");
  }
  const std::size_t cells = altitudes.size() * speeds.size();
  std::vector<double> rates(cells * seeds.size());
  const EpisodeOptions episode{AllocatorKind::kHeuristic, false};
  parallel_for(rates.size(), options.threads, [&](std::size_t task) {
    const std::size_t cell = task / seeds.size();
    ScenarioConfig c = cfg;
    c.altitude = altitudes[cell / speeds.size()];
    c.v_max = speeds[cell % speeds.size()];
    rates[task] = run_episode(c, options.policy, seeds[task % seeds.size()], episode)
                      .metrics.mean_sum_rate;
  });
  Table t{{"altitude", "v_max", "mean_sum_rate", "std_sum_rate", "seeds"}, {}};
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double mean = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) mean += rates[cell * seeds.size() + s];
    mean /= static_cast<double>(seeds.size());
    double var = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const double d = rates[cell * seeds.size() + s] - mean;
      var += d * d;
    }
    const double sd = seeds.size() > 1 ? std::sqrt(var / static_cast<double>(seeds.size() - 1)) : 0.0;
    t.rows.push_back({altitudes[cell / speeds.size()], speeds[cell % speeds.size()], mean, sd,
                      static_cast<double>(seeds.size())});
  }
  return t;
}

std::vector<AllocatorComparison> compare_allocators(
    const ScenarioConfig& cfg, const std::vector<double>& c_fronthaul,
    const std::vector<std::uint64_t>& seeds, const SweepOptions& options) {
  struct Arms {
    EpisodeTrace heuristic;
    EpisodeTrace dual;
  };
  std::vector<Arms> runs(c_fronthaul.size() * seeds.size());
  parallel_for(runs.size(), options.threads, [&](std::size_t task) {
    ScenarioConfig c = cfg;
    c.alloc.c_fronthaul = c_fronthaul[task / seeds.size()];
    const std::uint64_t seed = seeds[task % seeds.size()];
    runs[task].heuristic =
        run_episode(c, options.policy, seed, {AllocatorKind::kHeuristic, false}).trace;
    runs[task].dual =
        run_episode(c, options.policy, seed, {AllocatorKind::kDualAscent, false}).trace;
  });
  std::vector<AllocatorComparison> out;
  for (std::size_t f = 0; f < c_fronthaul.size(); ++f) {
    AllocatorComparison cmp;
    cmp.c_fronthaul = c_fronthaul[f];
    cmp.seeds = seeds;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const Arms& arms = runs[f * seeds.size() + s];
      std::vector<double> h, d;
      int h_inf = 0, h_rel = 0, d_inf = 0;
      for (const SlotRecord& r : arms.heuristic.slots) {
        h.push_back(r.alloc.sum_rate());
        h_inf += r.alloc.status == AllocStatus::kInfeasible;
        h_rel += r.alloc.status == AllocStatus::kRelaxed;
      }
      for (const SlotRecord& r : arms.dual.slots) {
        d.push_back(r.alloc.sum_rate());
        d_inf += r.alloc.status == AllocStatus::kInfeasible;
      }
      if (arms.heuristic.slots.size() != arms.dual.slots.size()) {
        cmp.identical_mobility = false;
      } else {
        for (std::size_t i = 0; i < arms.heuristic.slots.size(); ++i) {
          const SlotRecord& a = arms.heuristic.slots[i];
          const SlotRecord& b = arms.dual.slots[i];
          if (!(a.uav == b.uav)) cmp.identical_mobility = false;
          for (std::size_t u = 0; u < a.users.size(); ++u) {
            if (!(a.users[u].position == b.users[u].position)) cmp.identical_mobility = false;
          }
        }
      }
      cmp.heuristic.push_back(std::move(h));
      cmp.dual.push_back(std::move(d));
      cmp.heuristic_infeasible.push_back(h_inf);
      cmp.heuristic_relaxed.push_back(h_rel);
      cmp.dual_infeasible.push_back(d_inf);
    }
    out.push_back(std::move(cmp));
  }
  return out;
}

Table comparison_table(const std::vector<AllocatorComparison>& results) {
  Table t{{"c_fronthaul", "slot", "heuristic_sum_rate", "dual_sum_rate"}, {}};
  for (const AllocatorComparison& c : results) {
    std::size_t slots = 0;
    for (const auto& s : c.heuristic) slots = std::max(slots, s.size());
    for (std::size_t n = 0; n < slots; ++n) {
      double h = 0.0, d = 0.0, count = 0.0;
      for (std::size_t s = 0; s < c.heuristic.size(); ++s) {
        if (n >= c.heuristic[s].size() || n >= c.dual[s].size()) continue;
        h += c.heuristic[s][n];
        d += c.dual[s][n];
        count += 1.0;
      }
      if (count > 0.0) t.rows.push_back({c.c_fronthaul, static_cast<double>(n), h / count, d / count});
    }
  }
  return t;
}

ScenarioConfig with_user_count(const ScenarioConfig& cfg, std::size_t k) {
  if (k == 0) throw std::invalid_argument("user count must be >= 1");
  ScenarioConfig c = cfg;
  split_users(k, c.group_sizes, c.individuals);
  return c;
}

Table sweep_time_series(const ScenarioConfig& cfg, SeriesAxis axis,
                        const std::vector<double>& values,
                        const std::vector<std::uint64_t>& seeds,
                        const SweepOptions& options) {
  if (values.empty() || seeds.empty()) {
    throw std::invalid_argument("time-series sweep needs nonempty lists");
  }
  std::vector<EpisodeTrace> traces(values.size() * seeds.size());
  parallel_for(traces.size(), options.threads, [&](std::size_t task) {
    const double value = values[task / seeds.size()];
    ScenarioConfig c = cfg;
    if (axis == SeriesAxis::kAltitude) {
      c.altitude = value;
    } else {
      c = with_user_count(cfg, static_cast<std::size_t>(value));
    }
    traces[task] = run_episode(c, options.policy, seeds[task % seeds.size()],
                               {AllocatorKind::kHeuristic, false})
                       .trace;
  });
  Table t{{"value", "slot", "mean_sum_rate", "samples"}, {}};
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (int n = 0; n < cfg.horizon; ++n) {
      double sum = 0.0, count = 0.0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const EpisodeTrace& tr = traces[v * seeds.size() + s];
        if (static_cast<std::size_t>(n) >= tr.slots.size()) continue;
        sum += tr.slots[static_cast<std::size_t>(n)].alloc.sum_rate();
        count += 1.0;
      }
      if (count > 0.0) t.rows.push_back({values[v], static_cast<double>(n), sum / count, count});
    }
  }
  return t;
}

std::vector<double> random_slot_instance(const ScenarioConfig& cfg, std::size_t k,
                                         Rng& rng) {
  const Vec2 uav{rng.uniform(0.0, cfg.map.x_max()), rng.uniform(0.0, cfg.map.y_max())};
  std::vector<double> a;
  a.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec2 user = sample_free_position(cfg.map, rng);
    a.push_back(compute_link(uav, cfg.altitude, user, cfg.map, cfg.channel, rng).snr_coeff);
  }
  return a;
}

}  // namespace uavsim
