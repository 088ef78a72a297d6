// Command-line front end: episode simulation, training and the experiment
// sweeps. Exit codes: 0 success, 1 configuration or input error, 2 an
// infeasible slot in a run where that is fatal.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uavsim/harness.hpp"

using namespace uavsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::string preset = "paper-s4";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  unsigned threads = 0;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("UAVSIM_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "out";
}

ScenarioConfig resolve_scenario(const Globals& g) {
  try {
    ScenarioConfig cfg = preset(g.preset);
    if (!g.config.empty()) cfg = load_scenario(g.config, cfg);
    if (g.seed_given) cfg.seed = g.seed;
    return cfg;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

std::string join(const std::string& dir, const std::string& name) {
  return dir.empty() ? name : dir + "/" + name;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(derive_seed(base, "sweep-seed", static_cast<std::uint64_t>(i)));
  return seeds;
}

PolicyParameters load_policy(const std::string& path, const ScenarioConfig& cfg) {
  std::string fingerprint;
  PolicyParameters p;
  try {
    p = load_checkpoint(path, &fingerprint);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (p.actor.input_size() != static_cast<int>(2 + 2 * cfg.num_users())) {
    throw ConfigError("checkpoint '" + path + "' was trained for a different number of users");
  }
  if (fingerprint != scenario_fingerprint(cfg)) {
    std::cerr << "note: checkpoint scenario fingerprint " << fingerprint
              << " differs from the current scenario " << scenario_fingerprint(cfg) << "\n";
  }
  return p;
}

std::string table_text(const Table& t) {
  std::ostringstream out;
  write_table_csv(out, t);
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV trajectory and resource-allocation simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.out_dir = default_out_dir();
  app.add_option("--config", g.config, "JSON scenario file overlaid on the preset");
  app.add_option("--preset", g.preset, "built-in scenario (paper-s4, paper-s4-k20)");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed (default: scenario seed)");
  app.add_option("--out-dir", g.out_dir, "output directory (default $UAVSIM_OUT_DIR or ./out)");
  app.add_option("--threads", g.threads, "worker threads for sweeps (0: all cores)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run one episode and write its trace and summary");
  std::string sim_policy = "stationary-centroid";
  std::string sim_checkpoint;
  std::string sim_allocator = "heuristic";
  bool sim_fatal = false;
  bool sim_continue = false;
  sim->add_option("--policy", sim_policy, "stationary-centroid | follow-centroid");
  sim->add_option("--checkpoint", sim_checkpoint, "trained policy (overrides --policy)");
  sim->add_option("--allocator", sim_allocator, "heuristic | dual");
  sim->add_flag("--fatal-infeasible", sim_fatal, "exit with code 2 if a slot is infeasible");
  sim->add_flag("--continue-on-infeasible", sim_continue, "keep running after infeasible slots");

  // train
  auto* tr = app.add_subcommand("train", "train the PPO trajectory policy");
  int tr_iterations = 0;
  std::string tr_checkpoint = "policy.ckpt";
  bool tr_quiet = false;
  tr->add_option("--iterations", tr_iterations, "override the number of training iterations M");
  tr->add_option("--checkpoint", tr_checkpoint, "checkpoint file name inside --out-dir");
  tr->add_flag("--quiet", tr_quiet, "no per-iteration progress");

  // sweep-hs
  auto* hs = app.add_subcommand("sweep-hs", "throughput grid over altitude and maximum speed");
  std::vector<double> hs_alt{50, 100, 150, 300, 1000};
  std::vector<double> hs_speed{5, 10, 16, 20, 30};
  int hs_seeds = 20;
  std::string hs_checkpoint;
  hs->add_option("--altitudes", hs_alt, "altitudes in m")->delimiter(',');
  hs->add_option("--speeds", hs_speed, "maximum speeds in m/s")->delimiter(',');
  hs->add_option("--seeds", hs_seeds, "episodes per cell");
  hs->add_option("--checkpoint", hs_checkpoint, "trained policy (default: follow-centroid)");

  // compare-alloc
  auto* ca = app.add_subcommand("compare-alloc", "heuristic vs dual ascent on identical episodes");
  std::vector<double> ca_cf{500, 200};
  int ca_seeds = 20;
  ca->add_option("--cf", ca_cf, "fronthaul capacities in Mbit/s")->delimiter(',');
  ca->add_option("--seeds", ca_seeds, "episodes per capacity");

  // sweep-ts
  auto* ts = app.add_subcommand("sweep-ts", "throughput versus time for several altitudes or user counts");
  std::string ts_axis = "altitude";
  std::vector<double> ts_values;
  int ts_seeds = 20;
  std::string ts_checkpoint;
  ts->add_option("--axis", ts_axis, "altitude | users");
  ts->add_option("--values", ts_values, "altitudes in m or user counts")->delimiter(',');
  ts->add_option("--seeds", ts_seeds, "episodes per value");
  ts->add_option("--checkpoint", ts_checkpoint, "trained policy (default: follow-centroid)");

  // alloc-bench
  auto* ab = app.add_subcommand("alloc-bench", "run the allocators on slot instances");
  std::string ab_input;
  int ab_generate = 100;
  int ab_users = 22;
  ab->add_option("--input", ab_input, "JSON file {\"instances\": [{\"a\": [...], \"params\": {...}}]}");
  ab->add_option("--generate", ab_generate, "number of random instances when no input is given");
  ab->add_option("--users", ab_users, "users per generated instance");

  auto* show = app.add_subcommand("config", "print the resolved scenario as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    const ScenarioConfig cfg = resolve_scenario(g);
    const std::uint64_t seed = cfg.seed;

    if (show->parsed()) {
      std::cout << scenario_to_json(cfg);
      return kExitOk;
    }

    if (sim->parsed()) {
      PolicySpec spec;
      PolicyParameters trained;
      if (!sim_checkpoint.empty()) {
        trained = load_policy(sim_checkpoint, cfg);
        spec.trained = &trained;
      } else {
        try {
          spec.baseline = baseline_from_string(sim_policy);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
      EpisodeOptions opts;
      if (sim_allocator == "dual") {
        opts.allocator = AllocatorKind::kDualAscent;
      } else if (sim_allocator != "heuristic") {
        throw ConfigError("--allocator must be heuristic or dual");
      }
      opts.terminate_on_infeasible = !sim_continue;
      const EpisodeResult res = run_episode(cfg, spec, seed, opts);
      std::string detail;
      if (validate_trace(res.trace, cfg.alloc, &detail) > 0) {
        throw std::runtime_error("trace failed the allocation contract: " + detail);
      }
      const std::string stem = "seed" + std::to_string(seed);
      std::ostringstream trace, summary;
      write_trace_csv(trace, res.trace);
      write_summary_csv(summary, res.metrics);
      write_text_file(join(g.out_dir, "trace_" + stem + ".csv"), trace.str());
      write_text_file(join(g.out_dir, "summary_" + stem + ".csv"), summary.str());
      std::cout << "policy " << spec.name() << ", " << res.metrics.episode_length
                << " slots, mean sum rate " << format_number(res.metrics.mean_sum_rate / 1e6)
                << " Mbit/s, Jain " << format_number(res.metrics.jain_index) << ", LoS "
                << format_number(res.metrics.los_fraction) << "\n";
      bool infeasible = false;
      for (const SlotRecord& s : res.trace.slots) {
        infeasible |= s.alloc.status == AllocStatus::kInfeasible;
      }
      if (infeasible) {
        std::cerr << (res.trace.terminated ? "episode terminated on an infeasible slot\n"
                                           : "episode contains infeasible slots\n");
        if (sim_fatal) return kExitInfeasible;
      }
      return kExitOk;
    }

    if (tr->parsed()) {
      ScenarioConfig c = cfg;
      if (tr_iterations > 0) c.ppo.iterations = tr_iterations;
      const auto t0 = std::chrono::steady_clock::now();
      TrainResult res = train(c, seed, [&](int m, double reward, const UpdateStats& st) {
        if (st.aborted) {
          std::cerr << "iteration " << m << ": non-finite loss, update discarded, learning rate halved\n";
        }
        if (!tr_quiet) {
          std::cout << "iteration " << m + 1 << "/" << c.ppo.iterations << " mean episode reward "
                    << format_number(reward) << " kl " << format_number(st.approx_kl) << "\n";
        }
      });
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const std::string ckpt = join(g.out_dir, tr_checkpoint);
      write_text_file(ckpt, "");
      save_checkpoint(ckpt, res.policy, scenario_fingerprint(c));
      Table curve{{"iteration", "mean_episode_reward"}, {}};
      for (std::size_t i = 0; i < res.curve.size(); ++i) {
        curve.rows.push_back({static_cast<double>(i), res.curve[i]});
      }
      write_text_file(join(g.out_dir, "training_curve.csv"), table_text(curve));
      std::cout << "trained " << c.ppo.iterations << " iterations in " << format_number(secs)
                << " s; checkpoint " << ckpt << "\n";
      return kExitOk;
    }

    SweepOptions sweep;
    sweep.threads = g.threads;
    PolicyParameters trained;
    auto use_checkpoint = [&](const std::string& path) {
      if (path.empty()) return;
      trained = load_policy(path, cfg);
      sweep.policy.trained = &trained;
    };

    if (hs->parsed()) {
      use_checkpoint(hs_checkpoint);
      const Table t = sweep_altitude_speed(cfg, hs_alt, hs_speed, seed_list(seed, hs_seeds), sweep);
      write_text_file(join(g.out_dir, "sweep_altitude_speed.csv"), table_text(t));
      std::cout << table_text(t);
      return kExitOk;
    }

    if (ca->parsed()) {
      std::vector<double> cf;
      for (double v : ca_cf) cf.push_back(v * 1e6);
      const auto results = compare_allocators(cfg, cf, seed_list(seed, ca_seeds), sweep);
      write_text_file(join(g.out_dir, "compare_alloc_series.csv"), table_text(comparison_table(results)));
      Table per_seed{{"c_fronthaul", "seed_index", "heuristic_infeasible", "heuristic_relaxed",
                      "dual_infeasible", "heuristic_mean", "dual_mean"},
                     {}};
      for (const auto& r : results) {
        for (std::size_t s = 0; s < r.seeds.size(); ++s) {
          double h = 0.0, d = 0.0;
          for (double x : r.heuristic[s]) h += x;
          for (double x : r.dual[s]) d += x;
          const double n = static_cast<double>(std::max<std::size_t>(1, r.heuristic[s].size()));
          per_seed.rows.push_back({r.c_fronthaul, static_cast<double>(s),
                                   static_cast<double>(r.heuristic_infeasible[s]),
                                   static_cast<double>(r.heuristic_relaxed[s]),
                                   static_cast<double>(r.dual_infeasible[s]), h / n, d / n});
        }
      }
      write_text_file(join(g.out_dir, "compare_alloc_seeds.csv"), table_text(per_seed));
      std::cout << table_text(per_seed);
      return kExitOk;
    }

    if (ts->parsed()) {
      use_checkpoint(ts_checkpoint);
      SeriesAxis axis;
      if (ts_axis == "altitude") {
        axis = SeriesAxis::kAltitude;
        if (ts_values.empty()) ts_values = {50, 100, 150, 300};
      } else if (ts_axis == "users") {
        axis = SeriesAxis::kUsers;
        if (ts_values.empty()) ts_values = {10, 20, 30, 40};
        if (sweep.policy.trained != nullptr) {
          throw ConfigError("a trained policy has a fixed user count; sweep users with a baseline");
        }
      } else {
        throw ConfigError("--axis must be altitude or users");
      }
      const Table t = sweep_time_series(cfg, axis, ts_values, seed_list(seed, ts_seeds), sweep);
      write_text_file(join(g.out_dir, "sweep_timeseries_" + ts_axis + ".csv"), table_text(t));
      std::cout << "wrote " << t.rows.size() << " rows\n";
      return kExitOk;
    }

    if (ab->parsed()) {
      struct Instance {
        std::vector<double> a;
        AllocParams params;
      };
      std::vector<Instance> instances;
      if (!ab_input.empty()) {
        std::ifstream in(ab_input);
        if (!in) throw ConfigError("cannot read '" + ab_input + "'");
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
          throw ConfigError(std::string("instance file is not valid JSON: ") + e.what());
        }
        if (!j.contains("instances") || !j["instances"].is_array()) {
          throw ConfigError("instance file needs an \"instances\" array");
        }
        for (std::size_t i = 0; i < j["instances"].size(); ++i) {
          const auto& item = j["instances"][i];
          const std::string where = "instances[" + std::to_string(i) + "]";
          if (!item.is_object() || !item.contains("a") || !item["a"].is_array()) {
            throw ConfigError(where + ".a: expected an array of SNR coefficients");
          }
          Instance inst;
          inst.params = cfg.alloc;
          for (const auto& v : item["a"]) {
            if (!v.is_number()) throw ConfigError(where + ".a: entries must be numbers");
            inst.a.push_back(v.get<double>());
          }
          if (item.contains("params")) {
            nlohmann::json wrapper{{"allocation", item["params"]}};
            try {
              inst.params = scenario_from_json_text(wrapper.dump(), cfg).alloc;
            } catch (const std::invalid_argument& e) {
              throw ConfigError(where + ".params: " + e.what());
            }
          }
          instances.push_back(std::move(inst));
        }
      } else {
        Rng rng(derive_seed(seed, "alloc-bench"));
        for (int i = 0; i < ab_generate; ++i) {
          instances.push_back({random_slot_instance(cfg, static_cast<std::size_t>(ab_users), rng),
                               cfg.alloc});
        }
      }
      std::ostringstream out;
      out << "instance,users,method,status,sum_rate,sum_bandwidth,sum_power,violations,micros\n";
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const Instance& inst = instances[i];
        auto emit = [&](const char* method, auto&& run) {
          const auto t0 = std::chrono::steady_clock::now();
          const SlotAllocation x = run();
          const double us =
              std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
          out << i << ',' << inst.a.size() << ',' << method << ',' << to_string(x.status) << ','
              << format_number(x.sum_rate()) << ',' << format_number(x.sum_bandwidth()) << ','
              << format_number(x.sum_power()) << ',' << count_allocation_violations(x, inst.params)
              << ',' << format_number(us) << '\n';
        };
        try {
          emit("heuristic", [&] { return allocate_slot(inst.a, inst.params); });
          emit("dual", [&] { return dual_ascent_baseline(inst.a, inst.params); });
          if (inst.a.size() <= 4) {
            const std::vector<double> zero(inst.a.size(), 0.0);
            emit("oracle", [&] { return concave_oracle(inst.a, inst.params, zero); });
          }
        } catch (const std::invalid_argument& e) {
          throw ConfigError("instance " + std::to_string(i) + ": " + e.what());
        }
      }
      write_text_file(join(g.out_dir, "alloc_bench.csv"), out.str());
      std::cout << "wrote " << instances.size() << " instances to "
                << join(g.out_dir, "alloc_bench.csv") << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
