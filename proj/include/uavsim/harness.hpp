#ifndef UAVSIM_HARNESS_HPP_
#define UAVSIM_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uavsim/rl.hpp"
#include "uavsim/scenario.hpp"

namespace uavsim {

// Per-slot rows of one episode.
struct EpisodeTrace {
  std::size_t num_users = 0;
  std::vector<SlotRecord> slots;
  bool terminated = false;  // stopped early on an infeasible slot
};

struct MetricsSummary {
  double mean_sum_rate = 0.0;               // bit/s
  double jain_index = 1.0;                  // of time-averaged user rates
  double qos_violation_fraction = 0.0;      // slots with some R_k < R_min
  double los_fraction = 0.0;                // over user-slots
  double fronthaul_binding_fraction = 0.0;  // slots with sum R = C_f
  int episode_length = 0;
};

MetricsSummary compute_metrics(const EpisodeTrace& trace, const AllocParams& params);

// Who flies the UAV.
struct PolicySpec {
  BaselineKind baseline = BaselineKind::kStationaryCentroid;
  const PolicyParameters* trained = nullptr;  // overrides the baseline if set

  std::string name() const;
};

struct EpisodeOptions {
  AllocatorKind allocator = AllocatorKind::kHeuristic;
  bool terminate_on_infeasible = true;
};

struct EpisodeResult {
  EpisodeTrace trace;
  MetricsSummary metrics;
};

// Runs one seeded episode. Floating-point trace fields are rounded to the
// 12 significant digits used on disk before the metrics are computed, so
// the summary can be recomputed exactly from an exported trace.
EpisodeResult run_episode(const ScenarioConfig& cfg, const PolicySpec& policy,
                          std::uint64_t seed, const EpisodeOptions& options = {});

// ---------------------------------------------------------------- files

// 12-significant-digit decimal used by every exported file.
std::string format_number(double v);
double quantize(double v);

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);
EpisodeTrace read_trace_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const MetricsSummary& m);
MetricsSummary read_summary_csv(std::istream& in);

// Re-checks the allocation contract on every row; returns the number of
// offending rows and describes the first one in `detail`.
std::size_t validate_trace(const EpisodeTrace& trace, const AllocParams& params,
                           std::string* detail = nullptr);

// Writes `text` to `path`, creating parent directories. Throws
// std::runtime_error naming the path on failure.
void write_text_file(const std::string& path, const std::string& text);

// Simple table used for every sweep: a header row and numeric rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_table_csv(std::ostream& out, const Table& table);
Table read_table_csv(std::istream& in);

// ---------------------------------------------------------------- sweeps

struct SweepOptions {
  PolicySpec policy{BaselineKind::kFollowCentroid, nullptr};
  unsigned threads = 0;  // 0: hardware concurrency
};

// Mean of MetricsSummary::mean_sum_rate over seeds for every (H, v_max).
// Episodes do not terminate on infeasible slots. Columns: altitude, v_max,
// mean_sum_rate, std_sum_rate, seeds.
Table sweep_altitude_speed(const ScenarioConfig& cfg, const std::vector<double>& altitudes,
                           const std::vector<double>& speeds,
                           const std::vector<std::uint64_t>& seeds,
                           const SweepOptions& options = {});

struct AllocatorComparison {
  double c_fronthaul = 0.0;
  std::vector<std::uint64_t> seeds;
  // [seed][slot] sum rates of each arm on identical episodes.
  std::vector<std::vector<double>> heuristic;
  std::vector<std::vector<double>> dual;
  std::vector<int> heuristic_infeasible;  // per seed
  std::vector<int> heuristic_relaxed;
  std::vector<int> dual_infeasible;
  bool identical_mobility = true;  // UAV and user tracks agree across arms
};

std::vector<AllocatorComparison> compare_allocators(
    const ScenarioConfig& cfg, const std::vector<double>& c_fronthaul,
    const std::vector<std::uint64_t>& seeds, const SweepOptions& options = {});

// Per-seed and seed-averaged series as a table: c_fronthaul, slot, heuristic,
// dual (means over seeds).
Table comparison_table(const std::vector<AllocatorComparison>& results);

enum class SeriesAxis { kAltitude, kUsers };

// Scenario with K users: up to three groups of four, the rest individuals.
ScenarioConfig with_user_count(const ScenarioConfig& cfg, std::size_t k);

// Per-slot throughput averaged over seeds for every value. Columns: value,
// slot, mean_sum_rate, samples.
Table sweep_time_series(const ScenarioConfig& cfg, SeriesAxis axis,
                        const std::vector<double>& values,
                        const std::vector<std::uint64_t>& seeds,
                        const SweepOptions& options = {});

// ---------------------------------------------------------------- instances

// One allocation instance: SNR coefficients drawn from a random UAV and user
// placement on the scenario map with the scenario channel.
std::vector<double> random_slot_instance(const ScenarioConfig& cfg, std::size_t k,
                                         Rng& rng);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn);

}  // namespace uavsim

#include "uavsim/detail/parallel.hpp"

#endif  // UAVSIM_HARNESS_HPP_
