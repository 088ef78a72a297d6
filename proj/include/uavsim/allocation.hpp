#ifndef UAVSIM_ALLOCATION_HPP_
#define UAVSIM_ALLOCATION_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uavsim {

enum class AllocStatus { kFeasible, kRelaxed, kInfeasible };

const char* to_string(AllocStatus status);
AllocStatus alloc_status_from_string(const std::string& s);

// Per-slot budgets and heuristic step sizes. Zero-valued step fields are
// resolved per instance: delta_b = B/(10K), delta_s = R_min/100,
// s_cap = R_min/10.
struct AllocParams {
  double b_total = 20e6;       // Hz
  double p_total = 2.0;        // W
  double r_min = 1e6;          // bit/s
  double c_fronthaul = 500e6;  // bit/s
  double delta_b = 0.0;
  double delta_s = 0.0;
  int max_iters = 50;
  double s_cap = 0.0;
  // Seed the bandwidth split with the inverse-priority rule instead of the
  // equal split.
  bool rebalance_init = false;
  // After the slack loop, re-split bandwidth and power so that every user
  // but the strongest sits on its QoS floor and the strongest takes the
  // surplus (sum-rate optimal for the chosen floors). Kept only when it
  // raises the sum rate.
  bool surplus_placement = false;

  void validate() const;
  double resolved_delta_b(std::size_t k) const;
  double resolved_delta_s() const;
  double resolved_s_cap() const;
};

struct SlotAllocation {
  std::vector<double> bandwidth;  // Hz
  std::vector<double> power;      // W
  std::vector<double> slack;      // bit/s
  std::vector<double> rate;       // bit/s
  AllocStatus status = AllocStatus::kFeasible;

  std::size_t size() const { return rate.size(); }
  double sum_bandwidth() const;
  double sum_power() const;
  double sum_rate() const;
};

// Minimum power for rate `r_target` over bandwidth `b`; +infinity when
// b = 0 and r_target > 0 (bandwidth must be assigned first).
double min_power(double b, double r_target, double a);

// a / (2^(r/b) - 1); +infinity for r_target <= 0 (lowest priority).
double priority_metric(double b, double r_target, double a);

// Splits b_total proportionally to 1/chi. Infinite chi gets weight zero;
// all-zero weights fall back to an equal split. The sum is exactly b_total.
std::vector<double> rebalance_bandwidth(std::span<const double> chis,
                                        double b_total);

// Residual power by water-filling over base levels b_k / a_k. The water
// level is the largest mu with sum(dp) <= p_rem and
// sum_k R_k(b_k, p_min_k + dp_k) <= c_fronthaul.
std::vector<double> waterfill_residual(std::span<const double> bandwidth,
                                       std::span<const double> snr_coeff,
                                       std::span<const double> p_min,
                                       double p_rem, double c_fronthaul);

// QoS-aware heuristic bandwidth-power allocation with bounded slack.
SlotAllocation allocate_slot(std::span<const double> snr_coeff,
                             const AllocParams& params);

struct DualAscentOptions {
  int iterations = 500;
  double step = 1.0;  // step c in c / sqrt(t), normalized multiplier units
};

// Lagrangian dual-ascent baseline with zero slack.
SlotAllocation dual_ascent_baseline(std::span<const double> snr_coeff,
                                    const AllocParams& params,
                                    const DualAscentOptions& options = {});

// Reference optimum of the per-slot problem with the slacks frozen, for
// small K. Maximizes the sum rate without the fronthaul row by a log-barrier
// Newton method, then moves back toward the QoS-minimal point if the
// fronthaul cap binds. Status kInfeasible when the QoS targets cannot be
// met within the budgets.
SlotAllocation concave_oracle(std::span<const double> snr_coeff,
                              const AllocParams& params,
                              std::span<const double> s_fixed);

// Number of budget/QoS contract violations in `alloc` at the library
// tolerances. `detail`, if given, receives a description of the first one.
std::size_t count_allocation_violations(const SlotAllocation& alloc,
                                        const AllocParams& params,
                                        std::string* detail = nullptr);

}  // namespace uavsim

#endif  // UAVSIM_ALLOCATION_HPP_
