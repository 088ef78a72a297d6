#include "uavsim/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "uavsim/channel.hpp"

namespace uavsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Lowest index among the minima (or maxima) of `v` restricted to `eligible`.
template <typename Better, typename Eligible>
std::ptrdiff_t arg_best(std::span<const double> v, Better better,
                        Eligible eligible) {
  std::ptrdiff_t best = -1;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!eligible(k)) continue;
    if (best < 0 || better(v[k], v[static_cast<std::size_t>(best)])) {
      best = static_cast<std::ptrdiff_t>(k);
    }
  }
  return best;
}

}  // namespace

const char* to_string(AllocStatus status) {
  switch (status) {
    case AllocStatus::kFeasible:
      return "feasible";
    case AllocStatus::kRelaxed:
      return "relaxed";
    case AllocStatus::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

AllocStatus alloc_status_from_string(const std::string& s) {
  if (s == "feasible") return AllocStatus::kFeasible;
  if (s == "relaxed") return AllocStatus::kRelaxed;
  if (s == "infeasible") return AllocStatus::kInfeasible;
  throw std::invalid_argument("unknown allocation status '" + s + "'");
}

void AllocParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("allocation.") + what);
  };
  require(b_total > 0.0, "b_total must be > 0");
  require(p_total > 0.0, "p_total must be > 0");
  require(r_min > 0.0, "r_min must be > 0");
  require(c_fronthaul > 0.0, "c_fronthaul must be > 0");
  require(delta_b >= 0.0, "delta_b must be >= 0 (0 selects the default)");
  require(delta_s >= 0.0, "delta_s must be >= 0 (0 selects the default)");
  require(s_cap >= 0.0, "s_cap must be >= 0 (0 selects the default)");
  require(max_iters > 0, "max_iters must be > 0");
}

double AllocParams::resolved_delta_b(std::size_t k) const {
  return delta_b > 0.0 ? delta_b
                       : b_total / (10.0 * static_cast<double>(std::max<std::size_t>(k, 1)));
}
double AllocParams::resolved_delta_s() const {
  return delta_s > 0.0 ? delta_s : r_min / 100.0;
}
double AllocParams::resolved_s_cap() const {
  return s_cap > 0.0 ? s_cap : r_min / 10.0;
}

double SlotAllocation::sum_bandwidth() const { return sum(bandwidth); }
double SlotAllocation::sum_power() const { return sum(power); }
double SlotAllocation::sum_rate() const { return sum(rate); }

double min_power(double b, double r_target, double a) {
  if (r_target <= 0.0) return 0.0;
  if (b <= 0.0) return kInf;
  return std::expm1(r_target / b * std::numbers::ln2) * b / a;
}

double priority_metric(double b, double r_target, double a) {
  if (r_target <= 0.0) return kInf;
  if (b <= 0.0) return 0.0;
  return a / std::expm1(r_target / b * std::numbers::ln2);
}

std::vector<double> rebalance_bandwidth(std::span<const double> chis,
                                        double b_total) {
  const std::size_t k = chis.size();
  std::vector<double> out(k, 0.0);
  if (k == 0) return out;
  std::vector<double> w(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::isinf(chis[i]) ? 0.0 : 1.0 / chis[i];
  }
  const double total = sum(w);
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(out.begin(), out.end(), b_total / static_cast<double>(k));
    return out;
  }
  // The last positive-weight user absorbs the rounding residue.
  std::size_t last = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] > 0.0) last = i;
  }
  double assigned = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == last) continue;
    out[i] = b_total * w[i] / total;
    assigned += out[i];
  }
  out[last] = b_total - assigned;
  return out;
}

std::vector<double> waterfill_residual(std::span<const double> bandwidth,
                                       std::span<const double> snr_coeff,
                                       std::span<const double> p_min,
                                       double p_rem, double c_fronthaul) {
  const std::size_t k = bandwidth.size();
  std::vector<double> dp(k, 0.0);
  if (!(p_rem > 0.0) || k == 0) return dp;

  // Users without bandwidth cannot convert power into rate.
  std::vector<double> base(k, kInf);
  double min_base = kInf;
  for (std::size_t i = 0; i < k; ++i) {
    if (bandwidth[i] > 0.0) base[i] = bandwidth[i] / snr_coeff[i];
    min_base = std::min(min_base, base[i]);
  }
  if (std::isinf(min_base)) return dp;

  auto spend = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::max(0.0, mu - base[i]);
    return s;
  };
  auto total_rate = [&](double mu) {
    double r = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      r += achievable_rate(bandwidth[i],
                           p_min[i] + std::max(0.0, mu - base[i]),
                           snr_coeff[i]);
    }
    return r;
  };
  // Largest mu in [lo, hi] with f(mu) <= target, stopping once the
  // controlled sum is within 1e-9 relative of the target.
  auto bisect = [](auto f, double lo, double hi, double target) {
    for (int it = 0; it < 200; ++it) {
      if (target - f(lo) <= 1e-9 * target) break;
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (f(mid) <= target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return lo;
  };

  double mu = bisect(spend, min_base, min_base + p_rem, p_rem);
  if (total_rate(mu) > c_fronthaul) {
    if (total_rate(min_base) > c_fronthaul) return dp;
    mu = bisect(total_rate, min_base, mu, c_fronthaul);
  }
  for (std::size_t i = 0; i < k; ++i) dp[i] = std::max(0.0, mu - base[i]);
  return dp;
}

namespace {

// Scales powers down until the sum rate meets the fronthaul cap.
void enforce_fronthaul(std::vector<double>& power, std::span<const double> b,
                       std::span<const double> a, double c_fronthaul) {
  auto rate_at = [&](double theta) {
    double r = 0.0;
    for (std::size_t i = 0; i < power.size(); ++i) {
      r += achievable_rate(b[i], theta * power[i], a[i]);
    }
    return r;
  };
  if (rate_at(1.0) <= c_fronthaul) return;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) <= c_fronthaul ? lo : hi) = mid;
  }
  for (double& p : power) p *= lo;
}

void fill_rates(SlotAllocation& out, std::span<const double> a) {
  out.rate.resize(out.bandwidth.size());
  for (std::size_t i = 0; i < out.rate.size(); ++i) {
    out.rate[i] = achievable_rate(out.bandwidth[i], out.power[i], a[i]);
  }
}

void check_inputs(std::span<const double> a, const AllocParams& params) {
  params.validate();
  for (double ak : a) {
    if (!(ak > 0.0) || !std::isfinite(ak)) {
      throw std::invalid_argument("snr coefficients must be positive and finite");
    }
  }
}

// Inverse of psi(u) = e^u (u - 1) + 1 on u > 0. psi(u)/a is the negated
// slope of the min-power curve p_min(b) at u = r ln2 / b.
double psi(double u) {
  if (u < 1e-4) return u * u * (0.5 + u * (1.0 / 3.0 + u / 8.0));
  return u * std::exp(u) - std::expm1(u);
}

double inverse_psi(double target) {
  if (!(target > 0.0)) return 0.0;
  double lo = 0.0;
  double hi = std::max(1.0, std::log(target) + 2.0);
  while (psi(hi) < target) hi *= 2.0;
  double u = target < 1.0 ? std::min(std::sqrt(2.0 * target), hi) : 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double f = psi(u) - target;
    if (f > 0.0) {
      hi = u;
    } else {
      lo = u;
    }
    if (std::abs(f) <= 1e-14 * target) break;
    double next = u - f / (u * std::exp(u));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == u) break;
    u = next;
  }
  return u;
}

// Sum-rate optimal split for fixed QoS floors (fronthaul ignored): every
// user except the strongest sits on its floor at the operating point whose
// bandwidth/power trade-off matches the marginal rates of the strongest
// user, who takes the remaining budgets. The free user's SNR is the fixed
// point found by bisection. Returns false if the construction has no
// admissible solution.
bool place_surplus(std::span<const double> a, std::span<const double> r_hat,
                   double big_b, double big_p, std::vector<double>& b,
                   std::vector<double>& p) {
  const std::size_t k = a.size();
  std::size_t j = 0;
  for (std::size_t i = 1; i < k; ++i) {
    if (a[i] > a[j]) j = i;
  }
  b.assign(k, 0.0);
  p.assign(k, 0.0);
  auto split = [&](double snr) {
    const double mrs = ((1.0 + snr) * std::log1p(snr) - snr) / a[j];
    double used_b = 0.0;
    double used_p = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i == j || r_hat[i] <= 0.0) {
        if (i != j) b[i] = p[i] = 0.0;
        continue;
      }
      const double u = inverse_psi(mrs * a[i]);
      b[i] = r_hat[i] * std::numbers::ln2 / u;
      p[i] = std::expm1(u) * b[i] / a[i];
      used_b += b[i];
      used_p += p[i];
    }
    b[j] = big_b - used_b;
    p[j] = big_p - used_p;
    // Positive while the free user's realized SNR exceeds the guess.
    return a[j] * p[j] - snr * b[j];
  };
  double lo = std::log(1e-12);
  double hi = std::log(1e15);
  if (split(std::exp(lo)) <= 0.0 || split(std::exp(hi)) >= 0.0) return false;
  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (split(std::exp(mid)) > 0.0 ? lo : hi) = mid;
  }
  split(std::exp(lo));
  if (!(b[j] > 0.0) || !(p[j] >= 0.0)) return false;
  if (achievable_rate(b[j], p[j], a[j]) < r_hat[j]) return false;
  return true;
}

}  // namespace

SlotAllocation allocate_slot(std::span<const double> a,
                             const AllocParams& params) {
  check_inputs(a, params);
  const std::size_t k = a.size();
  SlotAllocation out;
  if (k == 0) return out;

  const double big_b = params.b_total;
  const double big_p = params.p_total;
  const double delta_b = params.resolved_delta_b(k);
  const double delta_s = params.resolved_delta_s();
  const double s_cap = params.resolved_s_cap();

  std::vector<double> b(k, big_b / static_cast<double>(k));
  std::vector<double> s(k, 0.0);
  std::vector<double> r_hat(k), p_min(k), chi(k);

  auto refresh_user = [&](std::size_t i) {
    r_hat[i] = params.r_min - s[i];
    p_min[i] = min_power(b[i], r_hat[i], a[i]);
    chi[i] = priority_metric(b[i], r_hat[i], a[i]);
  };
  auto refresh = [&] {
    for (std::size_t i = 0; i < k; ++i) refresh_user(i);
  };
  auto by_less = [](double x, double y) { return x < y; };
  auto by_greater = [](double x, double y) { return x > y; };
  auto any_user = [](std::size_t) { return true; };

  // Relaxes the most power-hungry user that still has slack headroom.
  auto raise_slack = [&]() {
    const auto kstar = arg_best(std::span<const double>(chi), by_less,
                                [&](std::size_t i) { return s[i] < s_cap; });
    if (kstar < 0) return false;
    const auto ks = static_cast<std::size_t>(kstar);
    s[ks] = std::min(s[ks] + delta_s, s_cap);
    refresh_user(ks);
    return true;
  };

  refresh();
  if (params.rebalance_init) {
    b = rebalance_bandwidth(chi, big_b);
    refresh();
  }

  bool exhausted = false;
  for (int it = 0; it < params.max_iters && !exhausted; ++it) {
    while (sum(r_hat) > params.c_fronthaul) {
      if (!raise_slack()) {
        exhausted = true;
        break;
      }
    }
    if (exhausted || sum(p_min) <= big_p) break;
    const auto k1 = static_cast<std::size_t>(
        arg_best(std::span<const double>(chi), by_less, any_user));
    const auto k2 = static_cast<std::size_t>(
        arg_best(std::span<const double>(chi), by_greater, any_user));
    if (k1 == k2) continue;
    b[k1] += delta_b;
    b[k2] = std::max(b[k2] - delta_b, 0.0);
    const double scale = big_b / sum(b);
    for (double& bi : b) bi *= scale;
    refresh();
  }
  while (!exhausted && sum(p_min) > big_p) {
    if (!raise_slack()) exhausted = true;
  }

  out.bandwidth = b;
  out.slack = s;
  if (!exhausted) {
    out.power = p_min;
    const double p_rem = big_p - sum(p_min);
    if (p_rem > 0.0) {
      const auto dp = waterfill_residual(b, a, p_min, p_rem, params.c_fronthaul);
      for (std::size_t i = 0; i < k; ++i) out.power[i] += dp[i];
    }
    const bool relaxed = std::ranges::any_of(s, [](double si) { return si > 0.0; });
    out.status = relaxed ? AllocStatus::kRelaxed : AllocStatus::kFeasible;
    fill_rates(out, a);
    if (params.surplus_placement) {
      std::vector<double> sb, sp;
      if (place_surplus(a, r_hat, big_b, big_p, sb, sp)) {
        enforce_fronthaul(sp, sb, a, params.c_fronthaul);
        SlotAllocation alt = out;
        alt.bandwidth = std::move(sb);
        alt.power = std::move(sp);
        fill_rates(alt, a);
        bool floors_ok = true;
        for (std::size_t i = 0; i < k; ++i) {
          if (alt.rate[i] < r_hat[i] * (1.0 - 1e-9)) floors_ok = false;
        }
        if (floors_ok && alt.sum_rate() > out.sum_rate()) out = std::move(alt);
      }
    }
    return out;
  }

  // Slack budget exhausted: report infeasible with a budget-safe allocation.
  out.status = AllocStatus::kInfeasible;
  out.power.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.power[i] = std::min(p_min[i], big_p);
  const double total_p = sum(out.power);
  if (total_p > big_p) {
    for (double& p : out.power) p *= big_p / total_p;
  }
  enforce_fronthaul(out.power, out.bandwidth, a, params.c_fronthaul);
  fill_rates(out, a);
  return out;
}

std::size_t count_allocation_violations(const SlotAllocation& alloc,
                                        const AllocParams& params,
                                        std::string* detail) {
  std::size_t violations = 0;
  auto flag = [&](const std::string& what) {
    if (violations == 0 && detail != nullptr) *detail = what;
    ++violations;
  };
  const double s_cap = params.resolved_s_cap();
  if (alloc.sum_bandwidth() > params.b_total * (1.0 + 1e-9)) flag("sum b > B_max");
  if (alloc.sum_power() > params.p_total * (1.0 + 1e-9)) flag("sum p > P_max");
  if (alloc.sum_rate() > params.c_fronthaul * (1.0 + 1e-6)) flag("sum R > C_f");
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    std::ostringstream who;
    who << "user " << i << ": ";
    if (alloc.bandwidth[i] < 0.0 || alloc.power[i] < 0.0) {
      flag(who.str() + "negative resource");
    }
    if (alloc.slack[i] < 0.0 || alloc.slack[i] > s_cap * (1.0 + 1e-12)) {
      flag(who.str() + "slack outside [0, s_cap]");
    }
    if (alloc.status == AllocStatus::kInfeasible) continue;
    if (alloc.rate[i] <
        params.r_min - alloc.slack[i] - 1e-6 * params.r_min) {
      flag(who.str() + "rate below R_min - s");
    }
  }
  if (alloc.status == AllocStatus::kFeasible) {
    for (std::size_t i = 0; i < alloc.size(); ++i) {
      if (alloc.slack[i] != 0.0) flag("feasible status with nonzero slack");
    }
  }
  return violations;
}

}  // namespace uavsim
