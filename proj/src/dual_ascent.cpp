// Lagrangian dual-ascent baseline for the per-slot problem with zero slack.
//
// The objective is measured in units of B_max and every constraint row is
// divided by its right-hand side (B_max, P_max, C_f, R_min), so all
// multipliers are dimensionless: lambda for bandwidth, mu for power, rho
// for the fronthaul row, nu_k for each QoS row. For fixed multipliers the
// Lagrangian separates per user into
//   max_{0<=b<=B, 0<=p<=P} c_k R_k/B - lambda b/B - mu p/P,
//   c_k = 1 + nu_k B/R_min - rho B/C_f,
// solved with a closed form in p and a golden-section search in b. The
// multipliers follow projected subgradient steps c/sqrt(t). Primal recovery
// keeps the best QoS- and fronthaul-feasible candidate among the raw
// iterates and their running average, each projected onto the budgets, and
// the running average repaired onto the QoS floors.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>

#include "uavsim/allocation.hpp"
#include "uavsim/channel.hpp"

namespace uavsim {

namespace {

struct UserChoice {
  double b = 0.0;
  double p = 0.0;
};

UserChoice maximize_user_lagrangian(double c, double lambda, double mu,
                                    double a, double big_b, double big_p,
                                    double unit) {
  if (c <= 0.0) return {};
  // Power maximizing c R - mu p for given b, clipped to the box.
  auto power_for = [&](double b) {
    if (mu <= 0.0) return big_p;
    const double level = c * big_p / (unit * mu * std::numbers::ln2);  // W/Hz
    return std::clamp(b * (level - 1.0 / a), 0.0, big_p);
  };
  auto lagrangian = [&](double b) {
    const double p = power_for(b);
    return c * achievable_rate(b, p, a) / unit - lambda * b / big_b -
           mu * p / big_p;
  };
  // Golden-section search on the concave one-dimensional profile in b.
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0;
  double hi = big_b;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = lagrangian(x1);
  double f2 = lagrangian(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = lagrangian(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = lagrangian(x1);
    }
  }
  double best_b = 0.5 * (lo + hi);
  double best_f = lagrangian(best_b);
  for (double edge : {0.0, big_b}) {
    const double f = lagrangian(edge);
    if (f > best_f) {
      best_f = f;
      best_b = edge;
    }
  }
  return {best_b, power_for(best_b)};
}

SlotAllocation project(const std::vector<double>& b, const std::vector<double>& p,
                       std::span<const double> a, const AllocParams& params) {
  SlotAllocation out;
  out.bandwidth = b;
  out.power = p;
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  if (sb > params.b_total) {
    for (double& x : out.bandwidth) x *= params.b_total / sb;
  }
  if (sp > params.p_total) {
    for (double& x : out.power) x *= params.p_total / sp;
  }
  out.slack.assign(b.size(), 0.0);
  out.rate.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    out.rate[i] = achievable_rate(out.bandwidth[i], out.power[i], a[i]);
  }
  return out;
}

// Keeps the bandwidth split of (b, p), lifts every user to its QoS floor
// and adds back the largest common fraction theta of the surplus power that
// fits the power budget and the fronthaul cap. Returns false when the floors
// alone exceed the power budget.
bool repair(const std::vector<double>& b, const std::vector<double>& p,
            std::span<const double> a, const AllocParams& params, SlotAllocation& out) {
  const std::size_t k = b.size();
  out.bandwidth = b;
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(sb > 0.0)) return false;
  if (sb > params.b_total) {
    for (double& x : out.bandwidth) x *= params.b_total / sb;
  }
  std::vector<double> floor(k), extra(k);
  double floor_sum = 0.0;
  double extra_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    floor[i] = min_power(out.bandwidth[i], params.r_min, a[i]);
    extra[i] = std::max(0.0, p[i] - floor[i]);
    floor_sum += floor[i];
    extra_sum += extra[i];
  }
  if (!(floor_sum <= params.p_total)) return false;
  auto fill = [&](double theta) {
    double total = 0.0;
    out.power.resize(k);
    out.rate.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      out.power[i] = floor[i] + theta * extra[i];
      out.rate[i] = achievable_rate(out.bandwidth[i], out.power[i], a[i]);
      total += out.rate[i];
    }
    return total;
  };
  double theta = extra_sum > 0.0 ? std::min(1.0, (params.p_total - floor_sum) / extra_sum) : 0.0;
  if (fill(theta) > params.c_fronthaul) {
    if (fill(0.0) > params.c_fronthaul) return false;
    double lo = 0.0;
    double hi = theta;
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (fill(mid) <= params.c_fronthaul ? lo : hi) = mid;
    }
    theta = lo;
    fill(theta);
  }
  out.slack.assign(k, 0.0);
  return true;
}

bool primal_feasible(const SlotAllocation& x, const AllocParams& params) {
  if (x.sum_rate() > params.c_fronthaul * (1.0 + 1e-6)) return false;
  return std::ranges::all_of(x.rate, [&](double r) {
    return r >= params.r_min * (1.0 - 1e-6);
  });
}

}  // namespace

SlotAllocation dual_ascent_baseline(std::span<const double> a,
                                    const AllocParams& params,
                                    const DualAscentOptions& options) {
  params.validate();
  for (double ak : a) {
    if (!(ak > 0.0) || !std::isfinite(ak)) {
      throw std::invalid_argument("snr coefficients must be positive and finite");
    }
  }
  const std::size_t k = a.size();
  if (k == 0) return {};
  const double big_b = params.b_total;
  const double big_p = params.p_total;
  const double unit = big_b;

  double lambda = 1.0;
  double mu = 1.0;
  double rho = 0.0;
  std::vector<double> nu(k, 0.0);

  std::vector<double> b(k), p(k);
  std::vector<double> avg_b(k, 0.0), avg_p(k, 0.0);
  SlotAllocation best;
  bool have_best = false;
  auto consider = [&](const SlotAllocation& cand) {
    if (!primal_feasible(cand, params)) return;
    if (!have_best || cand.sum_rate() > best.sum_rate()) {
      best = cand;
      have_best = true;
    }
  };

  for (int t = 1; t <= options.iterations; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      const double c = 1.0 + nu[i] * unit / params.r_min - rho * unit / params.c_fronthaul;
      const UserChoice u = maximize_user_lagrangian(c, lambda, mu, a[i], big_b, big_p, unit);
      b[i] = u.b;
      p[i] = u.p;
    }
    const double w = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < k; ++i) {
      avg_b[i] += w * (b[i] - avg_b[i]);
      avg_p[i] += w * (p[i] - avg_p[i]);
    }
    consider(project(b, p, a, params));
    consider(project(avg_b, avg_p, a, params));
    SlotAllocation fixed;
    if (repair(avg_b, avg_p, a, params, fixed)) consider(fixed);

    // Projected subgradient step on the dual (minimization).
    const double step = options.step / std::sqrt(static_cast<double>(t));
    double sb = 0.0;
    double sp = 0.0;
    double sr = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = achievable_rate(b[i], p[i], a[i]);
      sb += b[i];
      sp += p[i];
      sr += r;
      nu[i] = std::max(0.0, nu[i] - step * (r / params.r_min - 1.0));
    }
    lambda = std::max(0.0, lambda - step * (1.0 - sb / big_b));
    mu = std::max(0.0, mu - step * (1.0 - sp / big_p));
    rho = std::max(0.0, rho - step * (1.0 - sr / params.c_fronthaul));
  }

  if (have_best) {
    best.status = AllocStatus::kFeasible;
    return best;
  }
  // No feasible iterate: return the averaged point made budget-safe.
  SlotAllocation out = project(avg_b, avg_p, a, params);
  out.status = AllocStatus::kInfeasible;
  const double cap = params.c_fronthaul;
  if (out.sum_rate() > cap) {
    double lo = 0.0;
    double hi = 1.0;
    auto rate_at = [&](double theta) {
      double r = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        r += achievable_rate(out.bandwidth[i], theta * out.power[i], a[i]);
      }
      return r;
    };
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rate_at(mid) <= cap ? lo : hi) = mid;
    }
    for (std::size_t i = 0; i < k; ++i) {
      out.power[i] *= lo;
      out.rate[i] = achievable_rate(out.bandwidth[i], out.power[i], a[i]);
    }
  }
  return out;
}

}  // namespace uavsim
