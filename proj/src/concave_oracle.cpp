// Reference optimum for the per-slot sum-rate problem with frozen slacks.
//
// Works in normalized units: bandwidth as a fraction of B_max, power as a
// fraction of P_max and rates in units of B_max (bit/s/Hz over the band).
// With a_tilde = a P_max / B_max the per-user rate is
//   r(x, y) = x log2(1 + a_tilde y / x),
// jointly concave in (x, y). Without the fronthaul row the feasible set is
// convex and a log-barrier Newton method reaches the global optimum. The
// fronthaul row {sum r <= C} is a superlevel cut of a concave function; if
// it binds, the optimum value is exactly C and is attained on the segment
// between the QoS-minimal point and the unconstrained optimum.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "uavsim/allocation.hpp"
#include "uavsim/channel.hpp"

namespace uavsim {

namespace {

constexpr double kLn2 = std::numbers::ln2;

struct RateDerivatives {
  double value;
  double dx, dy;
  double dxx, dxy, dyy;
};

RateDerivatives rate_derivatives(double x, double y, double a) {
  const double s = a * y / x;
  const double one_s = 1.0 + s;
  RateDerivatives d{};
  d.value = x * std::log2(one_s);
  d.dx = std::log2(one_s) - s / (one_s * kLn2);
  d.dy = a / (one_s * kLn2);
  const double c = 1.0 / (kLn2 * one_s * one_s * x);
  d.dxx = -s * s * c;
  d.dxy = a * s * c;
  d.dyy = -a * a * c;
  return d;
}

// psi(u) = e^u (u - 1) + 1 is the negated derivative of the min-power
// curve (times a_tilde) at u = rho ln2 / x.
double psi(double u) { return std::exp(u) * (u - 1.0) + 1.0; }

// Bandwidth x minimizing sum of min-power for demanding users, subject to
// sum x = budget. Returns per-user x (zero for non-demanding users).
std::vector<double> min_power_bandwidth(const std::vector<double>& rho,
                                        const std::vector<double>& a,
                                        double budget) {
  const std::size_t k = rho.size();
  // For marginal price nu, each demanding user picks u with psi(u) = nu a.
  auto x_of = [&](std::size_t i, double log_nu) {
    const double target_log = log_nu + std::log(a[i]);
    double lo = 1e-12;
    double hi = 700.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double p = psi(mid);
      if (std::log(std::max(p, 1e-300)) < target_log) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return rho[i] * kLn2 / (0.5 * (lo + hi));
  };
  auto total = [&](double log_nu) {
    double t = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (rho[i] > 0.0) t += x_of(i, log_nu);
    }
    return t;
  };
  double lo = -700.0;  // small price -> large bandwidth
  double hi = 700.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total(mid) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  std::vector<double> x(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (rho[i] > 0.0) x[i] = x_of(i, hi);
  }
  return x;
}

double min_power_norm(double x, double rho, double a) {
  if (rho <= 0.0) return 0.0;
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  return std::expm1(rho / x * kLn2) * x / a;
}

class BarrierProblem {
 public:
  BarrierProblem(std::vector<double> a, std::vector<double> rho)
      : a_(std::move(a)), rho_(std::move(rho)), k_(a_.size()) {}

  std::size_t constraint_count() const {
    std::size_t m = 2 * k_ + 2;
    for (double r : rho_) m += r > 0.0 ? 1 : 0;
    return m;
  }

  bool strictly_feasible(const Eigen::VectorXd& z) const {
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      if (!(z[i] > 0.0) || !(z[k_ + i] > 0.0)) return false;
      sx += z[i];
      sy += z[k_ + i];
    }
    if (!(sx < 1.0) || !(sy < 1.0)) return false;
    for (std::size_t i = 0; i < k_; ++i) {
      if (rho_[i] > 0.0 && !(rate(z, i) > rho_[i])) return false;
    }
    return true;
  }

  double rate(const Eigen::VectorXd& z, std::size_t i) const {
    return z[i] * std::log2(1.0 + a_[i] * z[k_ + i] / z[i]);
  }

  double objective(const Eigen::VectorXd& z) const {
    double r = 0.0;
    for (std::size_t i = 0; i < k_; ++i) r += rate(z, i);
    return r;
  }

  // Barrier-augmented objective t*sum(r) + sum(log g_i).
  double value(const Eigen::VectorXd& z, double t) const {
    double v = t * objective(z);
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      v += std::log(z[i]) + std::log(z[k_ + i]);
      sx += z[i];
      sy += z[k_ + i];
      if (rho_[i] > 0.0) v += std::log(rate(z, i) - rho_[i]);
    }
    return v + std::log(1.0 - sx) + std::log(1.0 - sy);
  }

  void derivatives(const Eigen::VectorXd& z, double t, Eigen::VectorXd& g,
                   Eigen::MatrixXd& h) const {
    const auto n = static_cast<Eigen::Index>(2 * k_);
    g.setZero(n);
    h.setZero(n, n);
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      const auto bi = static_cast<Eigen::Index>(i);
      const auto pi = static_cast<Eigen::Index>(k_ + i);
      const RateDerivatives d = rate_derivatives(z[bi], z[pi], a_[i]);
      double w = t;  // weight on the rate's own derivatives
      if (rho_[i] > 0.0) {
        const double q = d.value - rho_[i];
        w += 1.0 / q;
        const double q2 = q * q;
        h(bi, bi) -= d.dx * d.dx / q2;
        h(bi, pi) -= d.dx * d.dy / q2;
        h(pi, bi) -= d.dx * d.dy / q2;
        h(pi, pi) -= d.dy * d.dy / q2;
      }
      g[bi] += w * d.dx + 1.0 / z[bi];
      g[pi] += w * d.dy + 1.0 / z[pi];
      h(bi, bi) += w * d.dxx - 1.0 / (z[bi] * z[bi]);
      h(bi, pi) += w * d.dxy;
      h(pi, bi) += w * d.dxy;
      h(pi, pi) += w * d.dyy - 1.0 / (z[pi] * z[pi]);
      sx += z[bi];
      sy += z[pi];
    }
    const double gx = 1.0 - sx;
    const double gy = 1.0 - sy;
    for (std::size_t i = 0; i < k_; ++i) {
      const auto bi = static_cast<Eigen::Index>(i);
      const auto pi = static_cast<Eigen::Index>(k_ + i);
      g[bi] -= 1.0 / gx;
      g[pi] -= 1.0 / gy;
      for (std::size_t j = 0; j < k_; ++j) {
        const auto bj = static_cast<Eigen::Index>(j);
        const auto pj = static_cast<Eigen::Index>(k_ + j);
        h(bi, bj) -= 1.0 / (gx * gx);
        h(pi, pj) -= 1.0 / (gy * gy);
      }
    }
  }

  // Damped Newton centering at barrier weight t.
  void center(Eigen::VectorXd& z, double t) const {
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    for (int it = 0; it < 200; ++it) {
      derivatives(z, t, g, h);
      Eigen::MatrixXd neg = -h;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(neg);
      Eigen::VectorXd step = ldlt.solve(g);
      if (!step.allFinite()) break;
      const double decrement = g.dot(step);
      if (decrement / 2.0 < 1e-14) break;
      double s = 1.0;
      while (s > 1e-20 && !strictly_feasible(z + s * step)) s *= 0.5;
      const double v0 = value(z, t);
      while (s > 1e-20 && value(z + s * step, t) < v0 + 0.25 * s * decrement) {
        s *= 0.5;
      }
      if (s <= 1e-20) break;
      z += s * step;
    }
  }

  std::size_t size() const { return k_; }

 private:
  std::vector<double> a_;
  std::vector<double> rho_;
  std::size_t k_;
};

}  // namespace

SlotAllocation concave_oracle(std::span<const double> snr_coeff,
                              const AllocParams& params,
                              std::span<const double> s_fixed) {
  params.validate();
  const std::size_t k = snr_coeff.size();
  if (s_fixed.size() != k) {
    throw std::invalid_argument("concave_oracle: slack vector size mismatch");
  }
  if (k > 8) throw std::invalid_argument("concave_oracle is for small K only");
  SlotAllocation out;
  out.slack.assign(s_fixed.begin(), s_fixed.end());
  if (k == 0) return out;

  const double big_b = params.b_total;
  const double big_p = params.p_total;
  const double unit = big_b;  // rate unit
  std::vector<double> a(k), rho(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(snr_coeff[i] > 0.0)) {
      throw std::invalid_argument("concave_oracle: snr coefficients must be > 0");
    }
    a[i] = snr_coeff[i] * big_p / big_b;
    rho[i] = std::max(0.0, params.r_min - s_fixed[i]) / unit;
  }
  const bool relaxed =
      std::ranges::any_of(s_fixed, [](double s) { return s > 0.0; });
  auto finish = [&](const std::vector<double>& x, const std::vector<double>& y,
                    AllocStatus status) {
    out.bandwidth.resize(k);
    out.power.resize(k);
    out.rate.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      out.bandwidth[i] = x[i] * big_b;
      out.power[i] = y[i] * big_p;
      out.rate[i] = achievable_rate(out.bandwidth[i], out.power[i], snr_coeff[i]);
    }
    out.status = status;
    return out;
  };

  // QoS-minimal point: min-power bandwidth split with a small reserve so
  // every user keeps positive bandwidth.
  double rho_sum = 0.0;
  for (double r : rho) rho_sum += r;
  const double c_norm = params.c_fronthaul / unit;
  constexpr double kReserve = 1e-3;
  std::vector<double> x0 = min_power_bandwidth(rho, a, 1.0);
  double p_needed = 0.0;
  for (std::size_t i = 0; i < k; ++i) p_needed += min_power_norm(x0[i], rho[i], a[i]);
  if (rho_sum > c_norm * (1.0 + 1e-12) || p_needed > 1.0 + 1e-12) {
    std::vector<double> xs(k, 1.0 / static_cast<double>(k));
    std::vector<double> ys(k, 0.0);
    return finish(xs, ys, AllocStatus::kInfeasible);
  }
  std::vector<double> x_start(k), y_min(k);
  for (std::size_t i = 0; i < k; ++i) {
    x_start[i] = (1.0 - 2.0 * kReserve) * x0[i] + kReserve / static_cast<double>(k);
    y_min[i] = min_power_norm(x_start[i], rho[i], a[i]);
  }
  double y_sum = 0.0;
  for (double y : y_min) y_sum += y;
  const AllocStatus ok = relaxed ? AllocStatus::kRelaxed : AllocStatus::kFeasible;
  const double gap = 1.0 - y_sum;
  if (!(gap > 1e-12)) {
    // No interior: the min-power point is the only (approximate) solution.
    std::vector<double> y0(k);
    for (std::size_t i = 0; i < k; ++i) y0[i] = min_power_norm(x0[i], rho[i], a[i]);
    return finish(x0, y0, ok);
  }

  BarrierProblem problem(a, rho);
  Eigen::VectorXd z(static_cast<Eigen::Index>(2 * k));
  for (std::size_t i = 0; i < k; ++i) {
    z[static_cast<Eigen::Index>(i)] = x_start[i];
    z[static_cast<Eigen::Index>(k + i)] = y_min[i] + gap / (2.0 * static_cast<double>(k));
  }
  const double m = static_cast<double>(problem.constraint_count());
  double t = 1.0;
  for (int outer = 0; outer < 60; ++outer) {
    problem.center(z, t);
    const double v = problem.objective(z);
    if (m / t <= 1e-11 * std::max(1.0, v)) break;
    t *= 8.0;
  }

  std::vector<double> xs(k), ys(k);
  for (std::size_t i = 0; i < k; ++i) {
    xs[i] = z[static_cast<Eigen::Index>(i)];
    ys[i] = z[static_cast<Eigen::Index>(k + i)];
  }
  if (problem.objective(z) <= c_norm) return finish(xs, ys, ok);

  // Fronthaul binds: walk from the QoS-minimal point toward the optimum
  // until the sum rate reaches the cap.
  std::vector<double> y_start(k);
  for (std::size_t i = 0; i < k; ++i) y_start[i] = y_min[i];
  auto blend = [&](double theta, std::vector<double>& xb, std::vector<double>& yb) {
    double r = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      xb[i] = (1.0 - theta) * x_start[i] + theta * xs[i];
      yb[i] = (1.0 - theta) * y_start[i] + theta * ys[i];
      r += xb[i] * std::log2(1.0 + a[i] * yb[i] / xb[i]);
    }
    return r;
  };
  std::vector<double> xb(k), yb(k);
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (blend(mid, xb, yb) <= c_norm ? lo : hi) = mid;
  }
  blend(lo, xb, yb);
  return finish(xb, yb, ok);
}

}  // namespace uavsim
