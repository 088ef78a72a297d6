#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uavsim/allocation.hpp"
#include "uavsim/channel.hpp"

using namespace uavsim;

namespace {

// SNR coefficients between a shadowed user at ~250 m and a clear user at
// ~100 m under the default channel.
std::vector<double> random_snr(Rng& rng, std::size_t k, double lo = 1e6, double hi = 1e11) {
  std::vector<double> a(k);
  for (double& x : a) x = std::exp(rng.uniform(std::log(lo), std::log(hi)));
  return a;
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void expect_budgets(const SlotAllocation& x, const AllocParams& p) {
  EXPECT_LE(x.sum_bandwidth(), p.b_total * (1 + 1e-9));
  EXPECT_LE(x.sum_power(), p.p_total * (1 + 1e-9));
  EXPECT_LE(x.sum_rate(), p.c_fronthaul * (1 + 1e-6));
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_GE(x.bandwidth[k], 0.0);
    EXPECT_GE(x.power[k], 0.0);
    EXPECT_GE(x.slack[k], 0.0);
    EXPECT_LE(x.slack[k], p.resolved_s_cap());
    if (x.status != AllocStatus::kInfeasible) {
      EXPECT_GE(x.rate[k], p.r_min - x.slack[k] - 1e-6 * p.r_min);
    }
    if (x.status == AllocStatus::kFeasible) {
      EXPECT_EQ(x.slack[k], 0.0);
    }
  }
}

// Two-user optimum by nested grid over (b_1, p_1) with b_2 = B - b_1 and
// p_2 = P - p_1, followed by the fronthaul cap (any QoS-feasible point
// whose rate exceeds C_f can be scaled back onto it).
double brute_force_two_users(const std::vector<double>& a, const AllocParams& p,
                             const std::vector<double>& s) {
  auto value = [&](double b1, double p1) {
    const double r1 = achievable_rate(b1, p1, a[0]);
    const double r2 = achievable_rate(p.b_total - b1, p.p_total - p1, a[1]);
    if (r1 < p.r_min - s[0] || r2 < p.r_min - s[1]) return -1.0;
    return r1 + r2;
  };
  double b_lo = 0, b_hi = p.b_total, p_lo = 0, p_hi = p.p_total;
  double best = -1.0, best_b = 0, best_p = 0;
  for (int level = 0; level < 8; ++level) {
    constexpr int kGrid = 200;
    for (int i = 0; i <= kGrid; ++i) {
      for (int j = 0; j <= kGrid; ++j) {
        const double b1 = b_lo + (b_hi - b_lo) * i / kGrid;
        const double p1 = p_lo + (p_hi - p_lo) * j / kGrid;
        const double v = value(b1, p1);
        if (v > best) {
          best = v;
          best_b = b1;
          best_p = p1;
        }
      }
    }
    const double db = 4 * (b_hi - b_lo) / kGrid, dp = 4 * (p_hi - p_lo) / kGrid;
    b_lo = std::max(0.0, best_b - db);
    b_hi = std::min(p.b_total, best_b + db);
    p_lo = std::max(0.0, best_p - dp);
    p_hi = std::min(p.p_total, best_p + dp);
  }
  // The optimum often sits on one user's QoS boundary, a thin ridge the 2-D
  // zoom can lose. Scan that boundary directly: the bound user gets exactly
  // its minimum power, the other user takes the remaining power.
  for (int bound = 0; bound < 2; ++bound) {
    const int other = 1 - bound;
    auto boundary = [&](double b_bound) {
      const double need = std::max(0.0, p.r_min - s[bound]);
      const double pb = need > 0 ? min_power(b_bound, need, a[bound]) : 0.0;
      if (!(pb <= p.p_total)) return -1.0;
      const double r_other = achievable_rate(p.b_total - b_bound, p.p_total - pb, a[other]);
      if (r_other < p.r_min - s[other]) return -1.0;
      return achievable_rate(b_bound, pb, a[bound]) + r_other;
    };
    double lo = 0, hi = p.b_total;
    for (int level = 0; level < 10; ++level) {
      constexpr int kGrid = 2000;
      double arg = lo, local = -1.0;
      for (int i = 0; i <= kGrid; ++i) {
        const double b = lo + (hi - lo) * i / kGrid;
        const double v = boundary(b);
        if (v > local) {
          local = v;
          arg = b;
        }
      }
      best = std::max(best, local);
      const double db = 4 * (hi - lo) / kGrid;
      lo = std::max(0.0, arg - db);
      hi = std::min(p.b_total, arg + db);
    }
  }
  return best < 0 ? best : std::min(best, p.c_fronthaul);
}

}  // namespace

TEST(MinPower, Examples) {
  EXPECT_DOUBLE_EQ(min_power(1e6, 1e6, 4e6), 0.25);
  EXPECT_DOUBLE_EQ(min_power(1e6, 0.0, 4e6), 0.0);
  EXPECT_DOUBLE_EQ(min_power(1e6, 2e6, 1e6), 3.0);
  EXPECT_TRUE(std::isinf(min_power(0.0, 1e6, 1e6)));
}

TEST(PriorityMetric, Examples) {
  EXPECT_DOUBLE_EQ(priority_metric(1e6, 1e6, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(priority_metric(1e6, 3e5, 4.0), 2.0 * priority_metric(1e6, 3e5, 2.0));
  double prev = priority_metric(1e6, 1e5, 3.0);
  for (double r = 2e5; r < 5e6; r += 1e5) {
    const double chi = priority_metric(1e6, r, 3.0);
    EXPECT_LT(chi, prev);
    prev = chi;
  }
  EXPECT_TRUE(std::isinf(priority_metric(1e6, 0.0, 3.0)));
}

TEST(Rebalance, Examples) {
  const double b = 20e6;
  const std::vector<double> equal = rebalance_bandwidth(std::vector<double>{1, 1}, b);
  EXPECT_DOUBLE_EQ(equal[0], b / 2);
  EXPECT_DOUBLE_EQ(equal[1], b / 2);
  const std::vector<double> skew = rebalance_bandwidth(std::vector<double>{1, 3}, b);
  EXPECT_NEAR(skew[0], 0.75 * b, 1e-6);
  EXPECT_NEAR(skew[1], 0.25 * b, 1e-6);
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> fallback = rebalance_bandwidth(std::vector<double>{inf, inf}, b);
  EXPECT_DOUBLE_EQ(fallback[0], b / 2);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> chis = random_snr(rng, 1 + rng.below(22), 1e-3, 1e3);
    EXPECT_EQ(total(rebalance_bandwidth(chis, b)), b);
  }
}

TEST(Waterfill, SymmetricUsersSplitEvenly) {
  const std::vector<double> b{1e6, 1e6}, a{1e8, 1e8}, pmin{0.1, 0.1};
  const std::vector<double> dp = waterfill_residual(b, a, pmin, 2.0, 1e12);
  EXPECT_NEAR(dp[0], 1.0, 1e-9);
  EXPECT_NEAR(dp[1], 1.0, 1e-9);
  const std::vector<double> none = waterfill_residual(b, a, pmin, 0.0, 1e12);
  EXPECT_EQ(none, (std::vector<double>{0.0, 0.0}));
}

TEST(Waterfill, CommonWaterLevelAndGridOracle) {
  Rng rng(31);
  int capped = 0;
  for (int i = 0; i < 300; ++i) {
    const std::size_t k = 1 + rng.below(4);
    const std::vector<double> a = random_snr(rng, k, 1e6, 1e9);
    std::vector<double> b(k), pmin(k);
    for (std::size_t j = 0; j < k; ++j) {
      b[j] = rng.uniform(1e5, 1e7);
      pmin[j] = rng.uniform(0.0, 0.2);
    }
    const double p_rem = rng.uniform(0.0, 2.0);
    std::vector<double> p_floor = pmin;
    const double floor_rate = oracle::sum_rate(b, p_floor, a);
    const double cf = rng.bernoulli(0.4) ? floor_rate * rng.uniform(1.0, 1.3) : 1e12;
    const std::vector<double> dp = waterfill_residual(b, a, pmin, p_rem, cf);

    double spend = 0.0, mu = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      spend += dp[j];
      if (dp[j] > 0) mu = std::max(mu, dp[j] + b[j] / a[j]);
    }
    EXPECT_LE(spend, p_rem * (1 + 1e-9) + 1e-15);
    std::vector<double> p(k);
    for (std::size_t j = 0; j < k; ++j) p[j] = pmin[j] + dp[j];
    EXPECT_LE(oracle::sum_rate(b, p, a), cf * (1 + 1e-9));
    for (std::size_t j = 0; j < k; ++j) {
      if (dp[j] > 0) {
        EXPECT_NEAR(dp[j] + b[j] / a[j], mu, 1e-6 * mu);
      } else {
        EXPECT_GE(b[j] / a[j], mu - 1e-6 * mu);
      }
    }

    const std::vector<double> want = oracle::waterfill_grid(b, a, pmin, p_rem, cf);
    std::vector<double> pw(k);
    for (std::size_t j = 0; j < k; ++j) pw[j] = pmin[j] + want[j];
    const double got_rate = oracle::sum_rate(b, p, a);
    const double want_rate = oracle::sum_rate(b, pw, a);
    EXPECT_NEAR(got_rate, want_rate, 1e-6 * want_rate);
    capped += cf < 1e12 ? 1 : 0;
  }
  EXPECT_GT(capped, 50);
}

TEST(AllocateSlot, SingleStrongUser) {
  const AllocParams p;
  const SlotAllocation x = allocate_slot(std::vector<double>{1e9}, p);
  ASSERT_EQ(x.size(), 1u);
  EXPECT_EQ(x.status, AllocStatus::kFeasible);
  EXPECT_EQ(x.slack[0], 0.0);
  EXPECT_DOUBLE_EQ(x.bandwidth[0], p.b_total);
  EXPECT_GE(x.rate[0], p.r_min);
  EXPECT_LE(x.sum_power(), p.p_total * (1 + 1e-9));
}

TEST(AllocateSlot, TightFronthaulRelaxesWeakestUserFirst) {
  AllocParams p;
  p.c_fronthaul = 1.95e6;  // below 2 R_min
  const std::vector<double> a{1e9, 1e7};
  const SlotAllocation x = allocate_slot(a, p);
  EXPECT_EQ(x.status, AllocStatus::kRelaxed);
  EXPECT_GT(x.slack[1], 0.0);  // smaller a, equal bandwidth: smaller chi
  EXPECT_EQ(x.slack[0], 0.0);
  expect_budgets(x, p);
}

TEST(AllocateSlot, EmptyAndInvalidInput) {
  EXPECT_EQ(allocate_slot(std::vector<double>{}, AllocParams{}).size(), 0u);
  EXPECT_THROW(allocate_slot(std::vector<double>{1e8, 0.0}, AllocParams{}), std::invalid_argument);
  EXPECT_THROW(allocate_slot(std::vector<double>{1e8, -1.0}, AllocParams{}), std::invalid_argument);
  AllocParams bad;
  bad.p_total = 0.0;
  EXPECT_THROW(allocate_slot(std::vector<double>{1e8}, bad), std::invalid_argument);
}

TEST(AllocateSlot, BudgetSafetyOnRandomInstances) {
  Rng rng(41);
  int relaxed = 0, infeasible = 0;
  for (int i = 0; i < 3000; ++i) {
    AllocParams p;
    if (rng.bernoulli(0.3)) p.c_fronthaul = rng.uniform(5e6, 60e6);
    if (rng.bernoulli(0.3)) p.p_total = rng.uniform(0.01, 2.0);
    p.rebalance_init = rng.bernoulli(0.5);
    const std::vector<double> a = random_snr(rng, 1 + rng.below(22));
    const SlotAllocation x = allocate_slot(a, p);
    expect_budgets(x, p);
    EXPECT_EQ(count_allocation_violations(x, p), 0u);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_DOUBLE_EQ(x.rate[k], achievable_rate(x.bandwidth[k], x.power[k], a[k]));
    }
    relaxed += x.status == AllocStatus::kRelaxed ? 1 : 0;
    infeasible += x.status == AllocStatus::kInfeasible ? 1 : 0;
  }
  EXPECT_GT(relaxed, 10);
  EXPECT_GT(infeasible, 10);
}

TEST(AllocateSlot, NoSlackWhenZeroSlackIsFeasible) {
  Rng rng(43);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    AllocParams p;
    const std::size_t k = 1 + rng.below(3);
    const std::vector<double> a = random_snr(rng, k, 3e5, 1e11);
    const std::vector<double> zero(k, 0.0);
    if (concave_oracle(a, p, zero).status == AllocStatus::kInfeasible) continue;
    ++checked;
    const SlotAllocation x = allocate_slot(a, p);
    EXPECT_EQ(x.status, AllocStatus::kFeasible) << "instance " << i;
    for (double s : x.slack) EXPECT_EQ(s, 0.0);
  }
  EXPECT_GT(checked, 100);
}

TEST(AllocateSlot, NeverBeatsTheOracle) {
  Rng rng(47);
  for (int i = 0; i < 200; ++i) {
    AllocParams p;
    if (rng.bernoulli(0.3)) p.c_fronthaul = rng.uniform(5e6, 60e6);
    const std::size_t k = 2 + rng.below(2);
    const std::vector<double> a = random_snr(rng, k);
    const SlotAllocation x = allocate_slot(a, p);
    if (x.status == AllocStatus::kInfeasible) continue;
    const SlotAllocation opt = concave_oracle(a, p, x.slack);
    ASSERT_NE(opt.status, AllocStatus::kInfeasible);
    EXPECT_GE(opt.sum_rate(), x.sum_rate() * (1 - 1e-9));
  }
}

TEST(AllocateSlot, SurplusPlacementReachesTheOracle) {
  Rng rng(53);
  AllocParams p;
  p.surplus_placement = true;
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 2 + rng.below(2);
    const std::vector<double> a = random_snr(rng, k, 1e7, 1e11);
    const SlotAllocation x = allocate_slot(a, p);
    if (x.status != AllocStatus::kFeasible) continue;
    const SlotAllocation opt = concave_oracle(a, p, x.slack);
    ++checked;
    EXPECT_GE(x.sum_rate(), opt.sum_rate() * (1 - 1e-6)) << "instance " << i;
    expect_budgets(x, p);
  }
  EXPECT_GT(checked, 150);
}

TEST(AllocateSlot, Deterministic) {
  Rng rng(59);
  const std::vector<double> a = random_snr(rng, 22);
  const SlotAllocation x = allocate_slot(a, AllocParams{});
  const SlotAllocation y = allocate_slot(a, AllocParams{});
  EXPECT_EQ(x.bandwidth, y.bandwidth);
  EXPECT_EQ(x.power, y.power);
  EXPECT_EQ(x.slack, y.slack);
}

TEST(ConcaveOracle, SingleUserTakesEverything) {
  const AllocParams p;
  const SlotAllocation x = concave_oracle(std::vector<double>{1e8}, p, std::vector<double>{0.0});
  EXPECT_NEAR(x.bandwidth[0], p.b_total, 1e-6 * p.b_total);
  EXPECT_NEAR(x.power[0], p.p_total, 1e-6 * p.p_total);
}

TEST(ConcaveOracle, SymmetricInstanceHasSymmetricOptimum) {
  const AllocParams p;
  const SlotAllocation x =
      concave_oracle(std::vector<double>{5e8, 5e8}, p, std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(x.bandwidth[0], x.bandwidth[1], 1e-6 * p.b_total);
  EXPECT_NEAR(x.power[0], x.power[1], 1e-6 * p.p_total);
}

TEST(ConcaveOracle, MatchesBruteForceGrid) {
  Rng rng(61);
  for (int i = 0; i < 25; ++i) {
    AllocParams p;
    if (i % 3 == 0) p.c_fronthaul = rng.uniform(5e6, 40e6);
    const std::vector<double> a = random_snr(rng, 2, 3e6, 1e10);
    const std::vector<double> s{rng.bernoulli(0.5) ? 5e4 : 0.0, 0.0};
    const SlotAllocation x = concave_oracle(a, p, s);
    const double want = brute_force_two_users(a, p, s);
    if (want < 0) {
      EXPECT_EQ(x.status, AllocStatus::kInfeasible);
      continue;
    }
    ASSERT_NE(x.status, AllocStatus::kInfeasible);
    std::string why;
    EXPECT_EQ(count_allocation_violations(x, p, &why), 0u) << why;
    EXPECT_NEAR(x.sum_rate(), want, 1e-6 * want) << "instance " << i;
  }
}

TEST(ConcaveOracle, ReportsEmptyQosRegion) {
  const AllocParams p;
  const SlotAllocation x =
      concave_oracle(std::vector<double>{1e5, 1e5}, p, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(x.status, AllocStatus::kInfeasible);
}

TEST(DualAscent, SingleUserMatchesHeuristic) {
  const AllocParams p;
  for (double a : {1e7, 1e8, 1e10}) {
    const std::vector<double> av{a};
    const SlotAllocation d = dual_ascent_baseline(av, p);
    const SlotAllocation h = allocate_slot(av, p);
    const SlotAllocation o = concave_oracle(av, p, std::vector<double>{0.0});
    EXPECT_NEAR(d.sum_rate(), h.sum_rate(), 0.01 * h.sum_rate());
    EXPECT_NEAR(d.sum_rate(), o.sum_rate(), 0.01 * o.sum_rate());
  }
}

TEST(DualAscent, SymmetricInstanceIsSymmetric) {
  const SlotAllocation d = dual_ascent_baseline(std::vector<double>{3e8, 3e8}, AllocParams{});
  EXPECT_NEAR(d.bandwidth[0], d.bandwidth[1], 1e-6 * d.bandwidth[0]);
  EXPECT_NEAR(d.power[0], d.power[1], 1e-6 * d.power[0]);
}

TEST(DualAscent, TightFronthaulIsInfeasibleWhereHeuristicRelaxes) {
  AllocParams p;
  p.c_fronthaul = 1.9e6;
  const std::vector<double> a{1e9, 5e8};
  EXPECT_EQ(concave_oracle(a, p, std::vector<double>{0.0, 0.0}).status, AllocStatus::kInfeasible);
  EXPECT_EQ(dual_ascent_baseline(a, p).status, AllocStatus::kInfeasible);
  EXPECT_EQ(allocate_slot(a, p).status, AllocStatus::kRelaxed);
}

TEST(DualAscent, BudgetsHoldOnRandomInstances) {
  Rng rng(67);
  for (int i = 0; i < 100; ++i) {
    AllocParams p;
    if (rng.bernoulli(0.4)) p.c_fronthaul = rng.uniform(10e6, 80e6);
    const std::vector<double> a = random_snr(rng, 1 + rng.below(10));
    const SlotAllocation d = dual_ascent_baseline(a, p);
    EXPECT_LE(d.sum_bandwidth(), p.b_total * (1 + 1e-9));
    EXPECT_LE(d.sum_power(), p.p_total * (1 + 1e-9));
    EXPECT_LE(d.sum_rate(), p.c_fronthaul * (1 + 1e-6));
    for (double s : d.slack) EXPECT_EQ(s, 0.0);
    if (d.status == AllocStatus::kFeasible) {
      for (double r : d.rate) EXPECT_GE(r, p.r_min * (1 - 1e-6));
    }
  }
}

TEST(Violations, DetectsBrokenAllocations) {
  const AllocParams p;
  SlotAllocation x = allocate_slot(std::vector<double>{1e9, 1e9}, p);
  ASSERT_EQ(count_allocation_violations(x, p), 0u);
  x.power[0] += p.p_total;
  std::string detail;
  EXPECT_GT(count_allocation_violations(x, p, &detail), 0u);
  EXPECT_FALSE(detail.empty());
}

TEST(AllocStatus, StringRoundTrip) {
  for (AllocStatus s : {AllocStatus::kFeasible, AllocStatus::kRelaxed, AllocStatus::kInfeasible}) {
    EXPECT_EQ(alloc_status_from_string(to_string(s)), s);
  }
  EXPECT_THROW(alloc_status_from_string("maybe"), std::invalid_argument);
}
