#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "adfl/allocation.hpp"
#include "adfl/verify.hpp"

using namespace adfl;

namespace {

long long sum_of(const std::vector<int>& v) {
  long long s = 0;
  for (int x : v) s += x;
  return s;
}

// Every composition of `total` into `parts` entries within [1, cap].
void compositions(int total, int cap, int parts, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (parts == 0) {
    if (total == 0) out.push_back(cur);
    return;
  }
  for (int x = 1; x <= std::min(cap, total); ++x) {
    cur.push_back(x);
    compositions(total - x, cap, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

TEST(Allocation, TauTotalExamples) {
  EXPECT_DOUBLE_EQ(tau_total(10, 0, 2), 5.0);
  EXPECT_DOUBLE_EQ(tau_total(10, 10, 2), 0.0);
  EXPECT_LT(tau_total(10, 12, 2), 0.0);
  Rng rng{2};
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 20; ++k) {
    const double b = u(rng), c = u(rng), e = u(rng);
    EXPECT_DOUBLE_EQ(tau_total(b, c, e), (b - c) / e);
  }
}

TEST(Allocation, TauCapExamples) {
  EXPECT_NEAR(tau_cap(1.0, 1, 0.5, 0.1), 5.0, 1e-12);
  EXPECT_NEAR(tau_cap(1.0, 2, 0.25, 0.1), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(tau_cap(1.0, 1, 1.0, 0.1), 0.0);
  EXPECT_THROW(tau_cap(1.0, 1, 0.1, 0.0), Error);
}

TEST(Allocation, ObjectiveExamples) {
  const double a = 0.7;
  EXPECT_NEAR(allocation_objective(std::vector<int>{3, 1, 1}, a), std::pow(a, 5) + a * a + a, 1e-15);
  EXPECT_NEAR(allocation_objective(std::vector<int>{1, 1, 3}, a),
              std::pow(a, 5) + std::pow(a, 4) + std::pow(a, 3), 1e-15);
  EXPECT_NEAR(allocation_objective(std::vector<int>{4}, a), std::pow(a, 4), 1e-15);
}

TEST(Allocation, TableOneOrdering) {
  const auto r = verify::table1(0.9);
  for (const auto& c : r) EXPECT_TRUE(c.pass) << c.name << " " << c.detail;
}

TEST(Allocation, UnconstrainedIsAllOnes) {
  for (int horizon : {2, 5, 12}) {
    const auto tau = closed_form_schedule(1e9, 50, horizon, 400);
    EXPECT_EQ(tau, std::vector<int>(horizon - 1, 1));
  }
}

TEST(Allocation, TableOneClosedFormIsOptimal) {
  const double a = 0.9;
  const auto tau = closed_form_schedule(5, 100, 4, 400);
  EXPECT_EQ(sum_of(tau), 5);
  std::vector<std::vector<int>> all;
  std::vector<int> cur;
  compositions(5, 5, 3, cur, all);
  for (const auto& other : all)
    EXPECT_LE(allocation_objective(tau, a), allocation_objective(other, a) + 1e-15) << verify::format_tau(other);
  EXPECT_EQ(tau, (std::vector<int>{1, 1, 3}));
}

TEST(Allocation, InfeasibleInputs) {
  EXPECT_THROW(closed_form_schedule(2, 3, 4, 400), InfeasibleError);
  EXPECT_THROW(closed_form_schedule(10, 0.5, 4, 400), InfeasibleError);
  EXPECT_THROW(closed_form_schedule(10, 3, 4, 3), Error);
  EXPECT_TRUE(closed_form_schedule(10, 3, 1, 400).empty());
}

TEST(BruteForce, Fixtures) {
  EXPECT_EQ(brute_force_schedule(5, 5, 4, 0.9), (std::vector<int>{1, 1, 3}));
  EXPECT_EQ(brute_force_schedule(7, 9, 2, 0.5), (std::vector<int>{7}));
  EXPECT_EQ(brute_force_schedule(8, 3, 5, 0.5), (std::vector<int>{1, 1, 3, 3}));
  EXPECT_THROW(brute_force_schedule(3, 2, 5, 0.5), InfeasibleError);
  EXPECT_THROW(brute_force_schedule(400, 40, 30, 0.5), SearchBudgetExceeded);
}

TEST(BruteForce, AgreesWithEnumeration) {
  for (int total = 3; total <= 9; ++total) {
    for (int cap = 1; cap <= 4; ++cap) {
      if (total > 3 * cap) continue;
      std::vector<std::vector<int>> all;
      std::vector<int> cur;
      compositions(total, cap, 3, cur, all);
      EXPECT_DOUBLE_EQ(count_compositions(total, cap, 3), static_cast<double>(all.size()));
      for (double a : {0.3, 0.8}) {
        double best = 1e300;
        for (const auto& c : all) best = std::min(best, allocation_objective(c, a));
        EXPECT_DOUBLE_EQ(allocation_objective(brute_force_schedule(total, cap, 4, a), a), best);
      }
    }
  }
}

TEST(Allocation, SmallInstanceAgainstOracle) {
  // T=6, ten rounds, cap 4, zeta 40. Recorded honestly: the closed form is
  // a relaxation and need not hit the integer optimum.
  const auto tau = closed_form_schedule(10, 4, 6, 40);
  EXPECT_EQ(sum_of(tau), 10);
  EXPECT_TRUE(std::is_sorted(tau.begin(), tau.end()));
  for (double a : {0.5, 0.9, 0.99}) {
    const auto best = brute_force_schedule(10, 4, 6, a);
    RecordProperty("a=" + csv::num(a), verify::format_tau(tau) + " vs " + verify::format_tau(best));
    EXPECT_LE(allocation_objective(tau, a), allocation_objective(best, a) + 1e-12)
        << "a=" << a << " closed " << verify::format_tau(tau) << " oracle " << verify::format_tau(best);
  }
}

TEST(Allocation, MonotoneAndWithinBudgets) {
  Rng rng{31};
  std::uniform_int_distribution<int> hz(2, 40);
  std::uniform_real_distribution<double> capd(1.0, 30.0), zd(0.0, 600.0);
  for (int k = 0; k < 2000; ++k) {
    const int horizon = hz(rng);
    const double cap = capd(rng);
    const double zeta = horizon + zd(rng);
    std::uniform_real_distribution<double> td(horizon - 1, (horizon - 1) * cap * 1.5);
    const double total = td(rng);
    const auto tau = closed_form_schedule(total, cap, horizon, zeta);
    ASSERT_EQ(static_cast<int>(tau.size()), horizon - 1);
    EXPECT_TRUE(std::is_sorted(tau.begin(), tau.end()));
    EXPECT_LE(sum_of(tau), std::floor(total));
    for (int x : tau) {
      EXPECT_GE(x, 1);
      EXPECT_LE(x, std::floor(cap));
    }
  }
}

TEST(Allocation, BackLoadingDominates) {
  for (int total = 3; total <= 12; ++total) {
    std::vector<std::vector<int>> all;
    std::vector<int> cur;
    compositions(total, total, 4, cur, all);
    for (auto c : all) {
      if (!std::is_sorted(c.rbegin(), c.rend())) continue;
      auto up = c;
      std::sort(up.begin(), up.end());
      for (double a : {0.2, 0.6, 0.95})
        EXPECT_GE(allocation_objective(c, a), allocation_objective(up, a) - 1e-15);
    }
  }
}

TEST(Allocation, FixedIterations) {
  EXPECT_EQ(fixed_iterations(300, 3), 100);
  EXPECT_EQ(fixed_iterations(300, 6), 50);
  EXPECT_EQ(fixed_iterations(299.9, 3), 99);
  EXPECT_THROW(fixed_iterations(10, 0), Error);
}

TEST(Horizon, UnlimitedBudgetsStopAtCap) {
  const std::vector<DeviceBudget> d(3, DeviceBudget{1e12, 1.0, 1.0, 5.0});
  const auto r = determine_horizon(d, 400, 37);
  EXPECT_EQ(r.horizon, 37);
  EXPECT_EQ(r.stop_reason, "horizon cap");
}

TEST(Horizon, HandBuiltThreeIterations) {
  // Each iteration costs at least 1 J compute + 1 J comm. 6 J covers three
  // iterations of minimum work, not four.
  const std::vector<DeviceBudget> d{{6.0, 1.0, 1.0, 4.0}, {100.0, 1.0, 1.0, 4.0}};
  const auto r = determine_horizon(d, 400, 1000);
  EXPECT_EQ(r.horizon, 4);
  EXPECT_EQ(r.limiting_device, 0);
  EXPECT_EQ(r.stop_reason, "energy budget");

  // Direct loop: largest T with (6 - (T-1)) / 1 >= T - 1.
  int direct = 1;
  while (6.0 - direct >= direct) ++direct;
  EXPECT_EQ(r.horizon, direct);
}

TEST(Horizon, MonotoneInBudget) {
  Rng rng{41};
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<DeviceBudget> d;
    for (int i = 0; i < 4; ++i) d.push_back({20 * u(rng), 0.1 * u(rng), 0.2 * u(rng), 1 + 3 * u(rng)});
    int prev = determine_horizon(d, 400, 300).horizon;
    for (double scale : {1.2, 1.5, 2.0, 4.0}) {
      auto bigger = d;
      for (auto& b : bigger) b.energy_budget_j *= scale;
      const int h = determine_horizon(bigger, 400, 300).horizon;
      EXPECT_GE(h, prev);
      prev = h;
    }
  }
}

TEST(Horizon, LatencyInfeasibleDevice) {
  const std::vector<DeviceBudget> d{{10, 1, 1, 3}, {10, 1, 1, 0.4}};
  try {
    determine_horizon(d, 400, 10);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.device(), 1);
  }
}

TEST(Schedule, CsvLayout) {
  AllocationSchedule s;
  s.horizon = 3;
  s.tau = {{1, 2}, {1, 1}};
  std::ostringstream os;
  s.write_csv(os);
  EXPECT_EQ(os.str(), "device,iteration,tau\n1,1,1\n1,2,2\n2,1,1\n2,2,1\n");
  EXPECT_EQ(s.device_sum(0), 3);
}
