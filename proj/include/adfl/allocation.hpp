#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "adfl/csv.hpp"
#include "adfl/error.hpp"

namespace adfl {

/// Training rounds the energy budget affords after paying for communication.
/// Negative when communication alone exhausts the budget.
inline double tau_total(double energy_budget_j, double total_comm_energy_j, double comp_energy_j) {
  if (!(comp_energy_j > 0)) throw Error("computation energy per round must be positive");
  return (energy_budget_j - total_comm_energy_j) / comp_energy_j;
}

/// Rounds per iteration the latency threshold affords. Below 1 means the
/// device cannot train within one iteration at all.
inline double tau_cap(double latency_budget_s, int comm_rounds, double comm_latency_s,
                      double comp_latency_s) {
  if (!(comp_latency_s > 0)) throw Error("computation latency per round must be positive");
  return (latency_budget_s - comm_rounds * comm_latency_s) / comp_latency_s;
}

/// sum_j a^(tau_j + ... + tau_last)
inline double allocation_objective(std::span<const int> tau, double a) {
  double obj = 0.0;
  long long suffix = 0;
  for (auto it = tau.rbegin(); it != tau.rend(); ++it) {
    suffix += *it;
    obj += std::pow(a, static_cast<double>(suffix));
  }
  return obj;
}

/// Closed-form back-loaded schedule of `horizon - 1` entries.
///
/// Weights grow with t as ln((zeta - t + 1) / (L - t + 1)), L = horizon - 1.
/// In the budget-limited regime each entry is its weight share of the budget,
/// floored; entries are then clamped to [1, floor(cap)] and any remaining
/// rounds go to the latest iterations. Past the last threshold the schedule
/// is all ones.
inline std::vector<int> closed_form_schedule(double total, double cap, int horizon, double zeta) {
  const int len = horizon - 1;
  if (len < 1) return {};
  if (!(zeta > len))
    throw Error("zeta (" + csv::num(zeta) + ") must exceed horizon - 1 (" + std::to_string(len) + ")");
  if (!(cap >= 1))
    throw InfeasibleError("latency budget infeasible: per-iteration cap " + csv::num(cap) + " < 1");
  if (!(total >= len))
    throw InfeasibleError("energy budget infeasible: " + csv::num(total) + " rounds for " +
                          std::to_string(len) + " iterations");

  std::vector<double> w(len);
  for (int t = 1; t <= len; ++t) w[t - 1] = std::log((zeta - t + 1) / static_cast<double>(len - t + 1));
  double sum_w = 0.0;
  for (double x : w) sum_w += x;

  std::optional<std::vector<double>> raw;
  if (total <= sum_w / w[0] * cap) {
    raw.emplace(len);
    for (int t = 0; t < len; ++t) (*raw)[t] = std::floor(w[t] / sum_w * total);
  } else {
    for (int t0 = 1; t0 <= len - 1 && !raw; ++t0) {
      const double lo = sum_w / w[t0 - 1] * cap;
      const double hi = sum_w / w[t0] * cap;
      if (!(lo <= total && total <= hi)) continue;
      double tail = 0.0;
      for (int tp = t0 + 1; tp <= len; ++tp)
        tail += std::log((zeta - len + tp) / static_cast<double>(tp));
      raw.emplace(len);
      for (int t = 1; t <= len; ++t)
        (*raw)[t - 1] = t <= t0 ? 1.0 : std::floor(w[t - 1] / tail * (total - t0 * cap));
    }
  }
  if (!raw) return std::vector<int>(len, 1);

  const int icap = static_cast<int>(std::floor(cap));
  const long long budget = static_cast<long long>(std::floor(total));
  std::vector<int> tau(len);
  long long sum = 0;
  for (int t = 0; t < len; ++t) {
    tau[t] = static_cast<int>(std::clamp((*raw)[t], 1.0, static_cast<double>(icap)));
    sum += tau[t];
  }
  for (int t = 0; t < len && sum > budget; ++t) {
    const long long take = std::min<long long>(tau[t] - 1, sum - budget);
    tau[t] -= static_cast<int>(take);
    sum -= take;
  }
  for (int t = len - 1; t >= 0 && sum < budget; --t) {
    const long long give = std::min<long long>(icap - tau[t], budget - sum);
    tau[t] += static_cast<int>(give);
    sum += give;
  }
  return tau;
}

/// Number of compositions of `total` into `parts` entries within [1, cap].
inline double count_compositions(int total, int cap, int parts) {
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  for (int p = 0; p < parts; ++p) {
    std::vector<double> next(total + 1, 0.0);
    for (int s = 0; s <= total; ++s) {
      if (ways[s] == 0) continue;
      for (int x = 1; x <= cap && s + x <= total; ++x) next[s + x] += ways[s];
    }
    ways = std::move(next);
  }
  return ways[total];
}

inline constexpr double kBruteForceLimit = 1e7;

/// Exact minimiser of allocation_objective over compositions of `total` into
/// `horizon - 1` parts within [1, cap]; lexicographically smallest on ties.
inline std::vector<int> brute_force_schedule(int total, int cap, int horizon, double a) {
  const int len = horizon - 1;
  if (len < 1) throw Error("horizon must be at least 2");
  if (cap < 1 || total < len || total > static_cast<long long>(len) * cap)
    throw InfeasibleError("no composition of " + std::to_string(total) + " into " +
                          std::to_string(len) + " parts within [1, " + std::to_string(cap) + "]");
  if (count_compositions(total, cap, len) > kBruteForceLimit)
    throw SearchBudgetExceeded("composition search exceeds " + csv::num(kBruteForceLimit));

  std::vector<int> cur(len), best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    const int slots = len - pos - 1;
    if (slots == 0) {
      if (remaining < 1 || remaining > cap) return;
      cur[pos] = remaining;
      const double obj = allocation_objective(cur, a);
      if (obj < best_obj) {
        best_obj = obj;
        best = cur;
      }
      return;
    }
    const int lo = std::max(1, remaining - slots * cap);
    const int hi = std::min(cap, remaining - slots);
    for (int x = lo; x <= hi; ++x) {
      cur[pos] = x;
      rec(pos + 1, remaining - x);
    }
  };
  rec(0, total);
  return best;
}

/// Iterations a fixed per-iteration round count affords from the same total.
inline int fixed_iterations(double total, int tau) {
  if (tau < 1) throw Error("fixed rounds per iteration must be >= 1");
  return static_cast<int>(std::floor(total / tau));
}

/// Per-device inputs to the horizon search.
struct DeviceBudget {
  double energy_budget_j;
  double comp_energy_j;        // per training round
  double comm_energy_j;        // per aggregation phase
  double tau_cap;              // rounds per iteration allowed by latency
};

struct HorizonResult {
  int horizon = 1;                  // model states; horizon - 1 iterations
  std::vector<double> tau_total;    // per device at the chosen horizon
  std::optional<int> limiting_device;
  std::string stop_reason;
};

/// Grows the horizon while every device's closed-form schedule fits its
/// energy budget. Stops at the first violation, at `horizon_max`, or when the
/// schedule would leave the domain of zeta.
inline HorizonResult determine_horizon(std::span<const DeviceBudget> devices, double zeta,
                                       int horizon_max) {
  if (devices.empty()) throw Error("no devices");
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (!(devices[i].tau_cap >= 1))
      throw InfeasibleError("device " + std::to_string(i + 1) +
                                " cannot finish one training round within the latency budget",
                            static_cast<int>(i));

  auto totals_at = [&](int horizon) {
    std::vector<double> out(devices.size());
    for (std::size_t i = 0; i < devices.size(); ++i)
      out[i] = tau_total(devices[i].energy_budget_j, (horizon - 1) * devices[i].comm_energy_j,
                         devices[i].comp_energy_j);
    return out;
  };

  HorizonResult r;
  r.tau_total = totals_at(1);
  while (true) {
    const int next = r.horizon + 1;
    if (next > horizon_max) {
      r.stop_reason = "horizon cap";
      break;
    }
    if (!(zeta > next - 1)) {
      r.stop_reason = "zeta domain";
      break;
    }
    auto totals = totals_at(next);
    bool ok = true;
    for (std::size_t i = 0; i < devices.size() && ok; ++i) {
      if (totals[i] < next - 1) {
        ok = false;
      } else {
        auto s = closed_form_schedule(totals[i], devices[i].tau_cap, next, zeta);
        long long sum = 0;
        for (int x : s) sum += x;
        ok = sum <= totals[i];
      }
      if (!ok) r.limiting_device = static_cast<int>(i);
    }
    if (!ok) {
      r.stop_reason = "energy budget";
      break;
    }
    r.horizon = next;
    r.tau_total = std::move(totals);
  }
  return r;
}

struct AllocationSchedule {
  int horizon = 1;
  std::vector<std::vector<int>> tau;  // [device][iteration]
  std::vector<double> tau_total;
  std::vector<double> tau_cap;
  double zeta = 0.0;

  int iterations() const { return horizon - 1; }

  long long device_sum(int device) const {
    long long s = 0;
    for (int x : tau.at(device)) s += x;
    return s;
  }

  /// device,iteration,tau (1-based).
  void write_csv(std::ostream& os) const {
    os << "device,iteration,tau\n";
    for (std::size_t i = 0; i < tau.size(); ++i)
      for (std::size_t t = 0; t < tau[i].size(); ++t)
        os << i + 1 << ',' << t + 1 << ',' << tau[i][t] << '\n';
  }
};

}  // namespace adfl
