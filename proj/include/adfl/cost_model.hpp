#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/topology.hpp"

namespace adfl {

struct DeviceProfile {
  double cycles_per_sample = 2000.0;  // C_i
  double dataset_size = 100.0;        // D_i, samples
  double cpu_freq_hz = 2e9;           // f_i
  double capacitance = 1e-28;         // theta_i, J s^2 / cycle
  double energy_budget_j = 1.0;       // delta_{i,E}

  void validate() const {
    if (!(cycles_per_sample > 0) || !(dataset_size > 0) || !(cpu_freq_hz > 0) ||
        !(capacitance > 0) || !(energy_budget_j > 0))
      throw Error("device profile fields must be strictly positive");
  }
};

struct RadioProfile {
  double tx_power_w = 1.0;
  double bandwidth_hz = 1e6;
  double noise_density_w_per_hz = 3.981071705534973e-21;  // -174 dBm/Hz
  double payload_bits = 32.0;

  void validate() const {
    if (!(tx_power_w > 0) || !(bandwidth_hz > 0) || !(noise_density_w_per_hz > 0) ||
        !(payload_bits > 0))
      throw Error("radio profile fields must be strictly positive");
  }
};

inline double dbm_per_hz_to_w_per_hz(double dbm_per_hz) {
  return std::pow(10.0, dbm_per_hz / 10.0) * 1e-3;
}

/// Latency of one local training round: C D / f.
inline double comp_latency(const DeviceProfile& d) {
  return d.cycles_per_sample * d.dataset_size / d.cpu_freq_hz;
}

/// Energy of one local training round: theta C D f^2.
inline double comp_energy(const DeviceProfile& d) {
  return d.capacitance * d.cycles_per_sample * d.dataset_size * d.cpu_freq_hz * d.cpu_freq_hz;
}

/// Time to ship the payload over a link with power gain `gain` at the
/// Shannon rate B log2(1 + p h / (B N0)).
inline double comm_latency(const RadioProfile& r, double gain) {
  if (!(gain > 0)) throw Error("channel gain must be positive");
  const double snr = r.tx_power_w * gain / (r.bandwidth_hz * r.noise_density_w_per_hz);
  const double rate = r.bandwidth_hz * std::log2(1.0 + snr);
  const double latency = r.payload_bits / rate;
  if (!std::isfinite(latency) || !(rate > 0))
    throw Error("communication latency is not finite (gain too small)");
  return latency;
}

inline double comm_energy(const RadioProfile& r, double gain) {
  return r.tx_power_w * comm_latency(r, gain);
}

/// Per-edge energy and latency of one transmission.
struct LinkCosts {
  EdgeMap<double> energy_j;
  EdgeMap<double> latency_s;
};

inline LinkCosts link_costs(const RadioProfile& r, const ChannelRealization& ch) {
  LinkCosts out;
  for (const auto& [e, h] : ch.gains()) {
    out.latency_s[e] = comm_latency(r, h);
    out.energy_j[e] = r.tx_power_w * out.latency_s[e];
  }
  return out;
}

/// Sum of `values` over the active edges incident to `device`.
inline double incident_sum(int device, std::span<const Edge> active,
                           const EdgeMap<double>& values) {
  double s = 0.0;
  for (const auto& e : active)
    if (e.touches(device)) s += values.at(e);
  return s;
}

inline double incident_max(int device, std::span<const Edge> active,
                           const EdgeMap<double>& values) {
  double m = 0.0;
  for (const auto& e : active)
    if (e.touches(device)) m = std::max(m, values.at(e));
  return m;
}

/// System latency of one iteration: slowest local training plus the slowest
/// device's communication, where a device's communication time is its round
/// count times its slowest active incident link.
inline double iteration_latency(std::span<const int> tau, std::span<const double> comp_latency_s,
                                std::span<const int> comm_rounds,
                                std::span<const Edge> active_edges,
                                const EdgeMap<double>& edge_latency_s) {
  const auto n = tau.size();
  if (n == 0) throw Error("iteration latency of an empty plan");
  if (comp_latency_s.size() != n || comm_rounds.size() != n)
    throw Error("iteration latency inputs disagree on device count");
  double comp = 0.0;
  double comm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    comp = std::max(comp, tau[i] * comp_latency_s[i]);
    const int dev = static_cast<int>(i);
    comm = std::max(comm, comm_rounds[i] * incident_max(dev, active_edges, edge_latency_s));
  }
  return comp + comm;
}

/// What one iteration charges: rounds per device plus the active links.
struct IterationUsage {
  std::vector<int> tau;
  std::vector<int> comm_rounds;
  std::vector<Edge> active_edges;
  EdgeMap<double> edge_energy_j;
};

/// Cumulative energy per device: sum over iterations of
/// tau E_cp + K * (energy of the device's active incident links).
inline std::vector<double> device_total_energy(std::span<const IterationUsage> iterations,
                                               std::span<const double> comp_energy_j) {
  std::vector<double> total(comp_energy_j.size(), 0.0);
  for (const auto& it : iterations) {
    if (it.tau.size() != total.size() || it.comm_rounds.size() != total.size())
      throw Error("iteration usage disagrees on device count");
    for (std::size_t i = 0; i < total.size(); ++i) {
      total[i] += it.tau[i] * comp_energy_j[i] +
                  it.comm_rounds[i] *
                      incident_sum(static_cast<int>(i), it.active_edges, it.edge_energy_j);
    }
  }
  return total;
}

/// Per-iteration energy increments and latencies, enforced against the
/// energy budgets and the latency threshold at record time.
class CostLedger {
 public:
  struct Row {
    int iteration;
    int device;
    double comp_energy_j;
    double comm_energy_j;
    double latency_s;
  };

  static constexpr double kRelTolerance = 1e-9;

  CostLedger(std::vector<double> energy_budgets_j, double latency_budget_s)
      : budgets_(std::move(energy_budgets_j)),
        latency_budget_(latency_budget_s),
        comp_(budgets_.size(), 0.0),
        comm_(budgets_.size(), 0.0) {}

  int device_count() const noexcept { return static_cast<int>(budgets_.size()); }

  /// True if recording these increments would stay within every budget.
  bool admits(std::span<const double> comp_j, std::span<const double> comm_j,
              double latency_s) const {
    if (latency_s > latency_budget_ * (1 + kRelTolerance)) return false;
    for (std::size_t i = 0; i < budgets_.size(); ++i)
      if (comp_[i] + comm_[i] + comp_j[i] + comm_j[i] > budgets_[i] * (1 + kRelTolerance))
        return false;
    return true;
  }

  void record(std::span<const double> comp_j, std::span<const double> comm_j, double latency_s) {
    if (comp_j.size() != budgets_.size() || comm_j.size() != budgets_.size())
      throw Error("ledger increments disagree on device count");
    if (!admits(comp_j, comm_j, latency_s))
      throw BudgetViolation("ledger entry for iteration " + std::to_string(latencies_.size() + 1) +
                            " exceeds an energy or latency budget");
    const int iteration = static_cast<int>(latencies_.size()) + 1;
    for (std::size_t i = 0; i < budgets_.size(); ++i) {
      if (comp_j[i] < 0 || comm_j[i] < 0) throw Error("negative ledger increment");
      comp_[i] += comp_j[i];
      comm_[i] += comm_j[i];
      rows_.push_back({iteration, static_cast<int>(i), comp_j[i], comm_j[i], latency_s});
    }
    latencies_.push_back(latency_s);
  }

  int iterations() const noexcept { return static_cast<int>(latencies_.size()); }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  const std::vector<double>& latencies() const noexcept { return latencies_; }
  double comp_energy(int device) const { return comp_.at(device); }
  double comm_energy(int device) const { return comm_.at(device); }
  double total_energy(int device) const { return comp_.at(device) + comm_.at(device); }
  double energy_budget(int device) const { return budgets_.at(device); }
  double latency_budget() const noexcept { return latency_budget_; }

  double total_comm_energy() const {
    double s = 0.0;
    for (double c : comm_) s += c;
    return s;
  }

  /// iteration,device,comp_energy_J,comm_energy_J,latency_s (1-based ids,
  /// per-iteration increments).
  void write_csv(std::ostream& os) const {
    os << "iteration,device,comp_energy_J,comm_energy_J,latency_s\n";
    for (const auto& r : rows_) {
      os << r.iteration << ',' << r.device + 1 << ',' << csv::num(r.comp_energy_j) << ','
         << csv::num(r.comm_energy_j) << ',' << csv::num(r.latency_s) << '\n';
    }
  }

 private:
  std::vector<double> budgets_;
  double latency_budget_;
  std::vector<double> comp_;
  std::vector<double> comm_;
  std::vector<double> latencies_;
  std::vector<Row> rows_;
};

}  // namespace adfl
