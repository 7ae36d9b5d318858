#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adfl/aggregation.hpp"
#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/learning/dataset.hpp"
#include "adfl/learning/model.hpp"
#include "adfl/topology.hpp"

namespace adfl {

enum class Baseline { adaptive, fixed, inverse };

inline std::string_view to_string(Baseline b) {
  switch (b) {
    case Baseline::adaptive: return "adaptive";
    case Baseline::fixed: return "fixed";
    case Baseline::inverse: return "inverse";
  }
  return "?";
}

inline std::optional<Baseline> parse_baseline(std::string_view s) {
  if (s == "adaptive") return Baseline::adaptive;
  if (s == "fixed") return Baseline::fixed;
  if (s == "inverse") return Baseline::inverse;
  return std::nullopt;
}

enum class DataSource { synthetic_quadratic, synthetic_blobs, csv, idx };

inline std::string_view to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic_quadratic: return "synthetic_quadratic";
    case DataSource::synthetic_blobs: return "synthetic_blobs";
    case DataSource::csv: return "csv";
    case DataSource::idx: return "idx";
  }
  return "?";
}

inline std::optional<DataSource> parse_data_source(std::string_view s) {
  for (auto v : {DataSource::synthetic_quadratic, DataSource::synthetic_blobs, DataSource::csv,
                 DataSource::idx})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// Everything a run needs. Defaults describe a small logistic problem on a
/// 10-device grid with known channels.
struct SimulationConfig {
  struct {
    std::uint64_t seed = 1;
    Baseline baseline = Baseline::adaptive;
    int fixed_tau = 3;
    int iterations_cap = 400;  // largest horizon (model states)
    double zeta = 400.0;
  } run;

  struct {
    TopologyKind kind = TopologyKind::grid_2col;
    int nodes = 10;
    std::string edge_list;  // custom only
  } topology;

  struct {
    FadingKind fading = FadingKind::rayleigh;
    double pathloss_exponent = 3.0;
    double reference_distance_m = 1.0;
    double area_side_m = 500.0;
    bool known = true;
    bool redraw_each_iteration = false;
  } channel;

  struct {
    double tx_power_w = 1.0;
    double bandwidth_hz = 1e6;
    double noise_dbm_per_hz = -174.0;
    double payload_bits = 0.0;  // 0: 32 bits per model parameter
  } radio;

  struct {
    double cycles_min = 1000.0;
    double cycles_max = 3000.0;
    double cpu_freq_hz = 2e9;
    double capacitance = 1e-28;
    double energy_budget_j = 0.05;
    double energy_budget_spread = 0.0;  // relative, uniform in [-s, s]
    double latency_budget_s = 0.01;
  } devices;

  struct {
    std::string scheme = "auto";  // auto | mst | ring | gossip
    double epsilon = 0.05;
  } aggregation;

  struct {
    DataSource source = DataSource::synthetic_blobs;
    std::string path;
    std::string labels_path;
    int samples = 2000;
    int features = 10;
    int classes = 4;
    double separation = 8.94427190999916;
    double noise = 1.0;
    PartitionMode partition = PartitionMode::shard;
    double dirichlet_alpha = 1.0;
    double test_fraction = 0.2;
  } data;

  struct {
    ModelKind kind = ModelKind::logistic_l2;
    double l2 = 1e-2;
    int hidden = 16;
    double learning_rate = 0.05;
    int batch_size = 8;
  } model;

  struct {
    int sample_budget = 10000;
  } bounds;

  struct {
    int energy_iterations = 400;
  } sweep;

  void validate() const;
  bool operator==(const SimulationConfig&) const;
};

namespace detail {

// One registry entry per key: how to read it from text and write it back.
struct Field {
  std::function<void(SimulationConfig&, const std::string&)> read;
  std::function<std::string(const SimulationConfig&)> write;
};

template <class T>
T parse_number(const std::string& s, const std::string& field) {
  std::istringstream is(s);
  T v{};
  if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!s.empty() && s[0] == '-') throw ConfigError("expected a non-negative integer, got '" + s + "'", field);
  }
  if (!(is >> v)) throw ConfigError("expected a number, got '" + s + "'", field);
  std::string rest;
  if (is >> rest) throw ConfigError("trailing characters in '" + s + "'", field);
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& field) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected true or false, got '" + s + "'", field);
}

template <class E>
E parse_enum(const std::string& s, const std::string& field, std::optional<E> (*fn)(std::string_view)) {
  auto v = fn(s);
  if (!v) throw ConfigError("unknown value '" + s + "'", field);
  return *v;
}

inline const std::map<std::string, Field>& registry() {
  using C = SimulationConfig;
  static const std::map<std::string, Field> reg = [] {
    std::map<std::string, Field> r;
    auto num = [&](const std::string& key, auto member) {
      r[key] = Field{[key, member](C& c, const std::string& s) {
                       auto& ref = member(c);
                       ref = parse_number<std::decay_t<decltype(ref)>>(s, key);
                     },
                     [member](const C& c) {
                       auto& ref = member(const_cast<C&>(c));
                       if constexpr (std::is_floating_point_v<std::decay_t<decltype(ref)>>)
                         return csv::num(ref);
                       else
                         return std::to_string(ref);
                     }};
    };
    auto str = [&](const std::string& key, auto member) {
      r[key] = Field{[member](C& c, const std::string& s) { member(c) = s; },
                     [member](const C& c) { return member(const_cast<C&>(c)); }};
    };
    auto boolean = [&](const std::string& key, auto member) {
      r[key] = Field{[key, member](C& c, const std::string& s) { member(c) = parse_bool(s, key); },
                     [member](const C& c) -> std::string {
                       return member(const_cast<C&>(c)) ? "true" : "false";
                     }};
    };
    auto enumeration = [&](const std::string& key, auto member, auto parser) {
      r[key] = Field{[key, member, parser](C& c, const std::string& s) {
                       member(c) = parse_enum(s, key, parser);
                     },
                     [member](const C& c) { return std::string(to_string(member(const_cast<C&>(c)))); }};
    };

    num("run.seed", [](C& c) -> auto& { return c.run.seed; });
    enumeration("run.baseline", [](C& c) -> auto& { return c.run.baseline; }, &parse_baseline);
    num("run.fixed_tau", [](C& c) -> auto& { return c.run.fixed_tau; });
    num("run.iterations_cap", [](C& c) -> auto& { return c.run.iterations_cap; });
    num("run.zeta", [](C& c) -> auto& { return c.run.zeta; });

    enumeration("topology.kind", [](C& c) -> auto& { return c.topology.kind; }, &parse_topology_kind);
    num("topology.nodes", [](C& c) -> auto& { return c.topology.nodes; });
    str("topology.edge_list", [](C& c) -> auto& { return c.topology.edge_list; });

    enumeration("channel.fading", [](C& c) -> auto& { return c.channel.fading; }, &parse_fading_kind);
    num("channel.pathloss_exponent", [](C& c) -> auto& { return c.channel.pathloss_exponent; });
    num("channel.reference_distance_m", [](C& c) -> auto& { return c.channel.reference_distance_m; });
    num("channel.area_side_m", [](C& c) -> auto& { return c.channel.area_side_m; });
    boolean("channel.known", [](C& c) -> auto& { return c.channel.known; });
    boolean("channel.redraw_each_iteration", [](C& c) -> auto& { return c.channel.redraw_each_iteration; });

    num("radio.tx_power_w", [](C& c) -> auto& { return c.radio.tx_power_w; });
    num("radio.bandwidth_hz", [](C& c) -> auto& { return c.radio.bandwidth_hz; });
    num("radio.noise_dbm_per_hz", [](C& c) -> auto& { return c.radio.noise_dbm_per_hz; });
    num("radio.payload_bits", [](C& c) -> auto& { return c.radio.payload_bits; });

    num("devices.cycles_min", [](C& c) -> auto& { return c.devices.cycles_min; });
    num("devices.cycles_max", [](C& c) -> auto& { return c.devices.cycles_max; });
    num("devices.cpu_freq_hz", [](C& c) -> auto& { return c.devices.cpu_freq_hz; });
    num("devices.capacitance", [](C& c) -> auto& { return c.devices.capacitance; });
    num("devices.energy_budget_j", [](C& c) -> auto& { return c.devices.energy_budget_j; });
    num("devices.energy_budget_spread", [](C& c) -> auto& { return c.devices.energy_budget_spread; });
    num("devices.latency_budget_s", [](C& c) -> auto& { return c.devices.latency_budget_s; });

    str("aggregation.scheme", [](C& c) -> auto& { return c.aggregation.scheme; });
    num("aggregation.epsilon", [](C& c) -> auto& { return c.aggregation.epsilon; });

    enumeration("data.source", [](C& c) -> auto& { return c.data.source; }, &parse_data_source);
    str("data.path", [](C& c) -> auto& { return c.data.path; });
    str("data.labels_path", [](C& c) -> auto& { return c.data.labels_path; });
    num("data.samples", [](C& c) -> auto& { return c.data.samples; });
    num("data.features", [](C& c) -> auto& { return c.data.features; });
    num("data.classes", [](C& c) -> auto& { return c.data.classes; });
    num("data.separation", [](C& c) -> auto& { return c.data.separation; });
    num("data.noise", [](C& c) -> auto& { return c.data.noise; });
    enumeration("data.partition", [](C& c) -> auto& { return c.data.partition; }, &parse_partition_mode);
    num("data.dirichlet_alpha", [](C& c) -> auto& { return c.data.dirichlet_alpha; });
    num("data.test_fraction", [](C& c) -> auto& { return c.data.test_fraction; });

    enumeration("model.kind", [](C& c) -> auto& { return c.model.kind; }, &parse_model_kind);
    num("model.l2", [](C& c) -> auto& { return c.model.l2; });
    num("model.hidden", [](C& c) -> auto& { return c.model.hidden; });
    num("model.learning_rate", [](C& c) -> auto& { return c.model.learning_rate; });
    num("model.batch_size", [](C& c) -> auto& { return c.model.batch_size; });

    num("bounds.sample_budget", [](C& c) -> auto& { return c.bounds.sample_budget; });
    num("sweep.energy_iterations", [](C& c) -> auto& { return c.sweep.energy_iterations; });
    return r;
  }();
  return reg;
}

}  // namespace detail

/// Sets one `section.key` from its text form.
inline void set_config_value(SimulationConfig& c, const std::string& key, const std::string& value) {
  const auto& reg = detail::registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown key", key);
  it->second.read(c, value);
}

inline std::string get_config_value(const SimulationConfig& c, const std::string& key) {
  const auto& reg = detail::registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown key", key);
  return it->second.write(c);
}

inline void SimulationConfig::validate() const {
  auto need = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(what, field);
  };
  need(run.fixed_tau >= 1, "run.fixed_tau", "must be >= 1");
  need(run.iterations_cap >= 1, "run.iterations_cap", "must be >= 1");
  need(run.zeta > 0, "run.zeta", "must be positive");
  need(topology.nodes >= 1, "topology.nodes", "must be >= 1");
  need(topology.kind == TopologyKind::custom || topology.nodes >= 2, "topology.nodes",
       "built-in topologies need at least 2 nodes");
  need(topology.kind != TopologyKind::custom || !topology.edge_list.empty(), "topology.edge_list",
       "required for custom topologies");
  need(channel.pathloss_exponent > 0, "channel.pathloss_exponent", "must be positive");
  need(channel.reference_distance_m > 0, "channel.reference_distance_m", "must be positive");
  need(channel.area_side_m > 0, "channel.area_side_m", "must be positive");
  need(radio.tx_power_w > 0, "radio.tx_power_w", "must be positive");
  need(radio.bandwidth_hz > 0, "radio.bandwidth_hz", "must be positive");
  need(radio.payload_bits >= 0, "radio.payload_bits", "must be non-negative");
  need(devices.cycles_min > 0, "devices.cycles_min", "must be positive");
  need(devices.cycles_max >= devices.cycles_min, "devices.cycles_max", "must be >= cycles_min");
  need(devices.cpu_freq_hz > 0, "devices.cpu_freq_hz", "must be positive");
  need(devices.capacitance > 0, "devices.capacitance", "must be positive");
  need(devices.energy_budget_j > 0, "devices.energy_budget_j", "must be positive");
  need(devices.energy_budget_spread >= 0 && devices.energy_budget_spread < 1,
       "devices.energy_budget_spread", "must be in [0, 1)");
  need(devices.latency_budget_s > 0, "devices.latency_budget_s", "must be positive");
  need(aggregation.scheme == "auto" || parse_scheme(aggregation.scheme).has_value(),
       "aggregation.scheme", "must be auto, mst, ring or gossip");
  need(aggregation.epsilon >= 0, "aggregation.epsilon", "must be non-negative");
  need(data.samples >= 1, "data.samples", "must be >= 1");
  need(data.features >= 1, "data.features", "must be >= 1");
  need(data.test_fraction >= 0 && data.test_fraction < 1, "data.test_fraction", "must be in [0, 1)");
  need(data.dirichlet_alpha > 0, "data.dirichlet_alpha", "must be positive");
  need(data.source == DataSource::synthetic_quadratic || data.source == DataSource::csv ||
           data.classes >= 2,
       "data.classes", "classification needs at least 2 classes");
  need(data.source == DataSource::synthetic_quadratic || data.source == DataSource::synthetic_blobs ||
           !data.path.empty(),
       "data.path", "required for file data sources");
  need(data.source != DataSource::idx || !data.labels_path.empty(), "data.labels_path",
       "required for idx data");
  need((model.kind == ModelKind::quadratic) ==
           (data.source == DataSource::synthetic_quadratic ||
            (data.source == DataSource::csv && data.classes == 0)),
       "model.kind", "quadratic models need a real-valued target and classifiers need class labels");
  need(model.l2 >= 0, "model.l2", "must be non-negative");
  need(model.hidden >= 1, "model.hidden", "must be >= 1");
  need(model.learning_rate > 0, "model.learning_rate", "must be positive");
  need(model.batch_size >= 1, "model.batch_size", "must be >= 1");
  need(bounds.sample_budget >= 1, "bounds.sample_budget", "must be >= 1");
  need(sweep.energy_iterations >= 1, "sweep.energy_iterations", "must be >= 1");
}

/// INI text with every key, in registry order.
inline std::string serialize_config(const SimulationConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : detail::registry()) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << field.write(c) << '\n';
  }
  return os.str();
}

inline bool SimulationConfig::operator==(const SimulationConfig& other) const {
  return serialize_config(*this) == serialize_config(other);
}

/// Parses INI text. Missing keys keep their defaults; unknown sections or
/// keys are errors naming the offending path.
inline SimulationConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message(), "<ini>");
  }
  SimulationConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key outside any section", section);
    for (const auto& [key, value] : body) {
      const auto path = section + "." + key;
      auto v = std::string(csv::trim(value.data()));
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
      set_config_value(c, path, v);
    }
  }
  c.validate();
  return c;
}

inline SimulationConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), "config");
  auto c = parse_config(in);
  // Relative data and edge-list paths resolve against the config's directory.
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (path.parent_path() / p).lexically_normal().string();
  };
  resolve(c.data.path);
  resolve(c.data.labels_path);
  resolve(c.topology.edge_list);
  return c;
}

}  // namespace adfl
