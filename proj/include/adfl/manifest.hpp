#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "adfl/config.hpp"
#include "adfl/error.hpp"

namespace adfl {

inline constexpr const char* kToolVersion = "0.1.0";

/// Record of one run: the resolved configuration plus what was produced.
struct RunManifest {
  SimulationConfig config;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string timestamp;
  std::map<std::string, std::string> artifacts;  // role -> file name
  std::map<std::string, std::string> results;    // summary values, as text

  bool operator==(const RunManifest&) const = default;
};

inline std::string serialize_manifest(const RunManifest& m) {
  std::ostringstream os;
  os << "[manifest]\n"
     << "tool_version = " << m.tool_version << '\n'
     << "timestamp = " << m.timestamp << '\n'
     << "seed = " << m.seed << "\n\n";
  os << "[artifacts]\n";
  for (const auto& [k, v] : m.artifacts) os << k << " = " << v << '\n';
  os << "\n[results]\n";
  for (const auto& [k, v] : m.results) os << k << " = " << v << '\n';
  os << '\n' << serialize_config(m.config);
  return os.str();
}

inline RunManifest parse_manifest(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("manifest line " + std::to_string(e.line()) + ": " + e.message(), "<manifest>");
  }
  RunManifest m;
  std::ostringstream config_text;
  for (const auto& [section, body] : tree) {
    if (section == "manifest") {
      m.tool_version = body.get<std::string>("tool_version", "");
      m.timestamp = body.get<std::string>("timestamp", "");
      m.seed = detail::parse_number<std::uint64_t>(body.get<std::string>("seed", "0"), "manifest.seed");
    } else if (section == "artifacts") {
      for (const auto& [k, v] : body) m.artifacts[k] = v.data();
    } else if (section == "results") {
      for (const auto& [k, v] : body) m.results[k] = v.data();
    } else {
      config_text << '[' << section << "]\n";
      for (const auto& [k, v] : body) config_text << k << " = " << v.data() << '\n';
    }
  }
  m.config = parse_config_string(config_text.str());
  return m;
}

}  // namespace adfl
