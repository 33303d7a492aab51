#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cutstokes/geometry.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/mesh.hpp"
#include "cutstokes/stepper.hpp"

namespace cutstokes {

/// Raised for unknown keys and invalid values; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what) : std::runtime_error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  // [discretization]
  int k = 2;
  double h = 0.1;  // largest element diameter
  double dt = 0.05;
  double final_time = 1.0;
  int bdf_order = 1;
  int subdivision = 0;           // used when subdivision_auto is false
  bool subdivision_auto = false;  // s = max(0, round(log2(h0 / h))) + s0
  double subdivision_h0 = 0.2;
  int subdivision_s0 = 1;
  // [physics]
  double nu = 1e-2;
  // [stabilization]
  double gamma_s = 1.0;
  double sigma = 0.0;  // <= 0 means 40 k^2
  double c_delta = 1.0;
  StripAdjacency adjacency = StripAdjacency::Vertex;
  // [domain]
  BoundingBox box{-1.0, -1.0, 2.0, 1.0};
  // [output]
  std::string output_dir = "results";
  std::string study = "bdf1";
  bool reproducible = false;
  int snapshot_every = 0;

  double penalty() const { return sigma > 0.0 ? sigma : 40.0 * k * k; }
  int subdivision_level() const {
    return subdivision_auto ? subdivision_schedule(subdivision_h0, h, subdivision_s0) : subdivision;
  }

  bool operator==(const RunConfig&) const = default;

  StepConfig step_config() const {
    StepConfig c;
    c.k = k;
    c.h = h;
    c.dt = dt;
    c.final_time = final_time;
    c.nu = nu;
    c.gamma_s = gamma_s;
    c.sigma = penalty();
    c.c_delta = c_delta;
    c.bdf_order = bdf_order;
    c.subdivision = subdivision_level();
    c.adjacency = adjacency;
    c.snapshot_every = snapshot_every;
    return c;
  }

  ManufacturedCase manufactured_case() const {
    auto c = moving_disk_case(nu);
    c.box = box;
    c.final_time = final_time;
    return c;
  }
};

namespace detail {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + s + "'");
  }
  if (s.find_first_not_of(" \t", pos) != std::string::npos || !std::isfinite(v))
    throw ConfigError(key, "expected a number, got '" + s + "'");
  return v;
}

inline int parse_int(const std::string& key, const std::string& s) {
  const double v = parse_double(key, s);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key, "expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + s + "'");
}

struct ConfigEntry {
  std::string name;  // section.key
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

}  // namespace detail

/// Every recognised key with its help text, in serialisation order.
inline const std::vector<detail::ConfigEntry>& config_entries() {
  using detail::format_double;
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  auto dbl = [](const char* name, const char* help, double RunConfig::*m) {
    return detail::ConfigEntry{name, help, [m](const RunConfig& c) { return format_double(c.*m); },
                               [m, name](RunConfig& c, const std::string& s) { c.*m = parse_double(name, s); }};
  };
  auto integer = [](const char* name, const char* help, int RunConfig::*m) {
    return detail::ConfigEntry{name, help, [m](const RunConfig& c) { return std::to_string(c.*m); },
                               [m, name](RunConfig& c, const std::string& s) { c.*m = parse_int(name, s); }};
  };
  auto boolean = [](const char* name, const char* help, bool RunConfig::*m) {
    return detail::ConfigEntry{name, help, [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
                               [m, name](RunConfig& c, const std::string& s) { c.*m = parse_bool(name, s); }};
  };
  auto text = [](const char* name, const char* help, std::string RunConfig::*m) {
    return detail::ConfigEntry{name, help, [m](const RunConfig& c) { return c.*m; },
                               [m](RunConfig& c, const std::string& s) { c.*m = s; }};
  };
  auto box = [](const char* name, const char* help, double BoundingBox::*m) {
    return detail::ConfigEntry{name, help, [m](const RunConfig& c) { return format_double(c.box.*m); },
                               [m, name](RunConfig& c, const std::string& s) { c.box.*m = parse_double(name, s); }};
  };
  static const std::vector<detail::ConfigEntry> entries = {
      integer("discretization.k", "velocity degree; pressure uses k-1 (default 2, lowest Taylor-Hood pair)", &RunConfig::k),
      dbl("discretization.h", "largest element diameter h_max of the background mesh (default 0.1)", &RunConfig::h),
      dbl("discretization.dt", "uniform time step (default 0.05)", &RunConfig::dt),
      dbl("discretization.final_time", "end of the time interval [0, T] (default 1)", &RunConfig::final_time),
      integer("discretization.bdf_order", "1 = implicit Euler, 2 = BDF2 with one Euler start step (default 1)",
              &RunConfig::bdf_order),
      integer("discretization.subdivision", "cut-geometry refinement level s, 4^s children per cut element (default 0)",
              &RunConfig::subdivision),
      boolean("discretization.subdivision_auto", "pick s = max(0, round(log2(h0/h))) + s0 (default false)",
              &RunConfig::subdivision_auto),
      dbl("discretization.subdivision_h0", "reference mesh size h0 of the automatic schedule (default 0.2)",
          &RunConfig::subdivision_h0),
      integer("discretization.subdivision_s0", "offset s0 of the automatic schedule (default 1)",
              &RunConfig::subdivision_s0),
      dbl("physics.nu", "kinematic viscosity (default 1e-2)", &RunConfig::nu),
      dbl("stabilization.gamma_s", "ghost-penalty parameter (default 1)", &RunConfig::gamma_s),
      dbl("stabilization.sigma", "Nitsche penalty; 0 selects 40 k^2 (default 0, i.e. 160 for k = 2)",
          &RunConfig::sigma),
      dbl("stabilization.c_delta", "strip-width safety factor, delta_h = bdf_order c_delta w_inf dt (default 1)",
          &RunConfig::c_delta),
      {"stabilization.strip_adjacency", "adjacency used to grow the extension strip: vertex or facet (default vertex)",
       [](const RunConfig& c) { return std::string(c.adjacency == StripAdjacency::Vertex ? "vertex" : "facet"); },
       [](RunConfig& c, const std::string& s) {
         if (s == "vertex")
           c.adjacency = StripAdjacency::Vertex;
         else if (s == "facet")
           c.adjacency = StripAdjacency::Facet;
         else
           throw ConfigError("stabilization.strip_adjacency", "expected vertex or facet, got '" + s + "'");
       }},
      box("domain.xmin", "background box (default (-1,2) x (-1,1))", &BoundingBox::xmin),
      box("domain.ymin", "background box", &BoundingBox::ymin),
      box("domain.xmax", "background box", &BoundingBox::xmax),
      box("domain.ymax", "background box", &BoundingBox::ymax),
      text("output.directory", "parent directory for run outputs (default results)", &RunConfig::output_dir),
      text("output.study", "study for the study subcommand: robustness, bdf1, bdf2, subdivision (default bdf1)",
           &RunConfig::study),
      boolean("output.reproducible", "omit wall-clock columns so identical configs give identical files",
              &RunConfig::reproducible),
      integer("output.snapshot_every", "write VTK snapshots every n steps, 0 disables (default 0)",
              &RunConfig::snapshot_every),
  };
  return entries;
}

/// Range checks on a complete config; throws ConfigError naming the key.
inline void validate(const RunConfig& c) {
  if (c.k < 2) throw ConfigError("discretization.k", "Taylor-Hood elements need k >= 2");
  if (c.k > LagrangeBasis::kMaxOrder) throw ConfigError("discretization.k", "k above 4 is not supported");
  if (!(c.h > 0.0)) throw ConfigError("discretization.h", "must be positive");
  if (!(c.dt > 0.0)) throw ConfigError("discretization.dt", "must be positive");
  if (!(c.final_time > 0.0)) throw ConfigError("discretization.final_time", "must be positive");
  const double n = c.final_time / c.dt;
  if (std::abs(n - std::round(n)) > 1e-9 * n)
    throw ConfigError("discretization.dt", "final_time must be an integer multiple of dt");
  if (c.bdf_order != 1 && c.bdf_order != 2) throw ConfigError("discretization.bdf_order", "must be 1 or 2");
  if (c.subdivision < 0) throw ConfigError("discretization.subdivision", "must be >= 0");
  if (!(c.subdivision_h0 > 0.0)) throw ConfigError("discretization.subdivision_h0", "must be positive");
  if (c.subdivision_s0 < 0) throw ConfigError("discretization.subdivision_s0", "must be >= 0");
  if (!(c.nu > 0.0)) throw ConfigError("physics.nu", "must be positive");
  if (!(c.gamma_s > 0.0)) throw ConfigError("stabilization.gamma_s", "must be positive");
  if (c.sigma < 0.0) throw ConfigError("stabilization.sigma", "must be >= 0");
  if (!(c.c_delta > 0.0)) throw ConfigError("stabilization.c_delta", "must be positive");
  if (!(c.box.xmax > c.box.xmin)) throw ConfigError("domain.xmax", "must exceed domain.xmin");
  if (!(c.box.ymax > c.box.ymin)) throw ConfigError("domain.ymax", "must exceed domain.ymin");
  if (c.output_dir.empty()) throw ConfigError("output.directory", "must not be empty");
  if (c.study != "robustness" && c.study != "bdf1" && c.study != "bdf2" && c.study != "subdivision")
    throw ConfigError("output.study", "unknown study '" + c.study + "'");
  if (c.snapshot_every < 0) throw ConfigError("output.snapshot_every", "must be >= 0");
}

inline void set_config_value(RunConfig& c, const std::string& name, const std::string& value) {
  for (const auto& e : config_entries())
    if (e.name == name) {
      e.set(c, value);
      return;
    }
  throw ConfigError(name, "unknown configuration key");
}

/// Parses INI text, then applies `overrides` (section.key -> value) on top, then validates.
inline RunConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", std::string("malformed INI: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section, "keys must live inside a [section]");
    for (const auto& [key, value] : body) set_config_value(c, section + "." + key, value.data());
  }
  for (const auto& [key, value] : overrides) set_config_value(c, key, value);
  validate(c);
  return c;
}

/// INI text that parses back to an equal config.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& e : config_entries()) {
    const auto dot = e.name.find('.');
    const std::string s = e.name.substr(0, dot), key = e.name.substr(dot + 1);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << key << " = " << e.get(c) << '\n';
  }
  return os.str();
}

}  // namespace cutstokes
