#pragma once

// Flat key=value run configuration shared by the command-line tool.
//
//   # comment
//   particles = 100
//   noise.translational_variance = 2.5e-5
//
// Later assignments win, so command-line overrides are applied after the file.

#include "hkin/changepoint.hpp"
#include "hkin/error.hpp"
#include "hkin/synth.hpp"

#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hkin {

struct RunConfig {
  DetectSettings detect;
  ScenarioSpec scenario;
  double rigid_extent = 0.05;
  // noise.* keys apply to both detection and generation; generation otherwise uses the
  // regime default
  std::vector<std::pair<double NoiseModel::*, double>> noise_overrides;

  void validate() const {
    detect.validate();
    scenario.validate();
    if (!(rigid_extent > 0.0)) throw InputError("rigid_extent must be > 0");
  }
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_value(std::string_view key, std::string_view text) {
  T v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size())
    throw InputError("config key '" + std::string(key) + "': malformed value '" + std::string(text) + "'");
  return v;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

template <class T, class F>
Setter number(F field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = parse_value<T>(k, v); };
}

inline const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["prior.p"] = number<double>([](RunConfig& c) -> double& { return c.detect.prior.p; });
    t["prior.min_len"] = number<int>([](RunConfig& c) -> int& { return c.detect.prior.min_len; });
    t["prior.max_len"] = number<int>([](RunConfig& c) -> int& { return c.detect.prior.max_len; });
    const auto noise = [](auto member) {
      return [member](RunConfig& c, std::string_view k, std::string_view v) {
        const double x = parse_value<double>(k, v);
        c.detect.noise.*member = x;
        c.noise_overrides.emplace_back(member, x);
      };
    };
    t["noise.translational_variance"] = noise(&NoiseModel::translational_variance);
    t["noise.angular_variance"] = noise(&NoiseModel::angular_variance);
    t["noise.outlier_probability"] = noise(&NoiseModel::outlier_probability);
    t["noise.outlier_prior_weight"] = noise(&NoiseModel::outlier_prior_weight);
    t["noise.outlier_volume"] = noise(&NoiseModel::outlier_volume);
    t["particles"] = number<int>([](RunConfig& c) -> int& { return c.detect.max_particles; });
    t["refit_stride"] = number<int>([](RunConfig& c) -> int& { return c.detect.refit_stride; });
    t["mlesac.iterations"] = number<int>([](RunConfig& c) -> int& { return c.detect.fit.iterations; });
    t["mlesac.refine_steps"] = number<int>([](RunConfig& c) -> int& { return c.detect.fit.refine_steps; });
    t["mlesac.step_tolerance"] = number<double>([](RunConfig& c) -> double& { return c.detect.fit.step_tolerance; });
    t["mlesac.score_subsample"] = number<int>([](RunConfig& c) -> int& { return c.detect.fit.score_subsample; });
    t["mode"] = [](RunConfig& c, std::string_view, std::string_view v) {
      if (v == "action-conditional") c.detect.mode = InferenceMode::ActionConditional;
      else if (v == "observation-only") c.detect.mode = InferenceMode::ObservationOnly;
      else throw InputError("config key 'mode': expected action-conditional or observation-only");
    };
    t["seed"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      const auto s = parse_value<std::uint64_t>(k, v);
      c.detect.seed = s;
      c.scenario.seed = s;
    };
    t["rigid_extent"] = number<double>([](RunConfig& c) -> double& { return c.rigid_extent; });
    t["object"] = [](RunConfig& c, std::string_view, std::string_view v) { c.scenario.object = object_from_string(v); };
    t["regime"] = [](RunConfig& c, std::string_view, std::string_view v) { c.scenario.regime = regime_from_string(v); };
    t["T"] = number<int>([](RunConfig& c) -> int& { return c.scenario.T; });
    t["action_magnitude"] = number<double>([](RunConfig& c) -> double& { return c.scenario.action_magnitude; });
    t["gap_count"] = number<int>([](RunConfig& c) -> int& { return c.scenario.gap_count; });
    t["gap_length"] = number<int>([](RunConfig& c) -> int& { return c.scenario.gap_length; });
    t["off_axis_fraction"] = number<double>([](RunConfig& c) -> double& { return c.scenario.off_axis_fraction; });
    t["contact_period"] = number<int>([](RunConfig& c) -> int& { return c.scenario.contact_period; });
    t["push_distance"] = number<double>([](RunConfig& c) -> double& { return c.scenario.push_distance; });
    t["door_radius"] = number<double>([](RunConfig& c) -> double& { return c.scenario.door_radius; });
    t["latch"] = number<double>([](RunConfig& c) -> double& { return c.scenario.latch; });
    t["open_angle"] = number<double>([](RunConfig& c) -> double& { return c.scenario.open_angle; });
    t["latch_fraction"] = number<double>([](RunConfig& c) -> double& { return c.scenario.latch_fraction; });
    t["drawer_travel"] = number<double>([](RunConfig& c) -> double& { return c.scenario.drawer_travel; });
    return t;
  }();
  return table;
}

}  // namespace detail

/// Sorted list of accepted keys.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::setters()) out.push_back(k);
  return out;
}

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; blank lines and lines starting with '#' are skipped.
inline ConfigEntries parse_config(std::istream& in) {
  ConfigEntries out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view v = detail::strip(line);
    if (v.empty() || v.front() == '#') continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw InputError("config line " + std::to_string(number) + ": expected key=value");
    const auto key = detail::strip(v.substr(0, eq));
    const auto value = detail::strip(v.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InputError("config line " + std::to_string(number) + ": empty key or value");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

/// Applies entries in order; unknown keys are rejected.
inline RunConfig make_config(const ConfigEntries& entries) {
  RunConfig c;
  for (const auto& [k, v] : entries) {
    const auto it = detail::setters().find(k);
    if (it == detail::setters().end()) throw InputError("unknown config key '" + k + "'");
    it->second(c, k, v);
  }
  c.scenario.noise = ScenarioSpec::default_noise(c.scenario.regime);
  for (const auto& [member, x] : c.noise_overrides) c.scenario.noise.*member = x;
  return c;
}

}  // namespace hkin
