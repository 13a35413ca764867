#pragma once

// File formats: JSON documents for models, segmentations, automata and labels; CSV for
// trajectories, simulator inputs and traces.

#include "hkin/automaton.hpp"
#include "hkin/changepoint.hpp"
#include "hkin/error.hpp"
#include "hkin/geometry.hpp"
#include "hkin/models.hpp"
#include "hkin/synth.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hkin {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw InputError(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(std::string("missing field '") + key + "'");
  return *it;
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("field '") + key + "' has the wrong type");
  }
}

template <std::size_t N>
std::array<double, N> get_array(const Json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != N) throw InputError(std::string("field '") + key + "' needs " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline Json quat_json(const Quat& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

inline Json pose_json(const Pose& p) {
  const auto a = p.to_array();
  return Json(std::vector<double>(a.begin(), a.end()));
}

inline Pose pose_from(const Json& j, const char* key) { return Pose::from_array(get_array<7>(j, key)); }

inline void check_schema(const Json& j) {
  if (get<int>(j, "schema_version") != kSchemaVersion)
    throw InputError("unsupported schema_version, expected " + std::to_string(kSchemaVersion));
}

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

// ---- articulation models

inline Json to_json(const ArticulationModel& m) {
  Json theta = Json::object();
  switch (m.kind()) {
    case ModelKind::Rigid: theta["offset"] = detail::pose_json(m.as_rigid().offset); break;
    case ModelKind::Prismatic: {
      const auto& p = m.as_prismatic();
      theta["origin"] = detail::pose_json(p.origin);
      theta["axis"] = Json::array({p.axis.x(), p.axis.y(), p.axis.z()});
      break;
    }
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      theta["center"] = detail::pose_json(r.center);
      theta["radius"] = r.radius;
      theta["orientation_offset"] = detail::quat_json(r.orientation_offset);
      break;
    }
  }
  Json j;
  j["kind"] = std::string(to_string(m.kind()));
  j["theta"] = theta;
  j["k_q"] = m.parameter_count();
  return j;
}

inline ArticulationModel model_from_json(const Json& j) {
  const ModelKind kind = kind_from_string(detail::get<std::string>(j, "kind"));
  const Json& theta = detail::field(j, "theta");
  ArticulationModel m;
  switch (kind) {
    case ModelKind::Rigid: m = ArticulationModel::rigid(detail::pose_from(theta, "offset")); break;
    case ModelKind::Prismatic: {
      const auto ax = detail::get_array<3>(theta, "axis");
      m = ArticulationModel::prismatic(detail::pose_from(theta, "origin"), Vec3(ax[0], ax[1], ax[2]));
      break;
    }
    case ModelKind::Revolute: {
      const auto q = detail::get_array<4>(theta, "orientation_offset");
      const Quat oq(q[0], q[1], q[2], q[3]);
      if (!(oq.norm() > 0.0)) throw InputError("orientation_offset must be a non-zero quaternion");
      m = ArticulationModel::revolute(detail::pose_from(theta, "center"), detail::get<double>(theta, "radius"), oq);
      break;
    }
  }
  if (detail::get<int>(j, "k_q") != m.parameter_count())
    throw InputError("k_q does not match the model kind '" + std::string(to_string(kind)) + "'");
  return m;
}

// ---- segmentations

inline Json to_json(const Segmentation& s) {
  Json segs = Json::array();
  for (const Segment& g : s.segments) {
    Json e;
    e["t0"] = g.t0;
    e["t1"] = g.t1;
    e["model"] = to_json(g.model);
    e["log_evidence"] = g.log_evidence;
    segs.push_back(e);
  }
  Json j;
  j["tau"] = s.tau;
  j["segments"] = segs;
  j["log_map_score"] = s.log_map_score;
  j["schema_version"] = kSchemaVersion;
  return j;
}

inline Segmentation segmentation_from_json(const Json& j) {
  detail::check_schema(j);
  Segmentation s;
  s.tau = detail::get<std::vector<int>>(j, "tau");
  s.log_map_score = detail::get<double>(j, "log_map_score");
  const Json& segs = detail::field(j, "segments");
  if (!segs.is_array()) throw InputError("field 'segments' must be an array");
  for (const Json& e : segs) {
    s.segments.push_back({detail::get<int>(e, "t0"), detail::get<int>(e, "t1"), model_from_json(detail::field(e, "model")),
                          0.0, detail::get<double>(e, "log_evidence")});
  }
  if (s.tau.size() != s.segments.size() + 1) throw InputError("tau must have one entry more than segments");
  for (std::size_t k = 0; k < s.segments.size(); ++k) {
    if (s.segments[k].t0 != s.tau[k] || s.segments[k].t1 != s.tau[k + 1] || s.tau[k + 1] <= s.tau[k])
      throw InputError("segment " + std::to_string(k) + " does not match tau");
  }
  return s;
}

// ---- automata

inline Json to_json(const HybridAutomaton& h) {
  Json edges = Json::array();
  for (const AutomatonEdge& e : h.edges) {
    Json models = Json::array();
    for (const auto& m : e.models) models.push_back(to_json(m));
    Json je;
    je["i"] = e.i;
    je["j"] = e.j;
    je["models"] = models;
    je["config_changepoints"] = e.config_changepoints;
    edges.push_back(je);
  }
  Json modes = Json::array();
  for (const Mode& m : h.modes) {
    Json inv = Json::array();
    const bool in_range = static_cast<std::size_t>(m.id) < h.modes.size() && m.local_models.size() == h.edges.size();
    Json jm;
    jm["id"] = m.id;
    jm["local_models"] = m.local_models;
    if (in_range) {
      for (std::size_t l = 0; l < h.edges.size(); ++l) {
        const auto [lo, hi] = h.invariant(m.id, l);
        inv.push_back(Json::array({lo, hi}));
      }
      jm["offset"] = h.offsets(m.id);
      jm["invariant"] = inv;
    }
    modes.push_back(jm);
  }
  Json guards = Json::array();
  for (const Guard& g : h.guards) {
    Json jg;
    jg["id"] = g.id;
    jg["from"] = g.from;
    jg["to"] = g.to;
    jg["coordinate"] = g.coordinate;
    jg["kind"] = std::string(to_string(g.kind));
    jg["predicate"] = g.kind == GuardKind::Up || g.kind == GuardKind::ClampHigh ? ">=" : "<";
    jg["threshold"] = g.threshold;
    guards.push_back(jg);
  }
  Json init;
  init["mode"] = h.init.mode;
  init["x"] = h.init.x;
  Json j;
  j["parts"] = h.parts;
  j["edges"] = edges;
  j["modes"] = modes;
  j["guards"] = guards;
  j["init"] = init;
  j["schema_version"] = kSchemaVersion;
  return j;
}

/// Reads an automaton as written; call validate() before using it.
inline HybridAutomaton automaton_from_json(const Json& j) {
  detail::check_schema(j);
  HybridAutomaton h;
  h.parts = detail::get<std::vector<std::string>>(j, "parts");
  for (const Json& je : detail::field(j, "edges")) {
    AutomatonEdge e{detail::get<int>(je, "i"), detail::get<int>(je, "j"), {},
                    detail::get<std::vector<double>>(je, "config_changepoints")};
    for (const Json& m : detail::field(je, "models")) e.models.push_back(model_from_json(m));
    h.edges.push_back(std::move(e));
  }
  for (const Json& jm : detail::field(j, "modes"))
    h.modes.push_back({detail::get<int>(jm, "id"), detail::get<std::vector<int>>(jm, "local_models")});
  for (const Json& jg : detail::field(j, "guards")) {
    Guard g{detail::get<int>(jg, "id"), detail::get<int>(jg, "from"), detail::get<int>(jg, "to"),
            detail::get<int>(jg, "coordinate"), guard_kind_from_string(detail::get<std::string>(jg, "kind")),
            detail::get<double>(jg, "threshold")};
    const std::string expected = g.kind == GuardKind::Up || g.kind == GuardKind::ClampHigh ? ">=" : "<";
    if (detail::get<std::string>(jg, "predicate") != expected)
      throw InputError("guard " + std::to_string(g.id) + " has predicate inconsistent with its kind");
    h.guards.push_back(g);
  }
  const Json& init = detail::field(j, "init");
  h.init = {detail::get<int>(init, "mode"), detail::get<std::vector<double>>(init, "x")};
  return h;
}

// ---- labels

inline Json to_json(const ScenarioSpec& spec, const LabeledTrajectory& lt) {
  Json segs = Json::array();
  for (const TrueSegment& s : lt.segments) {
    Json e;
    e["t0"] = s.t0;
    e["t1"] = s.t1;
    e["model"] = to_json(s.model);
    e["c_start"] = s.c_start;
    e["c_end"] = s.c_end;
    segs.push_back(e);
  }
  std::vector<int> outliers;
  for (std::size_t k = 0; k < lt.outlier.size(); ++k) {
    if (lt.outlier[k]) outliers.push_back(static_cast<int>(k));
  }
  Json j;
  j["object"] = std::string(to_string(spec.object));
  j["regime"] = std::string(to_string(spec.regime));
  j["T"] = spec.T;
  j["seed"] = spec.seed;
  j["tau"] = lt.tau;
  j["segments"] = segs;
  j["config_changepoints"] = lt.config_changepoints;
  j["gap_steps"] = lt.gap_steps;
  j["outliers"] = outliers;
  j["schema_version"] = kSchemaVersion;
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---- CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw InputError("line " + std::to_string(line) + ": malformed number '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s, std::size_t line) {
  s = trim(s);
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw InputError("line " + std::to_string(line) + ": malformed integer '" + std::string(s) + "'");
  return v;
}

// Reads a header-led CSV, checking the header and the column count of every row.
template <class Row>
void read_csv(std::istream& in, std::string_view header, Row&& row) {
  std::string line;
  std::size_t number = 0;
  const auto expected = split(header, ',').size();
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (!seen_header) {
      if (view != header) throw InputError("line " + std::to_string(number) + ": expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    const auto cells = split(view, ',');
    if (cells.size() != expected)
      throw InputError("line " + std::to_string(number) + ": expected " + std::to_string(expected) + " columns, found " +
                       std::to_string(cells.size()));
    row(cells, number);
  }
  if (!seen_header) throw InputError("missing header row '" + std::string(header) + "'");
}

}  // namespace detail

inline constexpr std::string_view kTrajectoryHeader = "t,tx,ty,tz,qw,qx,qy,qz,atx,aty,atz,aqw,aqx,aqy,aqz";

struct Trajectory {
  std::vector<Pose> y;
  std::vector<Pose> a;  // a[k] drives y[k] -> y[k+1]; size y.size() - 1
};

/// One row per observation; the action columns of row t hold a_t, identity on the final row.
inline void write_trajectory(std::ostream& out, std::span<const Pose> y, std::span<const Pose> a) {
  if (a.size() + 1 != y.size()) throw InputError("trajectory needs one action fewer than observations");
  out << kTrajectoryHeader << '\n';
  for (std::size_t t = 0; t < y.size(); ++t) {
    out << t;
    for (double v : y[t].to_array()) out << ',' << detail::format_double(v);
    const Pose act = t < a.size() ? a[t] : Pose{};
    for (double v : act.to_array()) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline Trajectory read_trajectory(std::istream& in) {
  Trajectory tr;
  std::vector<Pose> actions;
  detail::read_csv(in, kTrajectoryHeader, [&](const std::vector<std::string_view>& c, std::size_t line) {
    if (detail::parse_int(c[0], line) != static_cast<long long>(tr.y.size()))
      throw InputError("line " + std::to_string(line) + ": t must count up from 0");
    std::array<double, 7> p{}, q{};
    for (std::size_t k = 0; k < 7; ++k) {
      p[k] = detail::parse_double(c[1 + k], line);
      q[k] = detail::parse_double(c[8 + k], line);
    }
    const auto unit = [&](const std::array<double, 7>& v) {
      const double n = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
      if (!(std::abs(n - 1.0) < 1e-6)) throw InputError("line " + std::to_string(line) + ": quaternion is not unit length");
    };
    unit(p);
    unit(q);
    tr.y.push_back(Pose::from_array(p));
    actions.push_back(Pose::from_array(q));
  });
  if (tr.y.size() < 2) throw InputError("trajectory needs at least 2 rows");
  actions.pop_back();
  tr.a = std::move(actions);
  return tr;
}

/// Simulator input: header "t,u0,u1,..." with one column per automaton coordinate.
inline std::string input_header(std::size_t coordinates) {
  std::string h = "t";
  for (std::size_t l = 0; l < coordinates; ++l) h += ",u" + std::to_string(l);
  return h;
}

inline std::vector<std::vector<double>> read_inputs(std::istream& in, std::size_t coordinates) {
  std::vector<std::vector<double>> out;
  detail::read_csv(in, input_header(coordinates), [&](const std::vector<std::string_view>& c, std::size_t line) {
    detail::parse_int(c[0], line);
    std::vector<double> u;
    for (std::size_t l = 1; l < c.size(); ++l) u.push_back(detail::parse_double(c[l], line));
    out.push_back(std::move(u));
  });
  return out;
}

inline constexpr std::string_view kTraceHeader = "t,mode,x,fired";

/// Runs the inputs from the automaton's initial state and writes one row per step with the
/// state after the step; x and multiple fired ids are ';'-joined.
inline void write_trace(std::ostream& out, const HybridAutomaton& h, const std::vector<std::vector<double>>& inputs) {
  out << kTraceHeader << '\n';
  HybridState s = h.init;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const StepResult r = step(h, s, inputs[t]);
    s = r.state;
    out << t + 1 << ',' << s.mode << ',';
    for (std::size_t l = 0; l < s.x.size(); ++l) out << (l ? ";" : "") << detail::format_double(s.x[l]);
    out << ',';
    if (r.fired.empty()) out << '-';
    for (std::size_t k = 0; k < r.fired.size(); ++k) out << (k ? ";" : "") << r.fired[k];
    out << '\n';
  }
}

}  // namespace hkin
