#pragma once

// Extended kinematic graphs and the hybrid automaton compiled from them.
//
// Each graph edge carries an ordered chain of local models. Its configuration is tracked in
// the local coordinate c̄ of the active model, c̄ ∈ [0, width), where the global configuration
// is offset + c̄ and the offsets are the cumulative widths of the earlier models.

#include "hkin/changepoint.hpp"
#include "hkin/error.hpp"
#include "hkin/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hkin {

struct GraphEdge {
  int i = 0;
  int j = 1;
  std::vector<ConfigurationalSegment> segments;
  double score = 0.0;  // log MAP score of the pairwise segmentation
};

struct KinematicGraph {
  std::vector<std::string> parts;
  std::vector<GraphEdge> edges;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

inline bool is_spanning_tree(std::size_t vertices, const std::vector<std::pair<int, int>>& edges) {
  if (vertices == 0 || edges.size() + 1 != vertices) return false;
  DisjointSets ds(vertices);
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= vertices || static_cast<std::size_t>(j) >= vertices) return false;
    if (!ds.unite(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) return false;
  }
  return true;
}

}  // namespace detail

/// Picks the edges of the kinematic graph from candidate pairwise segmentations: the single
/// best candidate for two parts, else the spanning tree of maximum total score.
inline KinematicGraph build_graph(std::vector<std::string> parts, std::vector<GraphEdge> candidates) {
  if (parts.size() < 2) throw InputError("a kinematic graph needs at least 2 parts");
  for (const auto& c : candidates) {
    if (c.i < 0 || c.j < 0 || static_cast<std::size_t>(c.i) >= parts.size() ||
        static_cast<std::size_t>(c.j) >= parts.size() || c.i == c.j)
      throw InputError("candidate edge " + std::to_string(c.i) + "-" + std::to_string(c.j) + " is not a part pair");
    if (c.segments.empty()) throw InputError("candidate edge has no segments");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const GraphEdge& a, const GraphEdge& b) { return a.score > b.score; });
  KinematicGraph g{std::move(parts), {}};
  detail::DisjointSets ds(g.parts.size());
  for (auto& c : candidates) {
    if (ds.unite(static_cast<std::size_t>(c.i), static_cast<std::size_t>(c.j))) g.edges.push_back(std::move(c));
  }
  if (g.edges.size() + 1 != g.parts.size()) throw InputError("candidate edges do not connect all parts");
  return g;
}

enum class GuardKind { Up, Down, ClampLow, ClampHigh };

inline std::string_view to_string(GuardKind k) {
  switch (k) {
    case GuardKind::Up: return "up";
    case GuardKind::Down: return "down";
    case GuardKind::ClampLow: return "clamp_low";
    case GuardKind::ClampHigh: return "clamp_high";
  }
  return "unknown";
}

inline GuardKind guard_kind_from_string(std::string_view s) {
  if (s == "up") return GuardKind::Up;
  if (s == "down") return GuardKind::Down;
  if (s == "clamp_low") return GuardKind::ClampLow;
  if (s == "clamp_high") return GuardKind::ClampHigh;
  throw InputError("unknown guard kind '" + std::string(s) + "'");
}

/// One articulated coordinate of the automaton.
struct AutomatonEdge {
  int i = 0;
  int j = 1;
  std::vector<ArticulationModel> models;
  std::vector<double> config_changepoints;  // b_0 = 0 < b_1 < ... < b_m

  double width(std::size_t k) const { return config_changepoints[k + 1] - config_changepoints[k]; }
};

struct Mode {
  int id = 0;
  std::vector<int> local_models;  // active model index per coordinate
};

/// Discrete transition with its guard. Up fires on c̄ >= threshold, every other kind on
/// c̄ < threshold (ClampHigh: c̄ >= threshold); clamps are self-loops.
struct Guard {
  int id = 0;
  int from = 0;
  int to = 0;
  int coordinate = 0;
  GuardKind kind = GuardKind::Up;
  double threshold = 0.0;
};

struct HybridState {
  int mode = 0;
  std::vector<double> x;  // local configuration per coordinate
};

struct StepResult {
  HybridState state;
  std::vector<int> fired;  // guard ids in firing order
};

class HybridAutomaton {
 public:
  std::vector<std::string> parts;
  std::vector<AutomatonEdge> edges;
  std::vector<Mode> modes;
  std::vector<Guard> guards;
  HybridState init;

  std::size_t coordinates() const { return edges.size(); }

  /// Mixed-radix mode id, first coordinate least significant.
  int mode_id(const std::vector<int>& local) const {
    int id = 0;
    int radix = 1;
    for (std::size_t l = 0; l < edges.size(); ++l) {
      id += local[l] * radix;
      radix *= static_cast<int>(edges[l].models.size());
    }
    return id;
  }

  std::vector<int> local_models(int mode) const {
    std::vector<int> out(edges.size());
    for (std::size_t l = 0; l < edges.size(); ++l) {
      const int m = static_cast<int>(edges[l].models.size());
      out[l] = mode % m;
      mode /= m;
    }
    return out;
  }

  /// Half-open invariant interval [0, width) of coordinate l in a mode.
  std::pair<double, double> invariant(int mode, std::size_t l) const {
    const auto local = local_models(mode);
    return {0.0, edges[l].width(static_cast<std::size_t>(local[l]))};
  }

  /// x^q: global configuration at the start of each active local model.
  std::vector<double> offsets(int mode) const {
    const auto local = local_models(mode);
    std::vector<double> out(edges.size());
    for (std::size_t l = 0; l < edges.size(); ++l) out[l] = edges[l].config_changepoints[static_cast<std::size_t>(local[l])];
    return out;
  }

  std::vector<double> global(const HybridState& s) const {
    auto g = offsets(s.mode);
    for (std::size_t l = 0; l < g.size(); ++l) g[l] += s.x[l];
    return g;
  }

  bool contains(const HybridState& s) const {
    if (s.mode < 0 || static_cast<std::size_t>(s.mode) >= modes.size() || s.x.size() != edges.size()) return false;
    for (std::size_t l = 0; l < edges.size(); ++l) {
      const auto [lo, hi] = invariant(s.mode, l);
      if (!(s.x[l] >= lo && s.x[l] < hi)) return false;
    }
    return true;
  }

  int guard_id(int mode, std::size_t coordinate, GuardKind kind) const {
    for (const Guard& g : guards) {
      if (g.from == mode && g.coordinate == static_cast<int>(coordinate) && g.kind == kind) return g.id;
    }
    return -1;
  }
};

namespace detail {

inline double below(double hi) { return std::nextafter(hi, -std::numeric_limits<double>::infinity()); }

// Fills modes and guards from the edges' local model chains.
inline void derive_structure(HybridAutomaton& h) {
  std::size_t count = 1;
  for (const auto& e : h.edges) count *= e.models.size();
  h.modes.clear();
  h.guards.clear();
  for (std::size_t q = 0; q < count; ++q) h.modes.push_back({static_cast<int>(q), h.local_models(static_cast<int>(q))});
  int id = 0;
  for (const Mode& m : h.modes) {
    for (std::size_t l = 0; l < h.edges.size(); ++l) {
      const auto k = static_cast<std::size_t>(m.local_models[l]);
      const double w = h.edges[l].width(k);
      auto neighbor = m.local_models;
      if (k + 1 < h.edges[l].models.size()) {
        neighbor[l] = static_cast<int>(k + 1);
        h.guards.push_back({id++, m.id, h.mode_id(neighbor), static_cast<int>(l), GuardKind::Up, w});
      }
      if (k > 0) {
        neighbor[l] = static_cast<int>(k - 1);
        h.guards.push_back({id++, m.id, h.mode_id(neighbor), static_cast<int>(l), GuardKind::Down, 0.0});
      }
      h.guards.push_back({id++, m.id, m.id, static_cast<int>(l), GuardKind::ClampLow, 0.0});
      h.guards.push_back({id++, m.id, m.id, static_cast<int>(l), GuardKind::ClampHigh, w});
    }
  }
}

}  // namespace detail

/// Compiles a tree-shaped kinematic graph. Rigid local models have no configurational extent of
/// their own and are given `rigid_extent` so that their invariant set is non-empty.
inline HybridAutomaton build_automaton(const KinematicGraph& g, double rigid_extent = 0.05) {
  if (!(rigid_extent > 0.0)) throw InputError("rigid extent must be > 0");
  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : g.edges) pairs.emplace_back(e.i, e.j);
  if (!detail::is_spanning_tree(g.parts.size(), pairs)) throw ValidationError("graph not a tree");

  HybridAutomaton h;
  h.parts = g.parts;
  for (const auto& e : g.edges) {
    if (e.segments.empty()) throw ValidationError("edge " + std::to_string(e.i) + "-" + std::to_string(e.j) + " has no models");
    AutomatonEdge ae{e.i, e.j, {}, {0.0}};
    for (const auto& s : e.segments) {
      const double w = s.model.kind() == ModelKind::Rigid ? rigid_extent : s.c_end - s.c_start;
      if (!(w > 0.0) || !std::isfinite(w))
        throw ValidationError("edge " + std::to_string(e.i) + "-" + std::to_string(e.j) +
                              ": configurational changepoints are not strictly increasing");
      ae.models.push_back(s.model);
      ae.config_changepoints.push_back(ae.config_changepoints.back() + w);
    }
    h.edges.push_back(std::move(ae));
  }
  detail::derive_structure(h);
  h.init = {0, std::vector<double>(h.edges.size(), 0.0)};
  return h;
}

/// Rebuilds modes, guards and init from edges (used after parsing only the edges).
inline void rederive(HybridAutomaton& h) {
  detail::derive_structure(h);
  h.init = {0, std::vector<double>(h.edges.size(), 0.0)};
}

/// Structural checks; empty iff the automaton is well formed.
inline std::vector<std::string> validate(const HybridAutomaton& h) {
  std::vector<std::string> v;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : h.edges) pairs.emplace_back(e.i, e.j);
  if (!detail::is_spanning_tree(h.parts.size(), pairs)) v.emplace_back("graph not a tree");

  bool edges_ok = true;
  for (std::size_t l = 0; l < h.edges.size(); ++l) {
    const auto& e = h.edges[l];
    const std::string name = "edge " + std::to_string(e.i) + "-" + std::to_string(e.j);
    if (e.models.empty()) {
      v.push_back(name + ": no local models");
      edges_ok = false;
      continue;
    }
    if (e.config_changepoints.size() != e.models.size() + 1) {
      v.push_back(name + ": expected " + std::to_string(e.models.size() + 1) + " configurational changepoints");
      edges_ok = false;
      continue;
    }
    if (e.config_changepoints.front() != 0.0) v.push_back(name + ": configurational changepoints must start at 0");
    for (std::size_t k = 0; k + 1 < e.config_changepoints.size(); ++k) {
      if (!(e.config_changepoints[k + 1] > e.config_changepoints[k]) || !std::isfinite(e.config_changepoints[k + 1])) {
        v.push_back(name + ": configurational changepoints are not strictly increasing");
        edges_ok = false;
        break;
      }
    }
  }
  if (!edges_ok) return v;

  std::size_t count = 1;
  for (const auto& e : h.edges) count *= e.models.size();
  if (h.modes.size() != count) {
    v.push_back("mode count " + std::to_string(h.modes.size()) + " differs from the product " + std::to_string(count));
    return v;
  }
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    if (h.modes[q].id != static_cast<int>(q) || h.modes[q].local_models != h.local_models(static_cast<int>(q)))
      v.push_back("mode " + std::to_string(q) + " does not match its mixed-radix index");
  }

  std::vector<bool> seen(h.guards.size(), false);
  for (std::size_t gi = 0; gi < h.guards.size(); ++gi) {
    const Guard& g = h.guards[gi];
    const std::string name = "transition edge " + std::to_string(g.id) + " (" + std::string(to_string(g.kind)) +
                             ", mode " + std::to_string(g.from) + " -> " + std::to_string(g.to) + ")";
    if (g.id != static_cast<int>(gi)) v.push_back(name + ": id out of sequence");
    if (g.from < 0 || g.to < 0 || static_cast<std::size_t>(g.from) >= count || static_cast<std::size_t>(g.to) >= count ||
        g.coordinate < 0 || static_cast<std::size_t>(g.coordinate) >= h.edges.size()) {
      v.push_back(name + ": refers to an unknown mode or coordinate");
      continue;
    }
    const auto l = static_cast<std::size_t>(g.coordinate);
    const auto from = h.local_models(g.from);
    const auto to = h.local_models(g.to);
    const auto k = static_cast<std::size_t>(from[l]);
    const double w = h.edges[l].width(k);
    auto expect_to = from;
    double expect_threshold = 0.0;
    switch (g.kind) {
      case GuardKind::Up:
        expect_to[l] = from[l] + 1;
        expect_threshold = w;
        if (k + 1 >= h.edges[l].models.size()) v.push_back(name + ": no next local model");
        break;
      case GuardKind::Down:
        expect_to[l] = from[l] - 1;
        if (k == 0) v.push_back(name + ": no previous local model");
        break;
      case GuardKind::ClampLow: break;
      case GuardKind::ClampHigh: expect_threshold = w; break;
    }
    if (to != expect_to) v.push_back(name + ": target is not the adjacent local model");
    if (g.threshold != expect_threshold)
      v.push_back(name + ": threshold " + std::to_string(g.threshold) + " leaves a gap against the invariant boundary " +
                  std::to_string(expect_threshold));
  }
  // every mode and coordinate: one guard of each applicable kind
  for (std::size_t q = 0; q < count; ++q) {
    const auto local = h.local_models(static_cast<int>(q));
    for (std::size_t l = 0; l < h.edges.size(); ++l) {
      const auto k = static_cast<std::size_t>(local[l]);
      const auto need = [&](GuardKind kind, bool required) {
        int n = 0;
        for (const Guard& g : h.guards) n += g.from == static_cast<int>(q) && g.coordinate == static_cast<int>(l) && g.kind == kind;
        if (required && n != 1)
          v.push_back("mode " + std::to_string(q) + " coordinate " + std::to_string(l) + ": expected one " +
                      std::string(to_string(kind)) + " guard, found " + std::to_string(n));
        if (!required && n != 0)
          v.push_back("mode " + std::to_string(q) + " coordinate " + std::to_string(l) + ": unexpected " +
                      std::string(to_string(kind)) + " guard");
      };
      need(GuardKind::Up, k + 1 < h.edges[l].models.size());
      need(GuardKind::Down, k > 0);
      need(GuardKind::ClampLow, true);
      need(GuardKind::ClampHigh, true);
    }
  }
  if (!h.contains(h.init)) v.emplace_back("initial state outside the invariant of its mode");
  return v;
}

/// One discrete-time update: x⁺ = x + u, then per coordinate in order at most one crossing to
/// the adjacent local model (identity reset of the global configuration), then clamping into
/// the invariant of the resulting mode.
inline StepResult step(const HybridAutomaton& h, const HybridState& s, const std::vector<double>& u) {
  if (u.size() != h.coordinates()) throw InputError("input has " + std::to_string(u.size()) + " coordinates, expected " +
                                                    std::to_string(h.coordinates()));
  if (!h.contains(s)) throw InputError("state is outside the invariant of mode " + std::to_string(s.mode));
  StepResult r{s, {}};
  auto local = h.local_models(s.mode);
  for (std::size_t l = 0; l < h.coordinates(); ++l) {
    const auto& e = h.edges[l];
    double x = s.x[l] + u[l];
    auto k = static_cast<std::size_t>(local[l]);
    const int mode = h.mode_id(local);
    if (x >= e.width(k) && k + 1 < e.models.size()) {
      r.fired.push_back(h.guard_id(mode, l, GuardKind::Up));
      x -= e.width(k);
      ++k;
    } else if (x < 0.0 && k > 0) {
      r.fired.push_back(h.guard_id(mode, l, GuardKind::Down));
      --k;
      x += e.width(k);
    }
    local[l] = static_cast<int>(k);
    const int now = h.mode_id(local);
    if (x < 0.0) {
      r.fired.push_back(h.guard_id(now, l, GuardKind::ClampLow));
      x = 0.0;
    } else if (x >= e.width(k)) {
      r.fired.push_back(h.guard_id(now, l, GuardKind::ClampHigh));
      x = detail::below(e.width(k));
    }
    r.state.x[l] = x;
  }
  r.state.mode = h.mode_id(local);
  return r;
}

}  // namespace hkin
