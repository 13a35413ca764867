#pragma once

// Labeled synthetic demonstrations of a microwave-like door (latched, then revolute) and a
// drawer-like slider (prismatic) under three interaction regimes.

#include "hkin/error.hpp"
#include "hkin/geometry.hpp"
#include "hkin/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hkin {

enum class ObjectKind { Microwave, Drawer };
enum class Regime { WithGrasp, NoActionGaps, WithoutGrasp };

inline std::string_view to_string(ObjectKind o) { return o == ObjectKind::Microwave ? "microwave" : "drawer"; }

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::WithGrasp: return "with-grasp";
    case Regime::NoActionGaps: return "no-action-gaps";
    case Regime::WithoutGrasp: return "without-grasp";
  }
  return "unknown";
}

inline ObjectKind object_from_string(std::string_view s) {
  if (s == "microwave") return ObjectKind::Microwave;
  if (s == "drawer") return ObjectKind::Drawer;
  throw InputError("unknown object '" + std::string(s) + "'");
}

inline Regime regime_from_string(std::string_view s) {
  if (s == "with-grasp") return Regime::WithGrasp;
  if (s == "no-action-gaps") return Regime::NoActionGaps;
  if (s == "without-grasp") return Regime::WithoutGrasp;
  throw InputError("unknown regime '" + std::string(s) + "'");
}

struct ScenarioSpec {
  ObjectKind object = ObjectKind::Drawer;
  Regime regime = Regime::WithGrasp;
  int T = 150;
  NoiseModel noise;  // zero variances give noiseless data; outlier_probability is the corruption rate
  double action_magnitude = 0.004;   // m per step: drawer travel rate, microwave pull while latched
  int gap_count = 2;
  int gap_length = 30;
  double off_axis_fraction = 0.5;  // orthogonal share of each action, without-grasp only
  int contact_period = 10;         // without-grasp: steps between pushes
  double push_distance = 0.1;      // without-grasp: displacement per push (m, or m of arc)
  double door_radius = 0.3;
  double latch = 0.05;             // rad; configurational extent of the latched phase
  double open_angle = 1.4;         // rad reached at the end of a microwave demonstration
  double latch_fraction = 0.5;     // share of the series spent latched
  double drawer_travel = 0.4;
  std::uint64_t seed = 1;

  /// Default noise for a regime: 5 mm / 0.01 rad, tripled without a grasp.
  static NoiseModel default_noise(Regime r) {
    NoiseModel n;
    if (r == Regime::WithoutGrasp) {
      n.translational_variance *= 9.0;
      n.angular_variance *= 9.0;
    }
    return n;
  }

  void validate() const {
    if (T < 40) throw InputError("scenario T must be >= 40");
    if (!(noise.translational_variance >= 0.0) || !(noise.angular_variance >= 0.0))
      throw InputError("scenario noise variances must be >= 0");
    if (!(noise.outlier_probability >= 0.0 && noise.outlier_probability <= 1.0))
      throw InputError("scenario outlier probability must be in [0, 1]");
    if (!(action_magnitude >= 0.0)) throw InputError("action magnitude must be >= 0");
    if (regime == Regime::NoActionGaps) {
      if (gap_count < 0 || gap_length < 1) throw InputError("gap count must be >= 0 and gap length >= 1");
      if (gap_count * gap_length >= T - 1) throw InputError("gap lengths must sum to less than T");
    }
    if (!(off_axis_fraction >= 0.0 && off_axis_fraction <= 1.0))
      throw InputError("off-axis fraction must be in [0, 1]");
    if (contact_period < 1) throw InputError("contact period must be >= 1");
    if (!(push_distance > 0.0)) throw InputError("push distance must be > 0");
    if (!(door_radius > 0.0)) throw InputError("door radius must be > 0");
    if (!(latch > 0.0)) throw InputError("latch must be > 0");
    if (!(open_angle > 0.0 && open_angle < std::numbers::pi)) throw InputError("open angle must be in (0, pi)");
    if (!(latch_fraction > 0.0 && latch_fraction < 1.0)) throw InputError("latch fraction must be in (0, 1)");
    if (!(drawer_travel > 0.0)) throw InputError("drawer travel must be > 0");
    if (object == ObjectKind::Microwave) {
      const int latched = latch_time();
      if (latched < 10 || T - latched < 10) throw InputError("both microwave phases need >= 10 steps");
    }
  }

  int latch_time() const { return static_cast<int>(std::lround(latch_fraction * T)); }
};

struct TrueSegment {
  int t0 = 0;
  int t1 = 0;
  ArticulationModel model;
  double c_start = 0.0;
  double c_end = 0.0;
};

struct LabeledTrajectory {
  std::vector<Pose> y;       // observations, size T
  std::vector<Pose> a;       // actions, size T - 1; a[k] drives y[k] -> y[k+1]
  std::vector<Pose> clean;   // noiseless poses
  std::vector<int> tau;      // true changepoint times, [0, ..., T]
  std::vector<TrueSegment> segments;
  std::vector<double> config_changepoints;  // cumulative configurational boundaries
  std::vector<int> gap_steps;                // action indices forced to identity
  std::vector<bool> outlier;                 // observation replaced by an outlier
};

namespace detail {

inline Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Quat q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized();
}

inline Vec3 random_orthogonal(const Vec3& dir, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  const Vec3 e1 = any_orthogonal(dir);
  const Vec3 e2 = dir.normalized().cross(e1);
  const double phi = u(rng);
  return std::cos(phi) * e1 + std::sin(phi) * e2;
}

inline double reflect(double c, double hi, double& direction) {
  while (c > hi || c < 0.0) {
    if (c > hi) {
      c = 2.0 * hi - c;
      direction = -direction;
    }
    if (c < 0.0) {
      c = -c;
      direction = -direction;
    }
  }
  return c;
}

}  // namespace detail

/// Forward-simulates the scripted object under the regime's actions, then corrupts the poses
/// with Gaussian noise and uniform outliers.
inline LabeledTrajectory generate(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int T = spec.T;
  const auto steps = static_cast<std::size_t>(T - 1);

  // configuration schedule: c[k] for every observation, and which model governs it
  std::vector<double> c(static_cast<std::size_t>(T), 0.0);
  std::vector<bool> moving_step(steps, true);  // steps on which the governing joint can move
  ArticulationModel joint;
  int latched = 0;
  if (spec.object == ObjectKind::Drawer) {
    const Vec3 origin(0.5 + 0.1 * unit(rng), 0.1 * unit(rng), 0.3 + 0.1 * unit(rng));
    const Vec3 axis(1.0, 0.3 * unit(rng), 0.2 * unit(rng));
    joint = ArticulationModel::prismatic(Pose(origin, detail::random_rotation(rng)), axis);
  } else {
    const double yaw = std::numbers::pi * unit(rng);
    const Quat tilt = quat_from_rotation_vector(Vec3(0.05 * unit(rng), 0.05 * unit(rng), 0.0));
    const Pose hinge(Vec3(0.6 + 0.1 * unit(rng), 0.1 * unit(rng), 0.2 + 0.1 * unit(rng)),
                     tilt * Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
    joint = ArticulationModel::revolute(hinge, spec.door_radius, detail::random_rotation(rng));
    latched = spec.latch_time();
    for (int k = 0; k < latched; ++k) moving_step[static_cast<std::size_t>(k)] = false;
  }

  std::vector<int> gaps;
  if (spec.regime == Regime::NoActionGaps && spec.gap_count > 0) {
    // gap starts among the moving steps, non-overlapping
    const int first = latched;
    const int span_len = T - 1 - first;
    const int free = span_len - spec.gap_count * spec.gap_length;
    if (free < 0) throw InputError("gaps do not fit into the moving phase");
    std::uniform_int_distribution<int> pos(0, free);
    std::vector<int> starts(static_cast<std::size_t>(spec.gap_count));
    for (int& s : starts) s = pos(rng);
    std::sort(starts.begin(), starts.end());
    for (int i = 0; i < spec.gap_count; ++i) {
      const int s = first + starts[static_cast<std::size_t>(i)] + i * spec.gap_length;
      for (int k = s; k < s + spec.gap_length; ++k) gaps.push_back(k);
    }
  }
  std::vector<bool> is_gap(steps, false);
  for (int k : gaps) is_gap[static_cast<std::size_t>(k)] = true;

  // per-step configuration increments: commanded by the demonstrator, and realized
  std::vector<double> commanded(steps, 0.0);
  std::vector<double> dc(steps, 0.0);
  const bool pushed = spec.regime == Regime::WithoutGrasp;
  const double open_step = spec.open_angle / static_cast<double>(T - 1 - latched);
  const double hi = spec.object == ObjectKind::Drawer ? spec.drawer_travel : spec.open_angle;
  double direction = 1.0;
  int since_contact = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    c[k + 1] = c[k];
    if (!moving_step[k] || is_gap[k]) continue;
    double inc = spec.object == ObjectKind::Drawer ? spec.action_magnitude : open_step;
    if (pushed) {
      // the pusher slides along the surface and only engages once per contact period
      if (++since_contact < spec.contact_period) continue;
      since_contact = 0;
      inc = spec.object == ObjectKind::Drawer ? spec.push_distance : spec.push_distance / spec.door_radius;
    }
    const double next = detail::reflect(c[k] + direction * inc, hi, direction);
    c[k + 1] = next;
    dc[k] = next - c[k];
    commanded[k] = dc[k];
  }

  LabeledTrajectory out;
  out.gap_steps = gaps;
  out.clean.reserve(static_cast<std::size_t>(T));
  for (int k = 0; k < T; ++k) out.clean.push_back(forward_kinematics(joint, c[static_cast<std::size_t>(k)]));

  // actions: joint tangent times the commanded increment (a pull while latched), plus the
  // off-axis share of the action's magnitude without a grasp
  out.a.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    if (is_gap[k]) {
      out.a.push_back(Pose::identity());
      continue;
    }
    const Vec3 tangent = jacobian(joint, c[k]).linear;
    const Vec3 along = moving_step[k] ? Vec3(tangent * commanded[k]) : Vec3(tangent.normalized() * spec.action_magnitude);
    Vec3 act = along;
    if (pushed) {
      const Vec3 orth = detail::random_orthogonal(tangent, rng);
      const double f = spec.off_axis_fraction;
      if (along.norm() == 0.0) {
        act = orth * spec.action_magnitude;  // sliding contact: effort that moves nothing
      } else {
        act = f >= 1.0 ? Vec3(orth * along.norm()) : Vec3(along + orth * (along.norm() * f / std::sqrt(1.0 - f * f)));
      }
    }
    out.a.emplace_back(act);
  }

  // observations
  const double st = std::sqrt(spec.noise.translational_variance);
  const double sr = std::sqrt(spec.noise.angular_variance);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> box(-0.5, 0.5);
  out.outlier.assign(static_cast<std::size_t>(T), false);
  out.y.reserve(static_cast<std::size_t>(T));
  for (int k = 0; k < T; ++k) {
    const Pose& p = out.clean[static_cast<std::size_t>(k)];
    if (spec.noise.outlier_probability > 0.0 && u01(rng) < spec.noise.outlier_probability) {
      out.outlier[static_cast<std::size_t>(k)] = true;
      out.y.emplace_back(p.translation() + Vec3(box(rng), box(rng), box(rng)), detail::random_rotation(rng));
      continue;
    }
    if (st == 0.0 && sr == 0.0) {
      out.y.push_back(p);
      continue;
    }
    const Vec3 nt(g(rng) * st, g(rng) * st, g(rng) * st);
    const Vec3 nr(g(rng) * sr, g(rng) * sr, g(rng) * sr);
    out.y.emplace_back(p.translation() + nt, quat_from_rotation_vector(nr) * p.rotation());
  }

  // labels
  if (spec.object == ObjectKind::Drawer) {
    out.tau = {0, T};
    out.segments.push_back({0, T, joint, 0.0, c.back()});
    out.config_changepoints = {0.0, c.back()};
  } else {
    out.tau = {0, latched, T};
    out.segments.push_back({0, latched, ArticulationModel::rigid(forward_kinematics(joint, 0.0)), 0.0, 0.0});
    out.segments.push_back({latched, T, joint, 0.0, c.back()});
    out.config_changepoints = {0.0, spec.latch, spec.latch + c.back()};
  }
  return out;
}

}  // namespace hkin
