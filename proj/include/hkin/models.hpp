#pragma once

#include "hkin/error.hpp"
#include "hkin/geometry.hpp"

#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace hkin {

enum class ModelKind { Rigid = 0, Prismatic = 1, Revolute = 2 };

inline constexpr std::array<ModelKind, 3> kAllKinds = {ModelKind::Rigid, ModelKind::Prismatic,
                                                       ModelKind::Revolute};

/// Free parameters of each θ record, used by the BIC penalty.
constexpr int parameter_count(ModelKind kind) {
  switch (kind) {
    case ModelKind::Rigid: return 6;
    case ModelKind::Prismatic: return 8;
    case ModelKind::Revolute: return 9;
  }
  return 0;
}

/// Poses needed for one sample-consensus hypothesis.
constexpr int minimal_sample_size(ModelKind kind) {
  switch (kind) {
    case ModelKind::Rigid: return 1;
    case ModelKind::Prismatic: return 2;
    case ModelKind::Revolute: return 3;
  }
  return 0;
}

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Rigid: return "rigid";
    case ModelKind::Prismatic: return "prismatic";
    case ModelKind::Revolute: return "revolute";
  }
  return "unknown";
}

inline ModelKind kind_from_string(std::string_view name) {
  if (name == "rigid") return ModelKind::Rigid;
  if (name == "prismatic") return ModelKind::Prismatic;
  if (name == "revolute") return ModelKind::Revolute;
  throw InputError("unknown model kind '" + std::string(name) + "'");
}

struct RigidParams {
  Pose offset;
};

struct PrismaticParams {
  Pose origin;
  Vec3 axis = Vec3::UnitX();  // unit, expressed in the reference frame
};

/// Door-like joint: the center frame's z-axis is the hinge; the tracked frame sits at
/// `radius` along the rotated x-axis and carries `orientation_offset` relative to it.
struct RevoluteParams {
  Pose center;
  double radius = 0.0;
  Quat orientation_offset = Quat::Identity();
};

class ArticulationModel {
 public:
  ArticulationModel() = default;

  static ArticulationModel rigid(const Pose& offset) { return ArticulationModel(RigidParams{offset}); }

  static ArticulationModel prismatic(const Pose& origin, const Vec3& axis) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InputError("prismatic axis must be non-zero");
    return ArticulationModel(PrismaticParams{origin, axis / n});
  }

  static ArticulationModel revolute(const Pose& center, double radius, const Quat& orientation_offset) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw InputError("revolute radius must be >= 0");
    return ArticulationModel(
        RevoluteParams{center, radius, detail::canonical(orientation_offset)});
  }

  ModelKind kind() const { return static_cast<ModelKind>(params_.index()); }
  int parameter_count() const { return hkin::parameter_count(kind()); }

  const RigidParams& as_rigid() const { return std::get<RigidParams>(params_); }
  const PrismaticParams& as_prismatic() const { return std::get<PrismaticParams>(params_); }
  const RevoluteParams& as_revolute() const { return std::get<RevoluteParams>(params_); }

  /// Hinge direction in the reference frame (revolute only).
  Vec3 rotation_axis() const { return as_revolute().center.rotation() * Vec3::UnitZ(); }

 private:
  using Params = std::variant<RigidParams, PrismaticParams, RevoluteParams>;
  explicit ArticulationModel(Params p) : params_(std::move(p)) {}

  Params params_{RigidParams{}};
};

/// Weight (m²/rad²) of the orientation residual relative to the position residual when a
/// relative pose is projected onto a revolute manifold.
inline constexpr double kRevoluteRotationWeight = 0.25;

inline Pose forward_kinematics(const ArticulationModel& m, double c) {
  switch (m.kind()) {
    case ModelKind::Rigid: return m.as_rigid().offset;
    case ModelKind::Prismatic: {
      const auto& p = m.as_prismatic();
      return {p.origin.translation() + c * p.axis, p.origin.rotation()};
    }
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      const Quat& cq = r.center.rotation();
      const Vec3 local(r.radius * std::cos(c), r.radius * std::sin(c), 0.0);
      const Quat spin(Eigen::AngleAxisd(c, Vec3::UnitZ()));
      return {r.center.translation() + cq * local, cq * spin * r.orientation_offset};
    }
  }
  return {};
}

/// Configuration of the manifold point closest to `delta`. Revolute angles are in (-pi, pi].
inline double inverse_kinematics(const ArticulationModel& m, const Pose& delta) {
  switch (m.kind()) {
    case ModelKind::Rigid: return 0.0;
    case ModelKind::Prismatic: {
      const auto& p = m.as_prismatic();
      return p.axis.dot(delta.translation() - p.origin.translation());
    }
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      const Quat inv = r.center.rotation().conjugate();
      const Vec3 local = inv * (delta.translation() - r.center.translation());
      const Quat spin = inv * delta.rotation() * r.orientation_offset.conjugate();
      // twist of `spin` about z
      const double twist = 2.0 * std::atan2(spin.z(), spin.w());
      const double vx = r.radius * local.x() + kRevoluteRotationWeight * std::cos(twist);
      const double vy = r.radius * local.y() + kRevoluteRotationWeight * std::sin(twist);
      if (vx == 0.0 && vy == 0.0) return 0.0;
      const double c = std::atan2(vy, vx);
      return c == -std::numbers::pi ? std::numbers::pi : c;
    }
  }
  return 0.0;
}

/// d forward_kinematics / dc.
inline Twist jacobian(const ArticulationModel& m, double c) {
  switch (m.kind()) {
    case ModelKind::Rigid: return {};
    case ModelKind::Prismatic: return {m.as_prismatic().axis, Vec3::Zero()};
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      const Quat& cq = r.center.rotation();
      return {cq * Vec3(-r.radius * std::sin(c), r.radius * std::cos(c), 0.0), cq * Vec3::UnitZ()};
    }
  }
  return {};
}

/// Configuration increment explained by `action` at the configuration of `delta`:
/// least-squares projection of the action's translation onto the Jacobian direction.
/// A zero-radius revolute joint has no translational direction and uses the action's
/// rotation about the hinge instead.
inline double inverse_jacobian_apply(const ArticulationModel& m, const Pose& delta, const Pose& action) {
  if (m.kind() == ModelKind::Rigid) return 0.0;
  const Twist j = jacobian(m, inverse_kinematics(m, delta));
  const double n2 = j.linear.squaredNorm();
  if (n2 > 1e-18) return j.linear.dot(action.translation()) / n2;
  if (m.kind() == ModelKind::Revolute) return j.angular.dot(rotation_vector(action.rotation()));
  return 0.0;
}

/// Predicted relative pose after applying `a_prev` at `y_prev`:
/// f(f⁻¹(y_prev) + J⁻¹ a_prev). Expanded per kind; equal to composing the three operations.
inline Pose predict(const ArticulationModel& m, const Pose& y_prev, const Pose& a_prev) {
  switch (m.kind()) {
    case ModelKind::Rigid: return m.as_rigid().offset;
    case ModelKind::Prismatic: {
      const auto& p = m.as_prismatic();
      const double c = p.axis.dot(y_prev.translation() - p.origin.translation()) + p.axis.dot(a_prev.translation());
      return {p.origin.translation() + c * p.axis, p.origin.rotation()};
    }
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      double c = inverse_kinematics(m, y_prev);
      const Quat& cq = r.center.rotation();
      if (r.radius * r.radius > 1e-18) {
        const Vec3 a_local = cq.conjugate() * a_prev.translation();
        c += (-std::sin(c) * a_local.x() + std::cos(c) * a_local.y()) / r.radius;
      } else {
        c += (cq * Vec3::UnitZ()).dot(rotation_vector(a_prev.rotation()));
      }
      return forward_kinematics(m, c);
    }
  }
  return {};
}

/// Observation noise and outlier process.
struct NoiseModel {
  double translational_variance = 0.005 * 0.005;  // m², per axis
  double angular_variance = 0.01 * 0.01;          // rad², per axis
  double outlier_probability = 0.02;              // γ
  double outlier_prior_weight = 10.0;             // w in p(γ) ∝ exp(-wγ)
  double outlier_volume = 8.0 * std::numbers::pi * std::numbers::pi;  // 1 m³ × |SO(3)|

  void validate() const {
    if (!(translational_variance > 0.0) || !(angular_variance > 0.0))
      throw InputError("noise variances must be > 0");
    if (!(outlier_probability >= 0.0 && outlier_probability <= 1.0))
      throw InputError("outlier probability must be in [0, 1]");
    if (!(outlier_prior_weight > 0.0)) throw InputError("outlier prior weight must be > 0");
    if (!(outlier_volume > 0.0)) throw InputError("outlier volume must be > 0");
  }
};

/// Precomputed constants of the Gaussian-plus-uniform observation density.
class ObservationModel {
 public:
  explicit ObservationModel(const NoiseModel& n) : noise_(n) {
    n.validate();
    const double two_pi = 2.0 * std::numbers::pi;
    log_mode_ = -1.5 * std::log(two_pi * n.translational_variance) -
                1.5 * std::log(two_pi * n.angular_variance);
    half_inv_var_t_ = 0.5 / n.translational_variance;
    half_inv_var_r_ = 0.5 / n.angular_variance;
    log_uniform_ = -std::log(n.outlier_volume);
    const double g = n.outlier_probability;
    if (g <= 0.0) {
      outlier_gate_ = -std::numeric_limits<double>::infinity();
    } else if (g >= 1.0) {
      outlier_gate_ = std::numeric_limits<double>::infinity();
    } else {
      outlier_gate_ = std::log(g) - std::log1p(-g) + log_uniform_;
    }
  }

  const NoiseModel& noise() const { return noise_; }
  double log_mode() const { return log_mode_; }
  double log_uniform() const { return log_uniform_; }

  double log_gaussian(const Pose& y, const Pose& predicted) const {
    const double dt2 = (y.translation() - predicted.translation()).squaredNorm();
    const double th = angular_distance(y.rotation(), predicted.rotation());
    return log_mode_ - dt2 * half_inv_var_t_ - th * th * half_inv_var_r_;
  }

  /// ln((1-γ)·N + γ/U).
  double mixture(double log_gauss, double gamma) const {
    if (gamma <= 0.0) return log_gauss;
    if (gamma >= 1.0) return log_uniform_;
    const double a = std::log1p(-gamma) + log_gauss;
    const double b = std::log(gamma) + log_uniform_;
    const double hi = a > b ? a : b;
    return hi + std::log1p(std::exp(-(std::abs(a - b))));
  }

  double log_prior(double gamma) const { return -noise_.outlier_prior_weight * gamma; }

  /// Gaussian log density below which the outlier component dominates at the nominal γ.
  double outlier_gate() const { return outlier_gate_; }

 private:
  NoiseModel noise_;
  double log_mode_ = 0.0;
  double half_inv_var_t_ = 0.0;
  double half_inv_var_r_ = 0.0;
  double log_uniform_ = 0.0;
  double outlier_gate_ = 0.0;
};

/// Carry-over between consecutive predictions of one sequence.
struct PredictorState {
  Pose last_prediction;
  bool last_outlier = false;
};

/// Gaussian log density of y against the prediction from (y_prev, a_prev). When the previous
/// observation was attributed to the outlier component, its prediction stands in for it as
/// the predecessor, so one corrupted pose does not also corrupt the next prediction.
inline double gated_log_gaussian(const ArticulationModel& m, const ObservationModel& om, const Pose& y_prev,
                                 const Pose& a_prev, const Pose& y, PredictorState& st) {
  const Pose pred = predict(m, st.last_outlier ? st.last_prediction : y_prev, a_prev);
  const double g = om.log_gaussian(y, pred);
  st.last_prediction = pred;
  st.last_outlier = g < om.outlier_gate();
  return g;
}

/// Log-likelihood of one observation against a prediction, including the outlier prior
/// term ln p(γ) = -wγ (up to a constant).
inline double observation_loglik(const Pose& y, const Pose& predicted, const NoiseModel& n) {
  const ObservationModel om(n);
  return om.mixture(om.log_gaussian(y, predicted), n.outlier_probability) +
         om.log_prior(n.outlier_probability);
}

/// Sum over k of the mixture log-likelihood of y[k] given predict(m, y[k-1], a[k-1]), with
/// outlier predecessors replaced as in gated_log_gaussian; the outlier prior is applied once
/// for the whole series.
inline double sequence_loglik(const ArticulationModel& m, std::span<const Pose> y,
                              std::span<const Pose> a, const NoiseModel& n) {
  if (y.size() < 2) throw InputError("segment needs at least 2 observations");
  if (a.size() + 1 != y.size()) throw InputError("segment needs exactly one action per prediction");
  const ObservationModel om(n);
  PredictorState st;
  double sum = 0.0;
  for (std::size_t k = 1; k < y.size(); ++k) {
    sum += om.mixture(gated_log_gaussian(m, om, y[k - 1], a[k - 1], y[k], st), n.outlier_probability);
  }
  return sum + om.log_prior(n.outlier_probability);
}

}  // namespace hkin
