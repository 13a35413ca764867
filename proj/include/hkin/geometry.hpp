#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace hkin {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

namespace detail {

// Unit norm, scalar part >= 0. At w == 0 the first non-zero vector component is made positive
// so that both covers of a half-turn map to the same representative. Already-unit inputs are
// not renormalized, which keeps the mapping idempotent bit for bit.
inline Quat canonical(Quat q) {
  if (std::abs(q.squaredNorm() - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q.normalize();
  bool flip = q.w() < 0.0;
  if (q.w() == 0.0) {
    if (q.x() != 0.0) {
      flip = q.x() < 0.0;
    } else if (q.y() != 0.0) {
      flip = q.y() < 0.0;
    } else {
      flip = q.z() < 0.0;
    }
  }
  if (flip) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace detail

/// Rotation vector (axis * angle, angle in [0, pi]) of a unit quaternion.
inline Vec3 rotation_vector(const Quat& q) {
  Quat c = q;
  if (c.w() < 0.0) c.coeffs() = -c.coeffs();
  const Vec3 v = c.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;  // first-order; exact enough below 1e-12
  const double angle = 2.0 * std::atan2(s, c.w());
  return v * (angle / s);
}

inline Quat quat_from_rotation_vector(const Vec3& r) {
  const double angle = r.norm();
  if (angle < 1e-12) return Quat(1.0, 0.5 * r.x(), 0.5 * r.y(), 0.5 * r.z()).normalized();
  return Quat(Eigen::AngleAxisd(angle, r / angle));
}

/// Rigid transform: translation (m) followed by rotation (unit quaternion).
/// The quaternion is normalized and canonicalized on every construction.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()), rotation_(Quat::Identity()) {}
  Pose(const Vec3& translation, const Quat& rotation)
      : translation_(translation), rotation_(detail::canonical(rotation)) {}
  explicit Pose(const Vec3& translation) : translation_(translation), rotation_(Quat::Identity()) {}

  static Pose identity() { return {}; }

  const Vec3& translation() const { return translation_; }
  const Quat& rotation() const { return rotation_; }

  /// Serialization order [tx, ty, tz, qw, qx, qy, qz].
  std::array<double, 7> to_array() const {
    return {translation_.x(), translation_.y(), translation_.z(),
            rotation_.w(),    rotation_.x(),    rotation_.y(),    rotation_.z()};
  }

  static Pose from_array(std::span<const double, 7> v) {
    return {Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6])};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

 private:
  Vec3 translation_;
  Quat rotation_;
};

/// a ⊕ b: the homogeneous product a·b.
inline Pose compose(const Pose& a, const Pose& b) {
  return {a.translation() + a.rotation() * b.translation(), a.rotation() * b.rotation()};
}

inline Pose invert(const Pose& p) {
  const Quat inv = p.rotation().conjugate();
  return {-(inv * p.translation()), inv};
}

/// a ⊖ b = a⁻¹·b, so that compose(a, relative(a, b)) == b.
inline Pose relative(const Pose& a, const Pose& b) { return compose(invert(a), b); }

struct PoseDistance {
  double translational = 0.0;  // m
  double angular = 0.0;        // rad, geodesic, in [0, pi]
};

/// Geodesic angle between two rotations, 2·acos(|<qa, qb>|) evaluated in a stable form.
inline double angular_distance(const Quat& a, const Quat& b) {
  const Quat d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

inline PoseDistance distance(const Pose& a, const Pose& b) {
  return {(a.translation() - b.translation()).norm(), angular_distance(a.rotation(), b.rotation())};
}

/// First-order pose displacement: linear velocity (m per unit) and angular velocity
/// (rad per unit, world frame, left-multiplied).
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
};

/// Any unit vector orthogonal to n.
inline Vec3 any_orthogonal(const Vec3& n) {
  const Vec3 trial = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(trial).normalized();
}

}  // namespace hkin
