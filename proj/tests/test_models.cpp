#include "hkin/models.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hkin;

namespace {

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Pose random_pose(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {Vec3(n(rng), n(rng), n(rng)), random_quat(rng)};
}

ArticulationModel random_model(ModelKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  switch (kind) {
    case ModelKind::Rigid: return ArticulationModel::rigid(random_pose(rng));
    case ModelKind::Prismatic: {
      std::normal_distribution<double> n(0.0, 1.0);
      return ArticulationModel::prismatic(random_pose(rng), Vec3(n(rng), n(rng), n(rng)));
    }
    case ModelKind::Revolute: return ArticulationModel::revolute(random_pose(rng), u(rng), random_quat(rng));
  }
  return {};
}

double random_configuration(ModelKind kind, std::mt19937_64& rng) {
  if (kind == ModelKind::Rigid) return 0.0;
  std::uniform_real_distribution<double> u(kind == ModelKind::Revolute ? -3.1 : -1.0, kind == ModelKind::Revolute ? 3.1 : 1.0);
  return u(rng);
}

double pose_error(const Pose& a, const Pose& b) {
  const PoseDistance d = distance(a, b);
  return d.translational + d.angular;
}

}  // namespace

TEST(ModelKind, NamesAndCounts) {
  for (ModelKind k : kAllKinds) EXPECT_EQ(kind_from_string(to_string(k)), k);
  EXPECT_THROW(kind_from_string("screw"), InputError);
  EXPECT_EQ(parameter_count(ModelKind::Rigid), 6);
  EXPECT_EQ(parameter_count(ModelKind::Prismatic), 8);
  EXPECT_EQ(parameter_count(ModelKind::Revolute), 9);
}

TEST(ArticulationModel, RejectsDegenerateParameters) {
  EXPECT_THROW(ArticulationModel::prismatic(Pose{}, Vec3::Zero()), InputError);
  EXPECT_THROW(ArticulationModel::revolute(Pose{}, -1.0, Quat::Identity()), InputError);
}

TEST(Kinematics, ForwardInverseRoundTrip) {
  std::mt19937_64 rng(21);
  for (ModelKind kind : kAllKinds) {
    for (int i = 0; i < 500; ++i) {
      const ArticulationModel m = random_model(kind, rng);
      const double c = random_configuration(kind, rng);
      EXPECT_NEAR(inverse_kinematics(m, forward_kinematics(m, c)), c, 1e-9) << to_string(kind);
    }
  }
}

TEST(Kinematics, InverseProjectsOntoManifold) {
  std::mt19937_64 rng(22);
  for (ModelKind kind : kAllKinds) {
    for (int i = 0; i < 200; ++i) {
      const ArticulationModel m = random_model(kind, rng);
      const Pose off = random_pose(rng);
      const double c = inverse_kinematics(m, off);
      // the projection is idempotent
      EXPECT_NEAR(inverse_kinematics(m, forward_kinematics(m, c)), c, 1e-9);
    }
  }
}

TEST(Kinematics, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  int cases = 0;
  for (ModelKind kind : {ModelKind::Prismatic, ModelKind::Revolute}) {
    for (int i = 0; i < 250; ++i, ++cases) {
      const ArticulationModel m = random_model(kind, rng);
      const double c = random_configuration(kind, rng);
      const Pose lo = forward_kinematics(m, c - h);
      const Pose hi = forward_kinematics(m, c + h);
      const Vec3 lin = (hi.translation() - lo.translation()) / (2.0 * h);
      const Vec3 ang = rotation_vector(hi.rotation() * lo.rotation().conjugate()) / (2.0 * h);
      const Twist j = jacobian(m, c);
      Eigen::Matrix<double, 6, 1> fd, an;
      fd << lin, ang;
      an << j.linear, j.angular;
      EXPECT_LT((fd - an).norm() / an.norm(), 1e-5) << to_string(kind) << " c=" << c;
    }
  }
  EXPECT_EQ(cases, 500);
  const Twist rigid = jacobian(random_model(ModelKind::Rigid, rng), 0.0);
  EXPECT_EQ(rigid.linear.norm() + rigid.angular.norm(), 0.0);
}

TEST(Kinematics, RigidConfigurationIsZero) {
  std::mt19937_64 rng(24);
  const ArticulationModel m = random_model(ModelKind::Rigid, rng);
  EXPECT_EQ(inverse_kinematics(m, random_pose(rng)), 0.0);
  EXPECT_LT(pose_error(forward_kinematics(m, 0.7), m.as_rigid().offset), 1e-15);
}

TEST(Predict, ZeroActionFixedPoint) {
  std::mt19937_64 rng(25);
  for (ModelKind kind : kAllKinds) {
    for (int i = 0; i < 200; ++i) {
      const ArticulationModel m = random_model(kind, rng);
      const Pose y = random_pose(rng, 0.5);
      const Pose p = predict(m, y, Pose::identity());
      const double c = inverse_kinematics(m, p);
      EXPECT_LT(pose_error(forward_kinematics(m, c), p), 1e-9) << "prediction left the manifold";
      double expected = inverse_kinematics(m, y);
      if (kind == ModelKind::Revolute && std::abs(std::abs(expected) - std::numbers::pi) < 1e-9) continue;
      EXPECT_NEAR(c, expected, 1e-9);
    }
  }
}

TEST(Predict, MatchesComposedDefinition) {
  // f(f⁻¹(y) + J⁻¹ a) assembled from the three public operations
  std::mt19937_64 rng(26);
  std::normal_distribution<double> n(0.0, 0.02);
  for (ModelKind kind : kAllKinds) {
    for (int i = 0; i < 200; ++i) {
      const ArticulationModel m = random_model(kind, rng);
      const Pose y = random_pose(rng, 0.5);
      const Pose a(Vec3(n(rng), n(rng), n(rng)), quat_from_rotation_vector(Vec3(n(rng), n(rng), n(rng))));
      const double c = inverse_kinematics(m, y) + inverse_jacobian_apply(m, y, a);
      EXPECT_LT(pose_error(predict(m, y, a), forward_kinematics(m, c)), 1e-9);
    }
  }
}

TEST(Predict, ZeroRadiusRevoluteUsesActionRotation) {
  const ArticulationModel m = ArticulationModel::revolute(Pose{}, 0.0, Quat::Identity());
  const Pose a(Vec3::Zero(), Quat(Eigen::AngleAxisd(0.1, Vec3::UnitZ())));
  EXPECT_NEAR(inverse_kinematics(m, predict(m, forward_kinematics(m, 0.2), a)), 0.3, 1e-12);
}

TEST(ObservationModel, GaussianDensityByHand) {
  NoiseModel n;
  n.translational_variance = 0.01;
  n.angular_variance = 0.04;
  const ObservationModel om(n);
  const Pose y(Vec3(0.1, 0.0, 0.0), Quat(Eigen::AngleAxisd(0.2, Vec3::UnitY())));
  const double expected = -3.0 * std::log(2.0 * std::numbers::pi) - 1.5 * std::log(0.01) - 1.5 * std::log(0.04) -
                          0.01 / (2.0 * 0.01) - 0.04 / (2.0 * 0.04);
  EXPECT_NEAR(om.log_gaussian(y, Pose{}), expected, 1e-12);
}

TEST(ObservationModel, MixtureAndGate) {
  NoiseModel n;
  const ObservationModel om(n);
  const double g = n.outlier_probability;
  for (double lg : {-50.0, -5.0, 0.0, 10.0}) {
    const double direct = std::log((1.0 - g) * std::exp(lg) + g / n.outlier_volume);
    EXPECT_NEAR(om.mixture(lg, g), direct, 1e-12);
  }
  EXPECT_EQ(om.mixture(-3.0, 0.0), -3.0);
  EXPECT_NEAR(om.mixture(-3.0, 1.0), -std::log(n.outlier_volume), 1e-15);
  // at the gate both mixture components carry equal mass
  EXPECT_NEAR(std::log1p(-g) + om.outlier_gate(), std::log(g) + om.log_uniform(), 1e-12);
  NoiseModel clean = n;
  clean.outlier_probability = 0.0;
  EXPECT_EQ(ObservationModel(clean).outlier_gate(), -std::numeric_limits<double>::infinity());
}

TEST(ObservationModel, RejectsBadNoise) {
  NoiseModel n;
  n.translational_variance = 0.0;
  EXPECT_THROW(ObservationModel{n}, InputError);
  n = {};
  n.outlier_probability = 1.5;
  EXPECT_THROW(n.validate(), InputError);
}

TEST(SequenceLoglik, NoiselessLineByHand) {
  const ArticulationModel m = ArticulationModel::prismatic(Pose{}, Vec3::UnitX());
  std::vector<Pose> y, a;
  for (int k = 0; k < 20; ++k) y.emplace_back(Vec3(0.01 * k, 0.0, 0.0));
  for (int k = 0; k < 19; ++k) a.emplace_back(Vec3(0.01, 0.0, 0.0));
  NoiseModel n;
  const ObservationModel om(n);
  const double per_term = om.mixture(om.log_mode(), n.outlier_probability);
  EXPECT_NEAR(sequence_loglik(m, y, a, n), 19.0 * per_term - n.outlier_prior_weight * n.outlier_probability, 1e-9);
}

TEST(SequenceLoglik, OutlierPredecessorIsReplaced) {
  const ArticulationModel m = ArticulationModel::prismatic(Pose{}, Vec3::UnitX());
  std::vector<Pose> y, a;
  for (int k = 0; k < 6; ++k) y.emplace_back(Vec3(0.01 * k, 0.0, 0.0));
  for (int k = 0; k < 5; ++k) a.emplace_back(Vec3(0.01, 0.0, 0.0));
  y[2] = Pose(Vec3(0.5, 0.3, -0.2));
  NoiseModel n;
  const ObservationModel om(n);
  // observation 3 is predicted from the prediction of observation 2, which is exact
  PredictorState st;
  double g3 = 0.0;
  for (std::size_t k = 1; k <= 3; ++k) g3 = gated_log_gaussian(m, om, y[k - 1], a[k - 1], y[k], st);
  EXPECT_NEAR(g3, om.log_mode(), 1e-9);
  // without outlier mass nothing is gated
  NoiseModel clean = n;
  clean.outlier_probability = 0.0;
  const ObservationModel om0(clean);
  PredictorState st0;
  for (std::size_t k = 1; k <= 3; ++k) g3 = gated_log_gaussian(m, om0, y[k - 1], a[k - 1], y[k], st0);
  EXPECT_NEAR(g3, om0.log_gaussian(y[3], predict(m, y[2], a[2])), 1e-12);
}
