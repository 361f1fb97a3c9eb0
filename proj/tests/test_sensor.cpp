#include "zgem/sensor.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace zgem;

namespace {

PayloadAttachment payload(double mass = 10.0, const Vec3& c = Vec3(0.0, 0.0, 0.2)) {
  return {RigidSpacecraft{Inertia6::checked(mass, Vec3(0.9, 0.8, 0.7).asDiagonal()), "test"}, c};
}

const Vec3 kDown(0.0, 0.0, -1.0);

Twist random_twist(std::mt19937& rng, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  return {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
}

RotationMatrix random_rotation(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
  q.normalize();
  return RotationMatrix::from_quaternion(q);
}

}  // namespace

TEST(GravityWrench, IdentityAttitude) {
  const Wrench f_g = gravity_wrench(10.0, kDown, RotationMatrix::identity());
  EXPECT_LT((f_g.force - Vec3(0, 0, -98.1)).norm(), 1e-12);
  EXPECT_LT(f_g.torque.norm(), 1e-15);
}

TEST(GravityWrench, NormIsWeightForAnyAttitude) {
  std::mt19937 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Wrench f_g = gravity_wrench(7.5, kDown, random_rotation(rng));
    EXPECT_NEAR(f_g.force.norm(), 7.5 * kGravity, 1e-10);
  }
}

TEST(GravityWrench, HandRotatedCase) {
  // R = 90 deg about x: R' k = (0, -1, 0) for k = (0,0,-1).
  const RotationMatrix r = RotationMatrix::from_quaternion(
      Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX())));
  const Wrench f_g = gravity_wrench(2.0, kDown, r);
  EXPECT_LT((f_g.force - Vec3(0.0, -2.0 * kGravity, 0.0)).norm(), 1e-12);
}

TEST(TrueInteractionWrench, StaticPoseReadsGravity) {
  const auto att = payload(10.0, Vec3::Zero());
  const Wrench f_s = true_interaction_wrench(att, Twist::Zero(), Twist::Zero(),
                                             RotationMatrix::identity(), kDown, Wrench::Zero());
  EXPECT_LT((f_s.force - Vec3(0, 0, -98.1)).norm(), 1e-12);
  EXPECT_LT(f_s.torque.norm(), 1e-15);
}

TEST(TrueInteractionWrench, FreeFallReadsZero) {
  const auto att = payload();
  const RotationMatrix r = RotationMatrix::identity();
  const Twist nu_dot(kGravity * (r.transpose() * kDown), Vec3::Zero());
  const Wrench f_s = true_interaction_wrench(att, Twist::Zero(), nu_dot, r, kDown, Wrench::Zero());
  EXPECT_LT(f_s.norm(), 1e-12);
}

TEST(TrueInteractionWrench, AlgebraicRoundTrip) {
  // Plugging F_s back into the test-spacecraft dynamics reproduces
  // M_m nu_dot + h_m exactly: T F_s = F_g + F_ext - M_m nu_dot - h_m.
  const auto att = payload();
  std::mt19937 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Twist nu = random_twist(rng);
    const Twist nu_dot = random_twist(rng, 2.0);
    const RotationMatrix r = random_rotation(rng);
    const Wrench f_ext(Vec3(1, -2, 0.5), Vec3(0.1, 0.2, -0.3));
    const Wrench f_s = true_interaction_wrench(att, nu, nu_dot, r, kDown, f_ext);

    const Vec6 lhs = apply_sensor_transform(att.com_offset, f_s).vec6();
    const Vec6 rhs = gravity_wrench(att, kDown, r).vec6() + f_ext.vec6() -
                     att.payload.inertia.apply(nu_dot.vec6()) -
                     gyric_term(att.payload.inertia, nu).vec6();
    EXPECT_LT((lhs - rhs).norm(), 1e-10);
  }
}

TEST(Sample, NoiselessPathIsIdentity) {
  SensorModel model;
  SensorStream stream(model);
  const Wrench truth(Vec3(1.5, -2.5, 3.5), Vec3(0.1, 0.2, 0.3));
  const SensorReading reading = stream.sample(truth, 0.0);
  EXPECT_EQ(reading.f_s_raw.vec6(), truth.vec6());
}

TEST(Sample, QuantizerRoundsTiesAwayFromZero) {
  EXPECT_DOUBLE_EQ(quantize(0.26, 0.1), 0.3);
  EXPECT_DOUBLE_EQ(quantize(0.25, 0.1), 0.3);
  EXPECT_DOUBLE_EQ(quantize(-0.25, 0.1), -0.3);
  EXPECT_DOUBLE_EQ(quantize(0.24, 0.1), 0.2);
  EXPECT_DOUBLE_EQ(quantize(0.26, 0.0), 0.26);
}

TEST(Sample, NoiseStatisticsMatchModel) {
  SensorModel model;
  model.offset = Wrench(Vec3(0.3, -0.2, 0.1), Vec3(0.01, -0.02, 0.03));
  model.noise_force = 0.05;
  model.noise_torque = 0.005;
  model.seed = 99;
  SensorStream stream(model);

  const int n = 100000;
  Vec6 sum = Vec6::Zero(), sum_sq = Vec6::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec6 v = stream.sample(Wrench::Zero(), i * model.sample_period).f_s_raw.vec6();
    sum += v;
    sum_sq += (v - model.offset.vec6()).cwiseProduct(v - model.offset.vec6());
  }
  const Vec6 mean = sum / n;
  for (int axis = 0; axis < 6; ++axis) {
    const double sigma = axis < 3 ? model.noise_force : model.noise_torque;
    EXPECT_NEAR(mean(axis), model.offset.vec6()(axis), 3.0 * sigma / std::sqrt(double(n)));
    EXPECT_NEAR(std::sqrt(sum_sq(axis) / n), sigma, 0.05 * sigma);
  }
}

TEST(Sample, DeterministicForFixedSeed) {
  SensorModel model;
  model.noise_force = 0.1;
  model.noise_torque = 0.01;
  model.resolution_force = 1e-3;
  model.seed = 1234;
  SensorStream a(model), b(model);
  for (int i = 0; i < 1000; ++i) {
    const Wrench truth(Vec3(std::sin(0.01 * i), 0, 0), Vec3::Zero());
    EXPECT_EQ(a.sample(truth, i * 1e-3).f_s_raw.vec6(), b.sample(truth, i * 1e-3).f_s_raw.vec6());
  }
}

TEST(CompensatedWrench, PerfectCalibrationStaticReadsZero) {
  const auto att = payload();
  SensorModel model;
  model.offset = Wrench(Vec3(0.4, -0.1, 0.2), Vec3(0.02, 0.01, -0.03));
  SensorStream stream(model);
  const CalibrationParams calib = CalibrationParams::perfect(att, model.offset, kDown);
  std::mt19937 rng(29);
  for (int i = 0; i < 50; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const Wrench truth =
        true_interaction_wrench(att, Twist::Zero(), Twist::Zero(), r, kDown, Wrench::Zero());
    const Wrench f_sg = compensated_wrench(stream.sample(truth, 0.0), calib, r);
    EXPECT_LT(f_sg.norm(), 1e-10);
  }
}

TEST(CompensatedWrench, StaticExternalForcePassesThrough) {
  const auto att = payload();
  const CalibrationParams calib = CalibrationParams::perfect(att, Wrench::Zero(), kDown);
  SensorModel model;
  SensorStream stream(model);
  std::mt19937 rng(31);
  for (int i = 0; i < 50; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const Wrench f_ext(Vec3(3, -1, 2), Vec3(0.2, -0.4, 0.1));
    const Wrench truth =
        true_interaction_wrench(att, Twist::Zero(), Twist::Zero(), r, kDown, f_ext);
    const Wrench f_sg = compensated_wrench(stream.sample(truth, 0.0), calib, r);
    EXPECT_LT((f_sg - f_ext).norm(), 1e-10);
  }
}

TEST(CompensatedWrench, MassErrorLeavesPoseIndependentResidual) {
  const auto att = payload(10.0);
  const double dm = 0.3;
  CalibrationParams calib = CalibrationParams::perfect(att, Wrench::Zero(), kDown);
  calib.mass += dm;
  SensorModel model;
  SensorStream stream(model);
  std::mt19937 rng(37);
  for (int i = 0; i < 50; ++i) {
    const RotationMatrix r = random_rotation(rng);
    const Wrench truth =
        true_interaction_wrench(att, Twist::Zero(), Twist::Zero(), r, kDown, Wrench::Zero());
    const Wrench f_sg = compensated_wrench(stream.sample(truth, 0.0), calib, r);
    EXPECT_NEAR(f_sg.force.norm(), dm * kGravity, 1e-10);
  }
}

TEST(CompensatedWrench, DynamicRoundTripIdentity) {
  // compensated o sample(noise-free) o true_interaction with exact calibration
  // equals F_ext - M_m nu_dot - h_m for arbitrary motion states.
  const auto att = payload();
  SensorModel model;
  model.offset = Wrench(Vec3(0.1, 0.2, -0.3), Vec3(0.05, -0.01, 0.02));
  SensorStream stream(model);
  const CalibrationParams calib = CalibrationParams::perfect(att, model.offset, kDown);
  std::mt19937 rng(41);
  for (int i = 0; i < 100; ++i) {
    const Twist nu = random_twist(rng);
    const Twist nu_dot = random_twist(rng, 2.0);
    const RotationMatrix r = random_rotation(rng);
    const Wrench f_ext(Vec3(1, 2, -3), Vec3(-0.1, 0.3, 0.2));
    const Wrench truth = true_interaction_wrench(att, nu, nu_dot, r, kDown, f_ext);
    const Wrench f_sg = compensated_wrench(stream.sample(truth, 0.0), calib, r);
    const Vec6 expected = f_ext.vec6() - att.payload.inertia.apply(nu_dot.vec6()) -
                          gyric_term(att.payload.inertia, nu).vec6();
    EXPECT_LT((f_sg.vec6() - expected).norm(), 1e-10);
  }
}
