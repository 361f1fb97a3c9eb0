#include "zgem/controller.hpp"

#include <gtest/gtest.h>

#include <random>

#include "zgem/spacecraft.hpp"

using namespace zgem;

namespace {

Inertia6 flight_inertia() { return Inertia6::checked(200.0, Vec3(120, 100, 80).asDiagonal()); }
Inertia6 test_inertia() { return Inertia6::checked(100.0, Vec3(60, 50, 40).asDiagonal()); }

PayloadAttachment attachment() {
  return {RigidSpacecraft{test_inertia(), "test"}, Vec3(0.0, 0.0, 0.25)};
}

Eigen::VectorXd random_q(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  Eigen::VectorXd q(6);
  for (int i = 0; i < 6; ++i) q(i) = u(rng);
  if (std::abs(q(4)) < 0.25) q(4) += q(4) < 0 ? -0.3 : 0.3;
  return q;
}

Eigen::VectorXd random_qd(std::mt19937& rng, double s = 0.5) {
  std::uniform_real_distribution<double> u(-s, s);
  Eigen::VectorXd qd(6);
  for (int i = 0; i < 6; ++i) qd(i) = u(rng);
  return qd;
}

Wrench random_wrench(std::mt19937& rng, double s = 5.0) {
  std::uniform_real_distribution<double> u(-s, s);
  return {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
}

}  // namespace

TEST(DeltaInertia, IdentityCase) {
  const auto d = delta_inertia(Inertia6::checked(2.0, Mat3(2.0 * Mat3::Identity())),
                               Inertia6::checked(1.0, Mat3::Identity()));
  EXPECT_LT((d.matrix6() - Mat6::Identity()).norm(), 1e-14);
  EXPECT_NEAR(d.spectral_norm(), 1.0, 1e-14);
}

TEST(DeltaInertia, RejectsEqualMasses) {
  try {
    delta_inertia(Inertia6::checked(5.0, Mat3(2.0 * Mat3::Identity())),
                  Inertia6::checked(5.0, Mat3::Identity()));
    FAIL() << "expected singular-delta-inertia";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "singular-delta-inertia");
  }
}

TEST(DeltaInertia, RejectsZeroInertiaEigenvalue) {
  // I_s = diag(3,2,1), I_m = diag(1,2,3): middle eigenvalue of the difference is 0.
  try {
    delta_inertia(Inertia6::checked(2.0, Vec3(3, 2, 1).asDiagonal()),
                  Inertia6::checked(1.0, Vec3(1, 2, 3).asDiagonal()));
    FAIL() << "expected singular-delta-inertia";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "singular-delta-inertia");
  }
}

TEST(EstimateCartesianAccel, TrivialCases) {
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  EXPECT_LT(estimate_cartesian_accel(d, Twist::Zero(), Wrench::Zero()).norm(), 1e-15);

  const auto unit = delta_inertia(Inertia6::checked(2.0, Mat3(2.0 * Mat3::Identity())),
                                  Inertia6::checked(1.0, Mat3::Identity()));
  const Twist acc =
      estimate_cartesian_accel(unit, Twist::Zero(), Wrench(Vec3(1, 0, 0), Vec3::Zero()));
  EXPECT_LT((acc.vec6() - (Vec6() << 1, 0, 0, 0, 0, 0).finished()).norm(), 1e-14);
}

TEST(EstimateCartesianAccel, RecoversFlightAccelerationFromSensorPath) {
  // For a true flight-spacecraft state generating F_sg through the test
  // dynamics with matched states, nu_dot* equals the flight's true nu_dot.
  const RigidSpacecraft flight{flight_inertia(), "flight"};
  const Inertia6 test = test_inertia();
  const auto d = delta_inertia(flight.inertia, test);
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Twist nu(Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)));
    const Wrench f_ext = random_wrench(rng, 20.0);
    const Twist nu_dot_true = rigid_forward_dynamics(flight, nu, f_ext);
    // independent sensor path: F_sg = F_ext - M_m nu_dot - h_m
    const Wrench f_sg = Wrench::from_vec6(f_ext.vec6() - test.apply(nu_dot_true.vec6()) -
                                          gyric_term(test, nu).vec6());
    const Twist nu_dot_est = estimate_cartesian_accel(d, nu, f_sg);
    EXPECT_LT((nu_dot_est - nu_dot_true).norm(), 1e-9);
  }
}

TEST(EstimateCartesianAccel, EstimatorIdentityHolds) {
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(8);
  for (int i = 0; i < 100; ++i) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Twist nu(Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)));
    const Wrench f_sg = random_wrench(rng);
    const Twist nu_dot = estimate_cartesian_accel(d, nu, f_sg);
    const Vec6 residual =
        d.matrix6() * nu_dot.vec6() + h_delta(d, nu) - f_sg.vec6();
    EXPECT_LT(residual.norm(), 1e-11);
  }
}

TEST(EstimateJointAccel, RestWithZeroWrenchGivesZero) {
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(9);
  const ManipulatorState st =
      compute_state(model, att, random_q(rng), Eigen::VectorXd::Zero(6));
  EXPECT_LT(estimate_joint_accel(st, d, Wrench::Zero()).norm(), 1e-12);
}

TEST(EstimateJointAccel, DefinitionalRoundTrip) {
  // J qdd* + J_dot qd == nu_dot* identically.
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(10);
  for (int i = 0; i < 50; ++i) {
    const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
    const Wrench f_sg = random_wrench(rng);
    const Eigen::VectorXd qdd_star = estimate_joint_accel(st, d, f_sg);
    const Twist nu_dot_star = estimate_cartesian_accel(d, st.payload_twist(), f_sg);
    EXPECT_LT((st.j * qdd_star + st.j_dot * st.qd - nu_dot_star.vec6()).norm(), 1e-10);
  }
}

TEST(EstimateJointAccel, NMatrixReproducesBiasTwoWays) {
  // N qd == M_D^-1 h_D(nu) for nu = J qd.
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(11);
  for (int i = 0; i < 50; ++i) {
    const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
    const Vec6 via_n = n_matrix(st, d) * st.qd;
    const Vec6 via_h = d.solve(h_delta(d, st.payload_twist()));
    EXPECT_LT((via_n - via_h).norm(), 1e-11);
  }
}

TEST(EstimateExternalForce, PerfectTrackingRecoversTruth) {
  // With the payload actually accelerating like the flight spacecraft
  // (qdd error zero), F_ext* = F_ext exactly.
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const RigidSpacecraft flight{flight_inertia(), "flight"};
  const auto d = delta_inertia(flight.inertia, att.payload.inertia);
  std::mt19937 rng(12);
  const ManipulatorState st =
      compute_state(model, att, random_q(rng), Eigen::VectorXd::Zero(6));
  for (int i = 0; i < 20; ++i) {
    const Wrench f_ext = random_wrench(rng, 10.0);
    // sensor path with the true (flight-equivalent) acceleration at rest
    const Twist nu_dot_true = rigid_forward_dynamics(flight, Twist::Zero(), f_ext);
    const Wrench f_sg = Wrench::from_vec6(
        f_ext.vec6() - att.payload.inertia.apply(nu_dot_true.vec6()));
    const Wrench f_est = estimate_external_force(st, att, d, f_sg);
    EXPECT_LT((f_est - f_ext).norm(), 1e-10);
  }
}

TEST(EstimateExternalForce, ErrorEqualsPayloadTimesAccelerationError) {
  // F_ext - F_ext* = -M_m J (qdd* - qdd) for any tracking mismatch.
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(19);
  for (int i = 0; i < 50; ++i) {
    const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
    const Twist nu = st.payload_twist();
    const Wrench f_ext = random_wrench(rng, 10.0);
    const Eigen::VectorXd qdd_actual = random_qd(rng, 2.0);
    const Twist nu_dot = Twist::from_vec6(st.j * qdd_actual + st.j_dot * st.qd);
    const Wrench f_sg =
        Wrench::from_vec6(f_ext.vec6() - att.payload.inertia.apply(nu_dot.vec6()) -
                          gyric_term(att.payload.inertia, nu).vec6());
    const Wrench f_est = estimate_external_force(st, att, d, f_sg);
    const Eigen::VectorXd qdd_star = estimate_joint_accel(st, d, f_sg);
    const Vec6 expected_error =
        -att.payload.inertia.apply(st.j * (qdd_star - qdd_actual));
    EXPECT_LT(((f_ext - f_est).vec6() - expected_error).norm(),
              1e-9 * std::max(1.0, expected_error.norm()));
  }
}

TEST(EstimateExternalForce, VanishingPayloadLimit) {
  const auto model = ManipulatorModel::elbow6r();
  PayloadAttachment tiny{
      RigidSpacecraft{Inertia6::checked(1e-8, Mat3(1e-10 * Mat3::Identity())), "tiny"},
      Vec3(0, 0, 0.25)};
  const auto d = delta_inertia(flight_inertia(), tiny.payload.inertia);
  std::mt19937 rng(13);
  const ManipulatorState st = compute_state(model, tiny, random_q(rng), random_qd(rng));
  const Wrench f_sg = random_wrench(rng);
  const Wrench f_est = estimate_external_force(st, tiny, d, f_sg);
  EXPECT_LT((f_est - f_sg).norm(), 1e-6);
}

TEST(ControlTorque, GroupedFormMatchesDirectInverseDynamicsForm) {
  // The published grouped torque law equals M_t qdd* + h_t - J' F_ext* + M_t PD
  // with qdd* and F_ext* substituted, at random states.
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  const EmulationGains gains{4.0, 4.0};
  std::mt19937 rng(14);
  for (int i = 0; i < 50; ++i) {
    const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
    const Eigen::VectorXd q_ref = st.q + 0.01 * random_qd(rng);
    const Eigen::VectorXd qd_ref = st.qd + 0.01 * random_qd(rng);
    const Wrench f_sg = random_wrench(rng, 50.0);

    const Eigen::VectorXd tau_grouped =
        torque_eq_grouped(model, st, att, d, gains, q_ref, qd_ref, f_sg);

    const Eigen::VectorXd qdd_star = estimate_joint_accel(st, d, f_sg);
    const Wrench f_ext_star = estimate_external_force(st, att, d, f_sg);
    const CombinedDynamics comb = combined_dynamics(model, att, st);
    const Eigen::VectorXd tau_direct =
        comb.m_t * qdd_star + comb.h_t - st.j.transpose() * f_ext_star.vec6() +
        comb.m_t * (gains.kd * (qd_ref - st.qd) + gains.kp * (q_ref - st.q));

    EXPECT_LT((tau_grouped - tau_direct).norm(),
              1e-9 * std::max(1.0, tau_direct.norm()));

    const Eigen::VectorXd tau_estimate =
        torque_from_estimate(model, st, att, gains, q_ref, qd_ref, qdd_star, f_sg);
    EXPECT_LT((tau_grouped - tau_estimate).norm(),
              1e-9 * std::max(1.0, tau_direct.norm()));
  }
}

TEST(ControlTorque, ForceFeedbackVanishesWhenCartesianInertiaMatchesDelta) {
  // Stage with M_Cr = M_D (i.e. M_s = M_Cr + M_m): the force term is zero.
  Vec6 stage_diag;
  stage_diag << 50, 50, 50, 20, 25, 30;
  const auto stage = ManipulatorModel::cartesian_stage(stage_diag);
  const Inertia6 test = Inertia6::checked(30.0, Vec3(12, 11, 10).asDiagonal());
  const Inertia6 flight = Inertia6::checked(80.0, Vec3(32, 36, 40).asDiagonal());
  const PayloadAttachment att{RigidSpacecraft{test, "test"}, Vec3::Zero()};
  const auto d = delta_inertia(flight, test);
  EXPECT_LT((d.matrix6() - Mat6(stage_diag.asDiagonal())).norm(), 1e-12);

  const EmulationGains gains{2.0, 3.0};
  std::mt19937 rng(15);
  for (int i = 0; i < 100; ++i) {
    const ManipulatorState st = compute_state(stage, att, random_q(rng), random_qd(rng));
    const Wrench f_sg = random_wrench(rng, 20.0);
    const FeedbackDecomposition fb = feedback_decomposition(stage, st, att, d, gains, f_sg);
    EXPECT_LT(fb.force_part.norm(), 1e-12);
  }
}

TEST(ControlTorque, StaticGravityHold) {
  // F_sg = 0, qd = 0, refs at the plant state: tau reduces to the full
  // gravity hold h_r - m g Jv' R' k (= h_t at rest).
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  const EmulationGains gains{4.0, 4.0};
  std::mt19937 rng(16);
  const Eigen::VectorXd q = random_q(rng);
  const ManipulatorState st = compute_state(model, att, q, Eigen::VectorXd::Zero(6));
  const Eigen::VectorXd tau =
      torque_eq_grouped(model, st, att, d, gains, q, Eigen::VectorXd::Zero(6), Wrench::Zero());
  const CombinedDynamics comb = combined_dynamics(model, att, st);
  EXPECT_LT((tau - comb.h_t).norm(), 1e-10 * std::max(1.0, comb.h_t.norm()));
}

TEST(FeedbackDecomposition, ZeroWrenchZeroForcePart) {
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  std::mt19937 rng(17);
  const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
  const FeedbackDecomposition fb =
      feedback_decomposition(model, st, att, d, {2, 2}, Wrench::Zero());
  EXPECT_LT(fb.force_part.norm(), 1e-15);
}

TEST(FeedbackDecomposition, PartsSumToSteadyStateTorqueAndScaleLinearly) {
  const auto model = ManipulatorModel::elbow6r();
  const auto att = attachment();
  const auto d = delta_inertia(flight_inertia(), test_inertia());
  const EmulationGains gains{3.0, 2.0};
  std::mt19937 rng(18);
  for (int i = 0; i < 20; ++i) {
    const ManipulatorState st = compute_state(model, att, random_q(rng), random_qd(rng));
    const Wrench f_sg = random_wrench(rng, 30.0);
    const FeedbackDecomposition fb = feedback_decomposition(model, st, att, d, gains, f_sg);
    const Eigen::VectorXd tau =
        torque_eq_grouped(model, st, att, d, gains, st.q, st.qd, f_sg);
    EXPECT_LT((fb.force_part + fb.motion_part - tau).norm(), 1e-9 * std::max(1.0, tau.norm()));

    const FeedbackDecomposition fb2 =
        feedback_decomposition(model, st, att, d, gains, f_sg * 2.0);
    EXPECT_LT((fb2.force_part - 2.0 * fb.force_part).norm(),
              1e-10 * std::max(1.0, fb.force_part.norm()));
  }
}

TEST(ControllerState, TrapezoidalIntegrationIsSecondOrder) {
  // Integrating qdd*(t) = cos(t) must reproduce qd_ref = sin(t) to O(h^2).
  ControllerState ctrl = ControllerState::init(Eigen::VectorXd::Zero(6),
                                               Eigen::VectorXd::Zero(6));
  const double h = 1e-3;
  ctrl.last_qdd_star = Eigen::VectorXd::Constant(6, 1.0);  // cos(0)
  for (int k = 1; k <= 1000; ++k) {
    ctrl.advance(Eigen::VectorXd::Constant(6, std::cos(k * h)), h);
  }
  EXPECT_NEAR(ctrl.qd_ref(0), std::sin(1.0), 1e-6);
  EXPECT_NEAR(ctrl.q_ref(0), 1.0 - std::cos(1.0), 1e-5);
}

TEST(GainSuggestion, RespectsStabilityThreshold) {
  EXPECT_NEAR(stability_alpha({1.0, 1.0}), 0.08944271909999159, 1e-12);
  // infeasible beyond the global maximum 1/(6 sqrt 3)
  EXPECT_FALSE(suggest_gains(0.2).feasible);

  const GainSuggestion s = suggest_gains(0.01);
  ASSERT_TRUE(s.feasible);
  EXPECT_GE(s.alpha, 0.01);
  EXPECT_GT(s.gains.kp, 1.0);
  // stiffest kp on the ridge: slightly larger kp must violate the target
  const EmulationGains harder{s.gains.kp * 1.01, (s.gains.kp * 1.01 + 1.0) / std::sqrt(2.0)};
  EXPECT_LT(stability_alpha(harder), 0.01 * 1.05);
}
