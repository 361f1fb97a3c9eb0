#pragma once

// The emulation control law. From the compensated interface wrench F_sg the
// controller estimates the acceleration the flight spacecraft would have,
//
//   M_D nu_dot* + h_D(nu) = F_sg,      M_D = diag{(m_s - m_m) I, I_Cs - I_Cm}
//
// maps it to joint space through q_ddot* = J^-1 (nu_dot* - J_dot qd), and
// commands the inverse-dynamics torque
//
//   tau = J'(M_Cr M_D^-1 - I) F_sg + h_r - M_r J^-1 (N + J_dot) qd
//         - m g Jv' R' k + M_t (K_d (qd_ref - qd) + K_p (q_ref - q))
//
// where (q_ref, qd_ref) are the running integrals of q_ddot*. The same torque
// can be grouped as  M_r q_ddot* + h_r - m g Jv' R' k - J' F_sg + M_t (PD),
// which is what the flexible extension feeds with its own q_ddot*; both
// groupings agree identically for the rigid estimator.

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "zgem/manipulator.hpp"
#include "zgem/sensor.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

struct EmulationGains {
  double kp = 1.0;  // 1/s^2
  double kd = 1.0;  // 1/s

  void validate() const {
    if (!(kp > 0.0) || !(kd > 0.0)) {
      throw ValidationError("bad-gains", "controller gains must be positive");
    }
  }
};

/// Generalized inertia difference between flight and test spacecraft. Must be
/// nonsingular: m_s != m_m and no zero eigenvalue of I_Cs - I_Cm.
class DeltaInertia {
 public:
  static DeltaInertia checked(const Inertia6& flight, const Inertia6& test,
                              double rel_tol = 1e-9) {
    DeltaInertia d;
    d.dm_ = flight.mass() - test.mass();
    d.di_ = flight.inertia() - test.inertia();

    const double mass_scale = std::max(flight.mass(), test.mass());
    if (std::abs(d.dm_) <= rel_tol * mass_scale) {
      throw ValidationError("singular-delta-inertia",
                            "flight and test spacecraft masses coincide (m_s - m_m = " +
                                std::to_string(d.dm_) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(d.di_);
    const double inertia_scale =
        std::max(flight.inertia().norm(), test.inertia().norm());
    for (int i = 0; i < 3; ++i) {
      if (std::abs(es.eigenvalues()(i)) <= rel_tol * inertia_scale) {
        throw ValidationError("singular-delta-inertia",
                              "I_Cs - I_Cm has a (near-)zero eigenvalue: " +
                                  std::to_string(es.eigenvalues()(i)));
      }
    }
    d.di_lu_.compute(d.di_);
    d.spectral_norm_ = std::max(std::abs(d.dm_), es.eigenvalues().cwiseAbs().maxCoeff());
    return d;
  }

  double dm() const { return dm_; }
  const Mat3& di() const { return di_; }

  Mat6 matrix6() const {
    Mat6 m = Mat6::Zero();
    m.block<3, 3>(0, 0) = dm_ * Mat3::Identity();
    m.block<3, 3>(3, 3) = di_;
    return m;
  }

  /// M_D^-1 x.
  Vec6 solve(const Vec6& x) const {
    Vec6 y;
    y.head<3>() = x.head<3>() / dm_;
    y.tail<3>() = di_lu_.solve(x.tail<3>());
    return y;
  }

  Mat6 inverse6() const {
    Mat6 m = Mat6::Zero();
    m.block<3, 3>(0, 0) = Mat3::Identity() / dm_;
    m.block<3, 3>(3, 3) = di_lu_.inverse();
    return m;
  }

  /// max |eigenvalue| of M_D (M_D may be indefinite).
  double spectral_norm() const { return spectral_norm_; }

 private:
  double dm_ = 0.0;
  Mat3 di_ = Mat3::Zero();
  Eigen::PartialPivLU<Mat3> di_lu_;
  double spectral_norm_ = 0.0;
};

inline DeltaInertia delta_inertia(const Inertia6& flight, const Inertia6& test) {
  return DeltaInertia::checked(flight, test);
}

/// h_D(nu) = ((m_s - m_m) w x v; w x (I_Cs - I_Cm) w).
inline Vec6 h_delta(const DeltaInertia& delta, const Twist& nu) {
  Vec6 h;
  h.head<3>() = delta.dm() * nu.angular.cross(nu.linear);
  h.tail<3>() = nu.angular.cross(delta.di() * nu.angular);
  return h;
}

/// nu_dot* = M_D^-1 (F_sg - h_D(nu)).
inline Twist estimate_cartesian_accel(const DeltaInertia& delta, const Twist& nu,
                                      const Wrench& f_sg) {
  return Twist::from_vec6(delta.solve(f_sg.vec6() - h_delta(delta, nu)));
}

/// N(q, qd) with M_D^-1 h_D = N qd:
///   N = [ [w x] J_v ; (I_Cs - I_Cm)^-1 [w x] (I_Cs - I_Cm) J_w ],  w = J_w qd.
inline Eigen::MatrixXd n_matrix(const ManipulatorState& st, const DeltaInertia& delta) {
  const Vec3 w = st.jw() * st.qd;
  const Mat3 wx = skew(w);
  Eigen::MatrixXd n(6, st.j.cols());
  n.topRows(3) = wx * st.jv();
  Eigen::PartialPivLU<Mat3> di_lu(delta.di());
  n.bottomRows(3) = di_lu.solve(wx * (delta.di() * st.jw()));
  return n;
}

/// q_ddot* = J^-1 M_D^-1 F_sg - J^-1 (N + J_dot) qd.
inline Eigen::VectorXd estimate_joint_accel(const ManipulatorState& st, const DeltaInertia& delta,
                                            const Wrench& f_sg, double condition_limit = 1e6) {
  require_invertible_jacobian(st, condition_limit);
  const Vec6 rhs = delta.solve(f_sg.vec6()) - (n_matrix(st, delta) + st.j_dot) * st.qd;
  return Eigen::PartialPivLU<Mat6>(Mat6(st.j)).solve(rhs);
}

/// F_ext* = (I + M_m M_D^-1) F_sg + h_m - M_m N qd.
inline Wrench estimate_external_force(const ManipulatorState& st,
                                      const PayloadAttachment& attachment,
                                      const DeltaInertia& delta, const Wrench& f_sg) {
  const Inertia6& m_m = attachment.payload.inertia;
  const Twist nu = st.payload_twist();
  const Vec6 est = f_sg.vec6() + m_m.apply(delta.solve(f_sg.vec6())) +
                   gyric_term(m_m, nu).vec6() - m_m.apply(n_matrix(st, delta) * st.qd);
  return Wrench::from_vec6(est);
}

/// Internal reference trajectory: running integrals of q_ddot*, advanced with
/// the trapezoidal rule at the control period. Initialized at the plant state
/// so the initial tracking error is zero.
struct ControllerState {
  Eigen::VectorXd q_ref;
  Eigen::VectorXd qd_ref;
  Eigen::VectorXd last_qdd_star;
  Twist last_nu_dot_star;
  Wrench last_f_ext_star;

  static ControllerState init(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    ControllerState s;
    s.q_ref = q;
    s.qd_ref = qd;
    s.last_qdd_star = Eigen::VectorXd::Zero(q.size());
    return s;
  }

  void advance(const Eigen::VectorXd& qdd_star, double dt) {
    const Eigen::VectorXd qd_ref_new = qd_ref + 0.5 * dt * (last_qdd_star + qdd_star);
    q_ref += 0.5 * dt * (qd_ref + qd_ref_new);
    qd_ref = qd_ref_new;
    last_qdd_star = qdd_star;
  }
};

/// The torque law evaluated against explicit reference integrals.
inline Eigen::VectorXd torque_eq_grouped(const ManipulatorModel& model,
                                         const ManipulatorState& st,
                                         const PayloadAttachment& attachment,
                                         const DeltaInertia& delta, const EmulationGains& gains,
                                         const Eigen::VectorXd& q_ref,
                                         const Eigen::VectorXd& qd_ref, const Wrench& f_sg,
                                         double condition_limit = 1e6) {
  require_invertible_jacobian(st, condition_limit);
  const Mat6 m_cr = cartesian_inertia(st, condition_limit);
  const CombinedDynamics comb = combined_dynamics(model, attachment, st);
  const Eigen::PartialPivLU<Mat6> lu_j{Mat6(st.j)};

  const Vec6 force_term6 = m_cr * delta.solve(f_sg.vec6()) - f_sg.vec6();
  const Eigen::VectorXd pd =
      comb.m_t * (gains.kd * (qd_ref - st.qd) + gains.kp * (q_ref - st.q));

  return st.j.transpose() * force_term6 + st.h_r -
         st.m_r * lu_j.solve((n_matrix(st, delta) + st.j_dot) * st.qd) -
         attachment.payload.inertia.mass() * kGravity *
             (st.jv().transpose() * (st.r.transpose() * model.gravity_dir)) +
         pd;
}

/// Equivalent grouping tau = M_r q_ddot* + h_r - m g Jv' R' k - J' F_sg + M_t (PD),
/// valid for any acceleration estimate (rigid or flexible).
inline Eigen::VectorXd torque_from_estimate(const ManipulatorModel& model,
                                            const ManipulatorState& st,
                                            const PayloadAttachment& attachment,
                                            const EmulationGains& gains,
                                            const Eigen::VectorXd& q_ref,
                                            const Eigen::VectorXd& qd_ref,
                                            const Eigen::VectorXd& qdd_star, const Wrench& f_sg) {
  const CombinedDynamics comb = combined_dynamics(model, attachment, st);
  const Eigen::VectorXd pd =
      comb.m_t * (gains.kd * (qd_ref - st.qd) + gains.kp * (q_ref - st.q));
  return st.m_r * qdd_star + st.h_r -
         attachment.payload.inertia.mass() * kGravity *
             (st.jv().transpose() * (st.r.transpose() * model.gravity_dir)) -
         st.j.transpose() * f_sg.vec6() + pd;
}

/// One sampled-mode controller update: estimates q_ddot*, advances the
/// reference integrators over the control period and returns the commanded
/// torque. Also refreshes the stored estimates for logging.
inline Eigen::VectorXd control_torque(const ManipulatorModel& model, const ManipulatorState& st,
                                      const PayloadAttachment& attachment,
                                      const DeltaInertia& delta, const EmulationGains& gains,
                                      ControllerState& ctrl, const Wrench& f_sg,
                                      double control_period, double condition_limit = 1e6) {
  const Eigen::VectorXd qdd_star = estimate_joint_accel(st, delta, f_sg, condition_limit);
  ctrl.advance(qdd_star, control_period);
  ctrl.last_nu_dot_star = estimate_cartesian_accel(delta, st.payload_twist(), f_sg);
  ctrl.last_f_ext_star = estimate_external_force(st, attachment, delta, f_sg);
  return torque_eq_grouped(model, st, attachment, delta, gains, ctrl.q_ref, ctrl.qd_ref, f_sg,
                           condition_limit);
}

/// Splits the steady-state torque into the force feedback J'(M_Cr M_D^-1 - I) F_sg
/// and the motion-dependent remainder eta(q, qd).
struct FeedbackDecomposition {
  Eigen::VectorXd force_part;
  Eigen::VectorXd motion_part;
};

inline FeedbackDecomposition feedback_decomposition(const ManipulatorModel& model,
                                                    const ManipulatorState& st,
                                                    const PayloadAttachment& attachment,
                                                    const DeltaInertia& delta,
                                                    const EmulationGains& gains, const Wrench& f_sg,
                                                    double condition_limit = 1e6) {
  const Mat6 m_cr = cartesian_inertia(st, condition_limit);
  FeedbackDecomposition out;
  out.force_part = st.j.transpose() * (m_cr * delta.solve(f_sg.vec6()) - f_sg.vec6());
  out.motion_part = torque_eq_grouped(model, st, attachment, delta, gains, st.q, st.qd, f_sg,
                                      condition_limit) -
                    out.force_part;
  return out;
}

/// Gain selection: the stability threshold alpha(kp, kd) = kp kd / ((kp+1)^2
/// + kd^2)^{3/2} is maximized along kd = (kp+1)/sqrt(2) at kp = 1 with value
/// 1/(6 sqrt(3)). The helper picks the stiffest kp on that ridge that still
/// satisfies alpha >= q_norm * margin.
struct GainSuggestion {
  bool feasible = false;
  EmulationGains gains;
  double alpha = 0.0;
};

inline double stability_alpha(const EmulationGains& g) {
  const double d = (g.kp + 1.0) * (g.kp + 1.0) + g.kd * g.kd;
  return g.kp * g.kd / std::pow(d, 1.5);
}

inline GainSuggestion suggest_gains(double q_norm, double margin = 1.05) {
  auto ridge_alpha = [](double kp) {
    const EmulationGains g{kp, (kp + 1.0) / std::sqrt(2.0)};
    return stability_alpha(g);
  };
  const double target = q_norm * margin;
  GainSuggestion out;
  if (ridge_alpha(1.0) < target) return out;  // infeasible even at the optimum

  double lo = 1.0, hi = 1.0;
  while (ridge_alpha(hi) >= target && hi < 1e9) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ridge_alpha(mid) >= target ? lo : hi) = mid;
  }
  out.feasible = true;
  out.gains = {lo, (lo + 1.0) / std::sqrt(2.0)};
  out.alpha = stability_alpha(out.gains);
  return out;
}

}  // namespace zgem
