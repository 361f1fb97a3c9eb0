#pragma once

// Closed-loop scenario execution.
//
// Ideal-continuous mode: the commanded torque depends on the compensated
// wrench F_sg, which through the test-spacecraft dynamics is affine in the
// joint acceleration - an algebraic loop. Here it is resolved exactly: with
// F_sg = fbar - K qdd and tau = C_f F_sg + tau_rest, the plant equation
// M_t qdd + h_t = tau + J' F_ext collapses to a linear solve
//
//   (M_t + C_f K) qdd = C_f fbar + tau_rest + J' F_ext - h_t
//
// evaluated inside every RK4 stage, with the controller's reference
// integrals carried as additional continuous states. Noise and quantization
// are off in this mode by construction.
//
// Sampled mode: the sensor is sampled at the control period; the measurement
// taken at t_k reflects the torque held over the previous period, and the
// control law at t_k additionally consumes the measurement taken at t_{k-1},
// so the loop is causal. The plant integrates at dt with zero-order-hold
// torque; simulated flexural states advance per control period with the
// measured wrench frozen.
//
// run_with_oracle integrates the free-floating flight spacecraft from the
// same initial pose/twist under the same thruster schedule and reports the
// emulation defect.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "zgem/controller.hpp"
#include "zgem/flexible.hpp"
#include "zgem/logging.hpp"
#include "zgem/manipulator.hpp"
#include "zgem/scenario.hpp"
#include "zgem/sensor.hpp"
#include "zgem/spacecraft.hpp"

namespace zgem {

struct CompareOutput {
  TrajectoryLog trajectory;
  TrajectoryLog oracle;
  FidelityReport fidelity;
};

/// Everything the loop resolves at one instant; logged per step and exposed
/// through EmulationSim::probe_ideal for residual checks.
struct StepDiagnostics {
  Twist nu;
  Twist nu_dot_star;
  Wrench f_s;
  Wrench f_sg;
  Wrench f_ext_star;
  Wrench f_ext;
  Eigen::VectorXd tau;
  Eigen::VectorXd qdd;
  Eigen::VectorXd qdd_star;
  double delta_norm = 0.0;
};

namespace detail {

inline std::vector<std::string> trajectory_columns(int n_flex) {
  std::vector<std::string> cols = {"t"};
  auto add6 = [&cols](const std::string& base, const char* const (&suffix)[6]) {
    for (int i = 0; i < 6; ++i) cols.push_back(base + suffix[i]);
  };
  static const char* const kJoint[6] = {"1", "2", "3", "4", "5", "6"};
  static const char* const kTwist[6] = {"_vx", "_vy", "_vz", "_wx", "_wy", "_wz"};
  static const char* const kWrench[6] = {"_fx", "_fy", "_fz", "_nx", "_ny", "_nz"};
  add6("q", kJoint);
  add6("qd", kJoint);
  add6("nu", kTwist);
  add6("nudstar", kTwist);
  add6("fs", kWrench);
  add6("fsg", kWrench);
  add6("festar", kWrench);
  add6("fext", kWrench);
  add6("tau", kJoint);
  add6("qtilde", kJoint);
  add6("qdtilde", kJoint);
  cols.push_back("delta_norm");
  for (int i = 1; i <= n_flex; ++i) cols.push_back("xi" + std::to_string(i));
  for (int i = 1; i <= n_flex; ++i) cols.push_back("xid" + std::to_string(i));
  return cols;
}

inline std::vector<std::string> oracle_columns(int n_flex) {
  std::vector<std::string> cols = {"t",     "px",    "py",    "pz",    "qw",
                                   "qx",    "qy",    "qz",    "nu_vx", "nu_vy",
                                   "nu_vz", "nu_wx", "nu_wy", "nu_wz"};
  for (int i = 1; i <= n_flex; ++i) cols.push_back("xi" + std::to_string(i));
  for (int i = 1; i <= n_flex; ++i) cols.push_back("xid" + std::to_string(i));
  return cols;
}

}  // namespace detail

class EmulationSim {
 public:
  explicit EmulationSim(Scenario scenario) : sc_(std::move(scenario)), sensor_(sc_.sensor) {
    sc_.validate();
    if (sc_.manipulator.kind == ManipulatorKind::kCartesianStage) {
      throw ValidationError("bad-scenario",
                            "the Cartesian stage model is analysis-only and cannot be simulated");
    }
    steps_ = checked_steps(sc_.duration, sc_.dt, "duration/dt");
    if (sc_.mode == SimMode::kSampled) {
      substeps_ = checked_steps(sc_.control_period, sc_.dt, "control_period/dt");
      ctrl_steps_ = checked_steps(sc_.duration, sc_.control_period, "duration/control_period");
    }
    delta_ = DeltaInertia::checked(sc_.flight.inertia, sc_.attachment.payload.inertia);
    if (sc_.is_flexible()) {
      flex_delta_ = FlexDeltaInertia::checked(*sc_.flexible, sc_.attachment.payload.inertia);
      n_flex_ = sc_.flexible->n_modes();
    }
  }

  const Scenario& scenario() const { return sc_; }

  TrajectoryLog run() {
    return sc_.mode == SimMode::kIdealContinuous ? run_ideal() : run_sampled();
  }

 private:
  static long checked_steps(double total, double step, const std::string& what) {
    const double ratio = total / step;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9) {
      throw ValidationError("bad-scenario", what + " must be a positive integer (" +
                                                std::to_string(ratio) + ")");
    }
    return n;
  }

  // ---- shared pieces ------------------------------------------------------

  /// Linear map S and offset s0 with nu_dot* = S F_sg + s0 at the given state.
  /// A flexible model with exactly zero cross inertia takes the rigid branch:
  /// the coupling terms are identically zero and M_D_bar = M_D, so this is an
  /// exact algebraic specialization (and keeps the reduction bit-identical).
  std::pair<Mat6, Vec6> estimator_affine(const Twist& nu, const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& xi_dot) const {
    if (!sc_.is_flexible() || sc_.flexible->m_sf().isZero(0.0)) {
      return {delta_.inverse6(), -delta_.solve(h_delta(delta_, nu))};
    }
    FlexState fs;
    fs.xi = xi;
    fs.xi_dot = xi_dot;
    const Eigen::VectorXd h_sf = sc_.flexible->flex_bias(fs);
    const Vec6 s0 = flex_delta_.solve_bar(
        Vec6(-h_delta(flex_delta_.rigid(), nu) + sc_.flexible->m_sf() * flex_delta_.solve_mf(h_sf)));
    return {flex_delta_.inverse_bar(), s0};
  }

  Eigen::VectorXd flex_accel(const Twist& nu_dot_star, const Eigen::VectorXd& xi,
                             const Eigen::VectorXd& xi_dot) const {
    FlexState fs;
    fs.xi = xi;
    fs.xi_dot = xi_dot;
    return -flex_delta_.solve_mf(sc_.flexible->m_sf().transpose() * nu_dot_star.vec6() +
                                 sc_.flexible->flex_bias(fs));
  }

  double delta_norm_of(const Eigen::VectorXd& qdd_err, const ManipulatorState& st) const {
    const Vec6 j_qdd = st.j * qdd_err;
    return sc_.is_flexible() ? (flex_delta_.m_bar() * j_qdd).norm()
                             : (delta_.matrix6() * j_qdd).norm();
  }

  Eigen::VectorXd make_row(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                           const Eigen::VectorXd& q_ref, const Eigen::VectorXd& qd_ref,
                           const Eigen::VectorXd& xi, const Eigen::VectorXd& xi_dot,
                           const StepDiagnostics& diag) const {
    Eigen::VectorXd row(62 + 2 * n_flex_);
    row << t, q, qd, diag.nu.vec6(), diag.nu_dot_star.vec6(), diag.f_s.vec6(), diag.f_sg.vec6(),
        diag.f_ext_star.vec6(), diag.f_ext.vec6(), diag.tau, (q_ref - q), (qd_ref - qd),
        diag.delta_norm, xi, xi_dot;
    return row;
  }

  // ---- ideal-continuous mode ----------------------------------------------

  // State layout: [q(6) qd(6) q_ref(6) qd_ref(6) xi(n) xi_dot(n)].
  Eigen::VectorXd ideal_derivative(double t, const Eigen::VectorXd& y,
                                   StepDiagnostics* diag) const {
    const Eigen::VectorXd q = y.segment<6>(0);
    const Eigen::VectorXd qd = y.segment<6>(6);
    const Eigen::VectorXd q_ref = y.segment<6>(12);
    const Eigen::VectorXd qd_ref = y.segment<6>(18);
    const Eigen::VectorXd xi = y.segment(24, n_flex_);
    const Eigen::VectorXd xi_dot = y.segment(24 + n_flex_, n_flex_);

    const ManipulatorState st =
        compute_state(sc_.manipulator, sc_.attachment, q, qd);
    require_invertible_jacobian(st, sc_.manipulator.jacobian_condition_limit);

    const Wrench f_ext = sc_.external_wrench(t);
    const Twist nu = st.payload_twist();
    const Inertia6& m_m = sc_.attachment.payload.inertia;
    const Wrench h_m = gyric_term(m_m, nu);
    const Wrench f_g = gravity_wrench(m_m.mass(), sc_.manipulator.gravity_dir, st.r);

    // Compensated wrench as seen by the controller, affine in qdd:
    //   F_sg = fbar - K qdd
    // with G = T(c_hat) T(c)^-1 capturing any calibration mismatch.
    const Mat6 g_mat =
        sensor_transform(sc_.calibration.com) * sensor_transform(-sc_.attachment.com_offset);
    const Vec6 fbar =
        g_mat * (f_g.vec6() + f_ext.vec6() - h_m.vec6() - m_m.apply(st.j_dot * qd)) -
        apply_sensor_transform(sc_.calibration.com, sc_.calibration.offset).vec6() -
        gravity_wrench(sc_.calibration.mass, sc_.calibration.gravity_dir, st.r).vec6();
    const Mat6 k_mat = g_mat * m_m.matrix6() * st.j;

    const auto [s_mat, s0] = estimator_affine(nu, xi, xi_dot);

    const CombinedDynamics comb = combined_dynamics(sc_.manipulator, sc_.attachment, st);
    const Eigen::PartialPivLU<Mat6> lu_jt{Mat6(st.j.transpose())};
    const Mat6 mr_jinv = lu_jt.solve(st.m_r).transpose();  // M_r J^-1
    const Mat6 c_f = mr_jinv * s_mat - st.j.transpose();

    const Eigen::VectorXd pd =
        comb.m_t * (sc_.gains.kd * (qd_ref - qd) + sc_.gains.kp * (q_ref - q));
    const Eigen::VectorXd tau_rest =
        mr_jinv * (s0 - st.j_dot * qd) + st.h_r -
        m_m.mass() * kGravity *
            (st.jv().transpose() * (st.r.transpose() * sc_.manipulator.gravity_dir)) +
        pd;

    const Mat6 a_cl = comb.m_t + c_f * k_mat;
    const Eigen::PartialPivLU<Mat6> lu_a(a_cl);
    if (lu_a.rcond() < 1e-14) {
      throw SimulationError("singular-closed-loop-matrix",
                            "closed-loop matrix is numerically singular (rcond = " +
                                std::to_string(lu_a.rcond()) + ")");
    }
    const Eigen::VectorXd qdd =
        lu_a.solve(c_f * fbar + tau_rest + st.j.transpose() * f_ext.vec6() - comb.h_t);

    const Vec6 f_sg = fbar - k_mat * qdd;
    const Vec6 nu_dot_star6 = s_mat * f_sg + s0;
    const Eigen::VectorXd qdd_star =
        Eigen::PartialPivLU<Mat6>(Mat6(st.j)).solve(nu_dot_star6 - st.j_dot * qd);

    Eigen::VectorXd dy(24 + 2 * n_flex_);
    dy.segment<6>(0) = qd;
    dy.segment<6>(6) = qdd;
    dy.segment<6>(12) = qd_ref;
    dy.segment<6>(18) = qdd_star;
    if (n_flex_ > 0) {
      dy.segment(24, n_flex_) = xi_dot;
      dy.segment(24 + n_flex_, n_flex_) = flex_accel(Twist::from_vec6(nu_dot_star6), xi, xi_dot);
    }

    if (diag != nullptr) {
      diag->nu = nu;
      diag->nu_dot_star = Twist::from_vec6(nu_dot_star6);
      const Twist nu_dot_true = Twist::from_vec6(st.j * qdd + st.j_dot * qd);
      diag->f_s = true_interaction_wrench(sc_.attachment, nu, nu_dot_true, st.r,
                                          sc_.manipulator.gravity_dir, f_ext);
      diag->f_sg = Wrench::from_vec6(f_sg);
      diag->f_ext_star = Wrench::from_vec6(f_sg + m_m.apply(nu_dot_star6) + h_m.vec6());
      diag->f_ext = f_ext;
      diag->tau = c_f * f_sg + tau_rest;
      diag->qdd = qdd;
      diag->qdd_star = qdd_star;
      diag->delta_norm = delta_norm_of(qdd_star - qdd, st);
    }
    return dy;
  }

  TrajectoryLog run_ideal() {
    TrajectoryLog log;
    log.columns = detail::trajectory_columns(n_flex_);

    Eigen::VectorXd y(24 + 2 * n_flex_);
    y.segment<6>(0) = sc_.q0;
    y.segment<6>(6) = sc_.qd0;
    y.segment<6>(12) = sc_.q0 + sc_.error_q;
    y.segment<6>(18) = sc_.qd0 + sc_.error_qd;
    y.segment(24, 2 * n_flex_).setZero();

    auto deriv = [this](double t, const Eigen::VectorXd& yy) {
      return ideal_derivative(t, yy, nullptr);
    };
    for (long k = 0; k <= steps_; ++k) {
      const double t = static_cast<double>(k) * sc_.dt;
      StepDiagnostics diag;
      ideal_derivative(t, y, &diag);
      log.rows.push_back(make_row(t, y.segment<6>(0), y.segment<6>(6), y.segment<6>(12),
                                  y.segment<6>(18), y.segment(24, n_flex_),
                                  y.segment(24 + n_flex_, n_flex_), diag));
      if (k < steps_) y = rk4_step(y, t, sc_.dt, deriv);
    }
    return log;
  }

  // ---- sampled mode --------------------------------------------------------

  Eigen::VectorXd plant_accel(const ManipulatorState& st, const Eigen::VectorXd& tau,
                              const Wrench& f_ext) const {
    const CombinedDynamics comb = combined_dynamics(sc_.manipulator, sc_.attachment, st);
    return Eigen::PartialPivLU<Eigen::MatrixXd>(comb.m_t)
        .solve(tau + st.j.transpose() * f_ext.vec6() - comb.h_t);
  }

  TrajectoryLog run_sampled() {
    TrajectoryLog log;
    log.columns = detail::trajectory_columns(n_flex_);

    Eigen::VectorXd q = sc_.q0, qd = sc_.qd0;
    ControllerState ctrl = ControllerState::init(sc_.q0 + sc_.error_q, sc_.qd0 + sc_.error_qd);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(n_flex_);
    Eigen::VectorXd xi_dot = Eigen::VectorXd::Zero(n_flex_);

    Eigen::VectorXd tau = Eigen::VectorXd::Zero(6);
    bool have_tau = false;
    Wrench f_sg_buffer;      // measurement taken one period ago
    bool have_buffer = false;
    StepDiagnostics diag;
    diag.tau = tau;
    diag.qdd = Eigen::VectorXd::Zero(6);
    diag.qdd_star = Eigen::VectorXd::Zero(6);

    for (long k = 0; k < ctrl_steps_; ++k) {
      const double t_k = static_cast<double>(k) * sc_.control_period;
      const ManipulatorState st = compute_state(sc_.manipulator, sc_.attachment, q, qd);
      require_invertible_jacobian(st, sc_.manipulator.jacobian_condition_limit);
      const Wrench f_ext_k = sc_.external_wrench(t_k);

      // Sensor sample at t_k under the torque held over the previous period.
      const Eigen::VectorXd qdd_meas =
          have_tau ? plant_accel(st, tau, f_ext_k) : Eigen::VectorXd::Zero(6);
      const Twist nu = st.payload_twist();
      const Twist nu_dot_meas = Twist::from_vec6(st.j * qdd_meas + st.j_dot * qd);
      const Wrench f_s_true = true_interaction_wrench(sc_.attachment, nu, nu_dot_meas, st.r,
                                                      sc_.manipulator.gravity_dir, f_ext_k);
      const SensorReading reading = sensor_.sample(f_s_true, t_k);
      const Wrench f_sg_meas = compensated_wrench(reading, sc_.calibration, st.r);

      const Wrench f_sg_used = have_buffer ? f_sg_buffer : f_sg_meas;
      f_sg_buffer = f_sg_meas;
      have_buffer = true;

      // Control update.
      Eigen::VectorXd qdd_star;
      if (sc_.is_flexible()) {
        FlexState fs;
        fs.xi = xi;
        fs.xi_dot = xi_dot;
        const FlexEstimate est =
            flexible_estimate(st, *sc_.flexible, flex_delta_, fs, f_sg_used,
                              sc_.manipulator.jacobian_condition_limit);
        qdd_star = est.qdd_star;
        ctrl.advance(qdd_star, sc_.control_period);
        ctrl.last_nu_dot_star = est.nu_dot_star;
        ctrl.last_f_ext_star = Wrench::from_vec6(
            f_sg_used.vec6() + sc_.attachment.payload.inertia.apply(est.nu_dot_star.vec6()) +
            gyric_term(sc_.attachment.payload.inertia, nu).vec6());
        tau = torque_from_estimate(sc_.manipulator, st, sc_.attachment, sc_.gains, ctrl.q_ref,
                                   ctrl.qd_ref, qdd_star, f_sg_used);
      } else {
        tau = control_torque(sc_.manipulator, st, sc_.attachment, delta_, sc_.gains, ctrl,
                             f_sg_used, sc_.control_period,
                             sc_.manipulator.jacobian_condition_limit);
        qdd_star = ctrl.last_qdd_star;
      }
      have_tau = true;

      diag.nu = nu;
      diag.nu_dot_star = ctrl.last_nu_dot_star;
      diag.f_s = reading.f_s_raw;
      diag.f_sg = f_sg_used;
      diag.f_ext_star = ctrl.last_f_ext_star;
      diag.qdd_star = qdd_star;
      diag.tau = tau;

      // Simulated flexural states advance over the period with the used
      // wrench frozen (stage-varying xi, xi_dot).
      if (n_flex_ > 0) {
        Eigen::VectorXd yf(2 * n_flex_);
        yf << xi, xi_dot;
        auto flex_deriv = [&](double, const Eigen::VectorXd& yy) {
          Eigen::VectorXd dy(2 * n_flex_);
          const auto [s_mat, s0] = estimator_affine(nu, yy.head(n_flex_), yy.tail(n_flex_));
          const Vec6 nds = s_mat * f_sg_used.vec6() + s0;
          dy.head(n_flex_) = yy.tail(n_flex_);
          dy.tail(n_flex_) = flex_accel(Twist::from_vec6(nds), yy.head(n_flex_), yy.tail(n_flex_));
          return dy;
        };
        yf = rk4_step(yf, t_k, sc_.control_period, flex_deriv);
        xi = yf.head(n_flex_);
        xi_dot = yf.tail(n_flex_);
      }

      // Plant substeps with zero-order-hold torque.
      for (long s = 0; s < substeps_; ++s) {
        const double t = t_k + static_cast<double>(s) * sc_.dt;
        const ManipulatorState st_log = compute_state(sc_.manipulator, sc_.attachment, q, qd);
        const Wrench f_ext_t = sc_.external_wrench(t);
        const Eigen::VectorXd qdd_now = plant_accel(st_log, tau, f_ext_t);
        diag.nu = st_log.payload_twist();
        diag.f_ext = f_ext_t;
        diag.qdd = qdd_now;
        diag.delta_norm = delta_norm_of(diag.qdd_star - qdd_now, st_log);
        log.rows.push_back(make_row(t, q, qd, ctrl.q_ref, ctrl.qd_ref, xi, xi_dot, diag));

        Eigen::VectorXd yp(12);
        yp << q, qd;
        auto plant_deriv = [&](double tt, const Eigen::VectorXd& yy) {
          const ManipulatorState sst =
              compute_state(sc_.manipulator, sc_.attachment, yy.head<6>(), yy.tail<6>());
          Eigen::VectorXd dy(12);
          dy.head<6>() = yy.tail<6>();
          dy.tail<6>() = plant_accel(sst, tau, sc_.external_wrench(tt));
          return dy;
        };
        yp = rk4_step(yp, t, sc_.dt, plant_deriv);
        q = yp.head<6>();
        qd = yp.tail<6>();
      }
    }

    // Final row at t = duration with the last held controller values.
    const double t_end = static_cast<double>(ctrl_steps_) * sc_.control_period;
    const ManipulatorState st_end = compute_state(sc_.manipulator, sc_.attachment, q, qd);
    const Wrench f_ext_end = sc_.external_wrench(t_end);
    diag.nu = st_end.payload_twist();
    diag.f_ext = f_ext_end;
    diag.qdd = plant_accel(st_end, tau, f_ext_end);
    diag.delta_norm = delta_norm_of(diag.qdd_star - diag.qdd, st_end);
    log.rows.push_back(make_row(t_end, q, qd, ctrl.q_ref, ctrl.qd_ref, xi, xi_dot, diag));
    return log;
  }

  Scenario sc_;
  SensorStream sensor_;
  DeltaInertia delta_;
  FlexDeltaInertia flex_delta_;
  int n_flex_ = 0;
  long steps_ = 0;
  long substeps_ = 0;
  long ctrl_steps_ = 0;

  friend CompareOutput run_with_oracle(const Scenario& scenario);
};

inline TrajectoryLog simulate_scenario(const Scenario& scenario) {
  return EmulationSim(scenario).run();
}

/// Independent flight-spacecraft integration from the same initial payload
/// pose and twist, under the same thruster schedule, on the same time grid.
inline TrajectoryLog integrate_oracle(const Scenario& sc) {
  const long steps = std::lround(sc.duration / sc.dt);
  const ManipulatorState st0 =
      compute_state(sc.manipulator, sc.attachment, sc.q0, sc.qd0);

  RigidBodyState state;
  state.position = st0.c_pos;
  state.attitude = Eigen::Quaterniond(st0.r.matrix());
  state.nu = st0.payload_twist();
  FlexState flex = FlexState::zero(sc.is_flexible() ? sc.flexible->n_modes() : 0);

  auto f_ext = [&sc](double t) { return sc.external_wrench(t); };

  const int n_flex = sc.is_flexible() ? sc.flexible->n_modes() : 0;
  TrajectoryLog log;
  log.columns = detail::oracle_columns(n_flex);
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    Eigen::VectorXd row(14 + 2 * n_flex);
    row << t, state.position, state.attitude.w(), state.attitude.x(), state.attitude.y(),
        state.attitude.z(), state.nu.vec6(), flex.xi, flex.xi_dot;
    log.rows.push_back(row);
    if (k == steps) break;
    if (sc.is_flexible()) {
      std::tie(state, flex) = integrate_flexible_oracle(*sc.flexible, state, flex, t, sc.dt, f_ext);
    } else {
      state = integrate_rigid_oracle(sc.flight, state, t, sc.dt, f_ext);
    }
  }
  return log;
}

inline CompareOutput run_with_oracle(const Scenario& scenario) {
  CompareOutput out;
  out.trajectory = simulate_scenario(scenario);
  out.oracle = integrate_oracle(scenario);

  const int nu_traj = out.trajectory.column_index("nu_vx");
  const int nu_or = out.oracle.column_index("nu_vx");
  const int delta_idx = out.trajectory.column_index("delta_norm");
  const std::size_t n = std::min(out.trajectory.rows.size(), out.oracle.rows.size());
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd& tr = out.trajectory.rows[i];
    const Eigen::VectorXd& orr = out.oracle.rows[i];
    const double err = (tr.segment<6>(nu_traj) - orr.segment<6>(nu_or)).norm();
    out.fidelity.max_nu_error = std::max(out.fidelity.max_nu_error, err);
    out.fidelity.max_nu_oracle =
        std::max(out.fidelity.max_nu_oracle, orr.segment<6>(nu_or).norm());
    out.fidelity.max_delta_norm = std::max(out.fidelity.max_delta_norm, tr(delta_idx));
    sum_sq += err * err;
    if (i + 1 == n) out.fidelity.final_nu_error = err;
  }
  out.fidelity.rms_nu_error = std::sqrt(sum_sq / static_cast<double>(n));
  out.fidelity.relative_fidelity =
      out.fidelity.max_nu_error / std::max(out.fidelity.max_nu_oracle, 1e-300);
  return out;
}

}  // namespace zgem
