#pragma once

// Free-floating spacecraft models. The rigid model
//
//   M_s nu_dot + h_s(nu) = F_ext,   M_s = diag{m_s I, I_Cs}
//
// and its flexible extension with modal coordinates xi,
//
//   [ M_s   M_sf ] [ nu_dot  ]   [ h_sr ]   [ F_ext ]
//   [ M_sf' M_f  ] [ xi_ddot ] + [ h_sf ] = [   0   ]
//
// are integrated here with fixed-step RK4. These integrations are the
// reference ("oracle") trajectories the emulation loop is judged against.
//
// Convention for the flexible nonlinear vectors: h_sr is the rigid gyric term
// of the carrier body and h_sf = D_f xi_dot + K_f xi carries the modal
// stiffness and damping, with no flexural-rigid velocity coupling. Richer
// couplings can be substituted by editing flex_bias() below.

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "zgem/error.hpp"
#include "zgem/rk4.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

struct RigidSpacecraft {
  Inertia6 inertia;
  std::string name;
};

/// Gyric (Coriolis/centrifugal) wrench h(nu) = (m w x v; w x I_C w), body frame.
inline Wrench gyric_term(const Inertia6& inertia, const Twist& nu) {
  return {inertia.mass() * nu.angular.cross(nu.linear),
          nu.angular.cross(inertia.inertia() * nu.angular)};
}

/// nu_dot = M_s^-1 (F_ext - h_s(nu)).
inline Twist rigid_forward_dynamics(const RigidSpacecraft& sc, const Twist& nu, const Wrench& f_ext) {
  const Wrench h = gyric_term(sc.inertia, nu);
  return {(f_ext.force - h.force) / sc.inertia.mass(),
          sc.inertia.inertia().ldlt().solve(f_ext.torque - h.torque)};
}

/// Modal coordinates and rates of the flexible appendages.
struct FlexState {
  Eigen::VectorXd xi;
  Eigen::VectorXd xi_dot;

  static FlexState zero(int n_modes) {
    FlexState s;
    s.xi = Eigen::VectorXd::Zero(n_modes);
    s.xi_dot = Eigen::VectorXd::Zero(n_modes);
    return s;
  }
};

class FlexibleSpacecraft {
 public:
  /// Checked assembly. Requires M_f, K_f SPD, D_f PSD, the full partitioned
  /// mass matrix SPD, and the condensed rigid inertia M_s - M_sf M_f^-1 M_sf'
  /// SPD.
  static FlexibleSpacecraft checked(const Inertia6& rigid, const Eigen::MatrixXd& m_f,
                                    const Eigen::MatrixXd& m_sf, const Eigen::MatrixXd& k_f,
                                    const Eigen::MatrixXd& d_f) {
    const auto n = m_f.rows();
    auto fail = [](const std::string& what) -> FlexibleSpacecraft {
      throw ValidationError("invalid-flexible-model", what);
    };
    if (m_f.cols() != n || k_f.rows() != n || k_f.cols() != n || d_f.rows() != n || d_f.cols() != n)
      return fail("modal matrices must be square and of equal size");
    if (m_sf.rows() != 6 || m_sf.cols() != n) return fail("cross inertia M_sf must be 6 x n_modes");

    auto min_eig = [](const Eigen::MatrixXd& m) {
      return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose()))
          .eigenvalues()
          .minCoeff();
    };
    if (!(min_eig(m_f) > 0.0)) return fail("flexural inertia M_f is not positive definite");
    if (!(min_eig(k_f) > 0.0)) return fail("stiffness K_f is not positive definite");
    if (min_eig(d_f) < -kConstructionTol * std::max(1.0, d_f.norm()))
      return fail("damping D_f is not positive semidefinite");

    Eigen::MatrixXd full(6 + n, 6 + n);
    full.topLeftCorner(6, 6) = rigid.matrix6();
    full.topRightCorner(6, n) = m_sf;
    full.bottomLeftCorner(n, 6) = m_sf.transpose();
    full.bottomRightCorner(n, n) = m_f;
    if (!(min_eig(full) > 0.0)) return fail("partitioned mass matrix is not positive definite");

    const Eigen::MatrixXd condensed =
        rigid.matrix6() - m_sf * m_f.ldlt().solve(m_sf.transpose());
    if (!(min_eig(condensed) > 0.0)) return fail("condensed rigid inertia is not positive definite");

    FlexibleSpacecraft sc(rigid);
    sc.m_f_ = m_f;
    sc.m_sf_ = m_sf;
    sc.k_f_ = k_f;
    sc.d_f_ = d_f;
    return sc;
  }

  const Inertia6& rigid() const { return rigid_; }
  const Eigen::MatrixXd& m_f() const { return m_f_; }
  const Eigen::MatrixXd& m_sf() const { return m_sf_; }
  const Eigen::MatrixXd& k_f() const { return k_f_; }
  const Eigen::MatrixXd& d_f() const { return d_f_; }
  int n_modes() const { return static_cast<int>(m_f_.rows()); }

  /// h_sf = D_f xi_dot + K_f xi.
  Eigen::VectorXd flex_bias(const FlexState& flex) const {
    return d_f_ * flex.xi_dot + k_f_ * flex.xi;
  }

 private:
  explicit FlexibleSpacecraft(const Inertia6& rigid) : rigid_(rigid) {}
  Inertia6 rigid_;
  Eigen::MatrixXd m_f_, m_sf_, k_f_, d_f_;
};

/// Solves the partitioned equations of motion for (nu_dot, xi_ddot).
inline std::pair<Twist, Eigen::VectorXd> flexible_forward_dynamics(const FlexibleSpacecraft& sc,
                                                                   const Twist& nu,
                                                                   const FlexState& flex,
                                                                   const Wrench& f_ext) {
  const int n = sc.n_modes();
  Eigen::MatrixXd mass(6 + n, 6 + n);
  mass.topLeftCorner(6, 6) = sc.rigid().matrix6();
  mass.topRightCorner(6, n) = sc.m_sf();
  mass.bottomLeftCorner(n, 6) = sc.m_sf().transpose();
  mass.bottomRightCorner(n, n) = sc.m_f();

  Eigen::VectorXd rhs(6 + n);
  rhs.head<6>() = f_ext.vec6() - gyric_term(sc.rigid(), nu).vec6();
  rhs.tail(n) = -sc.flex_bias(flex);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(mass);
  if (ldlt.info() != Eigen::Success) {
    throw SimulationError("singular-mass-matrix", "partitioned flexible mass matrix is singular");
  }
  const Eigen::VectorXd acc = ldlt.solve(rhs);
  return {Twist::from_vec6(acc.head<6>()), acc.tail(n)};
}

/// Pose and twist of a free body: position/attitude in the world frame,
/// twist in the body frame.
struct RigidBodyState {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();
  Twist nu;

  Mat3 attitude_matrix() const { return attitude.toRotationMatrix(); }
};

namespace detail {

inline Eigen::Vector4d quat_derivative(const Eigen::Vector4d& q_wxyz, const Vec3& omega_body) {
  const Eigen::Quaterniond q(q_wxyz(0), q_wxyz(1), q_wxyz(2), q_wxyz(3));
  const Eigen::Quaterniond dq = q * Eigen::Quaterniond(0.0, 0.5 * omega_body.x(),
                                                       0.5 * omega_body.y(), 0.5 * omega_body.z());
  return {dq.w(), dq.x(), dq.y(), dq.z()};
}

inline Eigen::VectorXd pack_pose(const RigidBodyState& s) {
  Eigen::VectorXd y(13);
  y.segment<3>(0) = s.position;
  y(3) = s.attitude.w();
  y(4) = s.attitude.x();
  y(5) = s.attitude.y();
  y(6) = s.attitude.z();
  y.segment<6>(7) = s.nu.vec6();
  return y;
}

inline RigidBodyState unpack_pose(const Eigen::VectorXd& y) {
  RigidBodyState s;
  s.position = y.segment<3>(0);
  s.attitude = Eigen::Quaterniond(y(3), y(4), y(5), y(6)).normalized();
  s.nu = Twist::from_vec6(y.segment<6>(7));
  return s;
}

}  // namespace detail

/// One RK4 step of the coupled (pose, twist) kinematics with the body-frame
/// acceleration held constant over the step. The attitude quaternion is
/// renormalized after the step.
inline RigidBodyState integrate_pose(const RigidBodyState& state, const Twist& nu_dot, double dt) {
  auto deriv = [&](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(13);
    const Eigen::Quaterniond q = Eigen::Quaterniond(y(3), y(4), y(5), y(6)).normalized();
    const Vec3 v = y.segment<3>(7);
    const Vec3 w = y.segment<3>(10);
    dy.segment<3>(0) = q.toRotationMatrix() * v;
    dy.segment<4>(3) = detail::quat_derivative(y.segment<4>(3), w);
    dy.segment<6>(7) = nu_dot.vec6();
    return dy;
  };
  return detail::unpack_pose(rk4_step(detail::pack_pose(state), 0.0, dt, deriv));
}

/// One RK4 step of the free-floating rigid spacecraft under a body-frame
/// external wrench schedule f_ext(t).
template <typename WrenchFn>
RigidBodyState integrate_rigid_oracle(const RigidSpacecraft& sc, const RigidBodyState& state,
                                      double t, double dt, WrenchFn&& f_ext) {
  auto deriv = [&](double tau, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(13);
    const Eigen::Quaterniond q = Eigen::Quaterniond(y(3), y(4), y(5), y(6)).normalized();
    const Twist nu = Twist::from_vec6(y.segment<6>(7));
    dy.segment<3>(0) = q.toRotationMatrix() * nu.linear;
    dy.segment<4>(3) = detail::quat_derivative(y.segment<4>(3), nu.angular);
    dy.segment<6>(7) = rigid_forward_dynamics(sc, nu, f_ext(tau)).vec6();
    return dy;
  };
  return detail::unpack_pose(rk4_step(detail::pack_pose(state), t, dt, deriv));
}

/// One RK4 step of the free-floating flexible spacecraft. State layout:
/// pose (13) followed by (xi, xi_dot).
template <typename WrenchFn>
std::pair<RigidBodyState, FlexState> integrate_flexible_oracle(const FlexibleSpacecraft& sc,
                                                               const RigidBodyState& state,
                                                               const FlexState& flex, double t,
                                                               double dt, WrenchFn&& f_ext) {
  const int n = sc.n_modes();
  Eigen::VectorXd y(13 + 2 * n);
  y.head(13) = detail::pack_pose(state);
  y.segment(13, n) = flex.xi;
  y.tail(n) = flex.xi_dot;

  auto deriv = [&](double tau, const Eigen::VectorXd& yy) {
    Eigen::VectorXd dy(13 + 2 * n);
    const Eigen::Quaterniond q = Eigen::Quaterniond(yy(3), yy(4), yy(5), yy(6)).normalized();
    const Twist nu = Twist::from_vec6(yy.segment<6>(7));
    FlexState fs;
    fs.xi = yy.segment(13, n);
    fs.xi_dot = yy.tail(n);
    const auto [nu_dot, xi_ddot] = flexible_forward_dynamics(sc, nu, fs, f_ext(tau));
    dy.segment<3>(0) = q.toRotationMatrix() * nu.linear;
    dy.segment<4>(3) = detail::quat_derivative(yy.segment<4>(3), nu.angular);
    dy.segment<6>(7) = nu_dot.vec6();
    dy.segment(13, n) = fs.xi_dot;
    dy.tail(n) = xi_ddot;
    return dy;
  };

  const Eigen::VectorXd out = rk4_step(y, t, dt, deriv);
  FlexState next;
  next.xi = out.segment(13, n);
  next.xi_dot = out.tail(n);
  return {detail::unpack_pose(out.head(13)), next};
}

}  // namespace zgem
