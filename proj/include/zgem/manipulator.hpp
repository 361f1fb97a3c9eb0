#pragma once

// Serial-chain manipulator kinematics and dynamics.
//
// Kinematics use the standard (distal) Denavit-Hartenberg convention: the
// transform from frame i-1 to frame i is
//
//   A_i(q_i) = RotZ(q_i + theta_off_i) TransZ(d_i) TransX(a_i) RotX(alpha_i)
//
// with joint i revolute about the z axis of frame i-1. The payload frame {C}
// sits at the payload CM: the flange frame {S} (= frame n) translated by the
// attachment offset c, same orientation.
//
// Jacobians are expressed in {C} per the controller's convention,
// J = [J_v; J_w] with v = J_v qd and w = J_w qd body-frame. J_dot is computed
// exactly from the velocity recursion (no finite differences).
//
// Joint-space dynamics (M_r, h_r) come from a world-frame recursive
// Newton-Euler pass; h_r contains Coriolis, centrifugal and the arm's own
// gravity load. An independent assembly M_r = sum_k J_k^T M_k J_k over
// link-CM body Jacobians is provided for cross-checks and exact M_r rates.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "zgem/error.hpp"
#include "zgem/spacecraft.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

struct JointParams {
  double a = 0.0;       // link length, m
  double alpha = 0.0;   // link twist, rad
  double d = 0.0;       // link offset, m
  double theta_offset = 0.0;  // added to the joint variable, rad
};

struct LinkParams {
  double mass = 0.0;   // kg
  Vec3 com = Vec3::Zero();      // CM in the link frame, m
  Mat3 inertia = Mat3::Zero();  // about the CM, link frame, kg m^2
};

enum class ManipulatorKind {
  kSerial6R,
  /// Idealized 6-DOF stage with J = I in {C}, J_dot = 0 and a constant
  /// diagonal joint-space inertia (so M_Cr is constant and diagonal).
  /// Analysis-only: forward kinematics report identity attitude and the
  /// first three joint values as position; it is not simulatable.
  kCartesianStage,
};

struct ManipulatorModel {
  ManipulatorKind kind = ManipulatorKind::kSerial6R;
  std::vector<JointParams> joints;
  std::vector<LinkParams> links;
  Vec3 gravity_dir = Vec3(0.0, 0.0, -1.0);  // unit vector k, world frame
  Vec6 stage_inertia = Vec6::Zero();        // kCartesianStage only
  double jacobian_condition_limit = 1e6;

  int dof() const { return kind == ManipulatorKind::kSerial6R ? static_cast<int>(joints.size()) : 6; }

  void validate() const {
    if (std::abs(gravity_dir.norm() - 1.0) > 1e-9) {
      throw ValidationError("bad-manipulator", "gravity direction must be a unit vector");
    }
    if (kind == ManipulatorKind::kSerial6R) {
      if (joints.size() != 6 || links.size() != 6) {
        throw ValidationError("bad-manipulator", "the emulation controller requires a 6-joint arm");
      }
      for (const auto& link : links) {
        Inertia6::checked(link.mass, link.inertia);  // throws on bad parameters
      }
    } else {
      if (!(stage_inertia.minCoeff() > 0.0)) {
        throw ValidationError("bad-manipulator", "stage inertia entries must be positive");
      }
    }
  }

  /// Built-in payload-class 6R elbow arm with spherical wrist (reach ~2.7 m,
  /// ~1.7 t moving mass). Home pose (q = 0) is the stretched, wrist-singular
  /// configuration; operating configurations keep q5 away from zero.
  static ManipulatorModel elbow6r() {
    ManipulatorModel m;
    m.kind = ManipulatorKind::kSerial6R;
    m.joints = {
        {0.30, -M_PI / 2, 0.675, 0.0},
        {1.15, 0.0, 0.0, 0.0},
        {0.20, -M_PI / 2, 0.0, 0.0},
        {0.0, M_PI / 2, 1.10, 0.0},
        {0.0, -M_PI / 2, 0.0, 0.0},
        {0.0, 0.0, 0.24, 0.0},
    };
    m.links = {
        {450.0, Vec3(0.02, -0.10, 0.0), diag3(28.0, 24.0, 26.0)},
        {380.0, Vec3(0.60, 0.0, 0.15), diag3(12.0, 65.0, 62.0)},
        {240.0, Vec3(0.05, -0.02, 0.03), diag3(9.0, 10.0, 8.5)},
        {160.0, Vec3(0.0, 0.0, -0.35), diag3(11.0, 10.5, 2.8)},
        {55.0, Vec3(0.0, -0.03, 0.0), diag3(1.1, 0.9, 0.8)},
        {35.0, Vec3(0.0, 0.0, 0.06), diag3(0.55, 0.55, 0.40)},
    };
    return m;
  }

  /// Built-in ideal Cartesian stage, the zero-gain analysis model.
  static ManipulatorModel cartesian_stage(const Vec6& inertia_diag) {
    ManipulatorModel m;
    m.kind = ManipulatorKind::kCartesianStage;
    m.stage_inertia = inertia_diag;
    return m;
  }

 private:
  static Mat3 diag3(double x, double y, double z) { return Vec3(x, y, z).asDiagonal(); }
};

/// Rigid test spacecraft mounted on the flange. c is the flange-to-CM offset
/// expressed in {S} (parallel to {C}).
struct PayloadAttachment {
  RigidSpacecraft payload;
  Vec3 com_offset = Vec3::Zero();
};

/// World-frame pose, axis and velocity data of every chain frame, built once
/// per (q, qd) and shared by kinematics and dynamics passes.
struct ChainKinematics {
  // index 0 = base frame, i = frame i (i = 1..n)
  std::vector<Mat3> rot;     // R_0i
  std::vector<Vec3> origin;  // p_i
  std::vector<Vec3> axis;    // joint i axis = z of frame i-1, world (index 1..n)
  std::vector<Vec3> omega;   // angular velocity of link i, world
  std::vector<Vec3> vel;     // velocity of origin p_i, world
  std::vector<Vec3> axis_rate;  // d/dt axis_i

  int dof() const { return static_cast<int>(axis.size()) - 1; }
};

inline ChainKinematics chain_kinematics(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& qd) {
  const int n = static_cast<int>(model.joints.size());
  ChainKinematics ck;
  ck.rot.assign(n + 1, Mat3::Identity());
  ck.origin.assign(n + 1, Vec3::Zero());
  ck.axis.assign(n + 1, Vec3::Zero());
  ck.omega.assign(n + 1, Vec3::Zero());
  ck.vel.assign(n + 1, Vec3::Zero());
  ck.axis_rate.assign(n + 1, Vec3::Zero());

  for (int i = 1; i <= n; ++i) {
    const JointParams& jp = model.joints[i - 1];
    const double th = q(i - 1) + jp.theta_offset;
    const double ct = std::cos(th), st = std::sin(th);
    const double ca = std::cos(jp.alpha), sa = std::sin(jp.alpha);
    Mat3 a_rot;
    a_rot << ct, -st * ca, st * sa,
             st, ct * ca, -ct * sa,
             0.0, sa, ca;
    const Vec3 a_trans(jp.a * ct, jp.a * st, jp.d);

    ck.axis[i] = ck.rot[i - 1].col(2);
    ck.rot[i] = ck.rot[i - 1] * a_rot;
    ck.origin[i] = ck.origin[i - 1] + ck.rot[i - 1] * a_trans;

    ck.omega[i] = ck.omega[i - 1] + qd(i - 1) * ck.axis[i];
    ck.vel[i] = ck.vel[i - 1] + ck.omega[i].cross(ck.origin[i] - ck.origin[i - 1]);
    ck.axis_rate[i] = ck.omega[i - 1].cross(ck.axis[i]);
  }
  return ck;
}

/// World-frame geometric Jacobian of a point rigidly attached to link `link`
/// (1-based), and its exact time derivative.
struct PointJacobian {
  Eigen::MatrixXd j;      // 6 x n, rows (v; w)
  Eigen::MatrixXd j_dot;  // 6 x n
};

inline PointJacobian point_jacobian(const ChainKinematics& ck, const Vec3& point, int link) {
  const int n = ck.dof();
  PointJacobian out;
  out.j = Eigen::MatrixXd::Zero(6, n);
  out.j_dot = Eigen::MatrixXd::Zero(6, n);
  // velocity of the attached point
  const Vec3 point_vel = ck.vel[link] + ck.omega[link].cross(point - ck.origin[link]);
  for (int i = 1; i <= link; ++i) {
    const Vec3& z = ck.axis[i];
    const Vec3& zd = ck.axis_rate[i];
    const Vec3 r = point - ck.origin[i - 1];
    out.j.block<3, 1>(0, i - 1) = z.cross(r);
    out.j.block<3, 1>(3, i - 1) = z;
    out.j_dot.block<3, 1>(0, i - 1) = zd.cross(r) + z.cross(point_vel - ck.vel[i - 1]);
    out.j_dot.block<3, 1>(3, i - 1) = zd;
  }
  return out;
}

/// Recursive Newton-Euler in world frame: joint torques realizing (q, qd, qdd)
/// under gravity g * gravity_dir (pass gravity = 0 to drop it). Only the
/// geometry (frames, axes) is taken from ck; the velocity recursion is rebuilt
/// from the qd argument so that e.g. unit-acceleration sweeps stay clean.
inline Eigen::VectorXd rne(const ManipulatorModel& model, const ChainKinematics& ck,
                           const Eigen::VectorXd& qd, const Eigen::VectorXd& qdd, double gravity) {
  const int n = ck.dof();
  std::vector<Vec3> omega(n + 1, Vec3::Zero());  // angular velocity of link i
  std::vector<Vec3> alpha(n + 1, Vec3::Zero());  // angular acceleration of link i
  std::vector<Vec3> acc(n + 1, Vec3::Zero());    // acceleration of origin p_i
  acc[0] = -gravity * model.gravity_dir;         // base acceleration trick

  for (int i = 1; i <= n; ++i) {
    const Vec3& z = ck.axis[i];
    omega[i] = omega[i - 1] + qd(i - 1) * z;
    alpha[i] = alpha[i - 1] + qdd(i - 1) * z + omega[i - 1].cross(qd(i - 1) * z);
    const Vec3 r = ck.origin[i] - ck.origin[i - 1];
    acc[i] = acc[i - 1] + alpha[i].cross(r) + omega[i].cross(omega[i].cross(r));
  }

  Eigen::VectorXd tau(n);
  Vec3 f_child = Vec3::Zero();   // force the child chain exerts demand at p_i
  Vec3 n_child = Vec3::Zero();   // moment of the child chain about p_i
  for (int i = n; i >= 1; --i) {
    const LinkParams& link = model.links[i - 1];
    const Vec3 com_w = ck.origin[i] + ck.rot[i] * link.com;
    const Vec3 rc = com_w - ck.origin[i];
    const Vec3 a_cm = acc[i] + alpha[i].cross(rc) + omega[i].cross(omega[i].cross(rc));
    const Mat3 inertia_w = ck.rot[i] * link.inertia * ck.rot[i].transpose();

    const Vec3 f_net = link.mass * a_cm;
    const Vec3 n_net = inertia_w * alpha[i] + omega[i].cross(inertia_w * omega[i]);

    const Vec3 f_joint = f_net + f_child;
    const Vec3 n_joint = n_net + (com_w - ck.origin[i - 1]).cross(f_net) + n_child +
                         (ck.origin[i] - ck.origin[i - 1]).cross(f_child);
    tau(i - 1) = ck.axis[i].dot(n_joint);
    f_child = f_joint;
    n_child = n_joint;
  }
  return tau;
}

/// Joint-space inertia via unit-acceleration RNE columns (gravity off).
inline Eigen::MatrixXd mass_matrix(const ManipulatorModel& model, const ChainKinematics& ck) {
  const int n = ck.dof();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd m(n, n);
  for (int j = 0; j < n; ++j) {
    m.col(j) = rne(model, ck, zero, Eigen::VectorXd::Unit(n, j), 0.0);
  }
  return 0.5 * (m + m.transpose());
}

/// Independent inertia assembly sum_k J_k^T diag(m_k I, I_k) J_k over link-CM
/// body-frame Jacobians, plus the exact M_r rate. Used by verification paths.
struct MassMatrixAssembly {
  Eigen::MatrixXd m;      // n x n
  Eigen::MatrixXd m_dot;  // n x n
};

inline MassMatrixAssembly mass_matrix_assembled(const ManipulatorModel& model,
                                                const ChainKinematics& ck) {
  const int n = ck.dof();
  MassMatrixAssembly out;
  out.m = Eigen::MatrixXd::Zero(n, n);
  out.m_dot = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    const LinkParams& link = model.links[k - 1];
    const Vec3 com_w = ck.origin[k] + ck.rot[k] * link.com;
    const PointJacobian pj = point_jacobian(ck, com_w, k);
    // body-frame blocks: Jb = diag(R', R') Jw, Jb_dot = diag(R', R')(Jw_dot - diag([w x]) Jw)
    const Mat3 rt = ck.rot[k].transpose();
    const Mat3 wx = skew(ck.omega[k]);
    Eigen::MatrixXd jb(6, n), jb_dot(6, n);
    jb.topRows(3) = rt * pj.j.topRows(3);
    jb.bottomRows(3) = rt * pj.j.bottomRows(3);
    jb_dot.topRows(3) = rt * (pj.j_dot.topRows(3) - wx * pj.j.topRows(3));
    jb_dot.bottomRows(3) = rt * (pj.j_dot.bottomRows(3) - wx * pj.j.bottomRows(3));

    Eigen::MatrixXd mj(6, n), mjd(6, n);
    mj.topRows(3) = link.mass * jb.topRows(3);
    mj.bottomRows(3) = link.inertia * jb.bottomRows(3);
    mjd.topRows(3) = link.mass * jb_dot.topRows(3);
    mjd.bottomRows(3) = link.inertia * jb_dot.bottomRows(3);

    out.m += jb.transpose() * mj;
    out.m_dot += jb_dot.transpose() * mj + jb.transpose() * mjd;
  }
  return out;
}

/// Per-configuration cache: pose of {C}, {C}-frame Jacobians and joint-space
/// dynamics of the bare arm.
struct ManipulatorState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  RotationMatrix r = RotationMatrix::identity();  // {C} w.r.t. {W}
  Vec3 c_pos = Vec3::Zero();                      // payload CM in {W}
  Eigen::MatrixXd j;       // 6 x n, frame {C}
  Eigen::MatrixXd j_dot;   // 6 x n, frame {C}
  Eigen::MatrixXd m_r;     // n x n
  Eigen::VectorXd h_r;     // n

  Twist payload_twist() const { return Twist::from_vec6(j * qd); }
  Eigen::MatrixXd jv() const { return j.topRows(3); }
  Eigen::MatrixXd jw() const { return j.bottomRows(3); }
};

/// Forward kinematics of the payload frame {C}.
inline std::pair<RotationMatrix, Vec3> forward_kinematics(const ManipulatorModel& model,
                                                          const PayloadAttachment& attachment,
                                                          const Eigen::VectorXd& q) {
  if (model.kind == ManipulatorKind::kCartesianStage) {
    return {RotationMatrix::identity(), Vec3(q(0), q(1), q(2))};
  }
  const ChainKinematics ck = chain_kinematics(model, q, Eigen::VectorXd::Zero(q.size()));
  const int n = ck.dof();
  const Mat3 r = ck.rot[n];
  return {RotationMatrix::unchecked(r), ck.origin[n] + r * attachment.com_offset};
}

inline ManipulatorState compute_state(const ManipulatorModel& model,
                                      const PayloadAttachment& attachment, const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qd) {
  ManipulatorState st;
  st.q = q;
  st.qd = qd;

  if (model.kind == ManipulatorKind::kCartesianStage) {
    st.r = RotationMatrix::identity();
    st.c_pos = Vec3(q(0), q(1), q(2));
    st.j = Eigen::MatrixXd::Identity(6, 6);
    st.j_dot = Eigen::MatrixXd::Zero(6, 6);
    st.m_r = model.stage_inertia.asDiagonal();
    st.h_r = Eigen::VectorXd::Zero(6);
    return st;
  }

  const ChainKinematics ck = chain_kinematics(model, q, qd);
  const int n = ck.dof();
  const Mat3 r = ck.rot[n];
  st.r = RotationMatrix::unchecked(r);
  st.c_pos = ck.origin[n] + r * attachment.com_offset;

  const PointJacobian pj = point_jacobian(ck, st.c_pos, n);
  const Mat3 rt = r.transpose();
  const Mat3 wx = skew(ck.omega[n]);
  st.j.resize(6, n);
  st.j_dot.resize(6, n);
  st.j.topRows(3) = rt * pj.j.topRows(3);
  st.j.bottomRows(3) = rt * pj.j.bottomRows(3);
  st.j_dot.topRows(3) = rt * (pj.j_dot.topRows(3) - wx * pj.j.topRows(3));
  st.j_dot.bottomRows(3) = rt * (pj.j_dot.bottomRows(3) - wx * pj.j.bottomRows(3));

  st.m_r = mass_matrix(model, ck);
  st.h_r = rne(model, ck, qd, Eigen::VectorXd::Zero(n), kGravity);
  return st;
}

/// Arm gravity torque g_r(q) alone.
inline Eigen::VectorXd gravity_torque(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  if (model.kind == ManipulatorKind::kCartesianStage) return Eigen::VectorXd::Zero(6);
  const int n = static_cast<int>(model.joints.size());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const ChainKinematics ck = chain_kinematics(model, q, zero);
  return rne(model, ck, zero, zero, kGravity);
}

inline double jacobian_condition(const Eigen::MatrixXd& j) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                 : std::numeric_limits<double>::infinity();
}

inline void require_invertible_jacobian(const ManipulatorState& st, double limit) {
  const double cond = jacobian_condition(st.j);
  if (!(cond < limit)) {
    throw SimulationError("near-singular-jacobian",
                          "Jacobian condition number " + std::to_string(cond) +
                              " exceeds limit " + std::to_string(limit));
  }
}

/// Combined manipulator + payload dynamics:
///   M_t = J' M_m J + M_r
///   h_t = h_r + J' h_m + J' M_m J_dot qd - m g Jv' R' k
struct CombinedDynamics {
  Eigen::MatrixXd m_t;
  Eigen::VectorXd h_t;
};

inline CombinedDynamics combined_dynamics(const ManipulatorModel& model,
                                          const PayloadAttachment& attachment,
                                          const ManipulatorState& st) {
  const Mat6 m_m = attachment.payload.inertia.matrix6();
  const Twist nu = st.payload_twist();
  const Wrench h_m = gyric_term(attachment.payload.inertia, nu);

  CombinedDynamics out;
  out.m_t = st.j.transpose() * m_m * st.j + st.m_r;
  out.h_t = st.h_r + st.j.transpose() * (h_m.vec6() + m_m * (st.j_dot * st.qd)) -
            attachment.payload.inertia.mass() * kGravity *
                (st.jv().transpose() * (st.r.transpose() * model.gravity_dir));
  return out;
}

/// Cartesian inertia M_Cr = J^-T M_r J^-1 of the bare arm at the cached
/// configuration. Throws near kinematic singularities.
inline Mat6 cartesian_inertia(const ManipulatorState& st, double condition_limit = 1e6) {
  require_invertible_jacobian(st, condition_limit);
  const Eigen::PartialPivLU<Mat6> lu_jt(Mat6(st.j.transpose()));
  const Mat6 b = lu_jt.solve(st.m_r);               // J^-T M_r
  const Mat6 m_cr_t = lu_jt.solve(b.transpose());   // (B J^-1)' = J^-T B'
  return m_cr_t.transpose();
}

}  // namespace zgem
