#pragma once

// Static F/M sensor calibration. With the manipulator parked (nu = 0,
// F_ext = 0) the sensor reads F_s = T^-1 F_g + F_0, which splits into two
// stacked linear regressions over p poses:
//
//   f_s = [ I  g R' ] [ f_0 ; w ],            w = m_m k
//   n_s = [ I  -g m [(R' k) x] ] [ n_0 ; c ]
//
// solved consecutively by least squares; the mass and gravity direction are
// recovered as m = |w|, k = w / |w|. Residuals feed the micro-gravity quality
// index gamma = |sum_i (f_si - Psi1_i Theta1)| / (n g m_s) * 1e6.

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "zgem/error.hpp"
#include "zgem/manipulator.hpp"
#include "zgem/sensor.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

/// One static capture: joint pose, payload attitude and the (averaged) raw
/// sensor reading taken there.
struct CalibrationPose {
  Eigen::VectorXd q;
  RotationMatrix r = RotationMatrix::identity();
  Wrench f_s_measured;
};

struct Regression {
  Eigen::VectorXd y;    // 3p
  Eigen::MatrixXd psi;  // 3p x 6
};

namespace detail {

inline void require_full_column_rank(const Eigen::MatrixXd& psi, const std::string& which) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(psi, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  if (psi.rows() < psi.cols() || sv(sv.size() - 1) <= tol) {
    const Eigen::VectorXd null_dir = svd.matrixV().col(svd.matrixV().cols() - 1);
    std::string msg = which + " regression is rank deficient; null direction ~ (";
    for (int i = 0; i < null_dir.size(); ++i) {
      msg += std::to_string(null_dir(i)) + (i + 1 < null_dir.size() ? ", " : ")");
    }
    throw ValidationError("rank-deficient", msg);
  }
}

}  // namespace detail

/// Force rows: f_si = [I  g R_i'] [f_0; w]. Requires at least two distinct
/// orientations for full column rank.
inline Regression build_force_regression(const std::vector<CalibrationPose>& poses) {
  if (poses.empty()) throw ValidationError("empty-dataset", "no calibration poses");
  const int p = static_cast<int>(poses.size());
  Regression reg;
  reg.y.resize(3 * p);
  reg.psi.resize(3 * p, 6);
  for (int i = 0; i < p; ++i) {
    reg.y.segment<3>(3 * i) = poses[i].f_s_measured.force;
    reg.psi.block<3, 3>(3 * i, 0) = Mat3::Identity();
    reg.psi.block<3, 3>(3 * i, 3) = kGravity * poses[i].r.transpose();
  }
  detail::require_full_column_rank(reg.psi, "force");
  return reg;
}

/// Moment rows: n_si = [I  -g m [(R_i' k) x]] [n_0; c], built from the
/// force-stage estimate theta1 = (f_0; w). Each [(R' k) x] block is rank 2, so
/// at least two non-parallel R' k directions are needed to observe c.
inline Regression build_moment_regression(const std::vector<CalibrationPose>& poses,
                                          const Eigen::VectorXd& theta1) {
  if (poses.empty()) throw ValidationError("empty-dataset", "no calibration poses");
  const Vec3 w_hat = theta1.tail<3>();
  const int p = static_cast<int>(poses.size());
  Regression reg;
  reg.y.resize(3 * p);
  reg.psi.resize(3 * p, 6);
  for (int i = 0; i < p; ++i) {
    reg.y.segment<3>(3 * i) = poses[i].f_s_measured.torque;
    reg.psi.block<3, 3>(3 * i, 0) = Mat3::Identity();
    reg.psi.block<3, 3>(3 * i, 3) = -kGravity * skew(poses[i].r.transpose() * w_hat);
  }
  detail::require_full_column_rank(reg.psi, "moment");
  return reg;
}

/// Least-squares minimizer of |Psi theta - y| via column-pivoted QR.
inline Eigen::VectorXd solve_least_squares(const Regression& reg) {
  detail::require_full_column_rank(reg.psi, "least-squares");
  return reg.psi.colPivHouseholderQr().solve(reg.y);
}

struct CalibrationResult {
  Eigen::VectorXd theta1;  // (f_0; w)
  Eigen::VectorXd theta2;  // (n_0; c)
  Wrench f_0_hat;
  Vec3 w_hat = Vec3::Zero();
  double m_hat = 0.0;
  Vec3 k_hat = Vec3::Zero();
  Vec3 c_hat = Vec3::Zero();
  std::vector<double> force_residuals;   // per pose
  std::vector<double> moment_residuals;  // per pose
  double cond_psi1 = 0.0;
  double cond_psi2 = 0.0;

  CalibrationParams params() const { return {f_0_hat, m_hat, c_hat, k_hat}; }
};

namespace detail {

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

}  // namespace detail

/// Full two-stage identification of {F_0, m_m, c, k} from static poses.
inline CalibrationResult calibrate(const std::vector<CalibrationPose>& poses) {
  const Regression force = build_force_regression(poses);
  CalibrationResult out;
  out.theta1 = solve_least_squares(force);
  out.cond_psi1 = detail::condition_number(force.psi);
  out.w_hat = out.theta1.tail<3>();
  out.m_hat = out.w_hat.norm();
  if (!(out.m_hat > 0.0)) {
    throw ValidationError("rank-deficient", "estimated gravity load |w| is zero");
  }
  out.k_hat = out.w_hat / out.m_hat;

  const Regression moment = build_moment_regression(poses, out.theta1);
  out.theta2 = solve_least_squares(moment);
  out.cond_psi2 = detail::condition_number(moment.psi);
  out.c_hat = out.theta2.tail<3>();
  out.f_0_hat = Wrench(out.theta1.head<3>(), out.theta2.head<3>());

  const Eigen::VectorXd rf = force.psi * out.theta1 - force.y;
  const Eigen::VectorXd rn = moment.psi * out.theta2 - moment.y;
  for (int i = 0; i < static_cast<int>(poses.size()); ++i) {
    out.force_residuals.push_back(rf.segment<3>(3 * i).norm());
    out.moment_residuals.push_back(rn.segment<3>(3 * i).norm());
  }
  return out;
}

/// Default calibration pose set: eight joint configurations of the built-in
/// arm spanning rotations about two non-parallel axes, which satisfies both
/// regressions' rank conditions with margin.
inline std::vector<Eigen::VectorXd> default_calibration_joint_poses() {
  auto q = [](double a, double b, double c, double d, double e, double f) {
    Eigen::VectorXd v(6);
    v << a, b, c, d, e, f;
    return v;
  };
  return {
      q(0.0, -0.7, 0.9, 0.0, 0.8, 0.0),   q(0.0, -0.7, 0.9, 1.57, 0.8, 0.0),
      q(0.0, -0.7, 0.9, -1.57, 0.8, 0.0), q(0.0, -0.7, 0.9, 0.0, -0.9, 0.0),
      q(0.4, -0.9, 1.1, 0.8, 1.3, 0.5),   q(-0.4, -0.5, 0.7, -0.8, 0.5, -0.5),
      q(0.2, -0.8, 1.0, 3.0, 1.0, 1.0),   q(-0.2, -0.6, 0.8, -2.2, -1.2, 2.0),
  };
}

/// Parks the arm at each pose and records the averaged raw reading (mean of
/// n_avg consecutive samples, suppressing sensor noise by sqrt(n_avg)).
inline std::vector<CalibrationPose> capture_static_poses(const ManipulatorModel& model,
                                                         const PayloadAttachment& attachment,
                                                         SensorStream& sensor,
                                                         const std::vector<Eigen::VectorXd>& qs,
                                                         int n_avg = 100) {
  std::vector<CalibrationPose> out;
  double t = 0.0;
  for (const auto& q : qs) {
    CalibrationPose pose;
    pose.q = q;
    pose.r = forward_kinematics(model, attachment, q).first;
    const Wrench truth = true_interaction_wrench(attachment, Twist::Zero(), Twist::Zero(), pose.r,
                                                 model.gravity_dir, Wrench::Zero());
    Vec6 acc = Vec6::Zero();
    for (int i = 0; i < n_avg; ++i) {
      acc += sensor.sample(truth, t).f_s_raw.vec6();
      t += sensor.model().sample_period;
    }
    pose.f_s_measured = Wrench::from_vec6(acc / n_avg);
    out.push_back(pose);
  }
  return out;
}

/// Conservative joint-error propagation bounds:
///   |df_s| <= 6 g m |dq|,   |dn_s| <= 6 g m |c| |dq|.
struct SensitivityBounds {
  double force = 0.0;   // N
  double torque = 0.0;  // N m
};

inline SensitivityBounds sensitivity_bounds(double mass, const Vec3& c, double dq_norm) {
  const double f = 6.0 * kGravity * mass * dq_norm;
  return {f, f * c.norm()};
}

/// Empirical companion: largest observed static force/moment deviation over
/// random (q, dq) pairs with |dq| = dq_norm, using the static sensor model.
inline SensitivityBounds sensitivity_empirical(const ManipulatorModel& model,
                                               const PayloadAttachment& attachment,
                                               double dq_norm, int n_samples,
                                               std::uint64_t seed = 7u) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uq(-2.5, 2.5);
  std::normal_distribution<double> un(0.0, 1.0);
  const double mass = attachment.payload.inertia.mass();
  const Vec3 w = mass * model.gravity_dir;

  SensitivityBounds worst;
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd q(6), dq(6);
    for (int i = 0; i < 6; ++i) {
      q(i) = uq(rng);
      dq(i) = un(rng);
    }
    dq *= dq_norm / dq.norm();
    const Mat3 r0 = forward_kinematics(model, attachment, q).first.matrix();
    const Mat3 r1 = forward_kinematics(model, attachment, q + dq).first.matrix();
    const Vec3 df = kGravity * (r1.transpose() - r0.transpose()) * w;
    const Vec3 dn = -kGravity * mass *
                    (skew(r1.transpose() * model.gravity_dir) -
                     skew(r0.transpose() * model.gravity_dir)) *
                    attachment.com_offset;
    worst.force = std::max(worst.force, df.norm());
    worst.torque = std::max(worst.torque, dn.norm());
  }
  return worst;
}

/// Micro-gravity index gamma = |sum_i (f_si - Psi1_i theta1)| / (n g m_s) * 1e6.
/// The summed-residual form permits cancellation across poses; see
/// microg_index_mean_norm for the stricter per-pose variant.
inline double microg_index(const std::vector<CalibrationPose>& poses,
                           const CalibrationResult& calib, double flight_mass) {
  if (poses.empty()) throw ValidationError("empty-dataset", "micro-g index needs poses");
  Vec3 sum = Vec3::Zero();
  for (const auto& pose : poses) {
    const Vec3 predicted =
        calib.theta1.head<3>() + kGravity * (pose.r.transpose() * calib.theta1.tail<3>());
    sum += pose.f_s_measured.force - predicted;
  }
  return sum.norm() / (static_cast<double>(poses.size()) * kGravity * flight_mass) * 1e6;
}

/// Mean-of-norms diagnostic: average per-pose residual magnitude, same
/// normalization. Always >= the summed-residual index.
inline double microg_index_mean_norm(const std::vector<CalibrationPose>& poses,
                                     const CalibrationResult& calib, double flight_mass) {
  if (poses.empty()) throw ValidationError("empty-dataset", "micro-g index needs poses");
  double acc = 0.0;
  for (const auto& pose : poses) {
    const Vec3 predicted =
        calib.theta1.head<3>() + kGravity * (pose.r.transpose() * calib.theta1.tail<3>());
    acc += (pose.f_s_measured.force - predicted).norm();
  }
  return acc / (static_cast<double>(poses.size()) * kGravity * flight_mass) * 1e6;
}

/// Rotational companion index, normalized by g |c| m_m.
inline double microg_index_rotational(const std::vector<CalibrationPose>& poses,
                                      const CalibrationResult& calib, double flight_mass_unused,
                                      double* out_norm = nullptr) {
  (void)flight_mass_unused;
  if (poses.empty()) throw ValidationError("empty-dataset", "micro-g index needs poses");
  const double c_norm = calib.c_hat.norm();
  if (c_norm < 1e-9) {  // sub-nanometer CM offset: the normalization is meaningless
    throw ValidationError("zero-cm-offset", "rotational index undefined for |c| = 0");
  }
  Vec3 sum = Vec3::Zero();
  for (const auto& pose : poses) {
    const Vec3 predicted =
        calib.theta2.head<3>() -
        kGravity * skew(pose.r.transpose() * calib.w_hat) * calib.theta2.tail<3>();
    sum += pose.f_s_measured.torque - predicted;
  }
  const double gamma =
      sum.norm() / (static_cast<double>(poses.size()) * kGravity * c_norm * calib.m_hat) * 1e6;
  if (out_norm != nullptr) *out_norm = sum.norm();
  return gamma;
}

/// Best achievable micro-g for a sensor of the given force resolution:
/// gamma_min = resolution / (g m_s) * 1e6.
inline double resolution_floor(double sensor_resolution, double flight_mass) {
  if (!(flight_mass > 0.0)) {
    throw ValidationError("non-positive-mass", "flight mass must be positive");
  }
  return sensor_resolution / (kGravity * flight_mass) * 1e6;
}

}  // namespace zgem
