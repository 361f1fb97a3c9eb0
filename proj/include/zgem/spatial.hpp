#pragma once

// 3-D / 6-D spatial algebra used everywhere else: twists, wrenches, the skew
// operator, the sensor-frame wrench transformation and generalized inertia.
// All 6-vectors are ordered (linear; angular) and expressed in a body frame
// unless stated otherwise.

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "zgem/error.hpp"

namespace zgem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Standard gravity, m/s^2.
inline constexpr double kGravity = 9.81;

/// Orthonormality / SPD tolerance at construction time.
inline constexpr double kConstructionTol = 1e-10;
/// Looser tolerance for checks after long integrations.
inline constexpr double kIntegrationTol = 1e-8;

/// skew(c) * x == c.cross(x) for all x.
inline Mat3 skew(const Vec3& c) {
  Mat3 m;
  m << 0.0, -c.z(), c.y(),
       c.z(), 0.0, -c.x(),
      -c.y(), c.x(), 0.0;
  return m;
}

/// Generalized velocity (v; omega) of a body frame.
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& lin, const Vec3& ang) : linear(lin), angular(ang) {}

  static Twist Zero() { return {}; }
  static Twist from_vec6(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
  Vec6 vec6() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
  double norm() const { return vec6().norm(); }

  Twist operator+(const Twist& o) const { return {linear + o.linear, angular + o.angular}; }
  Twist operator-(const Twist& o) const { return {linear - o.linear, angular - o.angular}; }
  Twist operator*(double s) const { return {linear * s, angular * s}; }
};

/// Generalized force (f; n) acting on a body, expressed in a body frame.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();

  Wrench() = default;
  Wrench(const Vec3& f, const Vec3& n) : force(f), torque(n) {}

  static Wrench Zero() { return {}; }
  static Wrench from_vec6(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
  Vec6 vec6() const {
    Vec6 v;
    v << force, torque;
    return v;
  }
  double norm() const { return vec6().norm(); }

  Wrench operator+(const Wrench& o) const { return {force + o.force, torque + o.torque}; }
  Wrench operator-(const Wrench& o) const { return {force - o.force, torque - o.torque}; }
  Wrench operator*(double s) const { return {force * s, torque * s}; }
  Wrench operator-() const { return {-force, -torque}; }
};

/// Wrench transformation from the sensor frame {S} to the parallel frame {C}
/// whose origin sits at +c (expressed in {S} axes):
///   T = [ I  0 ]
///       [-[c x]  I ]
/// Its inverse is the same structure with -c.
inline Mat6 sensor_transform(const Vec3& c) {
  Mat6 t = Mat6::Identity();
  t.block<3, 3>(3, 0) = -skew(c);
  return t;
}

/// Applies T(c) to a wrench without forming the 6x6 matrix.
inline Wrench apply_sensor_transform(const Vec3& c, const Wrench& w) {
  return {w.force, w.torque - c.cross(w.force)};
}

/// Applies T(c)^-1 = T(-c).
inline Wrench apply_sensor_transform_inverse(const Vec3& c, const Wrench& w) {
  return {w.force, w.torque + c.cross(w.force)};
}

/// Validated rotation matrix (body -> world unless stated otherwise).
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}

  /// Checked construction; throws ValidationError("invalid-rotation") when
  /// R^T R deviates from I or det(R) from +1 by more than tol.
  static RotationMatrix checked(const Mat3& m, double tol = kConstructionTol) {
    const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
    const double det_err = std::abs(m.determinant() - 1.0);
    if (!(ortho <= tol && det_err <= tol)) {
      throw ValidationError("invalid-rotation",
                            "rotation matrix check failed: |R^T R - I| = " + std::to_string(ortho) +
                                ", |det - 1| = " + std::to_string(det_err));
    }
    return RotationMatrix(m);
  }

  /// For matrices orthonormal by construction (FK chains, quaternion extraction).
  static RotationMatrix unchecked(const Mat3& m) { return RotationMatrix(m); }

  static RotationMatrix identity() { return RotationMatrix(); }

  static RotationMatrix from_quaternion(const Eigen::Quaterniond& q) {
    return RotationMatrix(q.normalized().toRotationMatrix());
  }

  const Mat3& matrix() const { return m_; }
  Mat3 transpose() const { return m_.transpose(); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  RotationMatrix operator*(const RotationMatrix& o) const { return RotationMatrix(m_ * o.m_); }

 private:
  explicit RotationMatrix(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

namespace detail {

inline bool symmetric_within(const Mat3& m, double tol) {
  return (m - m.transpose()).norm() <= tol * std::max(1.0, m.norm());
}

}  // namespace detail

/// Block-diagonal generalized inertia diag{m I, I_C} of a rigid body, with the
/// inertia tensor taken about the CM in the body frame.
class Inertia6 {
 public:
  /// Checked assembly; throws ValidationError with code "non-positive-mass" or
  /// "non-spd-inertia". The principal moments must also satisfy the triangle
  /// inequality I1 + I2 >= I3 (cyclic), which every physical body obeys.
  static Inertia6 checked(double mass, const Mat3& inertia) {
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw ValidationError("non-positive-mass", "mass must be positive, got " + std::to_string(mass));
    }
    if (!detail::symmetric_within(inertia, kConstructionTol)) {
      throw ValidationError("non-spd-inertia", "inertia tensor is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    const Vec3 lam = es.eigenvalues();  // ascending
    if (!(lam(0) > 0.0)) {
      throw ValidationError("non-spd-inertia",
                            "inertia tensor not positive definite, min eigenvalue " + std::to_string(lam(0)));
    }
    const double slack = kConstructionTol * lam(2);
    if (lam(0) + lam(1) + slack < lam(2)) {
      throw ValidationError("non-spd-inertia",
                            "principal moments violate the triangle inequality: " + std::to_string(lam(0)) +
                                " + " + std::to_string(lam(1)) + " < " + std::to_string(lam(2)));
    }
    return Inertia6(mass, 0.5 * (inertia + inertia.transpose()));
  }

  double mass() const { return mass_; }
  const Mat3& inertia() const { return inertia_; }

  Mat6 matrix6() const {
    Mat6 m = Mat6::Zero();
    m.block<3, 3>(0, 0) = mass_ * Mat3::Identity();
    m.block<3, 3>(3, 3) = inertia_;
    return m;
  }

  /// M * x for a 6-vector (linear; angular).
  Vec6 apply(const Vec6& x) const {
    Vec6 y;
    y.head<3>() = mass_ * x.head<3>();
    y.tail<3>() = inertia_ * x.tail<3>();
    return y;
  }

  /// Largest eigenvalue, max(m, lambda_max(I_C)).
  double lambda_max() const {
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia_);
    return std::max(mass_, es.eigenvalues().maxCoeff());
  }

 private:
  Inertia6(double m, const Mat3& i) : mass_(m), inertia_(i) {}
  double mass_;
  Mat3 inertia_;
};

/// block_inertia(m, I_C) in the interface's vocabulary.
inline Inertia6 block_inertia(double mass, const Mat3& inertia_cm) {
  return Inertia6::checked(mass, inertia_cm);
}

/// Spectral norm of a general matrix.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace zgem
