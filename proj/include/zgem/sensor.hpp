#pragma once

// Force/moment sensor at the manipulator-payload interface. The exact
// interaction wrench follows from the test spacecraft dynamics
//
//   M_m nu_dot + h_m(nu) = -T F_s + F_g + F_ext
//
// solved for F_s; the measurement model then applies offset, per-axis
// Gaussian noise and mid-tread quantization. Gravity compensation transforms
// a raw reading into the controller input F_sg = T (F_s - F_0) - F_g using
// calibrated parameter estimates.

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "zgem/manipulator.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

/// Payload gravity wrench in {C}: F_g = (m g R' k; 0).
inline Wrench gravity_wrench(double mass, const Vec3& gravity_dir, const RotationMatrix& r) {
  return {mass * kGravity * (r.transpose() * gravity_dir), Vec3::Zero()};
}

inline Wrench gravity_wrench(const PayloadAttachment& attachment, const Vec3& gravity_dir,
                             const RotationMatrix& r) {
  return gravity_wrench(attachment.payload.inertia.mass(), gravity_dir, r);
}

/// Exact wrench sensed at {S}: F_s = T^-1 (F_g + F_ext - M_m nu_dot - h_m(nu)).
inline Wrench true_interaction_wrench(const PayloadAttachment& attachment, const Twist& nu,
                                      const Twist& nu_dot, const RotationMatrix& r,
                                      const Vec3& gravity_dir, const Wrench& f_ext) {
  const Inertia6& m_m = attachment.payload.inertia;
  const Wrench f_g = gravity_wrench(m_m.mass(), gravity_dir, r);
  const Wrench h_m = gyric_term(m_m, nu);
  const Wrench rhs = Wrench::from_vec6(f_g.vec6() + f_ext.vec6() - m_m.apply(nu_dot.vec6()) - h_m.vec6());
  return apply_sensor_transform_inverse(attachment.com_offset, rhs);
}

struct SensorModel {
  Wrench offset;              // F_0, sensor frame
  double noise_force = 0.0;   // sigma_f, N
  double noise_torque = 0.0;  // sigma_n, N m
  double resolution_force = 0.0;   // quantizer step, N (0 = continuous)
  double resolution_torque = 0.0;  // quantizer step, N m
  double sample_period = 1e-3;     // s
  std::uint64_t seed = 0;

  void validate() const {
    if (noise_force < 0.0 || noise_torque < 0.0 || resolution_force < 0.0 ||
        resolution_torque < 0.0 || !(sample_period > 0.0)) {
      throw ValidationError("bad-sensor", "sensor noise/resolution must be >= 0, period > 0");
    }
  }
};

struct SensorReading {
  Wrench f_s_raw;  // frame {S}
  double timestamp = 0.0;
};

/// Round to the nearest multiple of step, ties away from zero.
inline double quantize(double x, double step) {
  return step > 0.0 ? step * std::round(x / step) : x;
}

/// Owns the per-run noise stream. One stream per simulation instance; a fixed
/// seed reproduces the reading sequence exactly.
class SensorStream {
 public:
  explicit SensorStream(const SensorModel& model) : model_(model), rng_(model.seed) {}

  const SensorModel& model() const { return model_; }

  SensorReading sample(const Wrench& truth, double t) {
    Wrench raw = truth + model_.offset;
    for (int i = 0; i < 3; ++i) {
      raw.force(i) = quantize(raw.force(i) + gauss(model_.noise_force), model_.resolution_force);
      raw.torque(i) = quantize(raw.torque(i) + gauss(model_.noise_torque), model_.resolution_torque);
    }
    return {raw, t};
  }

 private:
  double gauss(double sigma) { return sigma > 0.0 ? sigma * normal_(rng_) : 0.0; }

  SensorModel model_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Parameter estimates used for gravity compensation: sensor offset, payload
/// mass, CM offset and gravity direction.
struct CalibrationParams {
  Wrench offset;   // F_0 estimate
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Vec3 gravity_dir = Vec3(0.0, 0.0, -1.0);

  static CalibrationParams perfect(const PayloadAttachment& attachment, const Wrench& sensor_offset,
                                   const Vec3& gravity_dir) {
    return {sensor_offset, attachment.payload.inertia.mass(), attachment.com_offset, gravity_dir};
  }
};

/// F_sg = T(c_hat) (F_s_raw - F_0_hat) - F_g(R; m_hat, k_hat), expressed in {C}.
inline Wrench compensated_wrench(const SensorReading& reading, const CalibrationParams& calib,
                                 const RotationMatrix& r) {
  const Wrench shifted = reading.f_s_raw - calib.offset;
  return apply_sensor_transform(calib.com, shifted) -
         gravity_wrench(calib.mass, calib.gravity_dir, r);
}

}  // namespace zgem
