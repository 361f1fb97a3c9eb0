#pragma once

// Offline stability analysis of the closed emulation loop.
//
// The tracking-error equation
//
//   M_r qdd_err + M_t (K_d qd_err + K_p q_err) = 0
//
// is treated as a perturbation of the nominal error dynamics
// x_dot = A x, A = [0 I; -K_p -K_d]. With scalar gains the Lyapunov equation
// P A + A' P = -I has the closed-form 2x2 per-axis solution used here, and
// the loop is globally exponentially stable whenever
//
//   |Q| <= alpha(kp, kd) = kp kd / ((kp+1)^2 + kd^2)^{3/2}.
//
// Workspace suprema (|Q|, sigma = max singular value of J) are estimated by
// deterministic low-discrepancy (Halton) sampling of a configured joint box.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "zgem/controller.hpp"
#include "zgem/manipulator.hpp"
#include "zgem/spatial.hpp"

namespace zgem {

/// Q(q) = M_r^-1 (J M_m J').
inline Mat6 q_matrix(const ManipulatorState& st, const PayloadAttachment& attachment) {
  const Mat6 jmj = st.j * attachment.payload.inertia.matrix6() * st.j.transpose();
  return Eigen::PartialPivLU<Eigen::MatrixXd>(st.m_r).solve(jmj);
}

/// Multiplier appearing when the error equation is rearranged to
/// qdd_err + (I + M_r^-1 J' M_m J)(K_d qd_err + K_p q_err) = 0. Note the
/// transposition relative to q_matrix(); the two coincide in norm bounds but
/// only this form zeroes the trajectory residual.
inline Mat6 error_dynamics_q(const ManipulatorState& st, const PayloadAttachment& attachment) {
  const Mat6 jmj = st.j.transpose() * attachment.payload.inertia.matrix6() * st.j;
  return Eigen::PartialPivLU<Eigen::MatrixXd>(st.m_r).solve(jmj);
}

/// Closed-form per-axis Lyapunov solution
///   P = 1/(2 kp kd) [ kp(kp+1) + kd^2, kd; kd, kp+1 ]
/// satisfying P A + A' P = -I for A = [0 1; -kp -kd].
inline Eigen::Matrix2d lyapunov_p(const EmulationGains& gains) {
  gains.validate();
  Eigen::Matrix2d p;
  p << gains.kp * (gains.kp + 1.0) + gains.kd * gains.kd, gains.kd,
       gains.kd, gains.kp + 1.0;
  return p / (2.0 * gains.kp * gains.kd);
}

/// |P A + A' P + I|, should be ~0.
inline double lyapunov_residual(const Eigen::Matrix2d& p, const EmulationGains& gains) {
  Eigen::Matrix2d a;
  a << 0.0, 1.0, -gains.kp, -gains.kd;
  return (p * a + a.transpose() * p + Eigen::Matrix2d::Identity()).norm();
}

/// Paper bound lambda_max(P) <= ((kp+1)^2 + kd^2) / (2 kp kd).
inline double lyapunov_p_bound(const EmulationGains& gains) {
  return ((gains.kp + 1.0) * (gains.kp + 1.0) + gains.kd * gains.kd) /
         (2.0 * gains.kp * gains.kd);
}

/// Deterministic Halton sequence point (bases 2,3,5,7,11,13), component d of
/// sample i, in [0, 1).
inline double halton(std::size_t index, int dim) {
  static constexpr int kBases[6] = {2, 3, 5, 7, 11, 13};
  const int base = kBases[dim % 6];
  double f = 1.0, r = 0.0;
  for (std::size_t i = index + 1; i > 0; i /= base) {
    f /= base;
    r += f * static_cast<double>(i % base);
  }
  return r;
}

struct JointBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static JointBox centered(const Eigen::VectorXd& center, double half_width) {
    return {center.array() - half_width, center.array() + half_width};
  }
};

struct StabilityReport {
  double q_norm_max = 0.0;      // sup over samples of |Q(q)|_2
  double alpha = 0.0;           // stability threshold for the given gains
  bool satisfied_eq_alpha = false;   // sampled condition |Q| <= alpha
  bool satisfied_eq_mass = false;    // conservative mass inequality
  Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
  double lambda_max_p = 0.0;
  double sigma = 0.0;           // max singular value of J over samples
  double lambda_min_mr = 0.0;   // min over samples
  double lambda_max_jjt = 0.0;  // max over samples
  double lambda_max_mm = 0.0;
  double suggested_decay_omega = 0.0;
  int samples = 0;
};

/// Evaluates the sampled stability condition and the conservative mass
/// inequality lambda_max(M_m) <= alpha lambda_min(M_r) / lambda_max(J J')
/// over a low-discrepancy sample of the joint box.
inline StabilityReport check_mass_inequality(const ManipulatorModel& model,
                                             const PayloadAttachment& attachment,
                                             const EmulationGains& gains, const JointBox& box,
                                             int n_samples = 4096) {
  if (n_samples <= 0 || box.lower.size() != 6 || box.upper.size() != 6) {
    throw ValidationError("bad-stability-config", "need a 6-D joint box and n_samples > 0");
  }
  StabilityReport rep;
  rep.alpha = stability_alpha(gains);
  rep.p = lyapunov_p(gains);
  rep.lambda_max_p = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(rep.p).eigenvalues().maxCoeff();
  rep.lambda_max_mm = attachment.payload.inertia.lambda_max();
  rep.samples = n_samples;
  rep.lambda_min_mr = std::numeric_limits<double>::infinity();

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd q(6);
    for (int d = 0; d < 6; ++d) {
      q(d) = box.lower(d) + halton(static_cast<std::size_t>(s), d) * (box.upper(d) - box.lower(d));
    }
    const ManipulatorState st = compute_state(model, attachment, q, zero);
    rep.q_norm_max = std::max(rep.q_norm_max, spectral_norm(q_matrix(st, attachment)));
    const double smax = spectral_norm(st.j);
    rep.sigma = std::max(rep.sigma, smax);
    rep.lambda_max_jjt = std::max(rep.lambda_max_jjt, smax * smax);
    rep.lambda_min_mr = std::min(
        rep.lambda_min_mr,
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(st.m_r).eigenvalues().minCoeff());
  }

  rep.satisfied_eq_alpha = rep.q_norm_max <= rep.alpha;
  rep.satisfied_eq_mass =
      rep.lambda_max_mm <= rep.alpha * rep.lambda_min_mr / rep.lambda_max_jjt;

  const double margin =
      1.0 - 2.0 * std::sqrt(gains.kp * gains.kp + gains.kd * gains.kd) * rep.lambda_max_p *
                rep.q_norm_max;
  rep.suggested_decay_omega = std::max(0.0, margin / (2.0 * rep.lambda_max_p));
  return rep;
}

/// Frobenius residual of the zero-force-feedback condition
/// M_Cr(q) + M_m = M_s; zero means force feedback vanishes at q.
inline double zero_gain_condition(const ManipulatorModel& model,
                                  const PayloadAttachment& attachment, const Inertia6& flight,
                                  const Eigen::VectorXd& q, double condition_limit = 1e6) {
  const ManipulatorState st =
      compute_state(model, attachment, q, Eigen::VectorXd::Zero(q.size()));
  const Mat6 m_cr = cartesian_inertia(st, condition_limit);
  return (m_cr + attachment.payload.inertia.matrix6() - flight.matrix6()).norm();
}

struct EnvelopeFit {
  double a = 0.0;         // envelope amplitude
  double omega = 0.0;     // decay rate, 1/s
  double residual = 0.0;  // RMS log-fit residual normalized by the log range
};

/// Least-squares fit of log |x(t)| = log a - Omega t over samples with
/// t >= window_start. Throws "non-decaying-error" when the fitted slope is
/// not negative.
inline EnvelopeFit fit_decay_envelope(const std::vector<double>& t, const std::vector<double>& norm,
                                      double window_start = 0.0) {
  if (t.size() != norm.size() || t.size() < 100) {
    throw ValidationError("bad-envelope-data", "need >= 100 aligned samples");
  }
  double max_norm = 0.0;
  for (double v : norm) max_norm = std::max(max_norm, v);
  if (!(max_norm > 0.0)) {
    throw ValidationError("bad-envelope-data", "trajectory norm is identically zero");
  }
  const double floor = 1e-12 * max_norm;

  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= window_start && norm[i] > floor) {
      ts.push_back(t[i]);
      ys.push_back(std::log(norm[i]));
    }
  }
  if (ts.size() < 10) {
    throw ValidationError("bad-envelope-data", "fit window too short");
  }

  const double n = static_cast<double>(ts.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  const double intercept = (sy - slope * st) / n;

  EnvelopeFit fit;
  fit.omega = -slope;
  fit.a = std::exp(intercept);
  double ss = 0.0, ymin = ys[0], ymax = ys[0];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double e = ys[i] - (intercept + slope * ts[i]);
    ss += e * e;
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  fit.residual = std::sqrt(ss / n) / std::max(1e-12, ymax - ymin);

  if (!(fit.omega > 0.0)) {
    throw SimulationError("non-decaying-error",
                          "fitted envelope slope is non-negative (omega = " +
                              std::to_string(fit.omega) + ")");
  }
  return fit;
}

}  // namespace zgem
