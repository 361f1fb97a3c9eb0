#pragma once

// Scenario schema and validation. A scenario fully determines a run:
// spacecraft pair, arm, sensor, calibration, gains, integration grid, thruster
// schedule and seed. See the shipped files under scenarios/ for the format.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "zgem/config.hpp"
#include "zgem/controller.hpp"
#include "zgem/flexible.hpp"
#include "zgem/manipulator.hpp"
#include "zgem/sensor.hpp"
#include "zgem/spacecraft.hpp"
#include "zgem/stability.hpp"

namespace zgem {

enum class SimMode { kIdealContinuous, kSampled };

struct ThrusterPulse {
  double start = 0.0;  // s, inclusive
  double end = 0.0;    // s, exclusive
  Wrench wrench;       // body frame {C}
};

struct Scenario {
  RigidSpacecraft flight{Inertia6::checked(1.0, Mat3::Identity()), "flight"};
  std::optional<FlexibleSpacecraft> flexible;  // present -> flexible flight spacecraft
  PayloadAttachment attachment{
      RigidSpacecraft{Inertia6::checked(1.0, Mat3::Identity()), "test"}, Vec3::Zero()};
  ManipulatorModel manipulator;
  SensorModel sensor;
  CalibrationParams calibration;
  EmulationGains gains;
  double control_period = 1e-3;
  SimMode mode = SimMode::kIdealContinuous;
  double dt = 1e-3;
  double duration = 10.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd qd0 = Eigen::VectorXd::Zero(6);
  // Injected initial reference error: q_ref(0) = q0 + error_q, etc.
  Eigen::VectorXd error_q = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd error_qd = Eigen::VectorXd::Zero(6);
  std::vector<ThrusterPulse> thrusters;
  JointBox stability_box{Eigen::VectorXd::Constant(6, -0.5), Eigen::VectorXd::Constant(6, 0.5)};
  int stability_samples = 4096;

  /// Active external wrench at time t (pulses are [start, end)).
  Wrench external_wrench(double t) const {
    Wrench w;
    for (const auto& pulse : thrusters) {
      if (t >= pulse.start && t < pulse.end) w = w + pulse.wrench;
    }
    return w;
  }

  bool is_flexible() const { return flexible.has_value() && flexible->n_modes() > 0; }

  void validate() const {
    manipulator.validate();
    sensor.validate();
    gains.validate();
    if (!(duration > 0.0)) throw ValidationError("bad-scenario", "duration must be positive");
    if (!(dt > 0.0)) throw ValidationError("bad-scenario", "dt must be positive");
    if (dt > control_period + 1e-15) {
      throw ValidationError("bad-scenario", "dt must not exceed the control period");
    }
    const double ratio = control_period / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) {
      throw ValidationError("bad-scenario", "control period must be an integer multiple of dt");
    }
    if (q0.size() != 6 || qd0.size() != 6 || error_q.size() != 6 || error_qd.size() != 6) {
      throw ValidationError("bad-scenario", "initial joint vectors must have 6 entries");
    }
    for (std::size_t i = 0; i < thrusters.size(); ++i) {
      if (!(thrusters[i].start < thrusters[i].end)) {
        throw ValidationError("bad-scenario", "thruster pulse must have start < end");
      }
      if (i > 0 && thrusters[i].start < thrusters[i - 1].end) {
        throw ValidationError("bad-scenario", "thruster pulses must be sorted and non-overlapping");
      }
    }

    // Assumption 1 / the flexible analog must hold before any output is produced.
    if (is_flexible()) {
      FlexDeltaInertia::checked(*flexible, attachment.payload.inertia);
      // modal frequencies must be resolvable on the fixed grid
      const Eigen::MatrixXd ratio_m = flexible->m_f().ldlt().solve(flexible->k_f());
      const double w2 =
          Eigen::EigenSolver<Eigen::MatrixXd>(ratio_m).eigenvalues().real().maxCoeff();
      const double f_max = std::sqrt(std::max(0.0, w2)) / (2.0 * M_PI);
      if (f_max >= 0.5 / dt) {
        throw ValidationError("bad-scenario",
                              "modal frequency " + std::to_string(f_max) +
                                  " Hz exceeds the Nyquist rate of the simulation step");
      }
    } else {
      DeltaInertia::checked(flight.inertia, attachment.payload.inertia);
    }
  }
};

namespace detail {

inline Mat3 inertia_from_six(const Eigen::VectorXd& v) {
  Mat3 m;
  m << v(0), v(3), v(4),
       v(3), v(1), v(5),
       v(4), v(5), v(2);
  return m;
}

inline ManipulatorModel manipulator_from_config(const ConfigTable& tab) {
  const std::string kind = tab.str_or("model", "elbow6r");
  if (kind == "elbow6r") {
    ManipulatorModel m = ManipulatorModel::elbow6r();
    m.gravity_dir = tab.vec_or("gravity_dir", Vec3(0, 0, -1)).normalized();
    m.jacobian_condition_limit = tab.num_or("jacobian_condition_limit", 1e6);
    return m;
  }
  if (kind == "cartesian6") {
    ManipulatorModel m = ManipulatorModel::cartesian_stage(tab.vec("stage_inertia", 6));
    m.gravity_dir = tab.vec_or("gravity_dir", Vec3(0, 0, -1)).normalized();
    return m;
  }
  if (kind != "custom") {
    throw ValidationError("config-schema", "unknown manipulator model '" + kind + "'");
  }
  ManipulatorModel m;
  m.kind = ManipulatorKind::kSerial6R;
  m.gravity_dir = tab.vec_or("gravity_dir", Vec3(0, 0, -1)).normalized();
  m.jacobian_condition_limit = tab.num_or("jacobian_condition_limit", 1e6);
  for (int i = 1; i <= 6; ++i) {
    const std::string n = std::to_string(i);
    const Eigen::VectorXd jp = tab.vec("joint" + n, 4);  // a, alpha, d, theta_offset
    m.joints.push_back({jp(0), jp(1), jp(2), jp(3)});
    LinkParams link;
    link.mass = tab.num("link" + n + "_mass");
    link.com = tab.vec("link" + n + "_com", 3);
    link.inertia = inertia_from_six(tab.vec("link" + n + "_inertia", 6));
    m.links.push_back(link);
  }
  return m;
}

}  // namespace detail

inline Scenario load_scenario(const Config& cfg) {
  Scenario sc;

  const ConfigTable& flight = cfg.section("flight");
  const Inertia6 flight_inertia =
      Inertia6::checked(flight.num("mass"), detail::inertia_from_six(flight.vec("inertia", 6)));
  sc.flight = {flight_inertia, flight.str_or("name", "flight")};

  const ConfigTable& test = cfg.section("test");
  sc.attachment.payload = {
      Inertia6::checked(test.num("mass"), detail::inertia_from_six(test.vec("inertia", 6))),
      test.str_or("name", "test")};
  sc.attachment.com_offset = test.vec_or("com_offset", Vec3::Zero());

  sc.manipulator = detail::manipulator_from_config(cfg.section("manipulator"));

  if (cfg.has("flexible")) {
    const ConfigTable& flex = cfg.section("flexible");
    const Eigen::MatrixXd m_f = flex.mat("M_f");
    const Eigen::MatrixXd m_sf = flex.mat("M_sf");
    const Eigen::MatrixXd k_f = flex.mat("K_f");
    const Eigen::MatrixXd d_f =
        flex.has("D_f") ? flex.mat("D_f")
                        : Eigen::MatrixXd::Zero(m_f.rows(), m_f.cols()).eval();
    sc.flexible = FlexibleSpacecraft::checked(flight_inertia, m_f, m_sf, k_f, d_f);
  }

  if (cfg.has("sensor")) {
    const ConfigTable& sen = cfg.section("sensor");
    sc.sensor.offset = Wrench::from_vec6(sen.vec_or("offset", Vec6::Zero()));
    sc.sensor.noise_force = sen.num_or("noise_force", 0.0);
    sc.sensor.noise_torque = sen.num_or("noise_torque", 0.0);
    sc.sensor.resolution_force = sen.num_or("resolution_force", 0.0);
    sc.sensor.resolution_torque = sen.num_or("resolution_torque", 0.0);
  }

  const ConfigTable& ctrl = cfg.section("controller");
  sc.gains = {ctrl.num("kp"), ctrl.num("kd")};
  sc.control_period = ctrl.num_or("control_period", 1e-3);

  const ConfigTable& sim = cfg.section("sim");
  const std::string mode = sim.str_or("mode", "ideal");
  if (mode == "ideal") {
    sc.mode = SimMode::kIdealContinuous;
  } else if (mode == "sampled") {
    sc.mode = SimMode::kSampled;
  } else {
    throw ValidationError("config-schema", "mode must be \"ideal\" or \"sampled\"");
  }
  sc.dt = sim.num_or("dt", 1e-3);
  sc.duration = sim.num("duration");
  sc.seed = static_cast<std::uint64_t>(sim.num_or("seed", 0.0));
  sc.sensor.sample_period = sc.control_period;
  sc.sensor.seed = sc.seed;
  sc.q0 = sim.vec_or("initial_q", Eigen::VectorXd::Zero(6));
  sc.qd0 = sim.vec_or("initial_qd", Eigen::VectorXd::Zero(6));
  sc.error_q = sim.vec_or("error_q", Eigen::VectorXd::Zero(6));
  sc.error_qd = sim.vec_or("error_qd", Eigen::VectorXd::Zero(6));

  // Calibration defaults to the exact plant parameters (perfect compensation);
  // an explicit [calibration] section overrides individual estimates.
  sc.calibration = CalibrationParams::perfect(sc.attachment, sc.sensor.offset,
                                              sc.manipulator.gravity_dir);
  if (cfg.has("calibration")) {
    const ConfigTable& cal = cfg.section("calibration");
    sc.calibration.mass = cal.num_or("mass", sc.calibration.mass);
    sc.calibration.com = cal.vec_or("com", sc.calibration.com);
    sc.calibration.offset = Wrench::from_vec6(cal.vec_or("offset", sc.calibration.offset.vec6()));
    sc.calibration.gravity_dir =
        cal.vec_or("gravity_dir", sc.calibration.gravity_dir).normalized();
  }

  for (const ConfigTable& pulse : cfg.blocks("thruster")) {
    sc.thrusters.push_back(
        {pulse.num("start"), pulse.num("end"), Wrench::from_vec6(pulse.vec("wrench", 6))});
  }
  std::sort(sc.thrusters.begin(), sc.thrusters.end(),
            [](const ThrusterPulse& a, const ThrusterPulse& b) { return a.start < b.start; });

  if (cfg.has("stability")) {
    const ConfigTable& st = cfg.section("stability");
    if (st.has("box_lower") || st.has("box_upper")) {
      sc.stability_box = {st.vec("box_lower", 6), st.vec("box_upper", 6)};
    } else {
      sc.stability_box =
          JointBox::centered(st.vec_or("box_center", sc.q0), st.num_or("box_half_width", 0.3));
    }
    sc.stability_samples = static_cast<int>(st.num_or("samples", 4096));
  } else {
    sc.stability_box = JointBox::centered(sc.q0, 0.3);
  }

  sc.validate();
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  return load_scenario(Config::parse_file(path));
}

}  // namespace zgem
