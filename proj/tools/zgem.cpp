// zgem command-line workbench: closed-loop emulation runs, oracle comparison,
// F/M sensor calibration and stability / micro-g analysis, driven by scenario
// config files. See README.md and scenarios/ for the formats.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "zgem/calibration.hpp"
#include "zgem/harness.hpp"
#include "zgem/logging.hpp"
#include "zgem/scenario.hpp"
#include "zgem/stability.hpp"

namespace fs = std::filesystem;
using namespace zgem;

namespace {

struct CommonOpts {
  std::string scenario_path;
  std::string out_dir = "out";
  std::string mode_override;
  std::int64_t seed_override = -1;
};

Scenario load_with_overrides(const CommonOpts& opts) {
  Scenario sc = load_scenario_file(opts.scenario_path);
  if (!opts.mode_override.empty()) {
    if (opts.mode_override == "ideal") {
      sc.mode = SimMode::kIdealContinuous;
    } else if (opts.mode_override == "sampled") {
      sc.mode = SimMode::kSampled;
    } else {
      throw ValidationError("bad-scenario", "--mode must be ideal or sampled");
    }
  }
  if (opts.seed_override >= 0) {
    sc.seed = static_cast<std::uint64_t>(opts.seed_override);
    sc.sensor.seed = sc.seed;
  }
  sc.validate();
  return sc;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--scenario", opts.scenario_path, "scenario config file")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--mode", opts.mode_override, "override run mode: ideal | sampled");
  cmd->add_option("--seed", opts.seed_override, "override the scenario seed");
}

void write_stability_report(const StabilityReport& rep, std::ostream& out) {
  out << "q_norm_max = " << format_g17(rep.q_norm_max) << "\n"
      << "alpha = " << format_g17(rep.alpha) << "\n"
      << "satisfied_eq_alpha = " << (rep.satisfied_eq_alpha ? "true" : "false") << "\n"
      << "satisfied_eq_mass = " << (rep.satisfied_eq_mass ? "true" : "false") << "\n"
      << "p11 = " << format_g17(rep.p(0, 0)) << "\n"
      << "p12 = " << format_g17(rep.p(0, 1)) << "\n"
      << "p22 = " << format_g17(rep.p(1, 1)) << "\n"
      << "lambda_max_p = " << format_g17(rep.lambda_max_p) << "\n"
      << "sigma = " << format_g17(rep.sigma) << "\n"
      << "lambda_min_mr = " << format_g17(rep.lambda_min_mr) << "\n"
      << "lambda_max_jjt = " << format_g17(rep.lambda_max_jjt) << "\n"
      << "lambda_max_mm = " << format_g17(rep.lambda_max_mm) << "\n"
      << "suggested_decay_omega = " << format_g17(rep.suggested_decay_omega) << "\n"
      << "samples = " << rep.samples << "\n";
}

std::vector<CalibrationPose> read_pose_dataset(const std::string& path) {
  const TrajectoryLog csv = read_csv(path);
  const std::vector<std::string> expected = {
      "q1",  "q2",  "q3",  "q4",  "q5",  "q6",  "r11", "r12", "r13", "r21", "r22",
      "r23", "r31", "r32", "r33", "fx",  "fy",  "fz",  "nx",  "ny",  "nz"};
  if (csv.columns != expected) {
    throw ValidationError("bad-dataset",
                          "pose dataset must have columns q1..q6, r11..r33 (row-major), fx..nz");
  }
  std::vector<CalibrationPose> poses;
  for (const auto& row : csv.rows) {
    CalibrationPose pose;
    pose.q = row.segment<6>(0);
    Mat3 r;
    r << row(6), row(7), row(8), row(9), row(10), row(11), row(12), row(13), row(14);
    pose.r = RotationMatrix::checked(r, 1e-6);
    pose.f_s_measured = Wrench(row.segment<3>(15), row.segment<3>(18));
    poses.push_back(pose);
  }
  if (poses.empty()) throw ValidationError("empty-dataset", "pose dataset has no rows");
  return poses;
}

void write_calibration_result(const CalibrationResult& cal, std::ostream& out) {
  auto vec3 = [](const Vec3& v, const std::string& name, std::ostream& o) {
    o << name << "_x = " << format_g17(v.x()) << "\n"
      << name << "_y = " << format_g17(v.y()) << "\n"
      << name << "_z = " << format_g17(v.z()) << "\n";
  };
  vec3(cal.f_0_hat.force, "f0", out);
  vec3(cal.f_0_hat.torque, "n0", out);
  out << "mass = " << format_g17(cal.m_hat) << "\n";
  vec3(cal.k_hat, "k", out);
  vec3(cal.c_hat, "c", out);
  out << "cond_psi1 = " << format_g17(cal.cond_psi1) << "\n"
      << "cond_psi2 = " << format_g17(cal.cond_psi2) << "\n";
}

int cmd_simulate(const CommonOpts& opts) {
  const Scenario sc = load_with_overrides(opts);
  const TrajectoryLog log = simulate_scenario(sc);
  fs::create_directories(opts.out_dir);
  write_csv(log, (fs::path(opts.out_dir) / "trajectory.csv").string());
  std::cout << "wrote " << (fs::path(opts.out_dir) / "trajectory.csv").string() << " ("
            << log.rows.size() << " rows)\n";
  return 0;
}

int cmd_compare(const CommonOpts& opts) {
  const Scenario sc = load_with_overrides(opts);
  const CompareOutput out = run_with_oracle(sc);
  fs::create_directories(opts.out_dir);
  write_csv(out.trajectory, (fs::path(opts.out_dir) / "trajectory.csv").string());
  write_csv(out.oracle, (fs::path(opts.out_dir) / "oracle.csv").string());
  write_fidelity(out.fidelity, (fs::path(opts.out_dir) / "fidelity.txt").string());
  std::cout << "relative_fidelity = " << format_g17(out.fidelity.relative_fidelity) << "\n"
            << "max_nu_error = " << format_g17(out.fidelity.max_nu_error) << "\n"
            << "max_delta_norm = " << format_g17(out.fidelity.max_delta_norm) << "\n";
  return 0;
}

int cmd_analyze_stability(const CommonOpts& opts) {
  const Scenario sc = load_with_overrides(opts);
  const StabilityReport rep = check_mass_inequality(sc.manipulator, sc.attachment, sc.gains,
                                                    sc.stability_box, sc.stability_samples);
  fs::create_directories(opts.out_dir);
  std::ofstream file((fs::path(opts.out_dir) / "stability.txt").string());
  write_stability_report(rep, file);
  write_stability_report(rep, std::cout);
  return 0;
}

int cmd_calibrate(const std::string& data_path, const std::string& out_dir) {
  const std::vector<CalibrationPose> poses = read_pose_dataset(data_path);
  const CalibrationResult cal = calibrate(poses);
  fs::create_directories(out_dir);
  std::ofstream file((fs::path(out_dir) / "calibration.txt").string());
  write_calibration_result(cal, file);
  write_calibration_result(cal, std::cout);

  TrajectoryLog residuals;
  residuals.columns = {"pose", "force_residual", "moment_residual"};
  for (std::size_t i = 0; i < poses.size(); ++i) {
    Eigen::VectorXd row(3);
    row << static_cast<double>(i), cal.force_residuals[i], cal.moment_residuals[i];
    residuals.rows.push_back(row);
  }
  write_csv(residuals, (fs::path(out_dir) / "residuals.csv").string());
  return 0;
}

int cmd_microg(const std::string& data_path, double flight_mass, double resolution) {
  const std::vector<CalibrationPose> poses = read_pose_dataset(data_path);
  const CalibrationResult cal = calibrate(poses);
  std::cout << "gamma = " << format_g17(microg_index(poses, cal, flight_mass)) << "\n";
  std::cout << "gamma_mean_norm = "
            << format_g17(microg_index_mean_norm(poses, cal, flight_mass)) << "\n";
  if (cal.c_hat.norm() > 0.0) {
    std::cout << "gamma_rotational = "
              << format_g17(microg_index_rotational(poses, cal, flight_mass)) << "\n";
  }
  if (resolution > 0.0) {
    std::cout << "gamma_floor = " << format_g17(resolution_floor(resolution, flight_mass)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zgem - zero-g spacecraft emulation workbench"};
  app.require_subcommand(1);

  CommonOpts sim_opts, cmp_opts, stab_opts;
  std::string data_path, cal_out = "out";
  double flight_mass = 0.0, resolution = 0.0;

  CLI::App* sim = app.add_subcommand("simulate", "run a closed-loop emulation scenario");
  add_common(sim, sim_opts);
  CLI::App* cmp = app.add_subcommand("compare", "run a scenario against the free-floating oracle");
  add_common(cmp, cmp_opts);
  CLI::App* stab = app.add_subcommand("analyze-stability", "evaluate the stability conditions");
  add_common(stab, stab_opts);

  CLI::App* cal = app.add_subcommand("calibrate", "identify sensor offset and gravity parameters");
  cal->add_option("--data", data_path, "pose/reading CSV dataset")->required();
  cal->add_option("--out", cal_out, "output directory");

  CLI::App* mug = app.add_subcommand("microg-index", "micro-gravity quality of a pose dataset");
  mug->add_option("--data", data_path, "pose/reading CSV dataset")->required();
  mug->add_option("--flight-mass", flight_mass, "emulated flight spacecraft mass, kg")->required();
  mug->add_option("--resolution", resolution, "sensor force resolution, N");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (cmp->parsed()) return cmd_compare(cmp_opts);
    if (stab->parsed()) return cmd_analyze_stability(stab_opts);
    if (cal->parsed()) return cmd_calibrate(data_path, cal_out);
    if (mug->parsed()) return cmd_microg(data_path, flight_mass, resolution);
  } catch (const ValidationError& e) {
    std::cerr << "ERROR " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const SimulationError& e) {
    std::cerr << "ERROR " << e.code() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ERROR internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
