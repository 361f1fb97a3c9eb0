#pragma once

// Fixed-schema CSV trajectory logs. Values are printed with 17 significant
// digits so that doubles round-trip exactly and identical runs produce
// byte-identical files.

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "zgem/error.hpp"

namespace zgem {

struct TrajectoryLog {
  std::vector<std::string> columns;
  std::vector<Eigen::VectorXd> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    throw ValidationError("bad-log-column", "no column named '" + name + "'");
  }

  std::vector<double> column(const std::string& name) const {
    const int idx = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r(idx));
    return out;
  }
};

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io-error", "cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < log.columns.size(); ++i) {
    out << log.columns[i] << (i + 1 < log.columns.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : log.rows) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      out << format_g17(row(i)) << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
}

/// Reads a numeric CSV with a header row.
inline TrajectoryLog read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("io-error", "cannot open '" + path + "'");
  TrajectoryLog log;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("io-error", "empty CSV '" + path + "'");
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto comma = line.find(',', pos);
    log.columns.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Eigen::VectorXd row(log.columns.size());
    std::size_t p = 0;
    for (std::size_t i = 0; i < log.columns.size(); ++i) {
      const auto comma = line.find(',', p);
      const std::string cell = line.substr(p, comma == std::string::npos ? comma : comma - p);
      try {
        row(static_cast<Eigen::Index>(i)) = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("io-error", "non-numeric cell '" + cell + "' in '" + path + "'");
      }
      p = comma == std::string::npos ? line.size() + 1 : comma + 1;
    }
    log.rows.push_back(row);
  }
  return log;
}

struct FidelityReport {
  double max_nu_error = 0.0;    // max over steps of |nu_em - nu_oracle|
  double rms_nu_error = 0.0;
  double max_nu_oracle = 0.0;
  double relative_fidelity = 0.0;  // max error / max |nu_oracle|
  double max_delta_norm = 0.0;     // max |M_D J qdd_err|
  double final_nu_error = 0.0;
};

inline void write_fidelity(const FidelityReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io-error", "cannot open '" + path + "' for writing");
  out << "max_nu_error = " << format_g17(rep.max_nu_error) << "\n"
      << "rms_nu_error = " << format_g17(rep.rms_nu_error) << "\n"
      << "max_nu_oracle = " << format_g17(rep.max_nu_oracle) << "\n"
      << "relative_fidelity = " << format_g17(rep.relative_fidelity) << "\n"
      << "max_delta_norm = " << format_g17(rep.max_delta_norm) << "\n"
      << "final_nu_error = " << format_g17(rep.final_nu_error) << "\n";
}

}  // namespace zgem
