#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hardyheat/error.hpp"
#include "hardyheat/evolve.hpp"
#include "hardyheat/grid.hpp"
#include "hardyheat/operators.hpp"
#include "hardyheat/profile.hpp"
#include "hardyheat/verify.hpp"

namespace hardyheat {

using json = nlohmann::json;  // std::map-backed: stable (sorted) key order

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Number tagged with its provenance ("measured", "reference", "fitted",
/// "derived", "config") for the run summary.
inline json tagged(double value, const std::string& provenance) {
  return json{{"provenance", provenance}, {"value", value}};
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  require(bool(out), "IoError", "cannot open " + path + " for writing");
  return out;
}

} // namespace detail

inline void write_field_csv(const std::string& path, const RadialField& f) {
  auto out = detail::open_out(path);
  out << "r,value\n";
  for (int i = 0; i < f.size(); ++i)
    out << format_g17(f.grid->center(i)) << ',' << format_g17(f.values[i])
        << '\n';
}

inline void write_trajectory_csv(const std::string& path,
                                 const Trajectory& traj) {
  auto out = detail::open_out(path);
  out << "t,r,value\n";
  for (const auto& s : traj.snapshots)
    for (int i = 0; i < s.size(); ++i)
      out << format_g17(s.time) << ',' << format_g17(s.grid->center(i)) << ','
          << format_g17(s.values[i]) << '\n';
}

inline void write_diagnostics_csv(const std::string& path,
                                  const Trajectory& traj) {
  auto out = detail::open_out(path);
  out << "t";
  for (double rho : traj.rho_list) out << ",mass_rho" << format_g17(rho);
  out << ",sup,absorption_integral\n";
  for (const auto& row : traj.diagnostics) {
    out << format_g17(row.t);
    for (double m : row.ball_mass) out << ',' << format_g17(m);
    out << ',' << format_g17(row.sup) << ',' << format_g17(row.absorbed_cum)
        << '\n';
  }
}

inline void write_grid_json(const std::string& path, const RadialGrid& g) {
  json j;
  j["faces"] = g.faces();
  j["grading"] = g.grading();
  j["lambda"] = g.lambda();
  j["N"] = g.dim();
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline void write_matrix_csv(const std::string& path, const OperatorMatrix& A) {
  auto out = detail::open_out(path);
  out << "i,sub,diag,super,mass\n";
  for (int i = 0; i < A.size(); ++i)
    out << i << ',' << format_g17(A.sub(i)) << ',' << format_g17(A.diag(i))
        << ',' << format_g17(A.super(i)) << ',' << format_g17(A.mass(i))
        << '\n';
}

inline void write_profile_csv(const std::string& path,
                              const ProfileSolution& sol) {
  auto out = detail::open_out(path);
  out << "xi,v,v_times_exp\n";
  const RadialGrid& g = *sol.grid;
  for (int i = 0; i < g.size(); ++i) {
    const double xi = g.center(i);
    out << format_g17(xi) << ',' << format_g17(sol.v[i]) << ','
        << format_g17(sol.v[i] * std::exp(xi * xi / 8.0)) << '\n';
  }
}

inline json report_to_json(const VerifyReport& rep) {
  json j;
  j["name"] = rep.name;
  j["pass"] = rep.pass;
  j["measured"] = rep.measured;
  j["reference"] = rep.reference;
  j["provenance"] = rep.provenance;
  j["tolerance"] = rep.tolerance;
  j["notes"] = rep.notes;
  return j;
}

inline void write_reports_json(const std::string& path,
                               const std::vector<VerifyReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  auto out = detail::open_out(path);
  out << arr.dump(2) << '\n';
}

/// Human-readable pass/fail table.
inline std::string render_report_table(const std::vector<VerifyReport>& reports) {
  std::string out;
  char line[256];
  for (const auto& r : reports) {
    std::string meas;
    for (std::size_t i = 0; i < r.measured.size() && i < 3; ++i) {
      char b[32];
      std::snprintf(b, sizeof b, "%.6g", r.measured[i]);
      meas += (i ? " " : "") + std::string(b);
    }
    if (r.measured.size() > 3) meas += " ...";
    std::snprintf(line, sizeof line, "[%s] %-26s measured: %-28s %s\n",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), meas.c_str(),
                  r.notes.c_str());
    out += line;
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "IoError", "cannot open " + path);
  json j;
  in >> j;
  return j;
}

} // namespace hardyheat
