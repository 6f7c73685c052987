#pragma once

// Result files: legacy VTK snapshots of the end-time slice, the rate table,
// the run report, and readers for the comparisons done by the CLI.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stflow/driver.hpp"
#include "stflow/fields.hpp"

namespace stflow {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

inline void close_checked(std::ofstream& out, const std::filesystem::path& p) {
  out.close();
  if (!out) throw IoError("error writing '" + p.string() + "'");
}

}  // namespace detail

struct CellArray {
  std::string name;
  std::vector<double> values;  // one per column
};

/// Quad cells of the columns of a mesh with per-column scalar arrays.
inline void write_vtk(std::ostream& out, const SpaceTimeMesh& mesh, const std::vector<CellArray>& arrays,
                      const std::string& title) {
  const auto& cols = mesh.columns();
  const std::size_t n = cols.size();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << 4 * n << " double\n";
  for (std::size_t c = 0; c < n; ++c) {
    const auto& el = mesh.elements()[cols[c].first_element];
    out << format_double(el.x0) << ' ' << format_double(el.y0) << " 0\n"
        << format_double(el.x1) << ' ' << format_double(el.y0) << " 0\n"
        << format_double(el.x1) << ' ' << format_double(el.y1) << " 0\n"
        << format_double(el.x0) << ' ' << format_double(el.y1) << " 0\n";
  }
  out << "CELLS " << n << ' ' << 5 * n << '\n';
  for (std::size_t c = 0; c < n; ++c) out << "4 " << 4 * c << ' ' << 4 * c + 1 << ' ' << 4 * c + 2 << ' ' << 4 * c + 3 << '\n';
  out << "CELL_TYPES " << n << '\n';
  for (std::size_t c = 0; c < n; ++c) out << "9\n";
  out << "CELL_DATA " << n << '\n';
  for (const auto& a : arrays) {
    if (a.values.size() != n) throw MeshError("write_vtk: array '" + a.name + "' has the wrong length");
    out << "SCALARS " << a.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : a.values) out << format_double(v) << '\n';
  }
}

/// End-time slice: S_w, P_o, level_s, level_t per column.
inline std::vector<CellArray> end_time_arrays(const SpaceTimeMesh& mesh, const State& st) {
  std::vector<CellArray> a{{"S_w", {}}, {"P_o", {}}, {"level_s", {}}, {"level_t", {}}};
  for (std::size_t c = 0; c < mesh.columns().size(); ++c) {
    const int e = mesh.last_element(static_cast<int>(c));
    a[0].values.push_back(st.saturation[e]);
    a[1].values.push_back(st.pressure[e]);
    a[2].values.push_back(mesh.columns()[c].level_s);
    a[3].values.push_back(mesh.columns()[c].level_t);
  }
  return a;
}

/// Normalized indicators reduced to columns by the maximum over time slices.
inline std::vector<CellArray> indicator_arrays(const SpaceTimeMesh& mesh, const IndicatorField& f) {
  std::vector<std::pair<std::string, std::vector<double>>> src{
      {"eta_t_r", phase_max(f.eta_tr)}, {"eta_s_r", phase_max(f.eta_sr)}, {"eta_t_f", phase_max(f.eta_tf)},
      {"eta_s_f", phase_max(f.eta_sf)}, {"eta_t_p", phase_max(f.eta_tp)}, {"eta_s_p", phase_max(f.eta_sp)},
      {"eps_t", f.eps_t},               {"eps_s", f.eps_s}};
  std::vector<CellArray> out;
  for (auto& [name, v] : src) {
    CellArray a{name, std::vector<double>(mesh.columns().size(), 0.0)};
    for (const auto& el : mesh.elements()) a.values[el.column] = std::max(a.values[el.column], v[el.id]);
    out.push_back(std::move(a));
  }
  auto lv = end_time_arrays(mesh, uniform_state(mesh, 0, 0));
  out.push_back(lv[2]);
  out.push_back(lv[3]);
  return out;
}

inline void write_rates_csv(std::ostream& out, const std::vector<RateRow>& rows) {
  out << "time_days,qo_ft3_day,qw_ft3_day,cum_oil_ft3,cum_water_ft3\n";
  for (const auto& r : rows)
    out << format_double(r.time_days) << ',' << format_double(r.qo_ft3_day) << ',' << format_double(r.qw_ft3_day)
        << ',' << format_double(r.cum_oil_ft3) << ',' << format_double(r.cum_water_ft3) << '\n';
}

inline std::vector<RateRow> read_rates_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("time_days,", 0) != 0) throw IoError(p.string() + ": missing header");
  std::vector<RateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    RateRow r;
    if (!(ls >> r.time_days >> r.qo_ft3_day >> r.qw_ft3_day >> r.cum_oil_ft3 >> r.cum_water_ft3))
      throw IoError(p.string() + ": malformed row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

inline void write_report(std::ostream& out, const RunReport& r) {
  out << "[run]\nmode = " << to_string(r.mode) << "\nsteps = " << r.steps << "\npasses = " << r.passes
      << "\nnewton_iterations = " << r.newton_iterations << "\nlinear_iterations = " << r.linear_iterations
      << "\nelement_passes = " << format_double(r.element_passes) << "\n\n[timing]\nsystem_setup_seconds = "
      << format_double(r.setup_seconds) << "\nlinear_solve_seconds = " << format_double(r.linear_seconds)
      << "\ndata_handle_seconds = " << format_double(r.data_seconds)
      << "\ntotal_seconds = " << format_double(r.total_seconds) << "\n\n[balance]\ninjected_water_ft3 = "
      << format_double(r.injected_water_ft3) << "\nmass_balance_oil = " << format_double(r.mass_balance_oil)
      << "\nmass_balance_water = " << format_double(r.mass_balance_water) << '\n';
}

/// Flat "section.key" -> value map of a report file.
inline std::map<std::string, std::string> read_report(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::map<std::string, std::string> out;
  std::string line, sec;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      sec = line.substr(1, line.find(']') - 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(p.string() + ": malformed line '" + line + "'");
    out[sec + "." + detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

/// Writes rates.csv, report.txt, final_saturation.txt, final_pressure.txt,
/// one VTK file per snapshot and, when kept, one per pass indicator field.
inline void export_results(const SimulationResult& res, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    auto p = dir / "rates.csv";
    auto out = detail::open_out(p);
    write_rates_csv(out, res.rates);
    detail::close_checked(out, p);
  }
  {
    auto p = dir / "report.txt";
    auto out = detail::open_out(p);
    write_report(out, res.report);
    detail::close_checked(out, p);
  }
  if (res.final_history.saturation.size() > 0) {
    save_field((dir / "final_saturation.txt").string(), res.final_history.saturation);
    save_field((dir / "final_pressure.txt").string(), res.final_history.pressure);
  }
  for (const auto& s : res.snapshots) {
    auto p = dir / ("snapshot_" + std::to_string(s.step + 1) + ".vtk");
    auto out = detail::open_out(p);
    write_vtk(out, s.mesh, end_time_arrays(s.mesh, s.state), "t = " + format_double(s.time_days) + " days");
    detail::close_checked(out, p);
  }
  for (std::size_t n = 0; n < res.indicators.size(); ++n)
    for (std::size_t k = 0; k < res.indicators[n].size(); ++k) {
      const auto& pi = res.indicators[n][k];
      auto p = dir / ("indicators_" + std::to_string(n + 1) + "_" + std::to_string(k) + ".vtk");
      auto out = detail::open_out(p);
      write_vtk(out, pi.mesh, indicator_arrays(pi.mesh, pi.normalized), to_string(pi.kind) + " pass indicators");
      detail::close_checked(out, p);
    }
}

}  // namespace stflow
