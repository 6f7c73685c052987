#pragma once

// Discrete unknowns on a space-time mesh and their transfer between meshes.
//
// Cell unknowns are the oil pressure and water saturation of every element.
// Flux unknowns are the auxiliary (mobility-free) phase fluxes on interior
// sub-faces, stored as rates (ft^3 md / (day cp) style units before the
// mobility factor is applied); interior sub-faces come first in the mesh
// numbering, so the flux arrays are indexed by sub-face id.
//
// Start-of-step data lives on the finest spatial grid (StepHistory). Phase
// masses are kept alongside P and S so that any mesh of the next step sees
// exactly the mass the previous step ended with, whatever its resolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "stflow/error.hpp"
#include "stflow/field.hpp"
#include "stflow/mesh.hpp"
#include "stflow/physics.hpp"

namespace stflow {

struct State {
  std::vector<double> pressure;    // psi, per element
  std::vector<double> saturation;  // water, per element
  std::vector<double> flux_oil;    // per interior sub-face
  std::vector<double> flux_water;

  std::vector<double>& flux(Phase p) { return p == Phase::Oil ? flux_oil : flux_water; }
  const std::vector<double>& flux(Phase p) const { return p == Phase::Oil ? flux_oil : flux_water; }

  bool conforms_to(const SpaceTimeMesh& mesh) const {
    return pressure.size() == mesh.num_elements() && saturation.size() == mesh.num_elements() &&
           flux_oil.size() == mesh.num_interior_subfaces() && flux_water.size() == mesh.num_interior_subfaces();
  }
};

inline State uniform_state(const SpaceTimeMesh& mesh, double p, double s_w) {
  State st;
  st.pressure.assign(mesh.num_elements(), p);
  st.saturation.assign(mesh.num_elements(), s_w);
  st.flux_oil.assign(mesh.num_interior_subfaces(), 0.0);
  st.flux_water.assign(mesh.num_interior_subfaces(), 0.0);
  return st;
}

/// Rock properties of the spatial cell of an element, taken from the rock
/// field level matching the element's spatial level.
struct CellRock {
  double kx = 0, ky = 0, phi = 0;
};

inline CellRock cell_rock(const RockField& rock, const Element& e) {
  if (e.level_s >= rock.levels()) throw MeshError("rock field has fewer levels than the mesh");
  return {rock.kx[e.level_s](e.i, e.j), rock.ky[e.level_s](e.i, e.j), rock.porosity[e.level_s](e.i, e.j)};
}

/// Phase masses per unit bulk volume, phi * rho_alpha * s_alpha.
struct MassDensity {
  double oil = 0, water = 0;
};

inline MassDensity mass_density(const FluidRockModel& m, double phi, double p, double s_w) {
  return {phi * phase_density(m, Phase::Oil, p, s_w).value * (1.0 - s_w),
          phi * phase_density(m, Phase::Water, p, s_w).value * s_w};
}

/// End-of-step solution on the finest spatial grid; start data for the next step.
struct StepHistory {
  Field2D pressure;
  Field2D saturation;
  Field2D mass_oil;  // lb per finest cell
  Field2D mass_water;
};

/// Initial condition: uniform P and S with masses from the finest-level porosity.
inline StepHistory initial_history(const CoarseGrid& grid, const MeshLevels& levels, const FluidRockModel& m,
                                   double p0, double s0) {
  const int NX = grid.nx << levels.space_max, NY = grid.ny << levels.space_max;
  StepHistory h{Field2D(NX, NY, p0), Field2D(NX, NY, s0), Field2D(NX, NY), Field2D(NX, NY)};
  const auto& phi = m.rock.porosity.at(static_cast<std::size_t>(levels.space_max));
  if (phi.nx != NX || phi.ny != NY) throw ConfigError("rock field does not match the finest grid");
  const double v = (grid.dx / (1 << levels.space_max)) * (grid.dy / (1 << levels.space_max)) * grid.thickness;
  for (int j = 0; j < NY; ++j)
    for (int i = 0; i < NX; ++i) {
      const auto md = mass_density(m, phi(i, j), p0, s0);
      h.mass_oil(i, j) = md.oil * v;
      h.mass_water(i, j) = md.water * v;
    }
  return h;
}

/// Start-of-step data of each column of a mesh.
struct ColumnStart {
  double pressure = 0;    // volume average
  double saturation = 0;  // volume average
  double mass_oil = 0;    // lb
  double mass_water = 0;
};

inline std::vector<ColumnStart> column_start(const SpaceTimeMesh& mesh, const StepHistory& h) {
  if (h.pressure.nx != mesh.finest_nx() || h.pressure.ny != mesh.finest_ny())
    throw MeshError("history does not match the mesh's finest grid");
  std::vector<ColumnStart> out(mesh.columns().size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto fp = mesh.footprint(static_cast<int>(c));
    ColumnStart cs;
    double n = 0;
    for (int J = fp[2]; J < fp[3]; ++J)
      for (int I = fp[0]; I < fp[1]; ++I) {
        cs.pressure += h.pressure(I, J);
        cs.saturation += h.saturation(I, J);
        cs.mass_oil += h.mass_oil(I, J);
        cs.mass_water += h.mass_water(I, J);
        n += 1;
      }
    cs.pressure /= n;
    cs.saturation /= n;
    out[c] = cs;
  }
  return out;
}

/// Finest-grid history from the end-time slice of every column. Column masses
/// are spread over the covered finest cells in proportion to volume.
inline StepHistory history_from_state(const SpaceTimeMesh& mesh, const State& st, const FluidRockModel& m) {
  if (!st.conforms_to(mesh)) throw MeshError("history_from_state: state does not match mesh");
  const int NX = mesh.finest_nx(), NY = mesh.finest_ny();
  StepHistory h{Field2D(NX, NY), Field2D(NX, NY), Field2D(NX, NY), Field2D(NX, NY)};
  for (std::size_t c = 0; c < mesh.columns().size(); ++c) {
    const int e = mesh.last_element(static_cast<int>(c));
    const auto& el = mesh.elements()[e];
    const auto rock = cell_rock(m.rock, el);
    const auto md = mass_density(m, rock.phi, st.pressure[e], st.saturation[e]);
    const auto fp = mesh.footprint(static_cast<int>(c));
    const double cells = static_cast<double>((fp[1] - fp[0]) * (fp[3] - fp[2]));
    for (int J = fp[2]; J < fp[3]; ++J)
      for (int I = fp[0]; I < fp[1]; ++I) {
        h.pressure(I, J) = st.pressure[e];
        h.saturation(I, J) = st.saturation[e];
        h.mass_oil(I, J) = md.oil * el.volume / cells;
        h.mass_water(I, J) = md.water * el.volume / cells;
      }
  }
  return h;
}

namespace detail {

/// Old element containing the space-time midpoint of a new element.
inline int ancestor_element(const SpaceTimeMesh& old_mesh, const SpaceTimeMesh& new_mesh, int e) {
  const auto& el = new_mesh.elements()[e];
  const auto fp = new_mesh.footprint(el.column);
  const int oc = old_mesh.column_at_finest(fp[0], fp[2]);
  const auto ofp = old_mesh.footprint(oc);
  if (fp[0] < ofp[0] || fp[1] > ofp[1] || fp[2] < ofp[2] || fp[3] > ofp[3])
    throw MeshError("project_state: new mesh is not a refinement of the old mesh");
  const int oe = old_mesh.element_at(oc, 0.5 * (el.t0 + el.t1));
  const auto& o = old_mesh.elements()[oe];
  if (el.t0 < o.t0 - 1e-12 * old_mesh.grid().dt || el.t1 > o.t1 + 1e-12 * old_mesh.grid().dt)
    throw MeshError("project_state: new mesh is not a refinement of the old mesh");
  return oe;
}

/// Length-time averaged auxiliary flux density (per unit face length) on the
/// low or high side of an old element in the given orientation.
inline double side_density(const SpaceTimeMesh& mesh, const State& st, Phase ph, int e, Orientation o, bool high) {
  const auto& el = mesh.elements()[e];
  const double side = o == Orientation::X ? el.dy() : el.dx();
  double acc = 0;
  for (int f : mesh.faces_of(e)) {
    const auto& sf = mesh.subfaces()[f];
    if (sf.orientation != o || sf.boundary()) continue;
    const bool on_high = sf.minus == e;
    if (on_high != high) continue;
    acc += st.flux(ph)[f] * (sf.t1 - sf.t0);
  }
  return acc / (side * el.duration);
}

}  // namespace detail

/// Warm start on a refined mesh: cells inherit their ancestor's values; faces
/// inside an old interface keep its flux density, faces created inside an old
/// element take the RT0 interpolant between that element's side fluxes.
inline State project_state(const SpaceTimeMesh& old_mesh, const State& old_state, const SpaceTimeMesh& new_mesh) {
  const auto &og = old_mesh.grid(), &ng = new_mesh.grid();
  if (og.step != ng.step || og.nx != ng.nx || og.ny != ng.ny || og.dt != ng.dt || og.dx != ng.dx || og.dy != ng.dy)
    throw MeshError("project_state: meshes belong to different coarse steps or grids");
  if (old_mesh.levels().space_max != new_mesh.levels().space_max)
    throw MeshError("project_state: meshes use different level caps");
  if (!old_state.conforms_to(old_mesh)) throw MeshError("project_state: state does not match old mesh");

  State st;
  const std::size_t ne = new_mesh.num_elements();
  std::vector<int> anc(ne);
  st.pressure.resize(ne);
  st.saturation.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    anc[e] = detail::ancestor_element(old_mesh, new_mesh, static_cast<int>(e));
    st.pressure[e] = old_state.pressure[anc[e]];
    st.saturation[e] = old_state.saturation[anc[e]];
  }
  const std::size_t nf = new_mesh.num_interior_subfaces();
  st.flux_oil.assign(nf, 0.0);
  st.flux_water.assign(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& sf = new_mesh.subfaces()[f];
    const int om = anc[sf.minus], op = anc[sf.plus];
    const double len = sf.s1 - sf.s0;
    const double sm = 0.5 * (sf.s0 + sf.s1), tm = 0.5 * (sf.t0 + sf.t1);
    if (om != op) {
      int found = -1;
      for (int of : old_mesh.faces_of(om)) {
        const auto& o = old_mesh.subfaces()[of];
        if (o.minus == om && o.plus == op && o.orientation == sf.orientation && o.s0 <= sm && sm <= o.s1 &&
            o.t0 <= tm && tm <= o.t1) {
          found = of;
          break;
        }
      }
      if (found < 0) throw MeshError("project_state: no containing interface for a new sub-face");
      const auto& o = old_mesh.subfaces()[found];
      for (Phase ph : kPhases) st.flux(ph)[f] = old_state.flux(ph)[found] * len / (o.s1 - o.s0);
    } else {
      const auto& el = old_mesh.elements()[om];
      const double a = sf.orientation == Orientation::X ? (sf.position - el.x0) / el.dx()
                                                        : (sf.position - el.y0) / el.dy();
      for (Phase ph : kPhases) {
        const double lo = detail::side_density(old_mesh, old_state, ph, om, sf.orientation, false);
        const double hi = detail::side_density(old_mesh, old_state, ph, om, sf.orientation, true);
        st.flux(ph)[f] = ((1 - a) * lo + a * hi) * len;
      }
    }
  }
  return st;
}

/// End-time values of a fine mesh restricted onto a coarse mesh: pore-volume
/// and water-density weighted saturation (preserves water mass when densities
/// are unchanged), volume-weighted pressure, summed interface fluxes.
inline State restrict_to_coarse(const SpaceTimeMesh& fine, const State& fine_state, const SpaceTimeMesh& coarse,
                                const FluidRockModel& m) {
  if (!fine_state.conforms_to(fine)) throw MeshError("restrict_to_coarse: state does not match fine mesh");
  const auto &fg = fine.grid(), &cg = coarse.grid();
  if (fg.nx != cg.nx || fg.ny != cg.ny || fg.dx != cg.dx || fg.dy != cg.dy)
    throw MeshError("restrict_to_coarse: meshes cover different grids");
  State st = uniform_state(coarse, 0.0, 0.0);
  const int Ls = fine.levels().space_max;
  if (coarse.levels().space_max != Ls) throw MeshError("restrict_to_coarse: meshes use different level caps");

  // Visit each fine column once through its lowest-left finest cell.
  std::vector<double> pv(coarse.columns().size(), 0), ws(coarse.columns().size(), 0),
      pvol(coarse.columns().size(), 0), vol(coarse.columns().size(), 0);
  for (std::size_t c = 0; c < fine.columns().size(); ++c) {
    const auto fp = fine.footprint(static_cast<int>(c));
    const int cc = coarse.column_at_finest(fp[0], fp[2]);
    const int e = fine.last_element(static_cast<int>(c));
    const auto& el = fine.elements()[e];
    const auto rock = cell_rock(m.rock, el);
    const double rw = phase_density(m, Phase::Water, fine_state.pressure[e], fine_state.saturation[e]).value;
    const double w = rock.phi * rw * el.volume;
    ws[cc] += w * fine_state.saturation[e];
    pv[cc] += w;
    pvol[cc] += fine_state.pressure[e] * el.volume;
    vol[cc] += el.volume;
  }
  for (std::size_t c = 0; c < coarse.columns().size(); ++c) {
    const auto& col = coarse.columns()[c];
    for (int k = 0; k < col.slices; ++k) {
      st.saturation[col.first_element + k] = ws[c] / pv[c];
      st.pressure[col.first_element + k] = pvol[c] / vol[c];
    }
  }
  // Fluxes: sum of the fine end-time fluxes crossing each coarse sub-face.
  for (std::size_t f = 0; f < fine.num_interior_subfaces(); ++f) {
    const auto& sf = fine.subfaces()[f];
    const auto& em = fine.elements()[sf.minus];
    const auto& ep = fine.elements()[sf.plus];
    if (sf.t1 < fg.dt * (1 - 1e-12)) continue;
    const int cm = coarse.column_at_finest(fine.footprint(em.column)[0], fine.footprint(em.column)[2]);
    const int cp = coarse.column_at_finest(fine.footprint(ep.column)[0], fine.footprint(ep.column)[2]);
    if (cm == cp) continue;
    for (int cf : coarse.faces_of(coarse.last_element(cm))) {
      const auto& o = coarse.subfaces()[cf];
      const double sm = 0.5 * (sf.s0 + sf.s1);
      if (o.boundary() || o.orientation != sf.orientation || std::abs(o.position - sf.position) > 1e-9 * (cg.dx + cg.dy) || sm < o.s0 || sm > o.s1 ||
          o.t1 < cg.dt * (1 - 1e-12))
        continue;
      for (Phase ph : kPhases) st.flux(ph)[cf] += fine_state.flux(ph)[f];
      break;
    }
  }
  return st;
}

}  // namespace stflow
