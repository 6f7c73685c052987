#pragma once

// Space-time mesh over one coarse time step J_n x Omega.
//
// The mesh is a forest of quadtrees, one per coarse cell. Every spatial leaf
// (a "column") carries its own temporal level and is split into 2^level_t
// equal time slices; each (column, slice) pair is a space-time element.
// Interfaces between neighbouring columns are tiled by sub-faces obtained by
// intersecting the two face traces, so a single flux unknown per sub-face
// gives exact normal-flux continuity on non-matching interfaces.
//
// A mesh value is immutable once built; refinement returns a new mesh whose
// tree is the old tree with nodes appended (never removed).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stflow/error.hpp"

namespace stflow {

inline constexpr int kNoElement = -1;

struct CoarseGrid {
  int nx = 1;
  int ny = 1;
  double dx = 1.0;         // ft
  double dy = 1.0;         // ft
  double thickness = 1.0;  // ft
  double dt = 1.0;         // days
  int step = 0;            // coarse step index n
  double x0 = 0.0;         // origin, ft
  double y0 = 0.0;

  void validate() const {
    if (nx < 1 || ny < 1) throw MeshError("coarse grid: nx and ny must be at least 1");
    if (!(dx > 0) || !(dy > 0)) throw MeshError("coarse grid: cell sizes must be positive");
    if (!(thickness > 0)) throw MeshError("coarse grid: thickness must be positive");
    if (!(dt > 0)) throw MeshError("coarse grid: time step must be positive");
  }
  double width() const { return nx * dx; }
  double height() const { return ny * dy; }
  double start_time() const { return step * dt; }

  bool operator==(const CoarseGrid&) const = default;
};

struct MeshLevels {
  int space_max = 0;
  int time_max = 0;
  int ratio = 2;  // between consecutive levels, both dimensions

  void validate() const {
    if (space_max < 0 || time_max < 0) throw MeshError("mesh levels must be non-negative");
    if (space_max > 12 || time_max > 20) throw MeshError("mesh levels out of supported range");
    if (ratio != 2) throw MeshError("only a refinement ratio of 2 is supported");
  }

  bool operator==(const MeshLevels&) const = default;
};

struct TreeNode {
  int level = 0;
  int i = 0;  // cell coordinates on the level-`level` grid
  int j = 0;
  int parent = -1;
  std::array<int, 4> children{-1, -1, -1, -1};
  int time_level = 0;

  bool is_leaf() const { return children[0] < 0; }
};

/// Append-only forest; the first nx*ny nodes are the coarse cells (row-major).
struct RefinementTree {
  std::vector<TreeNode> nodes;
  int roots = 0;

  static RefinementTree coarse(int nx, int ny) {
    RefinementTree t;
    t.roots = nx * ny;
    t.nodes.reserve(static_cast<std::size_t>(t.roots));
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) t.nodes.push_back(TreeNode{0, i, j, -1, {-1, -1, -1, -1}, 0});
    return t;
  }

  void split(int node) {
    if (!nodes[node].is_leaf()) throw MeshError("refinement tree: node already split");
    const TreeNode parent = nodes[node];
    for (int c = 0; c < 4; ++c) {
      TreeNode child;
      child.level = parent.level + 1;
      child.i = 2 * parent.i + (c & 1);
      child.j = 2 * parent.j + (c >> 1);
      child.parent = node;
      child.time_level = parent.time_level;
      nodes[node].children[c] = static_cast<int>(nodes.size());
      nodes.push_back(child);
    }
  }
};

struct Element {
  int id = 0;
  int column = 0;  // leaf column index
  int level_s = 0;
  int i = 0, j = 0;  // spatial cell at level_s
  int level_t = 0;
  int k = 0;  // time slice within the coarse step
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double t0 = 0, t1 = 0;  // days, relative to the coarse step start
  double volume = 0;      // ft^3
  double duration = 0;    // days

  double dx() const { return x1 - x0; }
  double dy() const { return y1 - y0; }
  double xc() const { return 0.5 * (x0 + x1); }
  double yc() const { return 0.5 * (y0 + y1); }
};

enum class Orientation : int { X = 0, Y = 1 };  // direction of the face normal

/// One tile of an interface mosaic. `minus` is the element on the low-coordinate
/// side, `plus` the high side; boundary sub-faces have one side kNoElement.
struct SubFace {
  int id = 0;
  Orientation orientation = Orientation::X;
  double position = 0;  // x (X-normal) or y (Y-normal) of the face plane
  double s0 = 0, s1 = 0;  // extent along the face
  double t0 = 0, t1 = 0;
  int minus = kNoElement;
  int plus = kNoElement;
  double measure = 0;  // |e| = length * thickness * duration

  bool boundary() const { return minus == kNoElement || plus == kNoElement; }
  int interior_side() const { return minus == kNoElement ? plus : minus; }
  double area() const { return measure / (t1 - t0); }
};

struct Column {
  int node = 0;
  int level_s = 0;
  int i = 0, j = 0;
  int level_t = 0;
  int first_element = 0;
  int slices = 1;
};

/// Rectangle in (along-face, time) coordinates owned by one element.
struct TraceTile {
  double s0 = 0, s1 = 0, t0 = 0, t1 = 0;
  int element = kNoElement;
};

struct MosaicPiece {
  double s0 = 0, s1 = 0, t0 = 0, t1 = 0;
  int element_a = kNoElement;
  int element_b = kNoElement;
  double measure() const { return (s1 - s0) * (t1 - t0); }
};

/// Intersects two traces of the same interface rectangle. Each trace must tile
/// the rectangle; the returned pieces partition it.
inline std::vector<MosaicPiece> interface_mosaic(std::span<const TraceTile> a, std::span<const TraceTile> b) {
  if (a.empty() || b.empty()) throw MeshError("interface_mosaic: empty trace");
  struct Extent {
    double s0 = 1e300, s1 = -1e300, t0 = 1e300, t1 = -1e300, area = 0;
  };
  auto extent = [](std::span<const TraceTile> tr) {
    Extent e;
    for (const auto& t : tr) {
      if (!(t.s1 > t.s0) || !(t.t1 > t.t0)) throw MeshError("interface_mosaic: degenerate tile");
      e.s0 = std::min(e.s0, t.s0);
      e.s1 = std::max(e.s1, t.s1);
      e.t0 = std::min(e.t0, t.t0);
      e.t1 = std::max(e.t1, t.t1);
      e.area += (t.s1 - t.s0) * (t.t1 - t.t0);
    }
    return e;
  };
  const Extent ea = extent(a), eb = extent(b);
  const double scale = std::max({std::abs(ea.s1 - ea.s0), std::abs(ea.t1 - ea.t0), 1e-300});
  auto close = [](double x, double y, double s) { return std::abs(x - y) <= 1e-12 * s; };
  if (!close(ea.s0, eb.s0, scale) || !close(ea.s1, eb.s1, scale) || !close(ea.t0, eb.t0, scale) ||
      !close(ea.t1, eb.t1, scale))
    throw MeshError("interface_mosaic: faces are not coincident");
  const double rect = (ea.s1 - ea.s0) * (ea.t1 - ea.t0);
  if (std::abs(ea.area - rect) > 1e-12 * rect || std::abs(eb.area - rect) > 1e-12 * rect)
    throw MeshError("interface_mosaic: trace does not tile the face");

  std::vector<MosaicPiece> out;
  for (const auto& ta : a)
    for (const auto& tb : b) {
      MosaicPiece p{std::max(ta.s0, tb.s0), std::min(ta.s1, tb.s1), std::max(ta.t0, tb.t0),
                    std::min(ta.t1, tb.t1), ta.element, tb.element};
      if (p.s1 > p.s0 && p.t1 > p.t0) out.push_back(p);
    }
  return out;
}

namespace detail {

/// Leaves of a refinement tree in deterministic depth-first order, plus the
/// finest-level cell -> leaf lookup.
struct LeafIndex {
  std::vector<int> leaves;      // node ids
  std::vector<int> leaf_of;     // node id -> leaf index or -1
  std::vector<int> finest_map;  // finest cell (J * NX + I) -> leaf index
  int NX = 0, NY = 0;

  LeafIndex(const RefinementTree& tree, int nx, int ny, int space_max) {
    NX = nx << space_max;
    NY = ny << space_max;
    leaf_of.assign(tree.nodes.size(), -1);
    std::vector<int> stack;
    for (int r = 0; r < tree.roots; ++r) {
      stack.push_back(r);
      while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[n];
        if (node.is_leaf()) {
          leaf_of[n] = static_cast<int>(leaves.size());
          leaves.push_back(n);
        } else {
          for (int c = 3; c >= 0; --c) stack.push_back(node.children[c]);
        }
      }
    }
    finest_map.assign(static_cast<std::size_t>(NX) * NY, -1);
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      const auto& node = tree.nodes[leaves[l]];
      if (node.level > space_max) throw MeshError("tree deeper than the spatial level cap");
      const int r = 1 << (space_max - node.level);
      for (int J = node.j * r; J < (node.j + 1) * r; ++J)
        for (int I = node.i * r; I < (node.i + 1) * r; ++I)
          finest_map[static_cast<std::size_t>(J) * NX + I] = static_cast<int>(l);
    }
  }

  int at(int I, int J) const { return finest_map[static_cast<std::size_t>(J) * NX + I]; }

  /// Calls fn(a, b, start, end) for every pair of face-adjacent leaves where b
  /// lies on the high side of a in `dir`; [start, end) is the shared extent in
  /// finest-cell units along the face.
  template <class Fn>
  void for_each_high_neighbor(const RefinementTree& tree, int space_max, Fn&& fn) const {
    for (std::size_t a = 0; a < leaves.size(); ++a) {
      const auto& na = tree.nodes[leaves[a]];
      const int r = 1 << (space_max - na.level);
      // high x side
      const int Ir = (na.i + 1) * r;
      if (Ir < NX) {
        int start = na.j * r;
        int cur = at(Ir, start);
        for (int J = na.j * r + 1; J <= (na.j + 1) * r; ++J) {
          const int b = J < (na.j + 1) * r ? at(Ir, J) : -2;
          if (b != cur) {
            fn(static_cast<int>(a), cur, Orientation::X, start, J);
            start = J;
            cur = b;
          }
        }
      }
      const int Jt = (na.j + 1) * r;
      if (Jt < NY) {
        int start = na.i * r;
        int cur = at(start, Jt);
        for (int I = na.i * r + 1; I <= (na.i + 1) * r; ++I) {
          const int b = I < (na.i + 1) * r ? at(I, Jt) : -2;
          if (b != cur) {
            fn(static_cast<int>(a), cur, Orientation::Y, start, I);
            start = I;
            cur = b;
          }
        }
      }
    }
  }
};

}  // namespace detail

class SpaceTimeMesh {
 public:
  SpaceTimeMesh(const CoarseGrid& grid, const MeshLevels& levels, RefinementTree tree)
      : grid_(grid), levels_(levels), tree_(std::move(tree)) {
    grid_.validate();
    levels_.validate();
    build();
  }

  const CoarseGrid& grid() const { return grid_; }
  const MeshLevels& levels() const { return levels_; }
  const RefinementTree& tree() const { return tree_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<SubFace>& subfaces() const { return subfaces_; }

  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_subfaces() const { return subfaces_.size(); }
  std::size_t num_interior_subfaces() const { return interior_count_; }

  /// Sub-faces (interior and boundary) touching element e.
  std::span<const int> faces_of(int e) const {
    return {elem_faces_.data() + elem_face_offsets_[e],
            static_cast<std::size_t>(elem_face_offsets_[e + 1] - elem_face_offsets_[e])};
  }

  int finest_nx() const { return index_.NX; }
  int finest_ny() const { return index_.NY; }
  double finest_dx() const { return grid_.dx / (1 << levels_.space_max); }
  double finest_dy() const { return grid_.dy / (1 << levels_.space_max); }
  /// Leaf column covering finest cell (I, J).
  int column_at_finest(int I, int J) const { return index_.at(I, J); }
  /// Element of column c whose time slice contains time t (relative to step start).
  int element_at(int c, double t) const {
    const auto& col = columns_[c];
    int k = static_cast<int>(std::floor(t / grid_.dt * col.slices));
    k = std::clamp(k, 0, col.slices - 1);
    return col.first_element + k;
  }
  int last_element(int c) const { return columns_[c].first_element + columns_[c].slices - 1; }

  /// Finest-cell index range [I0, I1) x [J0, J1) covered by column c.
  std::array<int, 4> footprint(int c) const {
    const auto& col = columns_[c];
    const int r = 1 << (levels_.space_max - col.level_s);
    return {col.i * r, (col.i + 1) * r, col.j * r, (col.j + 1) * r};
  }

  int max_level_s() const {
    int m = 0;
    for (const auto& c : columns_) m = std::max(m, c.level_s);
    return m;
  }
  int max_level_t() const {
    int m = 0;
    for (const auto& c : columns_) m = std::max(m, c.level_t);
    return m;
  }

 private:
  void build();
  void add_boundary(int column, Orientation o, double position, double s0, double s1, bool high);

  CoarseGrid grid_;
  MeshLevels levels_;
  RefinementTree tree_;
  detail::LeafIndex index_{RefinementTree::coarse(1, 1), 1, 1, 0};
  std::vector<Column> columns_;
  std::vector<Element> elements_;
  std::vector<SubFace> subfaces_;
  std::size_t interior_count_ = 0;
  std::vector<int> elem_face_offsets_;
  std::vector<int> elem_faces_;
};

inline void SpaceTimeMesh::add_boundary(int c, Orientation o, double position, double s0, double s1,
                                        bool high) {
  const auto& col = columns_[c];
  for (int k = 0; k < col.slices; ++k) {
    const auto& el = elements_[col.first_element + k];
    SubFace f;
    f.id = static_cast<int>(subfaces_.size());
    f.orientation = o;
    f.position = position;
    f.s0 = s0;
    f.s1 = s1;
    f.t0 = el.t0;
    f.t1 = el.t1;
    (high ? f.minus : f.plus) = el.id;
    f.measure = (s1 - s0) * grid_.thickness * (f.t1 - f.t0);
    subfaces_.push_back(f);
  }
}

inline void SpaceTimeMesh::build() {
  index_ = detail::LeafIndex(tree_, grid_.nx, grid_.ny, levels_.space_max);
  const int Ls = levels_.space_max;
  columns_.clear();
  elements_.clear();
  subfaces_.clear();
  columns_.reserve(index_.leaves.size());
  for (int node_id : index_.leaves) {
    const auto& n = tree_.nodes[node_id];
    if (n.time_level > levels_.time_max) throw MeshError("tree exceeds the temporal level cap");
    Column col{node_id, n.level, n.i, n.j, n.time_level, static_cast<int>(elements_.size()), 1 << n.time_level};
    const double cdx = grid_.dx / (1 << n.level);
    const double cdy = grid_.dy / (1 << n.level);
    const double sdt = grid_.dt / col.slices;
    for (int k = 0; k < col.slices; ++k) {
      Element e;
      e.id = static_cast<int>(elements_.size());
      e.column = static_cast<int>(columns_.size());
      e.level_s = n.level;
      e.i = n.i;
      e.j = n.j;
      e.level_t = n.time_level;
      e.k = k;
      e.x0 = grid_.x0 + n.i * cdx;
      e.x1 = grid_.x0 + (n.i + 1) * cdx;
      e.y0 = grid_.y0 + n.j * cdy;
      e.y1 = grid_.y0 + (n.j + 1) * cdy;
      e.t0 = k * sdt;
      e.t1 = (k + 1) * sdt;
      e.volume = cdx * cdy * grid_.thickness;
      e.duration = sdt;
      elements_.push_back(e);
    }
    columns_.push_back(col);
  }

  const double fdx = finest_dx(), fdy = finest_dy();
  auto trace = [&](int c, double s0, double s1) {
    std::vector<TraceTile> tiles;
    const auto& col = columns_[c];
    for (int k = 0; k < col.slices; ++k) {
      const auto& el = elements_[col.first_element + k];
      tiles.push_back({s0, s1, el.t0, el.t1, el.id});
    }
    return tiles;
  };
  index_.for_each_high_neighbor(tree_, Ls, [&](int a, int b, Orientation o, int start, int end) {
    const auto& ea = elements_[columns_[a].first_element];
    double s0, s1, pos;
    if (o == Orientation::X) {
      s0 = grid_.y0 + start * fdy;
      s1 = grid_.y0 + end * fdy;
      pos = ea.x1;
    } else {
      s0 = grid_.x0 + start * fdx;
      s1 = grid_.x0 + end * fdx;
      pos = ea.y1;
    }
    const auto ta = trace(a, s0, s1);
    const auto tb = trace(b, s0, s1);
    for (const auto& piece : interface_mosaic(ta, tb)) {
      SubFace f;
      f.id = static_cast<int>(subfaces_.size());
      f.orientation = o;
      f.position = pos;
      f.s0 = piece.s0;
      f.s1 = piece.s1;
      f.t0 = piece.t0;
      f.t1 = piece.t1;
      f.minus = piece.element_a;
      f.plus = piece.element_b;
      f.measure = piece.measure() * grid_.thickness;
      subfaces_.push_back(f);
    }
  });
  interior_count_ = subfaces_.size();

  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& e = elements_[columns_[c].first_element];
    const int ci = static_cast<int>(c);
    const auto fp = footprint(ci);
    if (fp[0] == 0) add_boundary(ci, Orientation::X, e.x0, e.y0, e.y1, false);
    if (fp[1] == index_.NX) add_boundary(ci, Orientation::X, e.x1, e.y0, e.y1, true);
    if (fp[2] == 0) add_boundary(ci, Orientation::Y, e.y0, e.x0, e.x1, false);
    if (fp[3] == index_.NY) add_boundary(ci, Orientation::Y, e.y1, e.x0, e.x1, true);
  }

  std::vector<int> count(elements_.size() + 1, 0);
  for (const auto& f : subfaces_) {
    if (f.minus != kNoElement) ++count[f.minus + 1];
    if (f.plus != kNoElement) ++count[f.plus + 1];
  }
  for (std::size_t e = 0; e < elements_.size(); ++e) count[e + 1] += count[e];
  elem_face_offsets_ = count;
  elem_faces_.assign(static_cast<std::size_t>(count.back()), 0);
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (const auto& f : subfaces_) {
    if (f.minus != kNoElement) elem_faces_[fill[f.minus]++] = f.id;
    if (f.plus != kNoElement) elem_faces_[fill[f.plus]++] = f.id;
  }
}

/// Every coarse cell as a single element spanning the whole coarse step.
inline SpaceTimeMesh build_coarse(const CoarseGrid& grid, const MeshLevels& levels) {
  grid.validate();
  return SpaceTimeMesh(grid, levels, RefinementTree::coarse(grid.nx, grid.ny));
}

namespace detail {

inline std::set<int> marked_columns(const SpaceTimeMesh& mesh, std::span<const int> marked) {
  std::set<int> cols;
  for (int e : marked) {
    if (e < 0 || static_cast<std::size_t>(e) >= mesh.num_elements())
      throw MeshError("refinement: element id out of range");
    cols.insert(mesh.elements()[e].column);
  }
  return cols;
}

}  // namespace detail

/// Halves the time slices of every column containing a marked element.
inline SpaceTimeMesh refine_temporal(const SpaceTimeMesh& mesh, std::span<const int> marked) {
  RefinementTree tree = mesh.tree();
  for (int c : detail::marked_columns(mesh, marked)) {
    auto& node = tree.nodes[mesh.columns()[c].node];
    if (node.time_level >= mesh.levels().time_max)
      throw MeshError("refine_temporal: element already at the finest temporal level");
    ++node.time_level;
  }
  return SpaceTimeMesh(mesh.grid(), mesh.levels(), std::move(tree));
}

/// Splits the spatial cell of every column containing a marked element 4-way;
/// children keep the parent's temporal level.
inline SpaceTimeMesh refine_spatial(const SpaceTimeMesh& mesh, std::span<const int> marked) {
  RefinementTree tree = mesh.tree();
  for (int c : detail::marked_columns(mesh, marked)) {
    const int node = mesh.columns()[c].node;
    if (tree.nodes[node].level >= mesh.levels().space_max)
      throw MeshError("refine_spatial: element already at the finest spatial level");
    tree.split(node);
  }
  return SpaceTimeMesh(mesh.grid(), mesh.levels(), std::move(tree));
}

/// Refines until face-adjacent columns differ by at most one level in space
/// and in time. Only ever adds refinement.
inline SpaceTimeMesh smooth(const SpaceTimeMesh& mesh) {
  RefinementTree tree = mesh.tree();
  const auto& g = mesh.grid();
  const int Ls = mesh.levels().space_max;
  bool changed_any = false;
  for (;;) {
    detail::LeafIndex idx(tree, g.nx, g.ny, Ls);
    std::set<int> split, bump;
    idx.for_each_high_neighbor(tree, Ls, [&](int a, int b, Orientation, int, int) {
      const auto& na = tree.nodes[idx.leaves[a]];
      const auto& nb = tree.nodes[idx.leaves[b]];
      if (na.level + 1 < nb.level) split.insert(idx.leaves[a]);
      if (nb.level + 1 < na.level) split.insert(idx.leaves[b]);
      if (na.time_level + 1 < nb.time_level) bump.insert(idx.leaves[a]);
      if (nb.time_level + 1 < na.time_level) bump.insert(idx.leaves[b]);
    });
    if (split.empty() && bump.empty()) break;
    changed_any = true;
    for (int n : bump) ++tree.nodes[n].time_level;
    for (int n : split) tree.split(n);
  }
  if (!changed_any) return mesh;
  return SpaceTimeMesh(mesh.grid(), mesh.levels(), std::move(tree));
}

/// Mesh with every column at the given spatial and temporal level.
inline SpaceTimeMesh uniform_mesh(const CoarseGrid& grid, const MeshLevels& levels, int level_s, int level_t) {
  if (level_s > levels.space_max || level_t > levels.time_max)
    throw MeshError("uniform_mesh: level exceeds cap");
  RefinementTree tree = RefinementTree::coarse(grid.nx, grid.ny);
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    if (tree.nodes[n].level < level_s)
      tree.split(static_cast<int>(n));
    else
      tree.nodes[n].time_level = level_t;
  }
  for (auto& node : tree.nodes) node.time_level = level_t;
  return SpaceTimeMesh(grid, levels, std::move(tree));
}

/// Leaf-set identity: same columns (by geometry and levels) in the same order.
inline bool same_leaves(const SpaceTimeMesh& a, const SpaceTimeMesh& b) {
  if (a.columns().size() != b.columns().size()) return false;
  for (std::size_t c = 0; c < a.columns().size(); ++c) {
    const auto &x = a.columns()[c], &y = b.columns()[c];
    if (x.level_s != y.level_s || x.i != y.i || x.j != y.j || x.level_t != y.level_t) return false;
  }
  return true;
}

}  // namespace stflow
