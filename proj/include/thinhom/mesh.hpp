#pragma once

#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

#include "thinhom/geometry.hpp"

namespace thinhom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class BoundaryTag { bottom, top, left, right, jump };

const char* to_string(BoundaryTag tag) noexcept;

struct BoundaryEdge {
  int a;
  int b;
  BoundaryTag tag;
};

/// Conforming P1 triangulation built column by column between vertical mesh lines.
///
/// Elements are counterclockwise. Every element lies in exactly one column
/// (the strip between two consecutive `column_breaks`) and in exactly one
/// layer: 0 below the g0 level of the profile, 1 above it.
struct TriangleMesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<std::pair<int, int>> periodic_pairs;  ///< (left node, right node)
  std::vector<int> element_layer;
  std::vector<double> column_breaks;
  std::vector<int> element_column;
  double h = 0.0;

  std::size_t n_nodes() const noexcept { return nodes.size(); }
  std::size_t n_elements() const noexcept { return elements.size(); }
  double signed_area(std::size_t element) const;
  double area() const;
  /// Element indices per column, in element order.
  std::vector<std::vector<int>> column_elements() const;
};

struct IntervalMesh {
  std::vector<double> nodes;

  std::size_t n_elements() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
};

struct MeshOptions {
  /// Vertical spacing in cell units (y / eps); 0 selects the horizontal cell spacing.
  double vertical_h = 0.0;
  /// Height of the first row above g0 in R^eps, growing geometrically up to the
  /// vertical spacing. 0 picks eps^(alpha-1) times the horizontal cell spacing
  /// when alpha > 1 (rows as thin as the columns near the base of the teeth);
  /// a negative value keeps uniform rows.
  double upper_first_h = 0.0;
  double growth = 1.5;
};

/// Mesh of R^eps. `h` is the physical horizontal target size; the vertical
/// spacing scales with eps so each oscillation period repeats the cell pattern.
TriangleMesh mesh_thin_domain(const ThinDomainSpec& spec, double h, const MeshOptions& options = {});

/// Mesh of Y*, Y*+, R- or R+. For Y* with `periodic`, left/right traces match node for node.
TriangleMesh mesh_cell(const CellGeometry& geometry, double h, bool periodic,
                       const MeshOptions& options = {});

IntervalMesh mesh_interval(int n);

/// Connected components of the element graph (elements sharing a node).
int count_components(const TriangleMesh& mesh);

/// Text dump: `nodes N elements M`, N lines `x y`, M lines `i j k tag` (tag = layer).
void write_mesh(std::ostream& out, const TriangleMesh& mesh);

}  // namespace thinhom
