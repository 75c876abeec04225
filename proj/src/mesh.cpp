#include "thinhom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "thinhom/errors.hpp"

namespace thinhom {

const char* to_string(BoundaryTag tag) noexcept {
  switch (tag) {
    case BoundaryTag::bottom: return "bottom";
    case BoundaryTag::top: return "top";
    case BoundaryTag::left: return "left";
    case BoundaryTag::right: return "right";
    case BoundaryTag::jump: return "jump";
  }
  return "unknown";
}

double TriangleMesh::signed_area(std::size_t element) const {
  const auto& [i, j, k] = elements[element];
  const Point& a = nodes[static_cast<std::size_t>(i)];
  const Point& b = nodes[static_cast<std::size_t>(j)];
  const Point& c = nodes[static_cast<std::size_t>(k)];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

double TriangleMesh::area() const {
  long double total = 0.0L;
  for (std::size_t e = 0; e < elements.size(); ++e) total += signed_area(e);
  return static_cast<double>(total);
}

std::vector<std::vector<int>> TriangleMesh::column_elements() const {
  std::vector<std::vector<int>> columns(column_breaks.empty() ? 0 : column_breaks.size() - 1);
  for (std::size_t e = 0; e < element_column.size(); ++e)
    columns[static_cast<std::size_t>(element_column[e])].push_back(static_cast<int>(e));
  return columns;
}

namespace {

// A vertical mesh line. Levels are in cell units (y / scale); the column to
// the left uses levels up to `left_top`, the column to the right up to `right_top`.
struct StripLine {
  double x = 0.0;
  double left_top = 0.0;
  double right_top = 0.0;
  bool has_left = false;
  bool has_right = false;
  std::vector<double> levels;
};

struct StripInput {
  std::vector<StripLine> lines;
  double y_scale = 1.0;
  double bottom = 0.0;     // lowest level (0, or g0 for Y*+)
  double layer_level = 0;  // elements entirely above this level get layer 1
  double level_tolerance = 1e-12;
};

class LevelRule {
 public:
  LevelRule(double bottom, double layer_level, double spacing, double upper_first = 0.0, double growth = 1.5)
      : bottom_(bottom), layer_level_(layer_level), spacing_(spacing), upper_first_(upper_first), growth_(growth) {}

  std::vector<double> subdivide(double top) const {
    std::vector<double> levels;
    auto rows = [&](double length) {
      return std::max(1, static_cast<int>(std::ceil(length / spacing_ - 1e-9)));
    };
    if (bottom_ < layer_level_) {
      const double split = std::min(top, layer_level_);
      const int n = rows(split - bottom_);
      for (int j = 0; j <= n; ++j)
        levels.push_back(j == n ? split : bottom_ + (split - bottom_) * j / n);
    } else {
      levels.push_back(bottom_);
    }
    if (top > layer_level_ && top > bottom_) {
      double base = std::max(bottom_, layer_level_);
      // geometric rows resolving the junction layer, then uniform rows
      for (double step = upper_first_; step > 0.0 && step < spacing_; step *= growth_) {
        if (base + step >= top - 0.5 * step) break;
        base += step;
        levels.push_back(base);
      }
      const int n = rows(top - base);
      for (int j = 1; j <= n; ++j) levels.push_back(j == n ? top : base + (top - base) * j / n);
    }
    return levels;
  }

  std::vector<double> merged(double a, double b, double tolerance) const {
    std::vector<double> levels = subdivide(a);
    if (b != a) {
      std::vector<double> other = subdivide(b);
      levels.insert(levels.end(), other.begin(), other.end());
    }
    std::sort(levels.begin(), levels.end());
    std::vector<double> unique;
    for (double level : levels)
      if (unique.empty() || level - unique.back() > tolerance) unique.push_back(level);
    return unique;
  }

 private:
  double bottom_;
  double layer_level_;
  double spacing_;
  double upper_first_;
  double growth_;
};

void add_edge_run(TriangleMesh& mesh, const std::vector<int>& nodes, const std::vector<double>& levels,
                  double from, double to, double tolerance, BoundaryTag tag) {
  for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
    if (levels[j] >= from - tolerance && levels[j + 1] <= to + tolerance)
      mesh.boundary_edges.push_back({nodes[j], nodes[j + 1], tag});
  }
}

TriangleMesh build_strip_mesh(const StripInput& input, BoundaryTag first_tag, BoundaryTag last_tag) {
  TriangleMesh mesh;
  const double tol = input.level_tolerance;
  std::vector<std::vector<int>> line_nodes(input.lines.size());
  std::vector<std::vector<double>> line_levels(input.lines.size());

  for (std::size_t l = 0; l < input.lines.size(); ++l) {
    const StripLine& line = input.lines[l];
    double top = -1.0;
    if (line.has_left) top = std::max(top, line.left_top);
    if (line.has_right) top = std::max(top, line.right_top);
    mesh.column_breaks.push_back(line.x);
    for (double level : line.levels) {
      if (level < input.bottom - tol || level > top + tol) continue;
      line_nodes[l].push_back(static_cast<int>(mesh.nodes.size()));
      line_levels[l].push_back(level);
      mesh.nodes.push_back({line.x, input.y_scale * level});
    }
  }

  auto used = [&](std::size_t l, double top) {
    std::size_t count = 0;
    while (count < line_levels[l].size() && line_levels[l][count] <= top + tol) ++count;
    return count;
  };

  for (std::size_t c = 0; c + 1 < input.lines.size(); ++c) {
    const double left_top = input.lines[c].right_top;
    const double right_top = input.lines[c + 1].left_top;
    if (left_top <= input.bottom + tol && right_top <= input.bottom + tol) continue;
    const std::size_t na = used(c, left_top);
    const std::size_t nb = used(c + 1, right_top);
    const auto& a = line_nodes[c];
    const auto& b = line_nodes[c + 1];
    const auto& la = line_levels[c];
    const auto& lb = line_levels[c + 1];
    auto emit = [&](int i, int j, int k, double lowest) {
      mesh.elements.push_back({i, j, k});
      mesh.element_column.push_back(static_cast<int>(c));
      mesh.element_layer.push_back(lowest >= input.layer_level - tol ? 1 : 0);
    };
    std::size_t i = 0;
    std::size_t j = 0;
    while (i + 1 < na || j + 1 < nb) {
      const bool advance_left =
          j + 1 >= nb || (i + 1 < na && la[i + 1] < lb[j + 1] - tol);
      if (advance_left) {
        emit(a[i], b[j], a[i + 1], std::min(la[i], lb[j]));
        ++i;
      } else {
        emit(a[i], b[j], b[j + 1], std::min(la[i], lb[j]));
        ++j;
      }
    }
    mesh.boundary_edges.push_back({a[0], b[0], BoundaryTag::bottom});
    mesh.boundary_edges.push_back({b[nb - 1], a[na - 1], BoundaryTag::top});
  }

  for (std::size_t l = 0; l < input.lines.size(); ++l) {
    const StripLine& line = input.lines[l];
    const double lo = input.bottom;
    if (!line.has_left && line.has_right) {
      add_edge_run(mesh, line_nodes[l], line_levels[l], lo, line.right_top, tol, first_tag);
    } else if (line.has_left && !line.has_right) {
      add_edge_run(mesh, line_nodes[l], line_levels[l], lo, line.left_top, tol, last_tag);
    } else if (line.has_left && line.has_right && line.left_top != line.right_top) {
      const double from = std::max(lo, std::min(line.left_top, line.right_top));
      const double to = std::max(line.left_top, line.right_top);
      add_edge_run(mesh, line_nodes[l], line_levels[l], from, to, tol, BoundaryTag::jump);
    }
  }

  // Drop nodes that only bound zero-height columns.
  std::vector<int> renumber(mesh.nodes.size(), -1);
  for (const auto& element : mesh.elements)
    for (int v : element) renumber[static_cast<std::size_t>(v)] = 0;
  int next = 0;
  std::vector<Point> kept;
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    if (renumber[n] < 0) continue;
    renumber[n] = next++;
    kept.push_back(mesh.nodes[n]);
  }
  if (kept.size() != mesh.nodes.size()) {
    mesh.nodes = std::move(kept);
    for (auto& element : mesh.elements)
      for (int& v : element) v = renumber[static_cast<std::size_t>(v)];
    std::vector<BoundaryEdge> edges;
    for (BoundaryEdge edge : mesh.boundary_edges) {
      if (renumber[static_cast<std::size_t>(edge.a)] < 0 || renumber[static_cast<std::size_t>(edge.b)] < 0)
        continue;
      edge.a = renumber[static_cast<std::size_t>(edge.a)];
      edge.b = renumber[static_cast<std::size_t>(edge.b)];
      edges.push_back(edge);
    }
    mesh.boundary_edges = std::move(edges);
  }
  return mesh;
}

// Line positions of one period in cell units: every breakpoint, each piece
// split into equal columns no wider than `spacing`.
std::vector<double> period_positions(const BoundaryProfile& profile, double spacing) {
  std::vector<double> positions;
  for (const auto& piece : profile.pieces()) {
    const double width = piece.end - piece.begin;
    const int n = std::max(1, static_cast<int>(std::ceil(width / spacing - 1e-9)));
    for (int j = 0; j < n; ++j) positions.push_back(piece.begin + width * j / n);
  }
  positions.push_back(profile.period());
  return positions;
}

void require_positive(double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorKind::invalid_argument, "mesh size h must be positive");
}

}  // namespace

TriangleMesh mesh_thin_domain(const ThinDomainSpec& spec, double h, const MeshOptions& options) {
  require_positive(h);
  const BoundaryProfile& g = spec.profile;
  const double scale_x = std::pow(spec.epsilon, spec.alpha);
  const double cell = scale_x * g.period();
  if (h > cell / 4.0 * (1.0 + 1e-12))
    throw Error(ErrorKind::mesh_too_coarse,
                "h must resolve one oscillation period (h <= eps^alpha L / 4)");
  const double spacing = h / scale_x;
  const double vertical = options.vertical_h > 0.0 ? options.vertical_h : spacing;
  double upper_first = options.upper_first_h;
  if (upper_first == 0.0 && spec.alpha > 1.0) upper_first = spacing * std::pow(spec.epsilon, spec.alpha - 1.0);
  const LevelRule rule(0.0, g.g0(), vertical, std::max(upper_first, 0.0), options.growth);
  const double tol = 1e-12 * g.g1();
  const std::vector<double> pattern = period_positions(g, spacing);

  StripInput input;
  input.y_scale = spec.epsilon;
  input.layer_level = g.g0();
  input.level_tolerance = tol;
  const double snap = 1e-6 * h;
  for (long k = 0;; ++k) {
    const double origin = static_cast<double>(k) * g.period();
    bool done = false;
    for (std::size_t j = 0; j + 1 < pattern.size(); ++j) {
      const double s = pattern[j];
      const double x = scale_x * (origin + s);
      if (x >= 1.0 - snap) {
        done = true;
        break;
      }
      StripLine line;
      line.x = x;
      line.left_top = g.left_limit(s);
      line.right_top = g.right_limit(s);
      line.has_left = !input.lines.empty();
      line.has_right = true;
      line.levels = rule.merged(line.left_top, line.right_top, tol);
      input.lines.push_back(std::move(line));
    }
    if (done) break;
  }
  // Closing line at x = 1, possibly in the middle of a period.
  const double s_end = 1.0 / scale_x;
  StripLine last;
  last.x = 1.0;
  last.left_top = g.left_limit(s_end);
  last.right_top = g.right_limit(s_end);
  last.has_left = true;
  last.levels = rule.merged(last.left_top, last.right_top, tol);
  input.lines.push_back(std::move(last));

  TriangleMesh mesh = build_strip_mesh(input, BoundaryTag::left, BoundaryTag::right);
  mesh.h = h;
  return mesh;
}

TriangleMesh mesh_cell(const CellGeometry& geometry, double h, bool periodic,
                       const MeshOptions& options) {
  require_positive(h);
  const BoundaryProfile& g = geometry.profile;
  const double tol = 1e-12 * g.g1();
  const double vertical = options.vertical_h > 0.0 ? options.vertical_h : h;
  StripInput input;
  input.level_tolerance = tol;
  input.layer_level = g.g0();

  if (geometry.domain == CellDomain::lower_rect || geometry.domain == CellDomain::upper_rect) {
    if (h > 0.25 * (1.0 + 1e-12))
      throw Error(ErrorKind::mesh_too_coarse, "h must be at most 1/4 on the unit-length rectangles");
    const bool lower = geometry.domain == CellDomain::lower_rect;
    input.bottom = lower ? 0.0 : g.g0();
    const double top = lower ? g.g0() : g.g1();
    const LevelRule rule(input.bottom, g.g0(), vertical);
    const int n = std::max(1, static_cast<int>(std::ceil(1.0 / h - 1e-9)));
    for (int j = 0; j <= n; ++j) {
      StripLine line;
      line.x = static_cast<double>(j) / n;
      line.left_top = line.right_top = top;
      line.has_left = j > 0;
      line.has_right = j < n;
      line.levels = rule.subdivide(top);
      input.lines.push_back(std::move(line));
    }
    TriangleMesh mesh = build_strip_mesh(input, BoundaryTag::left, BoundaryTag::right);
    mesh.h = h;
    return mesh;
  }

  if (h > g.period() / 4.0 * (1.0 + 1e-12))
    throw Error(ErrorKind::mesh_too_coarse, "h must be at most L / 4 on the cell");
  const bool upper = geometry.domain == CellDomain::upper;
  input.bottom = upper ? g.g0() : 0.0;
  const LevelRule rule(input.bottom, g.g0(), vertical);
  const std::vector<double> pattern = period_positions(g, h);
  for (std::size_t j = 0; j < pattern.size(); ++j) {
    StripLine line;
    line.x = pattern[j];
    line.left_top = g.left_limit(pattern[j]);
    line.right_top = g.right_limit(pattern[j]);
    line.has_left = j > 0;
    line.has_right = j + 1 < pattern.size();
    line.levels = rule.merged(line.left_top, line.right_top, tol);
    input.lines.push_back(std::move(line));
  }
  TriangleMesh mesh = build_strip_mesh(input, BoundaryTag::left, BoundaryTag::right);
  mesh.h = h;

  if (periodic) {
    if (upper)
      throw Error(ErrorKind::incompatible_periodic_trace,
                  "periodic pairing is only defined on the basic cell Y*");
    const double common = std::min(g.right_limit(0.0), g.left_limit(g.period()));
    std::vector<int> left;
    std::vector<int> right;
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
      if (mesh.nodes[n].x == 0.0) left.push_back(static_cast<int>(n));
      if (mesh.nodes[n].x == g.period()) right.push_back(static_cast<int>(n));
    }
    for (int l : left) {
      const double y = mesh.nodes[static_cast<std::size_t>(l)].y;
      if (y > common + tol) continue;
      auto match = std::find_if(right.begin(), right.end(), [&](int r) {
        return std::abs(mesh.nodes[static_cast<std::size_t>(r)].y - y) <= tol;
      });
      if (match == right.end())
        throw Error(ErrorKind::incompatible_periodic_trace, "left node has no partner on the right");
      mesh.periodic_pairs.emplace_back(l, *match);
    }
    // Boundary edges on the shared part of the traces are interior in the periodic sense,
    // the rest of the taller side is a jump wall.
    for (BoundaryEdge& edge : mesh.boundary_edges) {
      if (edge.tag != BoundaryTag::left && edge.tag != BoundaryTag::right) continue;
      const double top = std::max(mesh.nodes[static_cast<std::size_t>(edge.a)].y,
                                  mesh.nodes[static_cast<std::size_t>(edge.b)].y);
      if (top > common + tol) edge.tag = BoundaryTag::jump;
    }
  }
  return mesh;
}

IntervalMesh mesh_interval(int n) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "interval mesh needs at least one element");
  IntervalMesh mesh;
  mesh.nodes.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) mesh.nodes[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
  mesh.nodes.back() = 1.0;
  return mesh;
}

int count_components(const TriangleMesh& mesh) {
  std::vector<int> parent(mesh.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (const auto& element : mesh.elements) {
    const int r = find(element[0]);
    parent[static_cast<std::size_t>(find(element[1]))] = r;
    parent[static_cast<std::size_t>(find(element[2]))] = r;
  }
  std::vector<char> seen(mesh.nodes.size(), 0);
  int count = 0;
  for (const auto& element : mesh.elements) {
    const int r = find(element[0]);
    if (!seen[static_cast<std::size_t>(r)]) {
      seen[static_cast<std::size_t>(r)] = 1;
      ++count;
    }
  }
  return count;
}

void write_mesh(std::ostream& out, const TriangleMesh& mesh) {
  char buffer[96];
  out << "nodes " << mesh.nodes.size() << " elements " << mesh.elements.size() << '\n';
  for (const Point& p : mesh.nodes) {
    std::snprintf(buffer, sizeof buffer, "%.17g %.17g\n", p.x, p.y);
    out << buffer;
  }
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& [i, j, k] = mesh.elements[e];
    out << i << ' ' << j << ' ' << k << ' ' << mesh.element_layer[e] << '\n';
  }
}

}  // namespace thinhom
