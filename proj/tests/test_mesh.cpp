#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "thinhom/errors.hpp"
#include "thinhom/mesh.hpp"

using namespace thinhom;

namespace {

BoundaryProfile comb12() { return BoundaryProfile::comb(1.0, 2.0, 2.0); }

// Every interior edge is shared by exactly two elements with opposite orientation;
// boundary edges by one. A hanging node would leave an unmatched edge on a non-boundary line.
void expect_conforming(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& e : mesh.elements)
    for (int k = 0; k < 3; ++k) {
      const int a = e[static_cast<std::size_t>(k)];
      const int b = e[static_cast<std::size_t>((k + 1) % 3)];
      ++edges[{a, b}];
    }
  std::size_t boundary = 0;
  for (const auto& [edge, count] : edges) {
    EXPECT_EQ(count, 1);
    if (!edges.count({edge.second, edge.first})) ++boundary;
  }
  EXPECT_EQ(boundary, mesh.boundary_edges.size());
}

void expect_positive(const TriangleMesh& mesh) {
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) ASSERT_GT(mesh.signed_area(e), 0.0) << e;
}

}  // namespace

TEST(ThinMesh, ConstantRectangle) {
  const ThinDomainSpec spec(0.1, 1.0, BoundaryProfile::constant(1.0));
  const auto mesh = mesh_thin_domain(spec, 0.1 / 8.0);
  EXPECT_NEAR(mesh.area(), 0.1, 1e-15);
  expect_positive(mesh);
  expect_conforming(mesh);
}

TEST(ThinMesh, CombAreaExact) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  const auto mesh = mesh_thin_domain(spec, 0.2 / 8.0);
  // 0.2 periods fit five times; area = eps <g> = 0.15
  EXPECT_NEAR(mesh.area(), 0.15, 1e-14);
  expect_positive(mesh);
  expect_conforming(mesh);
}

TEST(ThinMesh, CosineAreaByQuadrature) {
  const auto g = BoundaryProfile::cosine(2.0, 0.5, 1.0);
  const ThinDomainSpec spec(0.05, 1.0, g);
  const auto mesh = mesh_thin_domain(spec, 0.05 / 64.0);
  EXPECT_NEAR(mesh.area(), 0.1, 1e-8);
}

TEST(ThinMesh, PartialCellArea) {
  // eps^alpha L = 0.3: three full periods and a remainder [0.9, 1) inside the low part of the comb
  const ThinDomainSpec spec(0.15, 1.0, comb12());
  const auto mesh = mesh_thin_domain(spec, 0.3 / 8.0);
  const double exact = 0.15 * (3 * 0.3 * 1.5 + 0.1 * 1.0);
  EXPECT_NEAR(mesh.area(), exact, 1e-14);
  expect_conforming(mesh);
}

TEST(ThinMesh, TopBoundaryOnProfileGraph) {
  const auto g = BoundaryProfile::piecewise_linear(1.0, {0.0, 0.5}, {1.0, 2.0, 2.0, 1.0});
  const ThinDomainSpec spec(0.1, 1.0, g);
  const auto mesh = mesh_thin_domain(spec, 0.1 / 16.0);
  int top = 0;
  for (const auto& edge : mesh.boundary_edges) {
    if (edge.tag != BoundaryTag::top) continue;
    ++top;
    for (int n : {edge.a, edge.b}) {
      const Point& pt = mesh.nodes[static_cast<std::size_t>(n)];
      EXPECT_NEAR(pt.y, spec.height(pt.x), 1e-12);
    }
  }
  EXPECT_GT(top, 0);
  expect_conforming(mesh);
}

TEST(ThinMesh, StrongRegimeGradedRows) {
  const ThinDomainSpec spec(0.1, 2.0, comb12());
  const auto mesh = mesh_thin_domain(spec, 0.02 / 8.0);
  EXPECT_NEAR(mesh.area(), 0.15, 1e-14);
  expect_positive(mesh);
  expect_conforming(mesh);
  MeshOptions uniform;
  uniform.upper_first_h = -1.0;
  const auto plain = mesh_thin_domain(spec, 0.02 / 8.0, uniform);
  EXPECT_NEAR(plain.area(), 0.15, 1e-14);
  EXPECT_GT(mesh.n_elements(), plain.n_elements());
}

TEST(ThinMesh, LayersSplitAtG0) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  const auto mesh = mesh_thin_domain(spec, 0.2 / 8.0);
  double lower = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& v = mesh.elements[e];
    double top = 0.0;
    for (int n : v) top = std::max(top, mesh.nodes[static_cast<std::size_t>(n)].y);
    if (mesh.element_layer[e] == 0) {
      lower += mesh.signed_area(e);
      EXPECT_LE(top, 0.1 + 1e-15);
    }
  }
  EXPECT_NEAR(lower, 0.1, 1e-14);
}

TEST(ThinMesh, RefinementQuadruplesElements) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  const auto coarse = mesh_thin_domain(spec, 0.2 / 8.0);
  const auto fine = mesh_thin_domain(spec, 0.2 / 16.0);
  EXPECT_GE(fine.n_elements(), 4 * coarse.n_elements());
  EXPECT_NEAR(fine.area(), coarse.area(), 1e-14);
}

TEST(ThinMesh, TooCoarseRejected) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  EXPECT_THROW(
      {
        try {
          mesh_thin_domain(spec, 0.2 / 3.0);
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::mesh_too_coarse);
          throw;
        }
      },
      Error);
  EXPECT_THROW(mesh_thin_domain(spec, 0.0), Error);
}

TEST(ThinMesh, EveryBoundaryEdgeTaggedOnce) {
  const ThinDomainSpec spec(0.1, 1.0, comb12());
  const auto mesh = mesh_thin_domain(spec, 0.2 / 8.0);
  std::set<std::pair<int, int>> seen;
  for (const auto& edge : mesh.boundary_edges) {
    EXPECT_TRUE(seen.insert({std::min(edge.a, edge.b), std::max(edge.a, edge.b)}).second);
  }
  bool has_jump = false;
  for (const auto& edge : mesh.boundary_edges) has_jump = has_jump || edge.tag == BoundaryTag::jump;
  EXPECT_TRUE(has_jump);
}

TEST(CellMesh, UnitSquarePeriodic) {
  const auto mesh = mesh_cell({CellDomain::basic, BoundaryProfile::constant(1.0)}, 1.0 / 8.0, true);
  EXPECT_NEAR(mesh.area(), 1.0, 1e-15);
  int left = 0;
  for (const auto& pt : mesh.nodes) left += pt.x == 0.0;
  EXPECT_EQ(static_cast<int>(mesh.periodic_pairs.size()), left);
  for (const auto& [a, b] : mesh.periodic_pairs) {
    const Point& pa = mesh.nodes[static_cast<std::size_t>(a)];
    const Point& pb = mesh.nodes[static_cast<std::size_t>(b)];
    EXPECT_EQ(pa.y, pb.y);
    EXPECT_EQ(pb.x - pa.x, 1.0);
  }
  expect_conforming(mesh);
}

TEST(CellMesh, CombCellAndUpperPart) {
  const auto g = comb12();
  const auto cell = mesh_cell({CellDomain::basic, g}, 0.25, true);
  EXPECT_NEAR(cell.area(), 3.0, 1e-14);
  for (const auto& [a, b] : cell.periodic_pairs) {
    EXPECT_EQ(cell.nodes[static_cast<std::size_t>(a)].y, cell.nodes[static_cast<std::size_t>(b)].y);
    EXPECT_EQ(cell.nodes[static_cast<std::size_t>(b)].x - cell.nodes[static_cast<std::size_t>(a)].x, 2.0);
  }
  const auto upper = mesh_cell({CellDomain::upper, g}, 0.25, false);
  EXPECT_NEAR(upper.area(), 1.0, 1e-14);
  EXPECT_EQ(count_components(upper), 1);
  const auto lower = mesh_cell({CellDomain::lower_rect, g}, 0.25, false);
  EXPECT_NEAR(lower.area(), 1.0, 1e-15);
}

TEST(CellMesh, DisconnectedUpperPart) {
  // two teeth per period
  const auto g = BoundaryProfile::piecewise_constant(1.0, {0.0, 0.25, 0.5, 0.75}, {1.0, 2.0, 1.0, 2.0});
  const auto upper = mesh_cell({CellDomain::upper, g}, 0.125, false);
  EXPECT_EQ(count_components(upper), 2);
  EXPECT_NEAR(upper.area(), 0.5, 1e-14);
}

TEST(IntervalMesh, Uniform) {
  EXPECT_EQ(mesh_interval(1).nodes, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(mesh_interval(4).nodes, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const auto m = mesh_interval(10);
  ASSERT_EQ(m.nodes.size(), 11u);
  for (std::size_t i = 0; i < m.nodes.size(); ++i) EXPECT_NEAR(m.nodes[i], 0.1 * static_cast<double>(i), 1e-15);
  EXPECT_THROW(mesh_interval(0), Error);
}

TEST(MeshDump, HeaderAndCounts) {
  const auto mesh = mesh_cell({CellDomain::basic, BoundaryProfile::constant(1.0)}, 0.25, false);
  std::ostringstream out;
  write_mesh(out, mesh);
  std::istringstream in(out.str());
  std::string word;
  std::size_t n = 0, m = 0;
  in >> word >> n;
  EXPECT_EQ(word, "nodes");
  in >> word >> m;
  EXPECT_EQ(word, "elements");
  EXPECT_EQ(n, mesh.n_nodes());
  EXPECT_EQ(m, mesh.n_elements());
  std::size_t lines = 0;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) lines += !line.empty();
  EXPECT_EQ(lines, n + m);
}
