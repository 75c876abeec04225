#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "thinhom/fem.hpp"
#include "thinhom/geometry.hpp"
#include "thinhom/mesh.hpp"

namespace thinhom {

/// Barycentric point location on a triangle mesh through a uniform bucket grid.
///
/// Points within 1e-12 of the mesh are clamped onto it; farther points raise
/// point_outside_domain. When a point lies on a shared edge or vertex the
/// lowest element index wins.
class PointLocator {
 public:
  struct Hit {
    std::size_t element;
    std::array<double, 3> bary;
  };

  explicit PointLocator(std::shared_ptr<const TriangleMesh> mesh);

  Hit locate(const Point& point) const;
  const TriangleMesh& mesh() const noexcept { return *mesh_; }

 private:
  std::array<double, 3> barycentric(std::size_t element, const Point& point) const;
  void bucket_range(double lo, double hi, double origin, double size, int n, int& first, int& last) const;

  std::shared_ptr<const TriangleMesh> mesh_;
  double x0_ = 0.0, y0_ = 0.0, dx_ = 1.0, dy_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> bucket_start_;
  std::vector<int> bucket_items_;
};

/// Quadrature rule on Y*: the 3-point rule on every triangle of a Y* mesh.
struct CellQuadrature {
  std::vector<Point> points;
  std::vector<double> weights;
  double area = 0.0;

  static CellQuadrature on_mesh(const TriangleMesh& cell_mesh);
  static CellQuadrature for_profile(const BoundaryProfile& profile, double h);
  std::size_t size() const noexcept { return points.size(); }
};

/// Samples of T_eps phi: one x-sample per full cell, values at the Y* quadrature points.
/// Cells are indexed 0..n_cells-1; on Lambda the field is zero.
struct UnfoldedField {
  int n_cells = 0;
  double cell_length = 0.0;
  double lambda_start = 1.0;
  std::vector<double> values;  // n_cells x quadrature size, row-major

  std::size_t n_points() const noexcept {
    return n_cells == 0 ? 0 : values.size() / static_cast<std::size_t>(n_cells);
  }
  double at(int cell, std::size_t point) const { return values[static_cast<std::size_t>(cell) * n_points() + point]; }
  /// T_eps phi at (x, quadrature point j); zero for x in Lambda.
  double operator()(double x, std::size_t point) const;
};

using Field2D = std::function<double(double, double)>;

UnfoldedField unfold(const ThinDomainSpec& spec, const Field2D& phi, const CellQuadrature& quad);
UnfoldedField unfold(const ThinDomainSpec& spec, const FemFunction& phi, const CellQuadrature& quad);

/// Point evaluation of a P1 field, or of one component of its element gradient.
Field2D evaluator(const FemFunction& phi, std::shared_ptr<const PointLocator> locator = nullptr);
Field2D gradient_evaluator(const FemFunction& phi, int component,
                           std::shared_ptr<const PointLocator> locator = nullptr);

/// Nodal unfolding of a P1 field of R^eps onto a Y* mesh for one cell; exact
/// when the R^eps mesh repeats the cell mesh in every period.
FemFunction unfold_nodal(const ThinDomainSpec& spec, const Field2D& phi,
                         std::shared_ptr<const TriangleMesh> cell_mesh, int cell);

/// (1/L) int over (0,1) x Y* of T_eps phi, (1/eps) int over the full cells of phi,
/// and their difference.
struct IntegralCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double defect = 0.0;
};

/// Right side by 3-point quadrature on `mesh` (a mesh of R^eps).
IntegralCheck unfold_integral_check(const ThinDomainSpec& spec, const Field2D& phi, const CellQuadrature& quad,
                                    const TriangleMesh& mesh);
IntegralCheck unfold_integral_check(const ThinDomainSpec& spec, const FemFunction& phi,
                                    const CellQuadrature& quad);

/// || T_eps phi ||_{L^p((0,1) x Y*)}.
double unfolded_norm(const UnfoldedField& field, const CellQuadrature& quad, double p);

/// Pi_eps phi (x, y) = phi(x, eps y) on R- = (0,1) x (0, g0), carried by the
/// rescaled lower-layer submesh.
struct RescaledField {
  FemFunction field;
};

RescaledField rescale_pi(const ThinDomainSpec& spec, const FemFunction& phi);

enum class Subdomain { whole, lower, upper };

/// L^p norm by 3-point quadrature over the elements of the chosen layer.
double lp_norm(const FemFunction& phi, double p, Subdomain part = Subdomain::whole);
/// eps^(-1/p) ||phi||_{L^p}.
double rescaled_norm(const ThinDomainSpec& spec, const FemFunction& phi, double p,
                     Subdomain part = Subdomain::whole);
/// Restriction of the element set by layer tag.
bool in_subdomain(const TriangleMesh& mesh, std::size_t element, Subdomain part);


/// Property suite for T_eps and Pi_eps on random quadratic fields of R^eps.
/// All entries are absolute defects except the two norm entries, which are relative.
struct UnfoldingAudit {
  int n_cells = 0;
  double linearity = 0.0;
  double product = 0.0;
  double integral = 0.0;
  double norm = 0.0;     ///< ||T phi||_2 against (L/eps)^(1/2) ||phi||_2 over the full cells
  double pi_norm = 0.0;  ///< ||Pi phi||_p against |||phi|||_p on the lower layer
};

UnfoldingAudit audit_unfolding(const ThinDomainSpec& spec, double p, double cell_h, std::uint64_t seed);

}  // namespace thinhom
