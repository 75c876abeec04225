#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "thinhom/geometry.hpp"
#include "thinhom/mesh.hpp"

namespace thinhom {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Vec2 = std::array<double, 2>;

/// Continuous P1 field on a triangle mesh, one value per node.
struct FemFunction {
  std::shared_ptr<const TriangleMesh> mesh;
  std::vector<double> values;

  FemFunction() = default;
  FemFunction(std::shared_ptr<const TriangleMesh> mesh_, std::vector<double> values_);

  static FemFunction zero(std::shared_ptr<const TriangleMesh> mesh);
  static FemFunction interpolate(std::shared_ptr<const TriangleMesh> mesh,
                                 const std::function<double(double, double)>& f);

  Vec2 gradient(std::size_t element) const;
  /// Value inside `element` at barycentric coordinates (l0, l1, l2).
  double value(std::size_t element, const std::array<double, 3>& bary) const;
};

/// P1 field on an interval mesh of (0, 1).
struct FemFunction1D {
  IntervalMesh mesh;
  std::vector<double> values;

  std::size_t locate(double x) const;
  double operator()(double x) const;
  /// Element-constant derivative; at an interior node the lower-index element wins.
  double derivative(double x) const;
};

/// Right-hand side f of the 2D problem.
class Forcing {
 public:
  static Forcing x_only(std::function<double(double)> f);
  static Forcing general(std::function<double(double, double)> f);
  static Forcing nodal(FemFunction f);

  bool is_x_only() const noexcept { return x_only_ != nullptr; }
  const std::function<double(double)>& x_function() const { return x_only_; }
  double evaluate(const TriangleMesh& mesh, std::size_t element, const std::array<double, 3>& bary,
                  const Point& point) const;

 private:
  std::function<double(double)> x_only_;
  std::function<double(double, double)> general_;
  std::optional<FemFunction> nodal_;
};

/// Degree-2 interior rule on the reference triangle: barycentric points, equal weights 1/3.
const std::array<std::array<double, 3>, 3>& triangle_rule();

/// Regularized flux (delta^2 + |s|^2)^((p-2)/2) s; at delta = 0 this is |s|^(p-2) s.
Vec2 flux(const PLaplaceExponent& exponent, double delta, const Vec2& s);

struct SolverSettings {
  std::vector<double> delta_schedule{1e-1, 1e-2, 1e-3, 1e-4, 1e-5,
                                     1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
  double newton_rtol = 1e-10;
  double newton_atol = 1e-12;
  int max_newton = 50;
  double backtrack_factor = 0.5;
  double sufficient_decrease = 1e-4;

  void validate() const;
};

struct NonlinearReport {
  std::vector<int> iterations;  ///< per delta stage
  /// Energy after every accepted step, per stage (first entry: stage start).
  std::vector<std::vector<double>> energy_trace;
  double final_residual = 0.0;
  double tolerance = 0.0;
  /// Residual change caused by a one-ulp perturbation of the final iterate; set
  /// only when the tolerance was not met. Residuals within twice this floor count as converged.
  double roundoff_floor = 0.0;
  double final_energy = 0.0;
  bool converged = false;
  bool singular_jacobian = false;

  int total_iterations() const;
};

/// Node-to-unknown map; periodic pairs share one unknown.
struct DofMap {
  std::vector<int> node_dof;
  int n_dofs = 0;

  static DofMap identity(const TriangleMesh& mesh);
  static DofMap periodic(const TriangleMesh& mesh);

  Vector gather(const std::vector<double>& nodal) const;
  std::vector<double> scatter(const Vector& dofs) const;
};

// Discrete operators of  -div(flux(grad u)) + (delta^2 + u^2)^((p-2)/2) u = f  with natural BCs.
// Energy: (1/p) int (delta^2 + |grad u|^2)^(p/2) + (1/p) int [(delta^2 + u^2)^(p/2) - delta^p] - int f u.

double energy(const TriangleMesh& mesh, const PLaplaceExponent& exponent, double delta,
              const Forcing& f, const FemFunction& u);
/// Nodal covector (one entry per node).
Vector assemble_residual(const TriangleMesh& mesh, const PLaplaceExponent& exponent, double delta,
                         const Forcing& f, const FemFunction& u);
SparseMatrix assemble_jacobian(const TriangleMesh& mesh, const PLaplaceExponent& exponent,
                               double delta, const FemFunction& u);
/// Exact P1 stiffness + mass matrix on the given unknowns.
SparseMatrix assemble_stiffness_mass(const TriangleMesh& mesh, const DofMap& dofs, bool with_mass);

struct NeumannSolution {
  FemFunction u;
  NonlinearReport report;
};

NeumannSolution solve_neumann(std::shared_ptr<const TriangleMesh> mesh,
                              const PLaplaceExponent& exponent, const Forcing& f,
                              const SolverSettings& settings,
                              const std::optional<std::vector<double>>& initial = std::nullopt);

/// Periodic cell corrector. `w` holds v - y1 (zero Y*-average); grad v = e1 + grad w.
struct CellSolution {
  FemFunction w;
  double q = 0.0;
  double q_energy_form = 0.0;
  double area = 0.0;
  NonlinearReport report;

  Vec2 grad_v(std::size_t element) const;
  double v(std::size_t node) const;
  double mean_w() const;
};

CellSolution solve_cell(std::shared_ptr<const TriangleMesh> cell_mesh, const PLaplaceExponent& exponent,
                        const SolverSettings& settings,
                        const std::optional<std::vector<double>>& initial = std::nullopt);

/// -q (|u'|^(p-2) u')' + |u|^(p-2) u = fbar on (0, 1), u'(0) = u'(1) = 0.
struct LimitSolution {
  FemFunction1D u;
  NonlinearReport report;
};

LimitSolution solve_limit_1d(double q, const PLaplaceExponent& exponent,
                             const std::function<double(double)>& fbar, int n,
                             const SolverSettings& settings,
                             const std::optional<std::vector<double>>& initial = std::nullopt);

}  // namespace thinhom
