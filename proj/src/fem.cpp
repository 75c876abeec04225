#include "thinhom/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "thinhom/errors.hpp"

namespace thinhom {

// ---------------------------------------------------------------------------
// Fields

FemFunction::FemFunction(std::shared_ptr<const TriangleMesh> mesh_, std::vector<double> values_)
    : mesh(std::move(mesh_)), values(std::move(values_)) {
  if (!mesh || values.size() != mesh->n_nodes())
    throw Error(ErrorKind::invalid_argument, "FemFunction needs one value per mesh node");
}

FemFunction FemFunction::zero(std::shared_ptr<const TriangleMesh> mesh) {
  const std::size_t n = mesh->n_nodes();
  return FemFunction(std::move(mesh), std::vector<double>(n, 0.0));
}

FemFunction FemFunction::interpolate(std::shared_ptr<const TriangleMesh> mesh,
                                     const std::function<double(double, double)>& f) {
  std::vector<double> values(mesh->n_nodes());
  for (std::size_t n = 0; n < values.size(); ++n) values[n] = f(mesh->nodes[n].x, mesh->nodes[n].y);
  return FemFunction(std::move(mesh), std::move(values));
}

namespace {

struct ElementGeometry {
  std::array<int, 3> v;
  double area;
  std::array<Vec2, 3> grad;  // gradients of the barycentric basis functions
};

ElementGeometry element_geometry(const TriangleMesh& mesh, std::size_t e) {
  ElementGeometry geo;
  geo.v = mesh.elements[e];
  const Point& a = mesh.nodes[static_cast<std::size_t>(geo.v[0])];
  const Point& b = mesh.nodes[static_cast<std::size_t>(geo.v[1])];
  const Point& c = mesh.nodes[static_cast<std::size_t>(geo.v[2])];
  const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  geo.area = 0.5 * det;
  geo.grad[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
  geo.grad[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
  geo.grad[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
  return geo;
}

Point bary_point(const TriangleMesh& mesh, const std::array<int, 3>& v, const std::array<double, 3>& l) {
  Point p;
  for (int k = 0; k < 3; ++k) {
    p.x += l[static_cast<std::size_t>(k)] * mesh.nodes[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])].x;
    p.y += l[static_cast<std::size_t>(k)] * mesh.nodes[static_cast<std::size_t>(v[static_cast<std::size_t>(k)])].y;
  }
  return p;
}

}  // namespace

Vec2 FemFunction::gradient(std::size_t element) const {
  const ElementGeometry geo = element_geometry(*mesh, element);
  const double u0 = values[static_cast<std::size_t>(geo.v[0])];
  const double d1 = values[static_cast<std::size_t>(geo.v[1])] - u0;
  const double d2 = values[static_cast<std::size_t>(geo.v[2])] - u0;
  return {d1 * geo.grad[1][0] + d2 * geo.grad[2][0], d1 * geo.grad[1][1] + d2 * geo.grad[2][1]};
}

double FemFunction::value(std::size_t element, const std::array<double, 3>& bary) const {
  const auto& v = mesh->elements[element];
  return bary[0] * values[static_cast<std::size_t>(v[0])] + bary[1] * values[static_cast<std::size_t>(v[1])] +
         bary[2] * values[static_cast<std::size_t>(v[2])];
}

std::size_t FemFunction1D::locate(double x) const {
  const auto& nodes = mesh.nodes;
  auto it = std::lower_bound(nodes.begin() + 1, nodes.end(), x);
  if (it == nodes.end()) return nodes.size() - 2;
  return static_cast<std::size_t>(std::distance(nodes.begin(), it)) - 1;
}

double FemFunction1D::operator()(double x) const {
  const std::size_t e = locate(x);
  const double x0 = mesh.nodes[e];
  const double x1 = mesh.nodes[e + 1];
  const double t = std::clamp((x - x0) / (x1 - x0), 0.0, 1.0);
  return (1.0 - t) * values[e] + t * values[e + 1];
}

double FemFunction1D::derivative(double x) const {
  const std::size_t e = locate(x);
  return (values[e + 1] - values[e]) / (mesh.nodes[e + 1] - mesh.nodes[e]);
}

Forcing Forcing::x_only(std::function<double(double)> f) {
  Forcing forcing;
  forcing.x_only_ = std::move(f);
  return forcing;
}

Forcing Forcing::general(std::function<double(double, double)> f) {
  Forcing forcing;
  forcing.general_ = std::move(f);
  return forcing;
}

Forcing Forcing::nodal(FemFunction f) {
  Forcing forcing;
  forcing.nodal_ = std::move(f);
  return forcing;
}

double Forcing::evaluate(const TriangleMesh& mesh, std::size_t element, const std::array<double, 3>& bary,
                         const Point& point) const {
  if (x_only_) return x_only_(point.x);
  if (general_) return general_(point.x, point.y);
  if (nodal_) {
    if (nodal_->mesh.get() != &mesh)
      throw Error(ErrorKind::invalid_argument, "nodal forcing lives on a different mesh");
    return nodal_->value(element, bary);
  }
  return 0.0;
}

const std::array<std::array<double, 3>, 3>& triangle_rule() {
  static const std::array<std::array<double, 3>, 3> rule{{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                                          {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                                          {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}}};
  return rule;
}

Vec2 flux(const PLaplaceExponent& exponent, double delta, const Vec2& s) {
  if (delta < 0.0) throw Error(ErrorKind::invalid_argument, "regularization must be non-negative");
  const double norm2 = s[0] * s[0] + s[1] * s[1];
  const double base = delta * delta + norm2;
  if (base == 0.0) {
    if (exponent.p() < 2.0) throw Error(ErrorKind::singular_flux, "flux at s = 0 with delta = 0 and p < 2");
    return {0.0, 0.0};
  }
  const double factor = std::pow(base, 0.5 * (exponent.p() - 2.0));
  return {factor * s[0], factor * s[1]};
}

void SolverSettings::validate() const {
  if (delta_schedule.empty()) throw Error(ErrorKind::invalid_argument, "delta_schedule must not be empty");
  for (std::size_t i = 0; i < delta_schedule.size(); ++i) {
    if (!(delta_schedule[i] > 0.0))
      throw Error(ErrorKind::invalid_argument, "delta_schedule entries must be positive");
    if (i > 0 && !(delta_schedule[i] < delta_schedule[i - 1]))
      throw Error(ErrorKind::invalid_argument, "delta_schedule must decrease strictly");
  }
  if (max_newton < 1) throw Error(ErrorKind::invalid_argument, "max_newton must be at least 1");
  if (!(newton_rtol >= 0.0) || !(newton_atol >= 0.0))
    throw Error(ErrorKind::invalid_argument, "Newton tolerances must be non-negative");
}

int NonlinearReport::total_iterations() const {
  return std::accumulate(iterations.begin(), iterations.end(), 0);
}

DofMap DofMap::identity(const TriangleMesh& mesh) {
  DofMap map;
  map.node_dof.resize(mesh.n_nodes());
  std::iota(map.node_dof.begin(), map.node_dof.end(), 0);
  map.n_dofs = static_cast<int>(mesh.n_nodes());
  return map;
}

DofMap DofMap::periodic(const TriangleMesh& mesh) {
  std::vector<int> partner(mesh.n_nodes(), -1);
  for (const auto& [left, right] : mesh.periodic_pairs) partner[static_cast<std::size_t>(right)] = left;
  DofMap map;
  map.node_dof.assign(mesh.n_nodes(), -1);
  int next = 0;
  for (std::size_t n = 0; n < mesh.n_nodes(); ++n)
    if (partner[n] < 0) map.node_dof[n] = next++;
  for (std::size_t n = 0; n < mesh.n_nodes(); ++n)
    if (partner[n] >= 0) map.node_dof[n] = map.node_dof[static_cast<std::size_t>(partner[n])];
  map.n_dofs = next;
  return map;
}

Vector DofMap::gather(const std::vector<double>& nodal) const {
  Vector dofs = Vector::Zero(n_dofs);
  for (std::size_t n = 0; n < node_dof.size(); ++n) dofs[node_dof[n]] = nodal[n];
  return dofs;
}

std::vector<double> DofMap::scatter(const Vector& dofs) const {
  std::vector<double> nodal(node_dof.size());
  for (std::size_t n = 0; n < node_dof.size(); ++n) nodal[n] = dofs[node_dof[n]];
  return nodal;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct EnergyValue {
  double value = 0.0;
  double magnitude = 0.0;  // sum of absolute contributions, sets the roundoff scale
};

// Sparse matrix with a fixed pattern and per-element slots into its value array.
class ElementPattern {
 public:
  ElementPattern(const TriangleMesh& mesh, const DofMap& dofs) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.n_elements() * 9);
    for (const auto& element : mesh.elements)
      for (int a : element)
        for (int b : element)
          triplets.emplace_back(dofs.node_dof[static_cast<std::size_t>(a)],
                                dofs.node_dof[static_cast<std::size_t>(b)], 0.0);
    matrix_.resize(dofs.n_dofs, dofs.n_dofs);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
    slots_.resize(mesh.n_elements() * 9);
    const int* outer = matrix_.outerIndexPtr();
    const int* inner = matrix_.innerIndexPtr();
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
      const auto& element = mesh.elements[e];
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const int row = dofs.node_dof[static_cast<std::size_t>(element[static_cast<std::size_t>(a)])];
          const int col = dofs.node_dof[static_cast<std::size_t>(element[static_cast<std::size_t>(b)])];
          const int* begin = inner + outer[col];
          const int* end = inner + outer[col + 1];
          const int* hit = std::lower_bound(begin, end, row);
          slots_[e * 9 + static_cast<std::size_t>(a * 3 + b)] = static_cast<int>(hit - inner);
        }
      }
    }
  }

  SparseMatrix& zeroed() {
    std::fill(matrix_.valuePtr(), matrix_.valuePtr() + matrix_.nonZeros(), 0.0);
    return matrix_;
  }
  const SparseMatrix& matrix() const { return matrix_; }
  int slot(std::size_t element, int a, int b) const {
    return slots_[element * 9 + static_cast<std::size_t>(a * 3 + b)];
  }

 private:
  SparseMatrix matrix_;
  std::vector<int> slots_;
};

// The discrete p-Laplacian functional on a triangle mesh, with optional
// zeroth-order term, load and constant gradient shift (cell problem).
class PLaplaceForm {
 public:
  PLaplaceForm(const TriangleMesh& mesh, DofMap dofs, PLaplaceExponent exponent, bool mass_term,
               const Forcing* forcing, Vec2 shift)
      : mesh_(mesh), dofs_(std::move(dofs)), exponent_(exponent), mass_term_(mass_term),
        forcing_(forcing), shift_(shift) {
    geometry_.reserve(mesh.n_elements());
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) geometry_.push_back(element_geometry(mesh, e));
    if (forcing_) {
      const auto& rule = triangle_rule();
      load_values_.resize(mesh.n_elements() * 3);
      for (std::size_t e = 0; e < mesh.n_elements(); ++e)
        for (std::size_t q = 0; q < 3; ++q)
          load_values_[e * 3 + q] =
              forcing_->evaluate(mesh, e, rule[q], bary_point(mesh, geometry_[e].v, rule[q]));
    }
  }

  const DofMap& dofs() const { return dofs_; }
  const TriangleMesh& mesh() const { return mesh_; }

  EnergyValue energy(const Vector& u, double delta) const {
    const double p = exponent_.p();
    const double dp = std::pow(delta, p);
    const auto& rule = triangle_rule();
    EnergyValue total;
    for (std::size_t e = 0; e < geometry_.size(); ++e) {
      const ElementGeometry& geo = geometry_[e];
      const std::array<double, 3> uv = local(u, geo);
      const Vec2 s = gradient(geo, uv);
      const double grad_term = geo.area / p * std::pow(delta * delta + s[0] * s[0] + s[1] * s[1], 0.5 * p);
      total.value += grad_term;
      total.magnitude += grad_term;
      for (std::size_t q = 0; q < 3; ++q) {
        const double uq = rule[q][0] * uv[0] + rule[q][1] * uv[1] + rule[q][2] * uv[2];
        const double w = geo.area / 3.0;
        if (mass_term_) {
          const double m = w / p * (std::pow(delta * delta + uq * uq, 0.5 * p) - dp);
          total.value += m;
          total.magnitude += std::abs(m);
        }
        if (forcing_) {
          const double l = w * load_values_[e * 3 + q] * uq;
          total.value -= l;
          total.magnitude += std::abs(l);
        }
      }
    }
    return total;
  }

  Vector residual(const Vector& u, double delta) const {
    const auto& rule = triangle_rule();
    Vector r = Vector::Zero(dofs_.n_dofs);
    for (std::size_t e = 0; e < geometry_.size(); ++e) {
      const ElementGeometry& geo = geometry_[e];
      const std::array<double, 3> uv = local(u, geo);
      const Vec2 s = gradient(geo, uv);
      const Vec2 a = regularized_flux(delta, s);
      std::array<double, 3> local_r{};
      for (std::size_t k = 0; k < 3; ++k)
        local_r[k] = geo.area * (a[0] * geo.grad[k][0] + a[1] * geo.grad[k][1]);
      for (std::size_t q = 0; q < 3; ++q) {
        const double uq = rule[q][0] * uv[0] + rule[q][1] * uv[1] + rule[q][2] * uv[2];
        double density = 0.0;
        if (mass_term_) density += zeroth(delta, uq);
        if (forcing_) density -= load_values_[e * 3 + q];
        if (density == 0.0) continue;
        for (std::size_t k = 0; k < 3; ++k) local_r[k] += geo.area / 3.0 * density * rule[q][k];
      }
      for (std::size_t k = 0; k < 3; ++k) r[dof(geo.v[k])] += local_r[k];
    }
    return r;
  }

  Vector load() const {
    const auto& rule = triangle_rule();
    Vector b = Vector::Zero(dofs_.n_dofs);
    if (!forcing_) return b;
    for (std::size_t e = 0; e < geometry_.size(); ++e) {
      const ElementGeometry& geo = geometry_[e];
      for (std::size_t q = 0; q < 3; ++q)
        for (std::size_t k = 0; k < 3; ++k)
          b[dof(geo.v[k])] += geo.area / 3.0 * load_values_[e * 3 + q] * rule[q][k];
    }
    return b;
  }

  const SparseMatrix& jacobian(const Vector& u, double delta) const {
    if (delta == 0.0 && exponent_.p() < 2.0)
      throw Error(ErrorKind::invalid_argument, "Jacobian needs delta > 0 when p < 2");
    if (!pattern_) pattern_ = std::make_unique<ElementPattern>(mesh_, dofs_);
    SparseMatrix& J = pattern_->zeroed();
    double* values = J.valuePtr();
    const double p = exponent_.p();
    const auto& rule = triangle_rule();
    for (std::size_t e = 0; e < geometry_.size(); ++e) {
      const ElementGeometry& geo = geometry_[e];
      const std::array<double, 3> uv = local(u, geo);
      const Vec2 s = gradient(geo, uv);
      const double base = delta * delta + s[0] * s[0] + s[1] * s[1];
      std::array<std::array<double, 2>, 2> A{};
      if (base > 0.0) {
        const double f = std::pow(base, 0.5 * (p - 2.0));
        const double c = (p - 2.0) / base;
        A = {{{f * (1.0 + c * s[0] * s[0]), f * c * s[0] * s[1]},
              {f * c * s[0] * s[1], f * (1.0 + c * s[1] * s[1])}}};
      }
      std::array<double, 3> m{};
      if (mass_term_) {
        for (std::size_t q = 0; q < 3; ++q) {
          const double uq = rule[q][0] * uv[0] + rule[q][1] * uv[1] + rule[q][2] * uv[2];
          m[q] = zeroth_derivative(delta, uq);
        }
      }
      for (int a = 0; a < 3; ++a) {
        const Vec2& ga = geo.grad[static_cast<std::size_t>(a)];
        const Vec2 Aga{A[0][0] * ga[0] + A[0][1] * ga[1], A[1][0] * ga[0] + A[1][1] * ga[1]};
        for (int b = 0; b < 3; ++b) {
          const Vec2& gb = geo.grad[static_cast<std::size_t>(b)];
          double value = geo.area * (Aga[0] * gb[0] + Aga[1] * gb[1]);
          if (mass_term_)
            for (std::size_t q = 0; q < 3; ++q)
              value += geo.area / 3.0 * m[q] * rule[q][static_cast<std::size_t>(a)] *
                       rule[q][static_cast<std::size_t>(b)];
          values[pattern_->slot(e, a, b)] += value;
        }
      }
    }
    return J;
  }

 private:
  int dof(int node) const { return dofs_.node_dof[static_cast<std::size_t>(node)]; }

  std::array<double, 3> local(const Vector& u, const ElementGeometry& geo) const {
    return {u[dof(geo.v[0])], u[dof(geo.v[1])], u[dof(geo.v[2])]};
  }

  // Differences against the first vertex keep small gradients accurate.
  Vec2 gradient(const ElementGeometry& geo, const std::array<double, 3>& uv) const {
    const double d1 = uv[1] - uv[0];
    const double d2 = uv[2] - uv[0];
    return {shift_[0] + d1 * geo.grad[1][0] + d2 * geo.grad[2][0],
            shift_[1] + d1 * geo.grad[1][1] + d2 * geo.grad[2][1]};
  }

  Vec2 regularized_flux(double delta, const Vec2& s) const {
    const double base = delta * delta + s[0] * s[0] + s[1] * s[1];
    if (base == 0.0) return {0.0, 0.0};  // continuous extension of |s|^(p-2) s
    const double f = std::pow(base, 0.5 * (exponent_.p() - 2.0));
    return {f * s[0], f * s[1]};
  }

  double zeroth(double delta, double u) const {
    const double base = delta * delta + u * u;
    if (base == 0.0) return 0.0;
    return std::pow(base, 0.5 * (exponent_.p() - 2.0)) * u;
  }

  double zeroth_derivative(double delta, double u) const {
    const double base = delta * delta + u * u;
    if (base == 0.0) return exponent_.p() > 2.0 ? 0.0 : (exponent_.p() == 2.0 ? 1.0 : 0.0);
    const double p = exponent_.p();
    return std::pow(base, 0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * u * u / base);
  }

  const TriangleMesh& mesh_;
  DofMap dofs_;
  PLaplaceExponent exponent_;
  bool mass_term_;
  const Forcing* forcing_;
  Vec2 shift_;
  std::vector<ElementGeometry> geometry_;
  std::vector<double> load_values_;
  mutable std::unique_ptr<ElementPattern> pattern_;
};

DofMap dofs_for(const TriangleMesh& mesh) {
  return mesh.periodic_pairs.empty() ? DofMap::identity(mesh) : DofMap::periodic(mesh);
}

// ---------------------------------------------------------------------------
// Newton continuation driver

struct NewtonProblem {
  std::function<EnergyValue(const Vector&, double)> energy;
  std::function<Vector(const Vector&, double)> residual;
  std::function<const SparseMatrix&(const Vector&, double)> jacobian;
  SparseMatrix norm_matrix;  // SPD; the residual is measured in its dual norm
  double measure = 1.0;
  double reference = 0.0;
  std::optional<Vector> constraint;  // linear constraint c . u = 0, enforced by a multiplier
};

class DualNorm {
 public:
  DualNorm(const SparseMatrix& gram, double measure) : measure_(measure) {
    solver_.compute(gram);
    if (solver_.info() != Eigen::Success)
      throw Error(ErrorKind::singular_jacobian, "norm matrix factorization failed");
  }
  double operator()(const Vector& r) const {
    const Vector z = solver_.solve(r);
    return std::sqrt(std::max(0.0, r.dot(z)) / measure_);
  }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
  double measure_;
};

SparseMatrix bordered(const SparseMatrix& J, const Vector& c) {
  const Eigen::Index n = J.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(J.nonZeros() + 2 * n));
  for (Eigen::Index k = 0; k < J.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(J, k); it; ++it)
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index i = 0; i < n; ++i) {
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(n), c[i]);
    triplets.emplace_back(static_cast<int>(n), static_cast<int>(i), c[i]);
  }
  SparseMatrix B(n + 1, n + 1);
  B.setFromTriplets(triplets.begin(), triplets.end());
  B.makeCompressed();
  return B;
}

// Dual norm of J xi for a one-ulp perturbation xi of u: the residual change
// caused by rounding the iterate itself, below which Newton cannot make progress.
double roundoff_floor(const SparseMatrix& J, const Vector& u, const DualNorm& dual) {
  Vector xi(u.size());
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    const double sign = (state >> 63) != 0 ? 1.0 : -1.0;
    xi[i] = sign * std::numeric_limits<double>::epsilon() * std::abs(u[i]);
  }
  return dual(J * xi);
}

NonlinearReport run_continuation(const NewtonProblem& problem, const SolverSettings& settings, Vector& u) {
  settings.validate();
  const DualNorm dual(problem.norm_matrix, problem.measure);
  NonlinearReport report;
  report.tolerance = settings.newton_rtol * problem.reference + settings.newton_atol;

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;

  double residual_norm = 0.0;
  for (double delta : settings.delta_schedule) {
    int iterations = 0;
    std::vector<double> trace;
    EnergyValue current = problem.energy(u, delta);
    trace.push_back(current.value);
    Vector r = problem.residual(u, delta);
    residual_norm = dual(r);
    while (residual_norm > report.tolerance && iterations < settings.max_newton) {
      const SparseMatrix& J = problem.jacobian(u, delta);
      if (residual_norm <= 2.0 * roundoff_floor(J, u, dual)) break;
      Vector step;
      if (problem.constraint) {
        const Vector& c = *problem.constraint;
        const SparseMatrix B = bordered(J, c);
        if (!analyzed) {
          lu.analyzePattern(B);
          analyzed = true;
        }
        lu.factorize(B);
        if (lu.info() != Eigen::Success) {
          report.singular_jacobian = true;
          break;
        }
        Vector rhs(r.size() + 1);
        rhs.head(r.size()) = -r;
        rhs[r.size()] = -c.dot(u);
        step = lu.solve(rhs).head(r.size());
      } else {
        if (!analyzed) {
          ldlt.analyzePattern(J);
          analyzed = true;
        }
        ldlt.factorize(J);
        if (ldlt.info() != Eigen::Success) {
          report.singular_jacobian = true;
          break;
        }
        step = ldlt.solve(-r);
      }
      if (!step.allFinite()) {
        report.singular_jacobian = true;
        break;
      }

      const double slope = r.dot(step);
      double t = 1.0;
      bool accepted = false;
      Vector trial;
      Vector trial_r;
      double trial_norm = 0.0;
      EnergyValue next;
      for (int k = 0; k < 60; ++k) {
        trial = u + t * step;
        next = problem.energy(trial, delta);
        if (!std::isfinite(next.value)) {
          t *= settings.backtrack_factor;
          continue;
        }
        const double target = current.value + settings.sufficient_decrease * t * std::min(slope, 0.0);
        const double noise = 1e-13 * (current.magnitude + next.magnitude);
        if (next.value <= target - noise) {
          accepted = true;
          // Keep shortening while the energy still drops clearly. For p < 2 the full
          // Newton step can overshoot to the mirror point with almost equal energy.
          for (int m = k + 1; m < 60; ++m) {
            const double shorter_t = t * settings.backtrack_factor;
            Vector shorter = u + shorter_t * step;
            const EnergyValue e = problem.energy(shorter, delta);
            if (!(e.value < next.value - 1e-13 * (e.magnitude + next.magnitude))) break;
            t = shorter_t;
            trial = std::move(shorter);
            next = e;
          }
        } else if (next.value <= target + noise) {
          // The energy change is below roundoff; fall back to residual decrease.
          trial_r = problem.residual(trial, delta);
          trial_norm = dual(trial_r);
          accepted = trial_norm < (1.0 - settings.sufficient_decrease * t) * residual_norm;
        }
        if (accepted) break;
        trial_r.resize(0);
        t *= settings.backtrack_factor;
      }
      if (!accepted) break;
      u = std::move(trial);
      current = next;
      trace.push_back(current.value);
      ++iterations;
      if (trial_r.size() > 0) {
        r = std::move(trial_r);
        residual_norm = trial_norm;
      } else {
        r = problem.residual(u, delta);
        residual_norm = dual(r);
      }
    }
    report.iterations.push_back(iterations);
    report.energy_trace.push_back(std::move(trace));
    report.final_energy = current.value;
    if (report.singular_jacobian) break;
  }
  report.final_residual = residual_norm;
  if (!report.singular_jacobian && residual_norm > report.tolerance)
    report.roundoff_floor = roundoff_floor(problem.jacobian(u, settings.delta_schedule.back()), u, dual);
  report.converged =
      !report.singular_jacobian && residual_norm <= std::max(report.tolerance, 2.0 * report.roundoff_floor);
  return report;
}

double total_area(const TriangleMesh& mesh) { return mesh.area(); }

}  // namespace

// ---------------------------------------------------------------------------
// Public operators

double energy(const TriangleMesh& mesh, const PLaplaceExponent& exponent, double delta, const Forcing& f,
              const FemFunction& u) {
  const PLaplaceForm form(mesh, dofs_for(mesh), exponent, true, &f, {0.0, 0.0});
  return form.energy(form.dofs().gather(u.values), delta).value;
}

Vector assemble_residual(const TriangleMesh& mesh, const PLaplaceExponent& exponent, double delta,
                         const Forcing& f, const FemFunction& u) {
  const PLaplaceForm form(mesh, dofs_for(mesh), exponent, true, &f, {0.0, 0.0});
  return form.residual(form.dofs().gather(u.values), delta);
}

SparseMatrix assemble_jacobian(const TriangleMesh& mesh, const PLaplaceExponent& exponent, double delta,
                               const FemFunction& u) {
  const PLaplaceForm form(mesh, dofs_for(mesh), exponent, true, nullptr, {0.0, 0.0});
  return form.jacobian(form.dofs().gather(u.values), delta);
}

SparseMatrix assemble_stiffness_mass(const TriangleMesh& mesh, const DofMap& dofs, bool with_mass) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.n_elements() * 9);
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const ElementGeometry geo = element_geometry(mesh, e);
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        double value = geo.area * (geo.grad[a][0] * geo.grad[b][0] + geo.grad[a][1] * geo.grad[b][1]);
        if (with_mass) value += geo.area / 12.0 * (a == b ? 2.0 : 1.0);
        triplets.emplace_back(dofs.node_dof[static_cast<std::size_t>(geo.v[a])],
                              dofs.node_dof[static_cast<std::size_t>(geo.v[b])], value);
      }
    }
  }
  SparseMatrix K(dofs.n_dofs, dofs.n_dofs);
  K.setFromTriplets(triplets.begin(), triplets.end());
  K.makeCompressed();
  return K;
}

NeumannSolution solve_neumann(std::shared_ptr<const TriangleMesh> mesh, const PLaplaceExponent& exponent,
                              const Forcing& f, const SolverSettings& settings,
                              const std::optional<std::vector<double>>& initial) {
  const PLaplaceForm form(*mesh, dofs_for(*mesh), exponent, true, &f, {0.0, 0.0});
  NewtonProblem problem;
  problem.energy = [&](const Vector& u, double delta) { return form.energy(u, delta); };
  problem.residual = [&](const Vector& u, double delta) { return form.residual(u, delta); };
  problem.jacobian = [&](const Vector& u, double delta) -> const SparseMatrix& {
    return form.jacobian(u, delta);
  };
  problem.norm_matrix = assemble_stiffness_mass(*mesh, form.dofs(), true);
  problem.measure = total_area(*mesh);
  {
    const DualNorm dual(problem.norm_matrix, problem.measure);
    problem.reference = dual(form.load());
  }
  Vector u = initial ? form.dofs().gather(*initial) : Vector::Zero(form.dofs().n_dofs);
  NeumannSolution solution;
  solution.report = run_continuation(problem, settings, u);
  solution.u = FemFunction(mesh, form.dofs().scatter(u));
  return solution;
}

Vec2 CellSolution::grad_v(std::size_t element) const {
  Vec2 g = w.gradient(element);
  g[0] += 1.0;
  return g;
}

double CellSolution::v(std::size_t node) const { return w.values[node] + w.mesh->nodes[node].x; }

double CellSolution::mean_w() const {
  double total = 0.0;
  for (std::size_t e = 0; e < w.mesh->n_elements(); ++e) {
    const auto& v = w.mesh->elements[e];
    total += w.mesh->signed_area(e) / 3.0 *
             (w.values[static_cast<std::size_t>(v[0])] + w.values[static_cast<std::size_t>(v[1])] +
              w.values[static_cast<std::size_t>(v[2])]);
  }
  return total / area;
}

CellSolution solve_cell(std::shared_ptr<const TriangleMesh> cell_mesh, const PLaplaceExponent& exponent,
                        const SolverSettings& settings, const std::optional<std::vector<double>>& initial) {
  if (cell_mesh->periodic_pairs.empty())
    throw Error(ErrorKind::invalid_argument, "cell problem needs a periodic mesh of Y*");
  const PLaplaceForm form(*cell_mesh, DofMap::periodic(*cell_mesh), exponent, false, nullptr, {1.0, 0.0});
  const DofMap& dofs = form.dofs();

  Vector constraint = Vector::Zero(dofs.n_dofs);
  for (std::size_t e = 0; e < cell_mesh->n_elements(); ++e) {
    const double third = cell_mesh->signed_area(e) / 3.0;
    for (int v : cell_mesh->elements[e]) constraint[dofs.node_dof[static_cast<std::size_t>(v)]] += third;
  }

  NewtonProblem problem;
  problem.energy = [&](const Vector& u, double delta) { return form.energy(u, delta); };
  problem.residual = [&](const Vector& u, double delta) { return form.residual(u, delta); };
  problem.jacobian = [&](const Vector& u, double delta) -> const SparseMatrix& {
    return form.jacobian(u, delta);
  };
  problem.norm_matrix = assemble_stiffness_mass(*cell_mesh, dofs, true);
  problem.measure = total_area(*cell_mesh);
  problem.constraint = constraint;
  Vector w = initial ? dofs.gather(*initial) : Vector::Zero(dofs.n_dofs);
  w.array() -= constraint.dot(w) / problem.measure;
  {
    const DualNorm dual(problem.norm_matrix, problem.measure);
    problem.reference = dual(form.residual(w, settings.delta_schedule.front()));
  }

  CellSolution cell;
  cell.report = run_continuation(problem, settings, w);
  cell.w = FemFunction(cell_mesh, dofs.scatter(w));
  cell.area = problem.measure;
  const double p = exponent.p();
  double flux_form = 0.0;
  double energy_form = 0.0;
  for (std::size_t e = 0; e < cell_mesh->n_elements(); ++e) {
    const Vec2 g = cell.grad_v(e);
    const double norm = std::hypot(g[0], g[1]);
    const double area = cell_mesh->signed_area(e);
    if (norm > 0.0) flux_form += area * std::pow(norm, p - 2.0) * g[0];
    energy_form += area * std::pow(norm, p);
  }
  cell.q = flux_form / cell.area;
  cell.q_energy_form = energy_form / cell.area;
  return cell;
}

// ---------------------------------------------------------------------------
// One-dimensional limit problem

namespace {

class Interval1DForm {
 public:
  Interval1DForm(const IntervalMesh& mesh, double q, PLaplaceExponent exponent,
                 const std::function<double(double)>& f)
      : mesh_(mesh), q_(q), exponent_(exponent) {
    const std::size_t n = mesh.n_elements();
    load_.resize(2 * n);
    for (std::size_t e = 0; e < n; ++e)
      for (std::size_t g = 0; g < 2; ++g) load_[2 * e + g] = f(point(e, g));
  }

  std::size_t size() const { return mesh_.nodes.size(); }

  EnergyValue energy(const Vector& u, double delta) const {
    const double p = exponent_.p();
    const double dp = std::pow(delta, p);
    EnergyValue total;
    for (std::size_t e = 0; e + 1 < mesh_.nodes.size(); ++e) {
      const double h = length(e);
      const double s = (u[static_cast<Eigen::Index>(e + 1)] - u[static_cast<Eigen::Index>(e)]) / h;
      const double grad_term = q_ * h / p * std::pow(delta * delta + s * s, 0.5 * p);
      total.value += grad_term;
      total.magnitude += grad_term;
      for (std::size_t g = 0; g < 2; ++g) {
        const double uq = value(u, e, g);
        const double m = 0.5 * h / p * (std::pow(delta * delta + uq * uq, 0.5 * p) - dp);
        const double l = 0.5 * h * load_[2 * e + g] * uq;
        total.value += m - l;
        total.magnitude += std::abs(m) + std::abs(l);
      }
    }
    return total;
  }

  Vector residual(const Vector& u, double delta) const {
    const double p = exponent_.p();
    Vector r = Vector::Zero(static_cast<Eigen::Index>(size()));
    for (std::size_t e = 0; e + 1 < mesh_.nodes.size(); ++e) {
      const double h = length(e);
      const auto i = static_cast<Eigen::Index>(e);
      const double s = (u[i + 1] - u[i]) / h;
      const double base = delta * delta + s * s;
      const double a = base > 0.0 ? q_ * std::pow(base, 0.5 * (p - 2.0)) * s : 0.0;
      r[i] -= a;
      r[i + 1] += a;
      for (std::size_t g = 0; g < 2; ++g) {
        const double uq = value(u, e, g);
        const double b = delta * delta + uq * uq;
        const double density = (b > 0.0 ? std::pow(b, 0.5 * (p - 2.0)) * uq : 0.0) - load_[2 * e + g];
        const auto [phi0, phi1] = shape(g);
        r[i] += 0.5 * h * density * phi0;
        r[i + 1] += 0.5 * h * density * phi1;
      }
    }
    return r;
  }

  Vector load() const {
    Vector b = Vector::Zero(static_cast<Eigen::Index>(size()));
    for (std::size_t e = 0; e + 1 < mesh_.nodes.size(); ++e) {
      const auto i = static_cast<Eigen::Index>(e);
      for (std::size_t g = 0; g < 2; ++g) {
        const auto [phi0, phi1] = shape(g);
        b[i] += 0.5 * length(e) * load_[2 * e + g] * phi0;
        b[i + 1] += 0.5 * length(e) * load_[2 * e + g] * phi1;
      }
    }
    return b;
  }

  const SparseMatrix& jacobian(const Vector& u, double delta) const {
    if (delta == 0.0 && exponent_.p() < 2.0)
      throw Error(ErrorKind::invalid_argument, "Jacobian needs delta > 0 when p < 2");
    const double p = exponent_.p();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * mesh_.n_elements());
    for (std::size_t e = 0; e + 1 < mesh_.nodes.size(); ++e) {
      const double h = length(e);
      const auto i = static_cast<int>(e);
      const double s = (u[i + 1] - u[i]) / h;
      const double base = delta * delta + s * s;
      const double k = base > 0.0 ? q_ * std::pow(base, 0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * s * s / base) / h : 0.0;
      double m00 = 0.0, m01 = 0.0, m11 = 0.0;
      for (std::size_t g = 0; g < 2; ++g) {
        const double uq = value(u, e, g);
        const double b = delta * delta + uq * uq;
        const double d = b > 0.0 ? std::pow(b, 0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * uq * uq / b) : 0.0;
        const auto [phi0, phi1] = shape(g);
        m00 += 0.5 * h * d * phi0 * phi0;
        m01 += 0.5 * h * d * phi0 * phi1;
        m11 += 0.5 * h * d * phi1 * phi1;
      }
      triplets.emplace_back(i, i, k + m00);
      triplets.emplace_back(i, i + 1, -k + m01);
      triplets.emplace_back(i + 1, i, -k + m01);
      triplets.emplace_back(i + 1, i + 1, k + m11);
    }
    jacobian_.resize(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    jacobian_.setFromTriplets(triplets.begin(), triplets.end());
    jacobian_.makeCompressed();
    return jacobian_;
  }

  SparseMatrix gram() const {
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t e = 0; e + 1 < mesh_.nodes.size(); ++e) {
      const double h = length(e);
      const auto i = static_cast<int>(e);
      triplets.emplace_back(i, i, 1.0 / h + h / 3.0);
      triplets.emplace_back(i, i + 1, -1.0 / h + h / 6.0);
      triplets.emplace_back(i + 1, i, -1.0 / h + h / 6.0);
      triplets.emplace_back(i + 1, i + 1, 1.0 / h + h / 3.0);
    }
    SparseMatrix G(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    G.setFromTriplets(triplets.begin(), triplets.end());
    return G;
  }

 private:
  static constexpr double gauss_offset = 0.21132486540518711775;  // (1 - 1/sqrt(3)) / 2

  static std::pair<double, double> shape(std::size_t g) {
    const double t = g == 0 ? gauss_offset : 1.0 - gauss_offset;
    return {1.0 - t, t};
  }
  double length(std::size_t e) const { return mesh_.nodes[e + 1] - mesh_.nodes[e]; }
  double point(std::size_t e, std::size_t g) const {
    const auto [phi0, phi1] = shape(g);
    return phi0 * mesh_.nodes[e] + phi1 * mesh_.nodes[e + 1];
  }
  double value(const Vector& u, std::size_t e, std::size_t g) const {
    const auto [phi0, phi1] = shape(g);
    const auto i = static_cast<Eigen::Index>(e);
    return phi0 * u[i] + phi1 * u[i + 1];
  }

  const IntervalMesh& mesh_;
  double q_;
  PLaplaceExponent exponent_;
  std::vector<double> load_;
  mutable SparseMatrix jacobian_;
};

}  // namespace

LimitSolution solve_limit_1d(double q, const PLaplaceExponent& exponent, const std::function<double(double)>& fbar,
                             int n, const SolverSettings& settings,
                             const std::optional<std::vector<double>>& initial) {
  if (!(q > 0.0)) throw Error(ErrorKind::invalid_argument, "limit coefficient q must be positive");
  LimitSolution solution;
  solution.u.mesh = mesh_interval(n);
  const Interval1DForm form(solution.u.mesh, q, exponent, fbar);
  NewtonProblem problem;
  problem.energy = [&](const Vector& u, double delta) { return form.energy(u, delta); };
  problem.residual = [&](const Vector& u, double delta) { return form.residual(u, delta); };
  problem.jacobian = [&](const Vector& u, double delta) -> const SparseMatrix& {
    return form.jacobian(u, delta);
  };
  problem.norm_matrix = form.gram();
  problem.measure = 1.0;
  {
    const DualNorm dual(problem.norm_matrix, problem.measure);
    problem.reference = dual(form.load());
  }
  Vector u = Vector::Zero(static_cast<Eigen::Index>(form.size()));
  if (initial) {
    if (initial->size() != form.size())
      throw Error(ErrorKind::invalid_argument, "initial guess has the wrong size");
    for (std::size_t i = 0; i < initial->size(); ++i) u[static_cast<Eigen::Index>(i)] = (*initial)[i];
  }
  solution.report = run_continuation(problem, settings, u);
  solution.u.values.assign(u.data(), u.data() + u.size());
  return solution;
}

}  // namespace thinhom
