#include "thinhom/unfolding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "thinhom/errors.hpp"

namespace thinhom {

namespace {

constexpr double inside_tolerance = 1e-13;  // on barycentric coordinates
constexpr double clamp_distance = 1e-12;

}  // namespace

PointLocator::PointLocator(std::shared_ptr<const TriangleMesh> mesh) : mesh_(std::move(mesh)) {
  const TriangleMesh& m = *mesh_;
  if (m.n_elements() == 0) throw Error(ErrorKind::invalid_argument, "cannot locate points on an empty mesh");
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = x1;
  x0_ = std::numeric_limits<double>::infinity();
  y0_ = x0_;
  for (const Point& p : m.nodes) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  double mean_w = 0.0;
  double mean_h = 0.0;
  for (const auto& e : m.elements) {
    double lx = std::numeric_limits<double>::infinity(), hx = -lx, ly = lx, hy = -lx;
    for (int v : e) {
      const Point& p = m.nodes[static_cast<std::size_t>(v)];
      lx = std::min(lx, p.x);
      hx = std::max(hx, p.x);
      ly = std::min(ly, p.y);
      hy = std::max(hy, p.y);
    }
    mean_w += hx - lx;
    mean_h += hy - ly;
  }
  mean_w /= static_cast<double>(m.n_elements());
  mean_h /= static_cast<double>(m.n_elements());
  const double width = std::max(x1 - x0_, 1e-300);
  const double height = std::max(y1 - y0_, 1e-300);
  double nx = std::max(1.0, std::ceil(width / std::max(mean_w, 1e-300)));
  double ny = std::max(1.0, std::ceil(height / std::max(mean_h, 1e-300)));
  const double budget = 2.0 * static_cast<double>(m.n_elements()) + 16.0;
  if (nx * ny > budget) {
    const double shrink = std::sqrt(nx * ny / budget);
    nx = std::max(1.0, std::floor(nx / shrink));
    ny = std::max(1.0, std::floor(ny / shrink));
  }
  nx_ = static_cast<int>(nx);
  ny_ = static_cast<int>(ny);
  dx_ = width / nx_;
  dy_ = height / ny_;

  const double pad = clamp_distance * std::max(1.0, std::max(width, height));
  std::vector<int> counts(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
  auto for_buckets = [&](std::size_t e, auto&& visit) {
    double lx = std::numeric_limits<double>::infinity(), hx = -lx, ly = lx, hy = -lx;
    for (int v : m.elements[e]) {
      const Point& p = m.nodes[static_cast<std::size_t>(v)];
      lx = std::min(lx, p.x);
      hx = std::max(hx, p.x);
      ly = std::min(ly, p.y);
      hy = std::max(hy, p.y);
    }
    int ix0, ix1, iy0, iy1;
    bucket_range(lx - pad, hx + pad, x0_, dx_, nx_, ix0, ix1);
    bucket_range(ly - pad, hy + pad, y0_, dy_, ny_, iy0, iy1);
    for (int ix = ix0; ix <= ix1; ++ix)
      for (int iy = iy0; iy <= iy1; ++iy) visit(ix * ny_ + iy);
  };
  for (std::size_t e = 0; e < m.n_elements(); ++e)
    for_buckets(e, [&](int b) { ++counts[static_cast<std::size_t>(b) + 1]; });
  for (std::size_t b = 1; b < counts.size(); ++b) counts[b] += counts[b - 1];
  bucket_start_ = counts;
  bucket_items_.resize(static_cast<std::size_t>(counts.back()));
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  for (std::size_t e = 0; e < m.n_elements(); ++e)
    for_buckets(e, [&](int b) { bucket_items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(b)]++)] = static_cast<int>(e); });
}

void PointLocator::bucket_range(double lo, double hi, double origin, double size, int n, int& first,
                                int& last) const {
  first = std::clamp(static_cast<int>(std::floor((lo - origin) / size)), 0, n - 1);
  last = std::clamp(static_cast<int>(std::floor((hi - origin) / size)), 0, n - 1);
}

std::array<double, 3> PointLocator::barycentric(std::size_t element, const Point& p) const {
  const auto& v = mesh_->elements[element];
  const Point& a = mesh_->nodes[static_cast<std::size_t>(v[0])];
  const Point& b = mesh_->nodes[static_cast<std::size_t>(v[1])];
  const Point& c = mesh_->nodes[static_cast<std::size_t>(v[2])];
  const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double l1 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
  const double l2 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
  return {1.0 - l1 - l2, l1, l2};
}

PointLocator::Hit PointLocator::locate(const Point& point) const {
  int ix0, ix1, iy0, iy1;
  bucket_range(point.x, point.x, x0_, dx_, nx_, ix0, ix1);
  bucket_range(point.y, point.y, y0_, dy_, ny_, iy0, iy1);
  const int bucket = ix0 * ny_ + iy0;
  const auto begin = static_cast<std::size_t>(bucket_start_[static_cast<std::size_t>(bucket)]);
  const auto end = static_cast<std::size_t>(bucket_start_[static_cast<std::size_t>(bucket) + 1]);

  double best_distance = std::numeric_limits<double>::infinity();
  Hit best{0, {0.0, 0.0, 0.0}};
  for (std::size_t i = begin; i < end; ++i) {
    const auto e = static_cast<std::size_t>(bucket_items_[i]);
    const auto bary = barycentric(e, point);
    const double lowest = std::min({bary[0], bary[1], bary[2]});
    if (lowest >= -inside_tolerance) return {e, bary};
    // distance to the violated side: -lambda_k * (height over side k)
    const auto& v = mesh_->elements[e];
    const std::size_t k = static_cast<std::size_t>(std::min_element(bary.begin(), bary.end()) - bary.begin());
    const Point& a = mesh_->nodes[static_cast<std::size_t>(v[(k + 1) % 3])];
    const Point& b = mesh_->nodes[static_cast<std::size_t>(v[(k + 2) % 3])];
    const double side = std::hypot(b.x - a.x, b.y - a.y);
    const double distance = -lowest * 2.0 * std::abs(mesh_->signed_area(e)) / side;
    if (distance < best_distance) {
      best_distance = distance;
      best = {e, bary};
    }
  }
  const double scale = std::max({1.0, std::abs(point.x), std::abs(point.y)});
  if (best_distance > clamp_distance * scale)
    throw Error(ErrorKind::point_outside_domain,
                "point (" + std::to_string(point.x) + ", " + std::to_string(point.y) + ") is outside the mesh");
  for (double& l : best.bary) l = std::max(l, 0.0);
  const double total = best.bary[0] + best.bary[1] + best.bary[2];
  for (double& l : best.bary) l /= total;
  return best;
}

CellQuadrature CellQuadrature::on_mesh(const TriangleMesh& cell_mesh) {
  CellQuadrature quad;
  const auto& rule = triangle_rule();
  for (std::size_t e = 0; e < cell_mesh.n_elements(); ++e) {
    const double w = cell_mesh.signed_area(e) / 3.0;
    const auto& v = cell_mesh.elements[e];
    for (const auto& l : rule) {
      Point p;
      for (std::size_t k = 0; k < 3; ++k) {
        p.x += l[k] * cell_mesh.nodes[static_cast<std::size_t>(v[k])].x;
        p.y += l[k] * cell_mesh.nodes[static_cast<std::size_t>(v[k])].y;
      }
      quad.points.push_back(p);
      quad.weights.push_back(w);
      quad.area += w;
    }
  }
  return quad;
}

CellQuadrature CellQuadrature::for_profile(const BoundaryProfile& profile, double h) {
  return on_mesh(mesh_cell(CellGeometry{CellDomain::basic, profile}, h, false));
}

double UnfoldedField::operator()(double x, std::size_t point) const {
  if (x >= lambda_start || n_cells == 0) return 0.0;
  const int k = std::clamp(static_cast<int>(std::floor(x / cell_length)), 0, n_cells - 1);
  return at(k, point);
}

UnfoldedField unfold(const ThinDomainSpec& spec, const Field2D& phi, const CellQuadrature& quad) {
  const DomainPartition part = partition(spec);
  const double scale_x = std::pow(spec.epsilon, spec.alpha);
  UnfoldedField field;
  field.n_cells = part.n_cells;
  field.cell_length = part.cell_length;
  field.lambda_start = part.lambda_start;
  field.values.resize(static_cast<std::size_t>(part.n_cells) * quad.size());
  for (int k = 0; k < part.n_cells; ++k) {
    const double origin = part.cell_origins[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < quad.size(); ++j)
      field.values[static_cast<std::size_t>(k) * quad.size() + j] =
          phi(origin + scale_x * quad.points[j].x, spec.epsilon * quad.points[j].y);
  }
  return field;
}

Field2D evaluator(const FemFunction& phi, std::shared_ptr<const PointLocator> locator) {
  if (!locator) locator = std::make_shared<const PointLocator>(phi.mesh);
  return [phi, locator](double x, double y) {
    const auto hit = locator->locate({x, y});
    return phi.value(hit.element, hit.bary);
  };
}

Field2D gradient_evaluator(const FemFunction& phi, int component, std::shared_ptr<const PointLocator> locator) {
  if (component != 0 && component != 1) throw Error(ErrorKind::invalid_argument, "gradient component must be 0 or 1");
  if (!locator) locator = std::make_shared<const PointLocator>(phi.mesh);
  return [phi, locator, component](double x, double y) {
    const auto hit = locator->locate({x, y});
    return phi.gradient(hit.element)[static_cast<std::size_t>(component)];
  };
}

UnfoldedField unfold(const ThinDomainSpec& spec, const FemFunction& phi, const CellQuadrature& quad) {
  return unfold(spec, evaluator(phi), quad);
}

FemFunction unfold_nodal(const ThinDomainSpec& spec, const Field2D& phi, std::shared_ptr<const TriangleMesh> cell_mesh,
                         int cell) {
  const DomainPartition part = partition(spec);
  if (cell < 0 || cell >= part.n_cells) throw Error(ErrorKind::invalid_argument, "cell index out of range");
  const double origin = part.cell_origins[static_cast<std::size_t>(cell)];
  const double scale_x = std::pow(spec.epsilon, spec.alpha);
  std::vector<double> values(cell_mesh->n_nodes());
  for (std::size_t n = 0; n < values.size(); ++n)
    values[n] = phi(origin + scale_x * cell_mesh->nodes[n].x, spec.epsilon * cell_mesh->nodes[n].y);
  return FemFunction(std::move(cell_mesh), std::move(values));
}

namespace {

double unfolded_integral(const UnfoldedField& field, const CellQuadrature& quad, double period) {
  double total = 0.0;
  for (int k = 0; k < field.n_cells; ++k) {
    double cell = 0.0;
    for (std::size_t j = 0; j < quad.size(); ++j) cell += quad.weights[j] * field.at(k, j);
    total += field.cell_length * cell;
  }
  return total / period;
}

bool in_full_cells(const TriangleMesh& mesh, std::size_t e, double lambda_start) {
  const auto& v = mesh.elements[e];
  const double cx = (mesh.nodes[static_cast<std::size_t>(v[0])].x + mesh.nodes[static_cast<std::size_t>(v[1])].x +
                     mesh.nodes[static_cast<std::size_t>(v[2])].x) /
                    3.0;
  return cx < lambda_start;
}

}  // namespace

IntegralCheck unfold_integral_check(const ThinDomainSpec& spec, const Field2D& phi, const CellQuadrature& quad,
                                    const TriangleMesh& mesh) {
  IntegralCheck check;
  const UnfoldedField field = unfold(spec, phi, quad);
  check.lhs = unfolded_integral(field, quad, spec.profile.period());
  const auto& rule = triangle_rule();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    if (!in_full_cells(mesh, e, field.lambda_start)) continue;
    const auto& v = mesh.elements[e];
    const double w = mesh.signed_area(e) / 3.0;
    for (const auto& l : rule) {
      double x = 0.0, y = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        x += l[k] * mesh.nodes[static_cast<std::size_t>(v[k])].x;
        y += l[k] * mesh.nodes[static_cast<std::size_t>(v[k])].y;
      }
      total += w * phi(x, y);
    }
  }
  check.rhs = total / spec.epsilon;
  check.defect = std::abs(check.lhs - check.rhs);
  return check;
}

IntegralCheck unfold_integral_check(const ThinDomainSpec& spec, const FemFunction& phi, const CellQuadrature& quad) {
  IntegralCheck check;
  const UnfoldedField field = unfold(spec, phi, quad);
  check.lhs = unfolded_integral(field, quad, spec.profile.period());
  const TriangleMesh& mesh = *phi.mesh;
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    if (!in_full_cells(mesh, e, field.lambda_start)) continue;
    const auto& v = mesh.elements[e];
    total += mesh.signed_area(e) / 3.0 *
             (phi.values[static_cast<std::size_t>(v[0])] + phi.values[static_cast<std::size_t>(v[1])] +
              phi.values[static_cast<std::size_t>(v[2])]);
  }
  check.rhs = total / spec.epsilon;
  check.defect = std::abs(check.lhs - check.rhs);
  return check;
}

double unfolded_norm(const UnfoldedField& field, const CellQuadrature& quad, double p) {
  double total = 0.0;
  for (int k = 0; k < field.n_cells; ++k) {
    double cell = 0.0;
    for (std::size_t j = 0; j < quad.size(); ++j) cell += quad.weights[j] * std::pow(std::abs(field.at(k, j)), p);
    total += field.cell_length * cell;
  }
  return std::pow(total, 1.0 / p);
}

RescaledField rescale_pi(const ThinDomainSpec& spec, const FemFunction& phi) {
  const TriangleMesh& source = *phi.mesh;
  auto target = std::make_shared<TriangleMesh>();
  std::vector<int> remap(source.n_nodes(), -1);
  std::vector<double> values;
  for (std::size_t e = 0; e < source.n_elements(); ++e) {
    if (!in_subdomain(source, e, Subdomain::lower)) continue;
    std::array<int, 3> element{};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto n = static_cast<std::size_t>(source.elements[e][k]);
      if (remap[n] < 0) {
        remap[n] = static_cast<int>(target->nodes.size());
        target->nodes.push_back({source.nodes[n].x, source.nodes[n].y / spec.epsilon});
        values.push_back(phi.values[n]);
      }
      element[k] = remap[n];
    }
    target->elements.push_back(element);
    target->element_layer.push_back(0);
    if (!source.element_column.empty()) target->element_column.push_back(source.element_column[e]);
  }
  target->column_breaks = source.column_breaks;
  target->h = source.h;
  for (const auto& edge : source.boundary_edges) {
    const int a = remap[static_cast<std::size_t>(edge.a)];
    const int b = remap[static_cast<std::size_t>(edge.b)];
    if (a >= 0 && b >= 0 && edge.tag != BoundaryTag::top && edge.tag != BoundaryTag::jump)
      target->boundary_edges.push_back({a, b, edge.tag});
  }
  return RescaledField{FemFunction(std::move(target), std::move(values))};
}

bool in_subdomain(const TriangleMesh& mesh, std::size_t element, Subdomain part) {
  if (part == Subdomain::whole) return true;
  if (mesh.element_layer.empty()) return part == Subdomain::lower;
  return mesh.element_layer[element] == (part == Subdomain::lower ? 0 : 1);
}

double lp_norm(const FemFunction& phi, double p, Subdomain part) {
  if (!(p >= 1.0)) throw Error(ErrorKind::invalid_argument, "norm exponent must be at least 1");
  const TriangleMesh& mesh = *phi.mesh;
  const auto& rule = triangle_rule();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    if (!in_subdomain(mesh, e, part)) continue;
    const double w = mesh.signed_area(e) / 3.0;
    for (const auto& l : rule) total += w * std::pow(std::abs(phi.value(e, l)), p);
  }
  return std::pow(total, 1.0 / p);
}

double rescaled_norm(const ThinDomainSpec& spec, const FemFunction& phi, double p, Subdomain part) {
  return std::pow(spec.epsilon, -1.0 / p) * lp_norm(phi, p, part);
}


UnfoldingAudit audit_unfolding(const ThinDomainSpec& spec, double p, double cell_h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const double eps = spec.epsilon;
  auto quadratic = [&]() -> Field2D {
    std::array<double, 6> c;
    for (double& v : c) v = coef(rng);
    return [c, eps](double x, double y) {
      const double s = y / eps;
      return c[0] + c[1] * x + c[2] * s + c[3] * x * x + c[4] * x * s + c[5] * s * s;
    };
  };
  const Field2D phi = quadratic();
  const Field2D psi = quadratic();
  const double a = coef(rng), b = coef(rng);

  const auto mesh = std::make_shared<const TriangleMesh>(
      mesh_thin_domain(spec, cell_h * std::pow(eps, spec.alpha)));
  const CellQuadrature quad = CellQuadrature::for_profile(spec.profile, cell_h);

  UnfoldingAudit audit;
  const UnfoldedField tphi = unfold(spec, phi, quad);
  const UnfoldedField tpsi = unfold(spec, psi, quad);
  const UnfoldedField tsum = unfold(spec, [&](double x, double y) { return a * phi(x, y) + b * psi(x, y); }, quad);
  const UnfoldedField tprod = unfold(spec, [&](double x, double y) { return phi(x, y) * psi(x, y); }, quad);
  audit.n_cells = tphi.n_cells;
  for (std::size_t i = 0; i < tphi.values.size(); ++i) {
    audit.linearity = std::max(audit.linearity, std::abs(tsum.values[i] - a * tphi.values[i] - b * tpsi.values[i]));
    audit.product = std::max(audit.product, std::abs(tprod.values[i] - tphi.values[i] * tpsi.values[i]));
  }

  audit.integral = unfold_integral_check(spec, phi, quad, *mesh).defect;

  // phi linear in (x, y) keeps |phi|^2 within the exactness of the 3-point rule.
  const double l0 = coef(rng), l1 = coef(rng), l2 = coef(rng);
  const Field2D linear = [=](double x, double y) { return l0 + l1 * x + l2 * y / eps; };
  const double lhs = unfolded_norm(unfold(spec, linear, quad), quad, 2.0);
  const IntegralCheck squares =
      unfold_integral_check(spec, [&](double x, double y) { return linear(x, y) * linear(x, y); }, quad, *mesh);
  const double rhs = std::sqrt(spec.profile.period() * squares.rhs);
  audit.norm = std::abs(lhs - rhs) / std::max(rhs, 1e-300);

  const FemFunction field = FemFunction::interpolate(mesh, phi);
  const double pi = lp_norm(rescale_pi(spec, field).field, p);
  const double scaled = rescaled_norm(spec, field, p, Subdomain::lower);
  audit.pi_norm = std::abs(pi - scaled) / std::max(scaled, 1e-300);
  return audit;
}

}  // namespace thinhom
