#include "thinhom/correctors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thinhom/errors.hpp"

namespace thinhom {

CorrectorField::CorrectorField(const ThinDomainSpec& spec, const PLaplaceExponent& exponent, FemFunction1D u,
                               std::shared_ptr<const CellSolution> cell)
    : spec_(spec), exponent_(exponent), regime_(spec.regime()), u_(std::move(u)), cell_(std::move(cell)) {
  scale_x_ = std::pow(spec.epsilon, spec.alpha);
  if (regime_ == Regime::resonant) {
    if (!cell_) throw Error(ErrorKind::missing_cell_solution, "the resonant corrector needs the cell solution");
    cell_locator_ = std::make_shared<const PointLocator>(cell_->w.mesh);
  }
  if (regime_ == Regime::weak) {
    const double s = exponent.p_conj() - 1.0;
    mean_inverse_ = spec.profile.mean([s](double g) { return std::pow(g, -s); });
  }
}

Vec2 CorrectorField::operator()(double x, double y) const {
  const double du = u_.derivative(x);
  switch (regime_) {
    case Regime::resonant: {
      const double period = spec_.profile.period();
      double y1 = std::fmod(x / scale_x_, period);
      if (y1 < 0.0) y1 += period;
      const auto hit = cell_locator_->locate({y1, y / spec_.epsilon});
      const Vec2 g = cell_->grad_v(hit.element);
      return {du * g[0], du * g[1]};
    }
    case Regime::weak: {
      const double g = spec_.profile(x / scale_x_);
      return {du / (std::pow(g, exponent_.p_conj() - 1.0) * mean_inverse_), 0.0};
    }
    case Regime::strong:
      if (y < spec_.epsilon * spec_.profile.g0()) return {du, 0.0};
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

AveragedField::AveragedField(const ThinDomainSpec& spec, FemFunction u_eps)
    : height_(spec.epsilon * spec.profile.g0()), u_(std::move(u_eps)) {
  const TriangleMesh& mesh = *u_.mesh;
  if (mesh.column_breaks.size() < 2 || mesh.element_column.size() != mesh.n_elements())
    throw Error(ErrorKind::invalid_argument, "averaging needs a column-structured mesh");
  columns_.assign(mesh.column_breaks.size() - 1, {});
  for (std::size_t e = 0; e < mesh.n_elements(); ++e)
    if (in_subdomain(mesh, e, Subdomain::lower))
      columns_[static_cast<std::size_t>(mesh.element_column[e])].push_back(static_cast<int>(e));
}

double AveragedField::operator()(double x) const {
  const TriangleMesh& mesh = *u_.mesh;
  const auto& breaks = mesh.column_breaks;
  auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
  std::size_t column = it == breaks.begin() ? 0 : static_cast<std::size_t>(it - breaks.begin()) - 1;
  column = std::min(column, columns_.size() - 1);

  double total = 0.0;
  for (int e : columns_[column]) {
    const auto& v = mesh.elements[static_cast<std::size_t>(e)];
    double y_low = std::numeric_limits<double>::infinity();
    double y_high = -y_low;
    double u_low = 0.0, u_high = 0.0;
    auto visit = [&](double y, double u) {
      if (y < y_low) {
        y_low = y;
        u_low = u;
      }
      if (y > y_high) {
        y_high = y;
        u_high = u;
      }
    };
    for (std::size_t k = 0; k < 3; ++k) {
      const auto ia = static_cast<std::size_t>(v[k]);
      const auto ib = static_cast<std::size_t>(v[(k + 1) % 3]);
      const Point& a = mesh.nodes[ia];
      const Point& b = mesh.nodes[ib];
      if (a.x == b.x) {
        if (a.x == x) {
          visit(a.y, u_.values[ia]);
          visit(b.y, u_.values[ib]);
        }
        continue;
      }
      const double t = (x - a.x) / (b.x - a.x);
      if (t < 0.0 || t > 1.0) continue;
      visit(a.y + t * (b.y - a.y), u_.values[ia] + t * (u_.values[ib] - u_.values[ia]));
    }
    if (y_high > y_low) total += 0.5 * (y_high - y_low) * (u_low + u_high);
  }
  return total / height_;
}

AveragedField average_V(const ThinDomainSpec& spec, const FemFunction& u_eps) { return AveragedField(spec, u_eps); }

ErrorMetrics error_metrics(const ThinDomainSpec& spec, const FemFunction& u_eps, const FemFunction1D& u,
                           const CorrectorField& corrector, const PLaplaceExponent& exponent) {
  const TriangleMesh& mesh = *u_eps.mesh;
  const double p = exponent.p();
  const AveragedField V(spec, u_eps);
  const auto& rule = triangle_rule();
  const bool strong = spec.regime() == Regime::strong;

  double lp = 0.0, corr = 0.0, vavg = 0.0, rminus = 0.0, rplus = 0.0, value_norm = 0.0, grad_norm = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& v = mesh.elements[e];
    const double w = mesh.signed_area(e) / 3.0;
    const Vec2 grad = u_eps.gradient(e);
    const double grad_p = std::pow(std::hypot(grad[0], grad[1]), p);
    const bool lower = in_subdomain(mesh, e, Subdomain::lower);
    for (const auto& l : rule) {
      double x = 0.0, y = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        x += l[k] * mesh.nodes[static_cast<std::size_t>(v[k])].x;
        y += l[k] * mesh.nodes[static_cast<std::size_t>(v[k])].y;
      }
      const double ue = u_eps.value(e, l);
      lp += w * std::pow(std::abs(ue - u(x)), p);
      vavg += w * std::pow(std::abs(ue - V(x)), p);
      const Vec2 W = corrector(x, y);
      corr += w * std::pow(std::hypot(grad[0] - W[0], grad[1] - W[1]), p);
      value_norm += w * std::pow(std::abs(ue), p);
      grad_norm += w * grad_p;
      if (strong) {
        if (lower)
          rminus += w * std::pow(std::hypot(grad[0] - u.derivative(x), grad[1]), p);
        else
          rplus += w * grad_p;
      }
    }
  }
  const double scale = 1.0 / spec.epsilon;
  ErrorMetrics metrics;
  metrics.lp_error = std::pow(scale * lp, 1.0 / p);
  metrics.corrector_error = std::pow(scale * corr, 1.0 / p);
  metrics.v_avg_error = std::pow(scale * vavg, 1.0 / p);
  metrics.w1p_norm = std::pow(scale * (value_norm + grad_norm), 1.0 / p);
  if (strong) {
    metrics.grad_rminus_error = std::pow(scale * rminus, 1.0 / p);
    metrics.grad_rplus_norm = std::pow(scale * rplus, 1.0 / p);
  }
  return metrics;
}

}  // namespace thinhom
