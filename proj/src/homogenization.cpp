#include "thinhom/homogenization.hpp"

#include <cmath>
#include <memory>

#include "thinhom/errors.hpp"
#include "thinhom/mesh.hpp"

namespace thinhom {

double q_weak(const BoundaryProfile& profile, const PLaplaceExponent& exponent) {
  const double p = exponent.p();
  const double s = exponent.p_conj() - 1.0;
  const double mean_g = profile.mean();
  const double mean_inv = profile.mean([s](double g) { return std::pow(g, -s); });
  return 1.0 / (mean_g * std::pow(mean_inv, p - 1.0));
}

double q_strong(const BoundaryProfile& profile) { return profile.g0() / profile.mean(); }

CellSolution q_resonant(const BoundaryProfile& profile, const PLaplaceExponent& exponent, double h,
                        const SolverSettings& settings, const MeshOptions& options) {
  auto mesh = std::make_shared<const TriangleMesh>(
      mesh_cell(CellGeometry{CellDomain::basic, profile}, h, true, options));
  return solve_cell(mesh, exponent, settings);
}

EffectiveCoefficient effective_coefficient(const BoundaryProfile& profile, const PLaplaceExponent& exponent,
                                           double alpha, double h, const SolverSettings& settings,
                                           const MeshOptions& options) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::invalid_argument, "alpha must be positive");
  EffectiveCoefficient result;
  if (alpha < 1.0) {
    result.q = q_weak(profile, exponent);
  } else if (alpha > 1.0) {
    result.q = q_strong(profile);
  } else {
    result.cell = q_resonant(profile, exponent, h, settings, options);
    if (!result.cell->report.converged)
      throw Error(ErrorKind::no_convergence, "cell problem did not converge");
    result.q = result.cell->q;
  }
  return result;
}

LimitForcing limit_forcing(const Forcing& f, const BoundaryProfile& profile, double alpha) {
  if (!f.is_x_only())
    throw Error(ErrorKind::forcing_not_reducible, "the limit forcing is only available for x-only forcing");
  const auto fx = f.x_function();
  LimitForcing limit;
  limit.fbar = fx;
  if (alpha > 1.0) {
    limit.fhat = [fx, profile, alpha](double x, double epsilon) {
      return fx(x) * profile(x / std::pow(epsilon, alpha));
    };
  } else {
    limit.fhat = [fx](double x, double) { return fx(x); };
  }
  return limit;
}

LimitSolution solve_limit(const LimitProblem& problem, int n, const SolverSettings& settings) {
  if (!problem.fbar) throw Error(ErrorKind::invalid_argument, "limit problem has no forcing");
  return solve_limit_1d(problem.q, problem.exponent, problem.fbar, n, settings);
}

}  // namespace thinhom
