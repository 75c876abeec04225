#pragma once

#include <functional>
#include <optional>

#include "thinhom/fem.hpp"
#include "thinhom/geometry.hpp"

namespace thinhom {

/// Weak oscillations: 1 / (<g> <g^-(p'-1)>^(p-1)).
double q_weak(const BoundaryProfile& profile, const PLaplaceExponent& exponent);

/// Strong oscillations: g0 / <g>.
double q_strong(const BoundaryProfile& profile);

/// Resonant case: cell problem on a periodic mesh of Y* with horizontal size h (cell units).
CellSolution q_resonant(const BoundaryProfile& profile, const PLaplaceExponent& exponent, double h,
                        const SolverSettings& settings, const MeshOptions& options = {});

struct EffectiveCoefficient {
  double q = 0.0;
  std::optional<CellSolution> cell;  ///< resonant case only
};

EffectiveCoefficient effective_coefficient(const BoundaryProfile& profile, const PLaplaceExponent& exponent,
                                           double alpha, double h, const SolverSettings& settings,
                                           const MeshOptions& options = {});

/// Limit right-hand side for x-only forcing f.
struct LimitForcing {
  std::function<double(double)> fbar;
  /// Intermediate 1D forcing at a given eps: f(x) g(x / eps^alpha) for alpha > 1, f(x) otherwise.
  std::function<double(double x, double epsilon)> fhat;
};

/// Throws forcing_not_reducible unless f depends on x only.
LimitForcing limit_forcing(const Forcing& f, const BoundaryProfile& profile, double alpha);

struct LimitProblem {
  double q = 1.0;
  std::function<double(double)> fbar;
  PLaplaceExponent exponent{2.0};
  Regime regime = Regime::resonant;
};

LimitSolution solve_limit(const LimitProblem& problem, int n, const SolverSettings& settings);

}  // namespace thinhom
