#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "thinhom/fem.hpp"
#include "thinhom/geometry.hpp"
#include "thinhom/unfolding.hpp"

namespace thinhom {

/// Explicit gradient approximation W_eps built from the limit solution u.
///
/// resonant: u'(x) grad_y v(x/eps mod L, y/eps)
/// weak:     (u'(x) / (g(x/eps^alpha)^(p'-1) <g^-(p'-1)>), 0)
/// strong:   (u'(x), 0) below eps g0, zero above
class CorrectorField {
 public:
  CorrectorField(const ThinDomainSpec& spec, const PLaplaceExponent& exponent, FemFunction1D u,
                 std::shared_ptr<const CellSolution> cell = nullptr);

  Regime regime() const noexcept { return regime_; }
  Vec2 operator()(double x, double y) const;

 private:
  ThinDomainSpec spec_;
  PLaplaceExponent exponent_;
  Regime regime_;
  FemFunction1D u_;
  std::shared_ptr<const CellSolution> cell_;
  std::shared_ptr<const PointLocator> cell_locator_;
  double scale_x_ = 1.0;
  double mean_inverse_ = 1.0;
};

/// V(x) = (1 / (eps g0)) int_0^{eps g0} u_eps(x, s) ds, integrated exactly along
/// the vertical line through x.
class AveragedField {
 public:
  AveragedField(const ThinDomainSpec& spec, FemFunction u_eps);
  double operator()(double x) const;

 private:
  double height_;
  FemFunction u_;
  std::vector<std::vector<int>> columns_;
};

AveragedField average_V(const ThinDomainSpec& spec, const FemFunction& u_eps);

struct ErrorMetrics {
  double lp_error = 0.0;         ///< |||u_eps - u|||
  double corrector_error = 0.0;  ///< |||grad u_eps - W_eps|||
  double v_avg_error = 0.0;      ///< |||u_eps - V|||
  std::optional<double> grad_rminus_error;  ///< ||Pi_eps grad u_eps - (u', 0)||_{L^p(R-)}, strong regime
  std::optional<double> grad_rplus_norm;    ///< |||grad u_eps||| over R+^eps, strong regime
  double w1p_norm = 0.0;                    ///< |||u_eps|||_{W^{1,p}}
};

ErrorMetrics error_metrics(const ThinDomainSpec& spec, const FemFunction& u_eps, const FemFunction1D& u,
                           const CorrectorField& corrector, const PLaplaceExponent& exponent);

}  // namespace thinhom
