#pragma once

#include <functional>
#include <string>
#include <vector>

namespace thinhom {

enum class ProfileKind { constant, piecewise_constant, piecewise_linear, cosine, tabulated };

const char* to_string(ProfileKind kind) noexcept;

/// L-periodic, strictly positive, lower semicontinuous top-boundary profile g.
///
/// Pieces are half-open intervals [b_i, b_{i+1}) of [0, L). Each piece is
/// linear between `start` and `end` (equal for piecewise-constant profiles).
/// At a jump the profile takes the smaller one-sided limit.
class BoundaryProfile {
 public:
  struct Piece {
    double begin;
    double end;
    double start_value;
    double end_value;
  };

  static BoundaryProfile constant(double value, double period = 1.0);
  /// `breakpoints[0]` must be 0; piece i spans [breakpoints[i], breakpoints[i+1]).
  static BoundaryProfile piecewise_constant(double period, std::vector<double> breakpoints,
                                            std::vector<double> values);
  /// `values` holds (start, end) pairs per piece, flattened.
  static BoundaryProfile piecewise_linear(double period, std::vector<double> breakpoints,
                                          std::vector<double> values);
  /// g(y) = mean + amplitude * cos(2 pi y / period)
  static BoundaryProfile cosine(double mean, double amplitude, double period = 1.0);
  /// Continuous periodic linear interpolant of the samples (y_i, g_i), y_0 = 0.
  static BoundaryProfile tabulated(double period, std::vector<double> samples_y,
                                   std::vector<double> samples_g);
  /// g = low on [0, L/2), high on [L/2, L).
  static BoundaryProfile comb(double low, double high, double period);

  ProfileKind kind() const noexcept { return kind_; }
  double period() const noexcept { return period_; }
  double g0() const noexcept { return g0_; }
  double g1() const noexcept { return g1_; }
  bool is_constant() const noexcept { return g0_ == g1_; }

  double operator()(double y1) const;
  double left_limit(double y1) const;
  double right_limit(double y1) const;

  /// Points in [0, L) where the profile has a kink or a jump, ascending; always contains 0.
  std::vector<double> breakpoints() const;
  /// Smooth pieces between consecutive breakpoints (cosine: the full period).
  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  /// Breakpoints where the one-sided limits differ.
  std::vector<double> jump_points() const;

  /// (1/L) * integral over one period of transform(g(y1)).
  double mean(const std::function<double(double)>& transform) const;
  double mean() const;

  /// Canonical one-line description, stable across runs.
  std::string describe() const;

 private:
  BoundaryProfile() = default;
  void finalize();
  double wrap(double y1) const;
  double piece_value(const Piece& piece, double y) const;

  ProfileKind kind_ = ProfileKind::constant;
  double period_ = 1.0;
  std::vector<Piece> pieces_;
  double cosine_mean_ = 0.0;
  double cosine_amplitude_ = 0.0;
  double g0_ = 0.0;
  double g1_ = 0.0;
};

/// Exponent p of the p-Laplacian together with its conjugate p' = p / (p - 1).
class PLaplaceExponent {
 public:
  explicit PLaplaceExponent(double p);
  double p() const noexcept { return p_; }
  double p_conj() const noexcept { return p_conj_; }

 private:
  double p_;
  double p_conj_;
};

enum class Regime { weak, resonant, strong };

const char* to_string(Regime regime) noexcept;

/// Parameters of the thin domain R^eps = {0 < x < 1, 0 < y < eps g(x / eps^alpha)}.
struct ThinDomainSpec {
  double epsilon;
  double alpha;
  BoundaryProfile profile;

  ThinDomainSpec(double epsilon, double alpha, BoundaryProfile profile);

  Regime regime() const noexcept;
  /// Physical length eps^alpha * L of one oscillation period.
  double cell_length() const noexcept;
  /// Top boundary height at x.
  double height(double x) const;
};

/// Split of (0, 1) into full oscillation cells and the remainder Lambda.
struct DomainPartition {
  int n_cells = 0;                   ///< N_eps + 1
  std::vector<double> cell_origins;  ///< k L eps^alpha, k = 0..N_eps
  double cell_length = 0.0;
  double lambda_start = 1.0;
  bool lambda_empty = true;
};

DomainPartition partition(const ThinDomainSpec& spec);

enum class CellDomain { basic, upper, lower_rect, upper_rect };

/// Y* = {0 < y1 < L, 0 < y2 < g}, Y*+ = {g0 < y2 < g}, R- = (0,1)x(0,g0), R+ = (0,1)x(g0,g1).
struct CellGeometry {
  CellDomain domain;
  BoundaryProfile profile;

  double area() const;
};

}  // namespace thinhom
