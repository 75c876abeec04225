#include "thinhom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "thinhom/errors.hpp"

namespace thinhom {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::quadrature_nonconvergence: return "quadrature-nonconvergence";
    case ErrorKind::mesh_too_coarse: return "mesh-too-coarse";
    case ErrorKind::incompatible_periodic_trace: return "incompatible-periodic-trace";
    case ErrorKind::singular_flux: return "singular-flux";
    case ErrorKind::singular_jacobian: return "singular-jacobian";
    case ErrorKind::no_convergence: return "no-convergence";
    case ErrorKind::point_outside_domain: return "point-outside-domain";
    case ErrorKind::missing_cell_solution: return "missing-cell-solution";
    case ErrorKind::forcing_not_reducible: return "forcing-not-reducible";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::validation_error: return "validation-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

const char* to_string(ProfileKind kind) noexcept {
  switch (kind) {
    case ProfileKind::constant: return "constant";
    case ProfileKind::piecewise_constant: return "piecewise_constant";
    case ProfileKind::piecewise_linear: return "piecewise_linear";
    case ProfileKind::cosine: return "cosine";
    case ProfileKind::tabulated: return "tabulated";
  }
  return "unknown";
}

const char* to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::weak: return "weak";
    case Regime::resonant: return "resonant";
    case Regime::strong: return "strong";
  }
  return "unknown";
}

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::invalid_argument, message);
}

void check_breakpoints(double period, const std::vector<double>& breakpoints) {
  require(std::isfinite(period) && period > 0.0, "profile period must be positive");
  require(!breakpoints.empty(), "profile needs at least one breakpoint");
  require(breakpoints.front() == 0.0, "first profile breakpoint must be 0");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    require(breakpoints[i] > breakpoints[i - 1], "profile breakpoints must increase strictly");
  require(breakpoints.back() < period, "profile breakpoints must lie in [0, period)");
}

}  // namespace

BoundaryProfile BoundaryProfile::constant(double value, double period) {
  require(std::isfinite(period) && period > 0.0, "profile period must be positive");
  BoundaryProfile g;
  g.kind_ = ProfileKind::constant;
  g.period_ = period;
  g.pieces_ = {{0.0, period, value, value}};
  g.finalize();
  return g;
}

BoundaryProfile BoundaryProfile::piecewise_constant(double period, std::vector<double> breakpoints,
                                                    std::vector<double> values) {
  check_breakpoints(period, breakpoints);
  require(values.size() == breakpoints.size(),
          "piecewise_constant profile needs one value per breakpoint");
  BoundaryProfile g;
  g.kind_ = ProfileKind::piecewise_constant;
  g.period_ = period;
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const double end = i + 1 < breakpoints.size() ? breakpoints[i + 1] : period;
    g.pieces_.push_back({breakpoints[i], end, values[i], values[i]});
  }
  g.finalize();
  return g;
}

BoundaryProfile BoundaryProfile::piecewise_linear(double period, std::vector<double> breakpoints,
                                                  std::vector<double> values) {
  check_breakpoints(period, breakpoints);
  require(values.size() == 2 * breakpoints.size(),
          "piecewise_linear profile needs a (start, end) value pair per piece");
  BoundaryProfile g;
  g.kind_ = ProfileKind::piecewise_linear;
  g.period_ = period;
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const double end = i + 1 < breakpoints.size() ? breakpoints[i + 1] : period;
    g.pieces_.push_back({breakpoints[i], end, values[2 * i], values[2 * i + 1]});
  }
  g.finalize();
  return g;
}

BoundaryProfile BoundaryProfile::cosine(double mean, double amplitude, double period) {
  require(std::isfinite(period) && period > 0.0, "profile period must be positive");
  require(std::isfinite(mean) && std::isfinite(amplitude), "cosine profile data must be finite");
  BoundaryProfile g;
  g.kind_ = ProfileKind::cosine;
  g.period_ = period;
  g.cosine_mean_ = mean;
  g.cosine_amplitude_ = amplitude;
  g.pieces_ = {{0.0, period, mean + amplitude, mean + amplitude}};
  g.finalize();
  return g;
}

BoundaryProfile BoundaryProfile::tabulated(double period, std::vector<double> samples_y,
                                           std::vector<double> samples_g) {
  check_breakpoints(period, samples_y);
  require(samples_g.size() == samples_y.size(), "tabulated profile needs one value per sample");
  BoundaryProfile g;
  g.kind_ = ProfileKind::tabulated;
  g.period_ = period;
  for (std::size_t i = 0; i < samples_y.size(); ++i) {
    const bool last = i + 1 == samples_y.size();
    g.pieces_.push_back({samples_y[i], last ? period : samples_y[i + 1], samples_g[i],
                         last ? samples_g.front() : samples_g[i + 1]});
  }
  g.finalize();
  return g;
}

BoundaryProfile BoundaryProfile::comb(double low, double high, double period) {
  return piecewise_constant(period, {0.0, 0.5 * period}, {low, high});
}

void BoundaryProfile::finalize() {
  if (kind_ == ProfileKind::cosine) {
    g0_ = cosine_mean_ - std::abs(cosine_amplitude_);
    g1_ = cosine_mean_ + std::abs(cosine_amplitude_);
  } else {
    g0_ = pieces_.front().start_value;
    g1_ = g0_;
    for (const Piece& piece : pieces_) {
      require(std::isfinite(piece.start_value) && std::isfinite(piece.end_value),
              "profile values must be finite");
      g0_ = std::min({g0_, piece.start_value, piece.end_value});
      g1_ = std::max({g1_, piece.start_value, piece.end_value});
    }
  }
  require(g0_ > 0.0, "profile must be strictly positive");
}

double BoundaryProfile::wrap(double y1) const {
  double y = y1 - period_ * std::floor(y1 / period_);
  if (y >= period_ || y < 0.0) y = 0.0;
  return y;
}

double BoundaryProfile::piece_value(const Piece& piece, double y) const {
  if (kind_ == ProfileKind::cosine)
    return cosine_mean_ + cosine_amplitude_ * std::cos(2.0 * std::numbers::pi * y / period_);
  if (piece.start_value == piece.end_value) return piece.start_value;
  const double t = (y - piece.begin) / (piece.end - piece.begin);
  return piece.start_value + t * (piece.end_value - piece.start_value);
}

double BoundaryProfile::right_limit(double y1) const {
  const double y = wrap(y1);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), y,
                             [](double v, const Piece& piece) { return v < piece.begin; });
  const Piece& piece = *std::prev(it);
  return piece_value(piece, y);
}

double BoundaryProfile::left_limit(double y1) const {
  const double y = wrap(y1);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), y,
                             [](double v, const Piece& piece) { return v < piece.begin; });
  std::size_t index = static_cast<std::size_t>(std::distance(pieces_.begin(), it)) - 1;
  const Piece& piece = pieces_[index];
  if (y != piece.begin) return piece_value(piece, y);
  const Piece& previous = pieces_[index == 0 ? pieces_.size() - 1 : index - 1];
  if (kind_ == ProfileKind::cosine) return piece_value(previous, previous.end);
  return previous.end_value;
}

double BoundaryProfile::operator()(double y1) const {
  return std::min(left_limit(y1), right_limit(y1));
}

std::vector<double> BoundaryProfile::breakpoints() const {
  std::vector<double> points;
  points.reserve(pieces_.size());
  for (const Piece& piece : pieces_) points.push_back(piece.begin);
  return points;
}

std::vector<double> BoundaryProfile::jump_points() const {
  std::vector<double> points;
  for (const Piece& piece : pieces_)
    if (left_limit(piece.begin) != right_limit(piece.begin)) points.push_back(piece.begin);
  return points;
}

double BoundaryProfile::mean(const std::function<double(double)>& transform) const {
  constexpr double tolerance = 1e-12;
  double total = 0.0;
  for (const Piece& piece : pieces_) {
    const double width = piece.end - piece.begin;
    if (kind_ != ProfileKind::cosine && piece.start_value == piece.end_value) {
      total += width * transform(piece.start_value);
      continue;
    }
    auto integrand = [&](double y) { return transform(piece_value(piece, y)); };
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, piece.begin, piece.end, 25, tolerance, &error, &l1);
    if (!std::isfinite(value) || error > tolerance * std::max(l1, 1e-300) + 1e-300)
      throw Error(ErrorKind::quadrature_nonconvergence,
                  "period average did not reach relative tolerance 1e-12");
    total += value;
  }
  return total / period_;
}

double BoundaryProfile::mean() const {
  return mean([](double t) { return t; });
}

std::string BoundaryProfile::describe() const {
  std::ostringstream out;
  char buffer[64];
  auto number = [&](double v) {
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return std::string(buffer);
  };
  out << to_string(kind_) << " period=" << number(period_);
  if (kind_ == ProfileKind::cosine) {
    out << " mean=" << number(cosine_mean_) << " amplitude=" << number(cosine_amplitude_);
    return out.str();
  }
  out << " pieces=";
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& piece = pieces_[i];
    out << (i ? ";" : "") << "[" << number(piece.begin) << "," << number(piece.end) << "):"
        << number(piece.start_value) << "->" << number(piece.end_value);
  }
  return out.str();
}

PLaplaceExponent::PLaplaceExponent(double p) : p_(p), p_conj_(p / (p - 1.0)) {
  if (!(p > 1.0) || !std::isfinite(p))
    throw Error(ErrorKind::invalid_argument, "p must lie in (1, ∞)");
}

ThinDomainSpec::ThinDomainSpec(double epsilon_, double alpha_, BoundaryProfile profile_)
    : epsilon(epsilon_), alpha(alpha_), profile(std::move(profile_)) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorKind::invalid_argument, "epsilon must lie in (0, 1)");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::invalid_argument, "alpha must be positive");
}

Regime ThinDomainSpec::regime() const noexcept {
  if (alpha < 1.0) return Regime::weak;
  if (alpha > 1.0) return Regime::strong;
  return Regime::resonant;
}

double ThinDomainSpec::cell_length() const noexcept {
  return std::pow(epsilon, alpha) * profile.period();
}

double ThinDomainSpec::height(double x) const {
  return epsilon * profile(x / std::pow(epsilon, alpha));
}

DomainPartition partition(const ThinDomainSpec& spec) {
  constexpr double tolerance = 1e-12;
  DomainPartition result;
  result.cell_length = spec.cell_length();
  long count = static_cast<long>(std::floor(1.0 / result.cell_length + tolerance));
  while (count > 0 && result.cell_length * static_cast<double>(count) > 1.0 + tolerance) --count;
  result.n_cells = static_cast<int>(count);
  result.cell_origins.resize(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k)
    result.cell_origins[static_cast<std::size_t>(k)] = static_cast<double>(k) * result.cell_length;
  const double end = static_cast<double>(count) * result.cell_length;
  result.lambda_empty = std::abs(end - 1.0) <= tolerance;
  result.lambda_start = result.lambda_empty ? 1.0 : end;
  return result;
}

double CellGeometry::area() const {
  switch (domain) {
    case CellDomain::basic: return profile.period() * profile.mean();
    case CellDomain::upper: return profile.period() * (profile.mean() - profile.g0());
    case CellDomain::lower_rect: return profile.g0();
    case CellDomain::upper_rect: return profile.g1() - profile.g0();
  }
  return 0.0;
}

}  // namespace thinhom
