#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thinhom/correctors.hpp"
#include "thinhom/fem.hpp"
#include "thinhom/geometry.hpp"

namespace thinhom {

enum class ForcingKind { constant, cosine, polynomial };

struct ForcingSpec {
  ForcingKind kind = ForcingKind::constant;
  double value = 1.0;       ///< constant
  double amplitude = 1.0;   ///< cosine: amplitude cos(wavenumber pi x)
  double wavenumber = 1.0;
  std::vector<double> coefficients;  ///< polynomial: sum c_i x^i

  Forcing build() const;
  std::string describe() const;
};

/// Parsed `section.key = value` run configuration.
struct RunConfig {
  std::string profile_kind;
  double profile_period = 1.0;
  std::vector<double> profile_breakpoints;
  std::vector<double> profile_values;
  double p = 2.0;
  double alpha = 1.0;
  std::vector<double> epsilons;
  ForcingSpec forcing;
  double mesh_scale = 1.0;     ///< h = mesh_scale * eps^alpha * L / 8
  int limit_elements = 8192;   ///< elements of the 1D limit mesh
  SolverSettings solver;
  std::string output_dir = "out";
  bool timing = false;         ///< fill wall_time_s (makes the CSV run-dependent)
  std::uint64_t seed = 1;
  int threads = 1;

  BoundaryProfile profile() const;
  PLaplaceExponent exponent() const { return PLaplaceExponent(p); }
  /// Horizontal mesh size in cell units, shared by R^eps and the Y* mesh.
  double cell_h() const { return mesh_scale * profile_period / 8.0; }
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

struct SweepRow {
  double epsilon = 0.0;
  std::size_t dofs = 0;
  ErrorMetrics metrics;
  int newton_iters = 0;
  double wall_time = 0.0;
  bool converged = false;
  std::string failure;
};

struct SweepReport {
  Regime regime = Regime::resonant;
  double p = 2.0;
  double alpha = 1.0;
  std::string profile;
  std::uint64_t profile_digest = 0;
  double q = 0.0;
  std::optional<double> q_energy_form;  ///< resonant case only
  std::optional<double> q_closed_form;  ///< weak and strong cases
  bool limit_converged = false;
  std::vector<SweepRow> rows;  ///< ordered by decreasing epsilon

  bool all_converged() const;
};

/// FNV-1a hash of a string.
std::uint64_t digest(const std::string& text);

/// Full pipeline: effective coefficient, limit solution, one 2D solve per epsilon.
/// Rows run on `threads` workers.
SweepReport run_sweep(const RunConfig& config, int threads = 1);

/// Writes sweep.csv, summary.txt and plot.gp into `dir`.
void emit_outputs(const SweepReport& report, const RunConfig& config, const std::filesystem::path& dir);

std::string csv_text(const SweepReport& report, const RunConfig& config);
std::string summary_text(const SweepReport& report);

}  // namespace thinhom
