// thinhom: command-line front end for thin-domain p-Laplacian homogenization runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "thinhom/correctors.hpp"
#include "thinhom/errors.hpp"
#include "thinhom/homogenization.hpp"
#include "thinhom/mesh.hpp"
#include "thinhom/sweep.hpp"
#include "thinhom/unfolding.hpp"

namespace fs = std::filesystem;
using namespace thinhom;

namespace {

struct Options {
  std::string config;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  double epsilon = 0.0;
};

RunConfig load(const Options& options) {
  RunConfig config = parse_config(options.config);
  if (!options.out.empty()) config.output_dir = options.out;
  if (options.threads > 0) config.threads = options.threads;
  if (options.seed) config.seed = *options.seed;
  return config;
}

void print_number(const char* label, double value) { std::printf("%s: %.17g\n", label, value); }

void write_values(const fs::path& path, const TriangleMesh& mesh, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write '" + path.string() + "'");
  out.precision(17);
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i)
    out << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' ' << values[i] << '\n';
}

void write_mesh_file(const fs::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write '" + path.string() + "'");
  write_mesh(out, mesh);
}

int run_coeff(const Options& options) {
  const RunConfig config = load(options);
  const BoundaryProfile profile = config.profile();
  const EffectiveCoefficient eff =
      effective_coefficient(profile, config.exponent(), config.alpha, config.cell_h(), config.solver);
  std::printf("regime: %s\n", to_string(ThinDomainSpec(0.5, config.alpha, profile).regime()));
  print_number("q", eff.q);
  if (eff.cell) print_number("q_energy_form", eff.cell->q_energy_form);
  return 0;
}

int run_cell(const Options& options) {
  const RunConfig config = load(options);
  const CellSolution cell = q_resonant(config.profile(), config.exponent(), config.cell_h(), config.solver);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const TriangleMesh& mesh = *cell.w.mesh;
  std::vector<double> v(mesh.n_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cell.v(i);
  write_mesh_file(dir / "cell_mesh.txt", mesh);
  write_values(dir / "cell_v.txt", mesh, v);
  print_number("q", cell.q);
  print_number("q_energy_form", cell.q_energy_form);
  std::printf("converged: %s\n", cell.report.converged ? "yes" : "no");
  return cell.report.converged ? 0 : 1;
}

int run_solve(const Options& options) {
  const RunConfig config = load(options);
  const double epsilon = options.epsilon > 0.0 ? options.epsilon : config.epsilons.front();
  const ThinDomainSpec spec(epsilon, config.alpha, config.profile());
  auto mesh = std::make_shared<const TriangleMesh>(
      mesh_thin_domain(spec, config.cell_h() * std::pow(epsilon, config.alpha)));
  const NeumannSolution solution = solve_neumann(mesh, config.exponent(), config.forcing.build(), config.solver);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  write_mesh_file(dir / "mesh.txt", *mesh);
  write_values(dir / "solution.txt", *mesh, solution.u.values);
  print_number("epsilon", epsilon);
  std::printf("dofs: %zu\n", mesh->n_nodes());
  std::printf("newton_iters: %d\n", solution.report.total_iterations());
  print_number("final_residual", solution.report.final_residual);
  std::printf("converged: %s\n", solution.report.converged ? "yes" : "no");
  return solution.report.converged ? 0 : 1;
}

int run_sweep_command(const Options& options) {
  const RunConfig config = load(options);
  const SweepReport report = run_sweep(config, config.threads);
  emit_outputs(report, config, config.output_dir);
  std::fputs(summary_text(report).c_str(), stdout);
  return report.all_converged() ? 0 : 1;
}

int run_unfold_check(const Options& options) {
  const RunConfig config = load(options);
  bool ok = true;
  for (double epsilon : config.epsilons) {
    const ThinDomainSpec spec(epsilon, config.alpha, config.profile());
    const UnfoldingAudit a = audit_unfolding(spec, config.p, config.cell_h(), config.seed);
    const bool pass = a.linearity <= 1e-13 && a.product <= 1e-13 && a.integral < 1e-8 && a.norm < 1e-8 &&
                      a.pi_norm <= 1e-12;
    ok = ok && pass;
    std::printf("epsilon %.17g cells %d linearity %.3e product %.3e integral %.3e norm %.3e pi_norm %.3e %s\n",
                epsilon, a.n_cells, a.linearity, a.product, a.integral, a.norm, a.pi_norm, pass ? "ok" : "FAILED");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-domain p-Laplacian homogenization toolkit"};
  app.require_subcommand(1);
  Options options;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "output directory (overrides output.dir)");
    sub->add_option("--threads", options.threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", options.seed, "seed for randomized checks (overrides run.seed)");
  };

  auto* coeff = app.add_subcommand("coeff", "print the effective coefficient q");
  auto* cell = app.add_subcommand("cell", "solve the cell problem, dump v and q");
  auto* solve = app.add_subcommand("solve", "single-epsilon 2D solve, dump the solution");
  auto* sweep = app.add_subcommand("sweep", "full epsilon sweep with CSV, summary and plot script");
  auto* unfold = app.add_subcommand("unfold-check", "unfolding operator property suite");
  for (auto* sub : {coeff, cell, solve, sweep, unfold}) add_common(sub);
  solve->add_option("--epsilon", options.epsilon, "epsilon (default: first entry of sweep.epsilons)")
      ->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*coeff) return run_coeff(options);
    if (*cell) return run_cell(options);
    if (*solve) return run_solve(options);
    if (*sweep) return run_sweep_command(options);
    if (*unfold) return run_unfold_check(options);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
