#include "thinhom/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "thinhom/errors.hpp"
#include "thinhom/homogenization.hpp"
#include "thinhom/mesh.hpp"

namespace thinhom {

// ---------------------------------------------------------------------------
// Forcing

Forcing ForcingSpec::build() const {
  switch (kind) {
    case ForcingKind::constant: {
      const double c = value;
      return Forcing::x_only([c](double) { return c; });
    }
    case ForcingKind::cosine: {
      const double a = amplitude;
      const double k = wavenumber * M_PI;
      return Forcing::x_only([a, k](double x) { return a * std::cos(k * x); });
    }
    case ForcingKind::polynomial: {
      const std::vector<double> c = coefficients;
      return Forcing::x_only([c](double x) {
        double v = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
        return v;
      });
    }
  }
  throw Error(ErrorKind::invalid_argument, "unknown forcing kind");
}

namespace {

std::string number(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += number(values[i]);
  }
  return out;
}

}  // namespace

std::string ForcingSpec::describe() const {
  switch (kind) {
    case ForcingKind::constant: return "constant(" + number(value) + ")";
    case ForcingKind::cosine: return "cosine(" + number(amplitude) + "," + number(wavenumber) + ")";
    case ForcingKind::polynomial: return "polynomial(" + join(coefficients) + ")";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(int line, const std::string& message) {
  throw Error(ErrorKind::parse_error, "line " + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& text, int line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) parse_fail(line, "expected a number, got '" + t + "'");
  return v;
}

long long parse_integer(const std::string& text, int line) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) parse_fail(line, "expected an integer, got '" + t + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text, int line) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) values.push_back(parse_double(item, line));
  if (values.empty()) parse_fail(line, "empty list");
  return values;
}

bool parse_bool(const std::string& text, int line) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  parse_fail(line, "expected true or false, got '" + t + "'");
}

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorKind::validation_error, field + ": " + message);
}

}  // namespace

BoundaryProfile RunConfig::profile() const {
  const auto& v = profile_values;
  if (profile_kind == "constant") {
    if (v.size() != 1) invalid("profile.values", "a constant profile takes one value");
    return BoundaryProfile::constant(v[0], profile_period);
  }
  if (profile_kind == "piecewise_constant")
    return BoundaryProfile::piecewise_constant(profile_period, profile_breakpoints, v);
  if (profile_kind == "piecewise_linear")
    return BoundaryProfile::piecewise_linear(profile_period, profile_breakpoints, v);
  if (profile_kind == "cosine") {
    if (v.size() != 2) invalid("profile.values", "a cosine profile takes mean, amplitude");
    return BoundaryProfile::cosine(v[0], v[1], profile_period);
  }
  if (profile_kind == "comb") {
    if (v.size() != 2) invalid("profile.values", "a comb profile takes low, high");
    return BoundaryProfile::comb(v[0], v[1], profile_period);
  }
  if (profile_kind == "tabulated") return BoundaryProfile::tabulated(profile_period, profile_breakpoints, v);
  invalid("profile.kind", "unknown profile kind '" + profile_kind + "'");
}

void RunConfig::validate() const {
  try {
    (void)profile();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::validation_error) throw;
    invalid("profile", e.what());
  }
  if (!(p > 1.0) || !std::isfinite(p)) invalid("problem.p", "p must lie in (1, ∞)");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) invalid("problem.alpha", "alpha must be positive");
  if (epsilons.empty()) invalid("epsilon_list", "at least one epsilon is required");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) invalid("epsilon_list", "every epsilon must lie in (0, 1)");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) invalid("epsilon_list", "epsilons must be strictly decreasing");
  }
  if (!(mesh_scale > 0.0 && mesh_scale <= 2.0))
    invalid("mesh.scale", "must lie in (0, 2] so that h <= eps^alpha L / 4");
  if (limit_elements < 1) invalid("mesh.limit_elements", "must be at least 1");
  if (forcing.kind == ForcingKind::polynomial && forcing.coefficients.empty())
    invalid("forcing.coefficients", "a polynomial forcing needs coefficients");
  try {
    solver.validate();
  } catch (const Error& e) {
    invalid("solver", e.what());
  }
  if (threads < 1) invalid("run.threads", "must be at least 1");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::map<std::string, int> seen;
  std::istringstream stream(text);
  std::string raw;
  int line = 0;
  while (std::getline(stream, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) parse_fail(line, "expected 'section.key = value'");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (seen.count(key)) parse_fail(line, "duplicate key '" + key + "'");
    seen[key] = line;

    if (key == "profile.kind") {
      config.profile_kind = value;
    } else if (key == "profile.period") {
      config.profile_period = parse_double(value, line);
    } else if (key == "profile.breakpoints") {
      config.profile_breakpoints = parse_list(value, line);
    } else if (key == "profile.values") {
      config.profile_values = parse_list(value, line);
    } else if (key == "problem.p") {
      config.p = parse_double(value, line);
    } else if (key == "problem.alpha") {
      config.alpha = parse_double(value, line);
    } else if (key == "sweep.epsilons") {
      config.epsilons = parse_list(value, line);
    } else if (key == "forcing.kind") {
      if (value == "constant") config.forcing.kind = ForcingKind::constant;
      else if (value == "cosine") config.forcing.kind = ForcingKind::cosine;
      else if (value == "polynomial") config.forcing.kind = ForcingKind::polynomial;
      else parse_fail(line, "unknown forcing kind '" + value + "'");
    } else if (key == "forcing.value") {
      config.forcing.value = parse_double(value, line);
    } else if (key == "forcing.amplitude") {
      config.forcing.amplitude = parse_double(value, line);
    } else if (key == "forcing.wavenumber") {
      config.forcing.wavenumber = parse_double(value, line);
    } else if (key == "forcing.coefficients") {
      config.forcing.coefficients = parse_list(value, line);
    } else if (key == "mesh.scale") {
      config.mesh_scale = parse_double(value, line);
    } else if (key == "mesh.limit_elements") {
      config.limit_elements = static_cast<int>(parse_integer(value, line));
    } else if (key == "solver.delta_schedule") {
      config.solver.delta_schedule = parse_list(value, line);
    } else if (key == "solver.newton_rtol") {
      config.solver.newton_rtol = parse_double(value, line);
    } else if (key == "solver.newton_atol") {
      config.solver.newton_atol = parse_double(value, line);
    } else if (key == "solver.max_newton") {
      config.solver.max_newton = static_cast<int>(parse_integer(value, line));
    } else if (key == "output.dir") {
      config.output_dir = value;
    } else if (key == "output.timing") {
      config.timing = parse_bool(value, line);
    } else if (key == "run.seed") {
      config.seed = static_cast<std::uint64_t>(parse_integer(value, line));
    } else if (key == "run.threads") {
      config.threads = static_cast<int>(parse_integer(value, line));
    } else {
      parse_fail(line, "unknown key '" + key + "'");
    }
  }
  for (const char* required : {"profile.kind", "problem.p", "problem.alpha"})
    if (!seen.count(required)) invalid(required, "missing");
  if (!seen.count("sweep.epsilons")) invalid("epsilon_list", "missing sweep.epsilons");
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

// ---------------------------------------------------------------------------
// Sweep

bool SweepReport::all_converged() const {
  return limit_converged && std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.converged; });
}

std::uint64_t digest(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

SweepReport run_sweep(const RunConfig& config, int threads) {
  config.validate();
  const BoundaryProfile profile = config.profile();
  const PLaplaceExponent exponent = config.exponent();
  const Forcing forcing = config.forcing.build();

  SweepReport report;
  report.p = config.p;
  report.alpha = config.alpha;
  report.regime = ThinDomainSpec(0.5, config.alpha, profile).regime();
  report.profile = profile.describe();
  report.profile_digest = digest(report.profile);

  const EffectiveCoefficient eff =
      effective_coefficient(profile, exponent, config.alpha, config.cell_h(), config.solver);
  report.q = eff.q;
  std::shared_ptr<const CellSolution> cell;
  if (eff.cell) {
    report.q_energy_form = eff.cell->q_energy_form;
    cell = std::make_shared<const CellSolution>(*eff.cell);
  } else {
    report.q_closed_form = report.regime == Regime::weak ? q_weak(profile, exponent) : q_strong(profile);
  }

  const LimitForcing limit_f = limit_forcing(forcing, profile, config.alpha);
  const LimitProblem limit_problem{eff.q, limit_f.fbar, exponent, report.regime};
  const LimitSolution limit = solve_limit(limit_problem, config.limit_elements, config.solver);
  report.limit_converged = limit.report.converged;

  report.rows.resize(config.epsilons.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < config.epsilons.size(); i = next++) {
      SweepRow& row = report.rows[i];
      row.epsilon = config.epsilons[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        const ThinDomainSpec spec(row.epsilon, config.alpha, profile);
        const double h = config.cell_h() * std::pow(row.epsilon, config.alpha);
        auto mesh = std::make_shared<const TriangleMesh>(mesh_thin_domain(spec, h));
        row.dofs = mesh->n_nodes();
        const NeumannSolution solution = solve_neumann(mesh, exponent, forcing, config.solver);
        row.newton_iters = solution.report.total_iterations();
        row.converged = solution.report.converged;
        if (!row.converged) row.failure = "no-convergence";
        const CorrectorField corrector(spec, exponent, limit.u, cell);
        row.metrics = error_metrics(spec, solution.u, limit.u, corrector, exponent);
      } catch (const std::exception& e) {
        row.converged = false;
        row.failure = e.what();
      }
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const int n_workers = std::max(1, std::min<int>(threads, static_cast<int>(config.epsilons.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.epsilon > b.epsilon; });
  return report;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorKind::io_error, "failed writing '" + path.string() + "'");
}

}  // namespace

std::string csv_text(const SweepReport& report, const RunConfig& config) {
  std::string out =
      "epsilon,dofs,q,q_energy_form,lp_error,corrector_error,v_avg_error,grad_rminus_error,grad_rplus_norm,"
      "newton_iters,wall_time_s\n";
  for (const SweepRow& row : report.rows) {
    const bool ok = row.failure.empty() || row.failure == "no-convergence";
    out += number(row.epsilon) + ',' + std::to_string(row.dofs) + ',' + number(report.q) + ',' +
           optional_number(report.q_energy_form) + ',';
    if (ok) {
      const ErrorMetrics& m = row.metrics;
      out += number(m.lp_error) + ',' + number(m.corrector_error) + ',' + number(m.v_avg_error) + ',' +
             optional_number(m.grad_rminus_error) + ',' + optional_number(m.grad_rplus_norm) + ',';
    } else {
      out += ",,,,,";
    }
    out += std::to_string(row.newton_iters) + ',';
    if (config.timing) out += number(row.wall_time);
    out += '\n';
  }
  return out;
}

std::string summary_text(const SweepReport& report) {
  std::ostringstream out;
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(report.profile_digest));
  out << "regime: " << to_string(report.regime) << '\n'
      << "p: " << number(report.p) << '\n'
      << "alpha: " << number(report.alpha) << '\n'
      << "profile: " << report.profile << '\n'
      << "profile_digest: " << hex << '\n'
      << "q: " << number(report.q) << '\n';
  if (report.q_energy_form) out << "q_energy_form: " << number(*report.q_energy_form) << '\n';
  if (report.q_closed_form) out << "q_closed_form: " << number(*report.q_closed_form) << '\n';
  out << "rows: " << report.rows.size() << '\n'
      << "all_converged: " << (report.all_converged() ? "yes" : "no") << '\n';
  for (const SweepRow& row : report.rows)
    if (!row.failure.empty()) out << "failed: epsilon " << number(row.epsilon) << ": " << row.failure << '\n';

  struct Column {
    const char* name;
    std::optional<double> (*get)(const ErrorMetrics&);
  };
  const Column columns[] = {
      {"lp_error", [](const ErrorMetrics& m) -> std::optional<double> { return m.lp_error; }},
      {"corrector_error", [](const ErrorMetrics& m) -> std::optional<double> { return m.corrector_error; }},
      {"v_avg_error", [](const ErrorMetrics& m) -> std::optional<double> { return m.v_avg_error; }},
      {"grad_rminus_error", [](const ErrorMetrics& m) { return m.grad_rminus_error; }},
      {"grad_rplus_norm", [](const ErrorMetrics& m) { return m.grad_rplus_norm; }},
  };
  if (report.rows.size() >= 2) {
    const ErrorMetrics& first = report.rows.front().metrics;
    const ErrorMetrics& last = report.rows.back().metrics;
    for (const Column& c : columns) {
      const auto a = c.get(first);
      const auto b = c.get(last);
      if (!a || !b) continue;
      out << "ratio_first_last " << c.name << ": " << (*b != 0.0 ? number(*a / *b) : std::string("inf")) << '\n';
    }
  }
  return out.str();
}

void emit_outputs(const SweepReport& report, const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "sweep.csv", csv_text(report, config));
  write_file(dir / "summary.txt", summary_text(report));
  std::string plot =
      "# gnuplot script over sweep.csv\n"
      "set datafile separator ','\n"
      "set key autotitle columnhead top left\n"
      "set logscale xy\n"
      "set xlabel 'epsilon'\n"
      "set ylabel 'error'\n"
      "set terminal pngcairo size 900,600\n"
      "set output 'sweep.png'\n"
      "plot 'sweep.csv' using 1:5 with linespoints, \\\n"
      "     '' using 1:6 with linespoints, \\\n"
      "     '' using 1:7 with linespoints";
  if (report.regime == Regime::strong)
    plot += ", \\\n     '' using 1:8 with linespoints, \\\n     '' using 1:9 with linespoints";
  plot += '\n';
  write_file(dir / "plot.gp", plot);
}

}  // namespace thinhom
