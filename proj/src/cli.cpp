#include "dtnwave/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "dtnwave/oracle.hpp"

namespace dtnwave {

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "nan"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string hash_hex(std::string_view text) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash(text)));
  return buf;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::vector<double> sweep_wavelengths(const SweepSpec& sweep) {
  if (sweep.steps < 1) throw ConfigError("sweep: steps must be >= 1");
  if (!(sweep.lambda_min > 0.0)) throw ConfigError("sweep: lambda_min must be > 0");
  if (sweep.steps > 1 && !(sweep.lambda_min < sweep.lambda_max))
    throw ConfigError("sweep: lambda_min must be < lambda_max");
  std::vector<double> out;
  for (int i = 0; i < sweep.steps; ++i) {
    out.push_back(sweep.steps == 1 ? sweep.lambda_min
                  : i == sweep.steps - 1
                      ? sweep.lambda_max
                      : sweep.lambda_min +
                            (sweep.lambda_max - sweep.lambda_min) * i / (sweep.steps - 1));
  }
  return out;
}

std::uint64_t config_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double max_relative_discrepancy(const SolveResult& a, const SolveResult& b) {
  if (a.u_at_interfaces.size() != b.u_at_interfaces.size())
    throw std::invalid_argument("results have different interface counts");
  double scale = 0.0, diff = 0.0;
  for (std::size_t j = 0; j < a.u_at_interfaces.size(); ++j) {
    scale = std::max(scale, b.u_at_interfaces[j].norm());
    diff = std::max(diff, (a.u_at_interfaces[j] - b.u_at_interfaces[j]).norm());
  }
  if (diff == 0.0) return 0.0;
  return scale > 0.0 ? diff / scale : INFINITY;
}

std::string sweep_row(const WaveguideProblem& base, double lambda_um) {
  WaveguideProblem p = base;
  p.k0 = 2.0 * kPi / lambda_um;
  char lam[32];
  std::snprintf(lam, sizeof lam, "%.9f", lambda_um);
  try {
    validate(p);
    const SolveResult r = solve(p);
    std::ostringstream row;
    row << lam << ',' << num(r.flux_incident) << ',' << num(r.flux_reflected) << ','
        << num(r.flux_transmitted) << ',' << num(r.norm_reflected) << ','
        << num(r.norm_transmitted) << ',' << r.diagnostics.maps_built << ','
        << r.diagnostics.cache_hits << ",ok";
    return row.str();
  } catch (const std::exception& e) {
    return std::string(lam) + ",nan,nan,nan,nan,nan,0,0,error: " + sanitize(e.what());
  }
}

int run_solve(const std::string& config_path, const std::string& out_dir, bool dump_fields,
              std::ostream& log, std::ostream& err) {
  std::string text;
  WaveguideProblem problem;
  try {
    text = read_file(config_path);
    problem = parse_problem(text);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  SolveResult r;
  try {
    r = solve(problem);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitNumerical;
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path dir(out_dir);
  std::ofstream out(dir / "result.csv");
  if (!out) {
    err << "cannot write " << (dir / "result.csv").string() << '\n';
    return kExitConfig;
  }
  const auto hash = hash_hex(text);
  out << "# dtnwave " << kVersion << " solve\n"
      << "# config_hash=" << hash << '\n'
      << "# wavelength_um=" << num(problem.wavelength()) << '\n'
      << "# flux_incident=" << num(r.flux_incident) << '\n'
      << "# flux_reflected=" << num(r.flux_reflected) << '\n'
      << "# flux_transmitted=" << num(r.flux_transmitted) << '\n'
      << "# norm_left_outgoing=" << num(r.norm_reflected) << '\n'
      << "# norm_right_outgoing=" << num(r.norm_transmitted) << '\n'
      << "# maps_built=" << r.diagnostics.maps_built << '\n'
      << "# cache_hits=" << r.diagnostics.cache_hits << '\n'
      << "# recovery_residual=" << num(r.diagnostics.recovery_residual) << '\n'
      << "interface,z_um,norm_u,flux\n";
  for (std::size_t j = 0; j < r.u_at_interfaces.size(); ++j)
    out << j << ',' << num(r.z[j]) << ',' << num(std::sqrt(r.hx) * r.u_at_interfaces[j].norm())
        << ',' << num(r.interface_flux[j]) << '\n';

  if (dump_fields) {
    const TransverseGrid grid = build_grid(problem);
    for (std::size_t j = 0; j < r.u_at_interfaces.size(); ++j) {
      char name[32];
      std::snprintf(name, sizeof name, "field_z%04zu.csv", j);
      std::ofstream f(dir / name);
      f << "# dtnwave " << kVersion << " field dump\n"
        << "# config_hash=" << hash << '\n'
        << "# interface=" << j << '\n'
        << "x,z,re_u,im_u\n";
      for (int i = 0; i < grid.n; ++i) {
        const Complex u = r.u_at_interfaces[j](i);
        f << num(grid.x(i)) << ',' << num(r.z[j]) << ',' << num(u.real()) << ','
          << num(u.imag()) << '\n';
      }
    }
  }
  for (const auto& w : r.diagnostics.warnings) err << "warning: " << w << '\n';
  log << "solved " << problem.segments.size() << " segments, " << r.diagnostics.maps_built
      << " maps built, " << r.diagnostics.cache_hits << " cache hits\n";
  return kExitOk;
}

int run_sweep(const std::string& config_path, const SweepSpec& sweep, const std::string& out_path,
              int jobs, std::ostream& log, std::ostream& err) {
  WaveguideProblem problem;
  std::vector<double> lambdas;
  try {
    problem = load_problem(config_path);
    lambdas = sweep_wavelengths(sweep);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<std::string> rows(lambdas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < lambdas.size(); i = next++)
      rows[i] = sweep_row(problem, lambdas[i]);
  };
  const int workers = std::clamp(jobs, 1, static_cast<int>(lambdas.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream out(out_path);
  if (!out) {
    err << "cannot write " << out_path << '\n';
    return kExitConfig;
  }
  out << kSweepHeader << '\n';
  std::size_t failures = 0;
  for (const auto& row : rows) {
    out << row << '\n';
    if (row.find(",error: ") != std::string::npos) ++failures;
  }
  log << "swept " << lambdas.size() << " wavelengths, " << failures << " failed\n";
  return kExitOk;
}

int run_verify(const std::string& config_path, const VerifyOptions& options, std::ostream& out,
               std::ostream& err) {
  WaveguideProblem problem;
  try {
    problem = load_problem(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const SolveResult marched = solve(problem);
    const SolveResult direct = direct_solve(problem, {options.max_unknowns});
    const double d = max_relative_discrepancy(marched, direct);
    out << "unknowns=" << direct.diagnostics.unknowns << '\n'
        << "oracle_residual=" << num(direct.diagnostics.system_residual) << '\n'
        << "max_relative_discrepancy=" << num(d) << '\n'
        << "tolerance=" << num(options.tolerance) << '\n'
        << (d <= options.tolerance ? "PASS" : "FAIL") << '\n';
    return d <= options.tolerance ? kExitOk : kExitNumerical;
  } catch (const OracleCapExceeded& e) {
    err << "oracle cap: " << e.what() << '\n';
    return kExitOracleCap;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace dtnwave
