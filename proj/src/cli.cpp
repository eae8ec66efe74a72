#include "moogvcf/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "moogvcf/io.hpp"
#include "moogvcf/spectral.hpp"

namespace moogvcf::cli {

namespace {

struct Emit {
  std::ostream& out;
  std::ostream& err;
  std::string out_path;

  /// Writes the buffered payload once, to --out when given.
  int write(const std::string& payload, int code) const {
    if (out_path.empty()) {
      out << payload;
      return code;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) {
      err << "error: cannot open '" << out_path << "' for writing\n";
      return kUsageError;
    }
    f << payload;
    return code;
  }
};

std::string dump(const io::Json& j) { return j.dump(2) + "\n"; }

bool matches_expected_region(MatrixFamily family, double r, Verdict v) {
  constexpr double kBoundaryBand = 1e-9;
  switch (family) {
    case MatrixFamily::As: {
      const double r_star = 5.0 / 12.0;
      if (std::abs(r - r_star) <= kBoundaryBand) return v == Verdict::NegativeSemidefinite;
      return v == (r < r_star ? Verdict::NegativeDefinite : Verdict::Indefinite);
    }
    case MatrixFamily::Bs:
    case MatrixFamily::QsWorstCase:
      if (r >= 1.0 - kBoundaryBand) return v == Verdict::NegativeSemidefinite;
      return v == Verdict::NegativeDefinite;
  }
  return false;
}

int cmd_eig(double omega0, double r, const std::string& format, const Emit& emit) {
  const auto fmt = io::parse_format(format);
  const auto p = make_params(omega0, r);
  const auto closed = eigvals_A_closed(p);
  const auto numeric = eigvals_numeric(matrix_A(p));
  if (fmt == io::OutputFormat::JSON) return emit.write(dump(io::spectra_json(p, closed, numeric)), kSuccess);
  return emit.write(io::spectra_csv(closed, numeric), kSuccess);
}

int cmd_certify(const std::string& families, const std::string& grid, double omega0, double tol,
                const std::string& format, bool expect, const Emit& emit) {
  const auto fmt = io::parse_format(format);
  if (!(tol > 0)) throw RangeError("tol", "must be > 0");
  SweepSpec spec;
  spec.r = io::parse_grid(grid);
  spec.omega0 = {omega0};
  spec.families = io::parse_families(families);
  for (double r : spec.r) make_params(omega0, r);
  validate(spec);

  SweepResult res;
  for (auto fam : spec.families) {
    for (double r : spec.r) res.reports.push_back(certify(fam, make_params(omega0, r), tol));
  }
  const std::size_t nr = spec.r.size();
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    for (std::size_t i = 0; i + 1 < nr; ++i) {
      const auto& lo = res.reports[f * nr + i];
      const auto& hi = res.reports[f * nr + i + 1];
      if (lo.verdict == hi.verdict) continue;
      ThresholdEstimate t{spec.families[f], lo.r, hi.r, 0.0, lo.verdict, hi.verdict};
      t.r_star = definiteness_threshold(t.family, lo.r, hi.r, 1e-10, tol);
      res.thresholds.push_back(t);
    }
  }

  int code = kSuccess;
  if (expect) {
    for (const auto& rep : res.reports) {
      if (!matches_expected_region(rep.family, rep.r, rep.verdict)) {
        emit.err << "unexpected verdict " << to_string(rep.verdict) << " for " << to_string(rep.family)
                 << " at r = " << io::format_double(rep.r) << "\n";
        code = kCheckFailed;
      }
    }
  }
  if (fmt == io::OutputFormat::JSON) {
    return emit.write(dump(io::certificates_json(res.reports, res.thresholds)), code);
  }
  return emit.write(io::certificates_csv(res.reports, res.thresholds), code);
}

int cmd_simulate(double omega0, double r, const std::string& x0, double dt, long steps,
                 const std::string& method, double newton_tol, const std::string& format,
                 const Emit& emit) {
  const auto fmt = io::parse_format(format);
  const auto p = make_params(omega0, r);
  StepConfig cfg;
  cfg.dt = dt;
  cfg.method = io::parse_method(method);
  cfg.newton_tol = newton_tol;
  const State<double> start{io::parse_vec4(x0)};
  Trajectory<double> tr;
  try {
    tr = simulate(start, p, cfg, steps);
  } catch (const IntegrationError& e) {
    emit.err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  const bool dg = cfg.method == Method::DiscreteGradient;
  int code = kSuccess;
  if (dg) {
    const double limit = 10.0 * cfg.newton_tol;
    for (std::size_t k = 1; k < tr.size(); ++k) {
      if (tr.V[k] - tr.V[k - 1] > limit) {
        emit.err << "V increased by " << io::format_double(tr.V[k] - tr.V[k - 1]) << " at step " << k
                 << " (limit " << io::format_double(limit) << ")\n";
        code = kCheckFailed;
        break;
      }
    }
  }
  if (fmt == io::OutputFormat::JSON) return emit.write(dump(io::trajectory_json(p, cfg, tr, dg)), code);
  return emit.write(io::trajectory_csv(tr, dg), code);
}

int cmd_sweep(const std::string& spec_path, const std::string& format, unsigned threads,
              const Emit& emit) {
  const auto fmt = io::parse_format(format);
  std::ifstream in(spec_path);
  if (!in) throw RangeError("spec", "cannot open '" + spec_path + "'");
  io::Json doc;
  try {
    doc = io::Json::parse(in);
  } catch (const io::Json::parse_error& e) {
    throw RangeError("spec", std::string("invalid JSON: ") + e.what());
  }
  const SweepSpec spec = io::sweep_spec_from_json(doc);
  const SweepResult res = run_sweep(spec, threads);
  const int code = res.all_passed() ? kSuccess : kCheckFailed;
  if (fmt == io::OutputFormat::JSON) return emit.write(dump(io::sweep_result_json(spec, res)), code);
  return emit.write(io::sweep_result_csv(res), code);
}

int cmd_gradcheck(std::uint64_t seed, long points, const Hooks& hooks, const Emit& emit) {
  const double err = run_gradcheck(seed, points, hooks.gradient);
  const bool ok = err < kGradcheckThreshold;
  std::ostringstream os;
  os << "seed,points,max_relative_error,passed\n"
     << seed << "," << points << "," << io::format_double(err) << "," << (ok ? "true" : "false") << "\n";
  return emit.write(os.str(), ok ? kSuccess : kCheckFailed);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  CLI::App app{"Stability analysis and simulation of the nonlinear Moog ladder filter", "moogvcf"};
  app.require_subcommand(1);

  double omega0 = 1.0;
  double r = 0.0;
  std::string format = "csv";
  std::string out_path;

  auto* eig = app.add_subcommand("eig", "Eigenvalues of the linearized system (closed form and numeric)");
  eig->add_option("--omega0", omega0, "Cutoff frequency (rad/s)");
  eig->add_option("--r", r, "Resonance in [0, 1]")->required();
  eig->add_option("--format", format, "csv or json");
  eig->add_option("--out", out_path, "Write to this file instead of stdout");

  std::string families = "As,Bs,QsWorstCase";
  std::string grid;
  double tol = kDefaultEigTol;
  bool expect = false;
  auto* cert = app.add_subcommand("certify", "Negative-definiteness verdicts over a resonance grid");
  cert->add_option("--families", families, "Comma-separated subset of As,Bs,QsWorstCase");
  cert->add_option("--r-grid", grid, "lo:hi:step")->required();
  cert->add_option("--omega0", omega0, "Cutoff frequency (rad/s)");
  cert->add_option("--tol", tol, "Eigenvalue tolerance for verdicts");
  cert->add_flag("--expect", expect, "Exit 1 unless every verdict matches the known stability region");
  cert->add_option("--format", format, "csv or json");
  cert->add_option("--out", out_path, "Write to this file instead of stdout");

  std::string x0;
  double dt = 0.01;
  long steps = 1000;
  std::string method = "dg";
  double newton_tol = 1e-12;
  auto* sim = app.add_subcommand("simulate", "Integrate the nonlinear system and record V, dV/dt");
  sim->add_option("--omega0", omega0, "Cutoff frequency (rad/s)");
  sim->add_option("--r", r, "Resonance in [0, 1]")->required();
  sim->add_option("--x0", x0, "Initial state x1,x2,x3,x4")->required();
  sim->add_option("--dt", dt, "Time step (s)");
  sim->add_option("--steps", steps, "Number of steps");
  sim->add_option("--method", method, "rk4 or dg");
  sim->add_option("--newton-tol", newton_tol, "Newton residual tolerance (dg)");
  sim->add_option("--format", format, "csv or json");
  sim->add_option("--out", out_path, "Write to this file instead of stdout");

  std::string spec_path;
  unsigned threads = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a JSON-specified certification and decay sweep");
  sweep->add_option("--spec", spec_path, "Sweep specification (JSON)")->required();
  std::string sweep_format = "json";
  sweep->add_option("--format", sweep_format, "json or csv");
  sweep->add_option("--threads", threads, "Worker threads");
  sweep->add_option("--out", out_path, "Write to this file instead of stdout");

  std::uint64_t seed = 42;
  long points = 500;
  auto* grad = app.add_subcommand("gradcheck", "Compare grad V against finite differences");
  grad->add_option("--seed", seed, "RNG seed");
  grad->add_option("--points", points, "Number of sample points");
  grad->add_option("--out", out_path, "Write to this file instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  const Emit emit{out, err, out_path};
  try {
    if (app.got_subcommand(eig)) return cmd_eig(omega0, r, format, emit);
    if (app.got_subcommand(cert)) return cmd_certify(families, grid, omega0, tol, format, expect, emit);
    if (app.got_subcommand(sim)) {
      return cmd_simulate(omega0, r, x0, dt, steps, method, newton_tol, format, emit);
    }
    if (app.got_subcommand(sweep)) return cmd_sweep(spec_path, sweep_format, threads, emit);
    if (app.got_subcommand(grad)) return cmd_gradcheck(seed, points, hooks, emit);
  } catch (const RangeError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const IntegrationError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kUsageError;
}

}  // namespace moogvcf::cli
