#include "moogvcf/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

namespace moogvcf::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(std::string_view text, const std::string& field) {
  const std::string t = trim(text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw RangeError(field, "'" + std::string(text) + "' is not a finite real number");
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string csv_complex_row(std::string_view source, int index, const std::complex<double>& z) {
  return std::string(source) + "," + std::to_string(index) + "," + format_double(z.real()) + "," +
         format_double(z.imag()) + "\n";
}

Json complex_list(const Spectrum<double>& s) {
  Json arr = Json::array();
  for (const auto& z : s.eigenvalues) arr.push_back({{"re", z.real()}, {"im", z.imag()}});
  return arr;
}

std::vector<double> read_grid(const Json& doc, const std::string& key) {
  const std::string where = "/" + key;
  if (!doc.contains(key)) throw RangeError(where, "missing required field");
  const Json& node = doc.at(key);
  if (node.is_string()) return parse_grid(node.get<std::string>());
  if (!node.is_array()) throw RangeError(where, "expected an array of numbers or \"lo:hi:step\"");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number()) throw RangeError(where + "/" + std::to_string(i), "expected a number");
    out.push_back(node[i].get<double>());
  }
  return out;
}

Json threshold_json(const ThresholdEstimate& t) {
  return {{"family", std::string(to_string(t.family))},
          {"r_lo", t.r_lo},
          {"r_hi", t.r_hi},
          {"r_star", t.r_star},
          {"below", std::string(to_string(t.below))},
          {"above", std::string(to_string(t.above))}};
}

}  // namespace

OutputFormat parse_format(std::string_view s) {
  if (s == "csv") return OutputFormat::CSV;
  if (s == "json") return OutputFormat::JSON;
  throw RangeError("format", "expected csv or json, got '" + std::string(s) + "'");
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::vector<double> parse_grid(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw RangeError("grid", "expected lo:hi:step, got '" + std::string(spec) + "'");
  const double lo = parse_real(parts[0], "grid");
  const double hi = parse_real(parts[1], "grid");
  const double step = parse_real(parts[2], "grid");
  if (!(step > 0)) throw RangeError("grid", "step must be > 0");
  if (lo > hi) throw RangeError("grid", "grid must be ascending (lo <= hi)");
  std::vector<double> out;
  const double snap = 1e-9 * step;
  for (long i = 0;; ++i) {
    double v = lo + static_cast<double>(i) * step;
    if (v > hi + snap) break;
    if (std::abs(v - hi) <= snap) v = hi;
    out.push_back(v);
    if (v == hi) break;
  }
  return out;
}

Vector4d parse_vec4(std::string_view spec) {
  const auto parts = split(spec, ',');
  if (parts.size() != 4) throw RangeError("x0", "expected four comma-separated reals");
  Vector4d v;
  for (int i = 0; i < 4; ++i) v(i) = parse_real(parts[static_cast<std::size_t>(i)], "x0");
  return v;
}

MatrixFamily parse_family(std::string_view s) {
  for (auto f : {MatrixFamily::As, MatrixFamily::Bs, MatrixFamily::QsWorstCase}) {
    if (s == to_string(f)) return f;
  }
  throw RangeError("families", "unknown family '" + std::string(s) + "' (As, Bs, QsWorstCase)");
}

std::vector<MatrixFamily> parse_families(std::string_view comma_list) {
  std::vector<MatrixFamily> out;
  for (const auto& part : split(comma_list, ',')) out.push_back(parse_family(part));
  return out;
}

Method parse_method(std::string_view s) {
  if (s == "rk4") return Method::ExplicitRK4;
  if (s == "dg") return Method::DiscreteGradient;
  throw RangeError("method", "expected rk4 or dg, got '" + std::string(s) + "'");
}

std::string_view to_string(Method m) { return m == Method::ExplicitRK4 ? "rk4" : "dg"; }

SweepSpec sweep_spec_from_json(const Json& doc) {
  if (!doc.is_object()) throw RangeError("/", "sweep spec must be a JSON object");
  if (doc.contains("schema_version") &&
      !(doc["schema_version"].is_number_integer() && doc["schema_version"].get<int>() == kSchemaVersion)) {
    throw RangeError("/schema_version", "unsupported schema version");
  }
  SweepSpec spec;
  spec.r = read_grid(doc, "r");
  spec.omega0 = read_grid(doc, "omega0");

  if (!doc.contains("families")) throw RangeError("/families", "missing required field");
  const Json& fams = doc["families"];
  if (!fams.is_array()) throw RangeError("/families", "expected an array of family names");
  for (std::size_t i = 0; i < fams.size(); ++i) {
    const std::string where = "/families/" + std::to_string(i);
    if (!fams[i].is_string()) throw RangeError(where, "expected a string");
    try {
      spec.families.push_back(parse_family(fams[i].get<std::string>()));
    } catch (const RangeError& e) {
      throw RangeError(where, e.what());
    }
  }

  if (!doc.contains("seed")) throw RangeError("/seed", "missing required field");
  if (!doc["seed"].is_number_unsigned()) throw RangeError("/seed", "expected a non-negative integer");
  spec.seed = doc["seed"].get<std::uint64_t>();

  if (!doc.contains("samples_per_point")) throw RangeError("/samples_per_point", "missing required field");
  if (!doc["samples_per_point"].is_number_integer()) {
    throw RangeError("/samples_per_point", "expected a positive integer");
  }
  spec.samples_per_point = doc["samples_per_point"].get<int>();

  if (doc.contains("method")) {
    if (!doc["method"].is_string()) throw RangeError("/method", "expected \"rk4\" or \"dg\"");
    try {
      spec.method = parse_method(doc["method"].get<std::string>());
    } catch (const RangeError& e) {
      throw RangeError("/method", e.what());
    }
  }
  auto optional_number = [&](const char* key, double& dst) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_number()) throw RangeError(std::string("/") + key, "expected a number");
    dst = doc[key].get<double>();
  };
  optional_number("omega0_dt", spec.omega0_dt);
  optional_number("newton_tol", spec.newton_tol);
  if (doc.contains("steps")) {
    if (!doc["steps"].is_number_integer()) throw RangeError("/steps", "expected a positive integer");
    spec.steps = doc["steps"].get<long>();
  }
  validate(spec);
  return spec;
}

Json to_json(const SweepSpec& spec) {
  Json fams = Json::array();
  for (auto f : spec.families) fams.push_back(std::string(to_string(f)));
  return {{"r", spec.r},
          {"omega0", spec.omega0},
          {"families", fams},
          {"seed", spec.seed},
          {"samples_per_point", spec.samples_per_point},
          {"method", std::string(to_string(spec.method))},
          {"omega0_dt", spec.omega0_dt},
          {"steps", spec.steps},
          {"newton_tol", spec.newton_tol}};
}

std::string spectra_csv(const Spectrum<double>& closed, const Spectrum<double>& numeric) {
  std::string out = "source,index,re,im\n";
  for (int i = 0; i < 4; ++i) out += csv_complex_row("closed", i, closed.eigenvalues[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 4; ++i) out += csv_complex_row("numeric", i, numeric.eigenvalues[static_cast<std::size_t>(i)]);
  out += "closed_max_real_part,," + format_double(closed.max_real_part) + ",0\n";
  out += "numeric_max_real_part,," + format_double(numeric.max_real_part) + ",0\n";
  return out;
}

Json spectra_json(const FilterParams<double>& p, const Spectrum<double>& closed,
                  const Spectrum<double>& numeric) {
  return {{"schema_version", kSchemaVersion},
          {"omega0", p.omega0},
          {"r", p.r},
          {"closed", {{"eigenvalues", complex_list(closed)}, {"max_real_part", closed.max_real_part}}},
          {"numeric", {{"eigenvalues", complex_list(numeric)}, {"max_real_part", numeric.max_real_part}}}};
}

std::string certificates_csv(const std::vector<CertificateReport<double>>& reports,
                             const std::vector<ThresholdEstimate>& thresholds) {
  std::string out = "kind,family,r,omega0,min_eig,max_eig,verdict\n";
  for (const auto& rep : reports) {
    out += "point," + std::string(to_string(rep.family)) + "," + format_double(rep.r) + "," +
           format_double(rep.omega0) + "," + format_double(rep.min_eig) + "," +
           format_double(rep.max_eig) + "," + std::string(to_string(rep.verdict)) + "\n";
  }
  for (const auto& t : thresholds) {
    out += "threshold," + std::string(to_string(t.family)) + "," + format_double(t.r_star) + ",,,," +
           std::string(to_string(t.below)) + "->" + std::string(to_string(t.above)) + "\n";
  }
  return out;
}

Json certificates_json(const std::vector<CertificateReport<double>>& reports,
                       const std::vector<ThresholdEstimate>& thresholds) {
  Json reps = Json::array();
  for (const auto& rep : reports) {
    reps.push_back({{"family", std::string(to_string(rep.family))},
                    {"r", rep.r},
                    {"omega0", rep.omega0},
                    {"min_eig", rep.min_eig},
                    {"max_eig", rep.max_eig},
                    {"verdict", std::string(to_string(rep.verdict))},
                    {"tol", rep.tol}});
  }
  Json th = Json::array();
  for (const auto& t : thresholds) th.push_back(threshold_json(t));
  return {{"schema_version", kSchemaVersion}, {"reports", reps}, {"thresholds", th}};
}

std::string trajectory_csv(const Trajectory<double>& tr, bool with_dV) {
  std::string out = with_dV ? "t,x1,x2,x3,x4,v,vdot,dv\n" : "t,x1,x2,x3,x4,v,vdot\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    out += format_double(tr.times[k]);
    for (int i = 0; i < 4; ++i) out += "," + format_double(tr.states[k].x(i));
    out += "," + format_double(tr.V[k]) + "," + format_double(tr.Vdot[k]);
    if (with_dV) out += "," + format_double(k == 0 ? 0.0 : tr.V[k] - tr.V[k - 1]);
    out += "\n";
  }
  return out;
}

Json trajectory_json(const FilterParams<double>& p, const StepConfig& cfg,
                     const Trajectory<double>& tr, bool with_dV) {
  Json x = Json::array();
  for (const auto& s : tr.states) x.push_back({s.x(0), s.x(1), s.x(2), s.x(3)});
  Json doc = {{"schema_version", kSchemaVersion},
              {"omega0", p.omega0},
              {"r", p.r},
              {"method", std::string(to_string(cfg.method))},
              {"dt", cfg.dt},
              {"t", tr.times},
              {"x", x},
              {"V", tr.V},
              {"Vdot", tr.Vdot}};
  if (with_dV) {
    std::vector<double> dv(tr.size(), 0.0);
    for (std::size_t k = 1; k < tr.size(); ++k) dv[k] = tr.V[k] - tr.V[k - 1];
    doc["dV"] = dv;
  }
  return doc;
}

Json sweep_result_json(const SweepSpec& spec, const SweepResult& result) {
  Json doc = certificates_json(result.reports, result.thresholds);
  Json traj = Json::array();
  for (const auto& t : result.trajectories) {
    traj.push_back({{"r", t.r},
                    {"omega0", t.omega0},
                    {"state_index", t.state_index},
                    {"x0", {t.x0(0), t.x0(1), t.x0(2), t.x0(3)}},
                    {"max_dV", t.max_dV},
                    {"final_norm", t.final_norm},
                    {"tolerance", t.tolerance},
                    {"passed", t.passed},
                    {"error", t.error.empty() ? Json(nullptr) : Json(t.error)}});
  }
  Json out = {{"schema_version", kSchemaVersion}, {"spec", to_json(spec)}};
  out["reports"] = doc["reports"];
  out["thresholds"] = doc["thresholds"];
  out["trajectories"] = traj;
  out["passed"] = result.all_passed();
  return out;
}

std::string sweep_result_csv(const SweepResult& result) {
  std::string out = certificates_csv(result.reports, result.thresholds);
  out += "\nr,omega0,state_index,x1,x2,x3,x4,max_dv,final_norm,passed\n";
  for (const auto& t : result.trajectories) {
    out += format_double(t.r) + "," + format_double(t.omega0) + "," + std::to_string(t.state_index);
    for (int i = 0; i < 4; ++i) out += "," + format_double(t.x0(i));
    out += "," + format_double(t.max_dV) + "," + format_double(t.final_norm) + "," +
           (t.passed ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace moogvcf::io
