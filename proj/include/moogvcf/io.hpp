#ifndef MOOGVCF_IO_HPP
#define MOOGVCF_IO_HPP

// CSV / JSON rendering of spectra, certificates, trajectories and sweeps.
//
// Floats are written in the shortest decimal form that parses back to the
// same double. CSV: ',' separated, '.' decimal point, '\n' line ends, one
// lowercase header row.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moogvcf/experiments.hpp"
#include "moogvcf/integrators.hpp"
#include "moogvcf/lyapunov.hpp"
#include "moogvcf/spectral.hpp"

namespace moogvcf::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class OutputFormat { CSV, JSON };

OutputFormat parse_format(std::string_view s);

std::string format_double(double v);

/// "lo:hi:step" with lo <= hi and step > 0; the last point is snapped onto
/// hi when it lands within 1e-9 step of it.
std::vector<double> parse_grid(std::string_view spec);

/// Four comma-separated reals.
Vector4d parse_vec4(std::string_view spec);

MatrixFamily parse_family(std::string_view s);
std::vector<MatrixFamily> parse_families(std::string_view comma_list);
Method parse_method(std::string_view s);
std::string_view to_string(Method m);

/// Reads a SweepSpec document; errors are RangeError with a field path.
SweepSpec sweep_spec_from_json(const Json& doc);
Json to_json(const SweepSpec& spec);

std::string spectra_csv(const Spectrum<double>& closed, const Spectrum<double>& numeric);
Json spectra_json(const FilterParams<double>& p, const Spectrum<double>& closed,
                  const Spectrum<double>& numeric);

/// Columns kind,family,r,omega0,min_eig,max_eig,verdict. Threshold rows use
/// kind = threshold, leave the eigenvalue columns empty and put
/// "<below>-><above>" in the verdict column.
std::string certificates_csv(const std::vector<CertificateReport<double>>& reports,
                             const std::vector<ThresholdEstimate>& thresholds);
Json certificates_json(const std::vector<CertificateReport<double>>& reports,
                       const std::vector<ThresholdEstimate>& thresholds);

/// Columns t,x1,x2,x3,x4,v,vdot and, when with_dV, dv = V[n] - V[n-1]
/// (0 on the first row).
std::string trajectory_csv(const Trajectory<double>& tr, bool with_dV);
Json trajectory_json(const FilterParams<double>& p, const StepConfig& cfg,
                     const Trajectory<double>& tr, bool with_dV);

Json sweep_result_json(const SweepSpec& spec, const SweepResult& result);
/// Certificates table followed by a blank line and a trajectory table.
std::string sweep_result_csv(const SweepResult& result);

}  // namespace moogvcf::io

#endif  // MOOGVCF_IO_HPP
