#ifndef MOOGVCF_EXPERIMENTS_HPP
#define MOOGVCF_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "moogvcf/integrators.hpp"
#include "moogvcf/lyapunov.hpp"

namespace moogvcf {

/// SplitMix64 (Steele, Lea, Flood 2014). Substreams are seeded from
/// (seed, index) so work items can be generated in any order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct SweepSpec {
  std::vector<double> r;
  std::vector<double> omega0;
  std::vector<MatrixFamily> families;
  std::uint64_t seed = 0;
  int samples_per_point = 1;

  // Decay checks run at every (r, omega0) grid point.
  Method method = Method::DiscreteGradient;
  double omega0_dt = 0.1;
  long steps = 200;
  double newton_tol = 1e-12;
};

/// Throws RangeError whose field() is a JSON-pointer-like path ("/r/3").
void validate(const SweepSpec& spec);

struct ThresholdEstimate {
  MatrixFamily family{};
  double r_lo = 0;
  double r_hi = 0;
  double r_star = 0;
  Verdict below{};
  Verdict above{};
};

struct TrajectorySummary {
  double omega0 = 1;
  double r = 0;
  std::uint64_t state_index = 0;
  Vector4d x0 = Vector4d::Zero();
  double max_dV = 0;
  double final_norm = 0;
  double tolerance = 0;
  bool passed = false;
  std::string error;
};

struct SweepResult {
  std::vector<CertificateReport<double>> reports;
  std::vector<ThresholdEstimate> thresholds;
  std::vector<TrajectorySummary> trajectories;

  bool all_passed() const;
};

/// Per-step V increase allowed for a decay check with this configuration.
double decay_tolerance(const StepConfig& cfg);

/// Lyapunov function used to score trajectories; replaceable for harness tests.
using LyapunovFn = std::function<double(const State<double>&, const FilterParams<double>&)>;

struct DecayOptions {
  LyapunovFn lyapunov;  // empty: log-cosh function with d = max(1, alpha)
  unsigned threads = 1;
};

/// Certificates for every (family, r, omega0), ordered family-major, then r,
/// then omega0, plus verdict-change thresholds per family (bisected to 1e-10).
SweepResult run_definiteness_sweep(const SweepSpec& spec, unsigned threads = 1);

/// Simulates n_states seeded initial states with components uniform in
/// [-5, 5] up to t_end and records the largest per-step V increase.
SweepResult run_decay_study(const FilterParams<double>& p, std::uint64_t seed, long n_states,
                            const StepConfig& cfg, double t_end, const DecayOptions& opts = {});

/// Definiteness sweep plus samples_per_point decay checks at each grid point.
SweepResult run_sweep(const SweepSpec& spec, unsigned threads = 1);

using GradientFn = std::function<Vector4d(const ScaledState<double>&, const FilterParams<double>&)>;

/// Largest relative error ||grad - fd||_inf / ||grad||_inf between the
/// analytic gradient (grad_V unless overridden) and central differences of
/// V_nonlinear at n_points seeded (w, r). Point 0 is the origin.
double run_gradcheck(std::uint64_t seed, long n_points, const GradientFn& gradient = {});

inline constexpr double kGradcheckThreshold = 1e-5;

}  // namespace moogvcf

#endif  // MOOGVCF_EXPERIMENTS_HPP
