#include "moogvcf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace moogvcf {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Runs body(i) for i in [0, n), split into contiguous chunks across threads.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * n / workers; i < (t + 1) * n / workers; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string path(const std::string& field, std::size_t index) {
  return "/" + field + "/" + std::to_string(index);
}

void check_grid(const std::vector<double>& grid, const std::string& field, bool is_r) {
  if (grid.empty()) throw RangeError("/" + field, "grid must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid[i];
    if (!std::isfinite(v)) throw RangeError(path(field, i), "value must be finite");
    if (is_r && !(v >= 0 && v <= 1)) {
      std::ostringstream msg;
      msg << "r = " << v << " outside [0, 1]";
      throw RangeError(path(field, i), msg.str());
    }
    if (!is_r && !(v > 0)) {
      std::ostringstream msg;
      msg << "omega0 = " << v << " must be > 0";
      throw RangeError(path(field, i), msg.str());
    }
    if (i > 0 && !(grid[i - 1] < v)) throw RangeError(path(field, i), "grid must be strictly ascending");
  }
}

struct DecayJob {
  FilterParams<double> params;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t state_index = 0;
};

TrajectorySummary run_decay_job(const DecayJob& job, const StepConfig& cfg, long n_steps,
                                const LyapunovFn& lyapunov) {
  TrajectorySummary s;
  s.omega0 = job.params.omega0;
  s.r = job.params.r;
  s.state_index = job.state_index;
  s.tolerance = decay_tolerance(cfg);
  SplitMix64 rng = SplitMix64::substream(job.seed, job.stream);
  for (int i = 0; i < 4; ++i) s.x0(i) = rng.uniform(-5.0, 5.0);
  try {
    const Trajectory<double> tr = simulate(State<double>{s.x0}, job.params, cfg, n_steps);
    double prev = lyapunov ? lyapunov(tr.states[0], job.params) : tr.V[0];
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < tr.size(); ++k) {
      const double v = lyapunov ? lyapunov(tr.states[k], job.params) : tr.V[k];
      worst = std::max(worst, v - prev);
      prev = v;
    }
    s.max_dV = worst;
    s.final_norm = tr.states.back().x.norm();
    s.passed = worst <= s.tolerance;
  } catch (const IntegrationError& e) {
    s.error = e.what();
    s.passed = false;
  }
  return s;
}

}  // namespace

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(mix64(seed ^ mix64((index + 1) * kGolden)));
}

std::uint64_t SplitMix64::next() {
  state_ += kGolden;
  return mix64(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void validate(const SweepSpec& spec) {
  check_grid(spec.r, "r", true);
  check_grid(spec.omega0, "omega0", false);
  if (spec.families.empty()) throw RangeError("/families", "at least one family is required");
  if (spec.samples_per_point < 1) throw RangeError("/samples_per_point", "must be >= 1");
  if (!(spec.omega0_dt > 0) || !std::isfinite(spec.omega0_dt)) {
    throw RangeError("/omega0_dt", "must be finite and > 0");
  }
  if (spec.steps < 1) throw RangeError("/steps", "must be >= 1");
  if (!(spec.newton_tol > 0)) throw RangeError("/newton_tol", "must be > 0");
  for (std::size_t i = 0; i < spec.families.size(); ++i) {
    if (spec.families[i] != MatrixFamily::QsWorstCase) continue;
    for (std::size_t j = 0; j < spec.r.size(); ++j) {
      if (spec.r[j] == 0) {
        throw RangeError(path("r", j), "QsWorstCase (listed at /families/" + std::to_string(i) +
                                           ") is undefined at r = 0");
      }
    }
  }
}

bool SweepResult::all_passed() const {
  return std::all_of(trajectories.begin(), trajectories.end(),
                     [](const TrajectorySummary& t) { return t.passed; });
}

double decay_tolerance(const StepConfig& cfg) {
  if (cfg.method == Method::DiscreteGradient) return std::max(1e-10, 10.0 * cfg.newton_tol);
  return 1e-9;
}

SweepResult run_definiteness_sweep(const SweepSpec& spec, unsigned threads) {
  validate(spec);
  SweepResult out;
  const std::size_t nr = spec.r.size(), nw = spec.omega0.size();
  const std::size_t per_family = nr * nw;
  out.reports.resize(spec.families.size() * per_family);
  parallel_for(out.reports.size(), threads, [&](std::size_t i) {
    const MatrixFamily fam = spec.families[i / per_family];
    const std::size_t ir = (i % per_family) / nw, iw = i % nw;
    out.reports[i] = certify(fam, make_params(spec.omega0[iw], spec.r[ir]));
  });

  // Verdicts do not depend on omega0; thresholds use the first omega0 column.
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    for (std::size_t ir = 0; ir + 1 < nr; ++ir) {
      const auto& lo = out.reports[f * per_family + ir * nw];
      const auto& hi = out.reports[f * per_family + (ir + 1) * nw];
      if (lo.verdict == hi.verdict) continue;
      ThresholdEstimate t;
      t.family = spec.families[f];
      t.r_lo = lo.r;
      t.r_hi = hi.r;
      t.r_star = definiteness_threshold(t.family, lo.r, hi.r, 1e-10);
      t.below = lo.verdict;
      t.above = hi.verdict;
      out.thresholds.push_back(t);
    }
  }
  return out;
}

SweepResult run_decay_study(const FilterParams<double>& p, std::uint64_t seed, long n_states,
                            const StepConfig& cfg, double t_end, const DecayOptions& opts) {
  if (n_states < 1) throw RangeError("n_states", "need at least one initial state");
  if (!(t_end > 0)) throw RangeError("t_end", "must be > 0");
  validate(cfg);
  const long n_steps = std::max(1L, static_cast<long>(std::ceil(t_end / cfg.dt - 1e-9)));
  SweepResult out;
  out.trajectories.resize(static_cast<std::size_t>(n_states));
  parallel_for(out.trajectories.size(), opts.threads, [&](std::size_t i) {
    out.trajectories[i] = run_decay_job({p, seed, i, i}, cfg, n_steps, opts.lyapunov);
  });
  return out;
}

SweepResult run_sweep(const SweepSpec& spec, unsigned threads) {
  SweepResult out = run_definiteness_sweep(spec, threads);
  const std::size_t nr = spec.r.size(), nw = spec.omega0.size();
  const auto samples = static_cast<std::size_t>(spec.samples_per_point);
  std::vector<DecayJob> jobs;
  jobs.reserve(nr * nw * samples);
  for (std::size_t ir = 0; ir < nr; ++ir) {
    for (std::size_t iw = 0; iw < nw; ++iw) {
      for (std::size_t k = 0; k < samples; ++k) {
        jobs.push_back({make_params(spec.omega0[iw], spec.r[ir]), spec.seed, jobs.size(), k});
      }
    }
  }
  out.trajectories.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    StepConfig cfg;
    cfg.method = spec.method;
    cfg.dt = spec.omega0_dt / jobs[i].params.omega0;
    cfg.newton_tol = spec.newton_tol;
    out.trajectories[i] = run_decay_job(jobs[i], cfg, spec.steps, {});
  });
  return out;
}

double run_gradcheck(std::uint64_t seed, long n_points, const GradientFn& gradient) {
  if (n_points < 1) throw RangeError("n_points", "need at least one point");
  double worst = 0;
  for (long i = 0; i < n_points; ++i) {
    SplitMix64 rng = SplitMix64::substream(seed, static_cast<std::uint64_t>(i));
    ScaledState<double> w;
    double r = 1.0;
    if (i > 0) {
      r = 1.0 - rng.uniform();  // (0, 1]
      for (int k = 0; k < 4; ++k) w.w(k) = rng.uniform(-5.0, 5.0);
    }
    const FilterParams<double> p = make_params(1.0, r);
    const Vector4d g = gradient ? gradient(w, p) : grad_V(w, p);
    Vector4d fd;
    for (int k = 0; k < 4; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(w.w(k)));
      ScaledState<double> plus = w, minus = w;
      plus.w(k) += h;
      minus.w(k) -= h;
      fd(k) = (V_nonlinear(plus, p) - V_nonlinear(minus, p)) / (plus.w(k) - minus.w(k));
    }
    const double scale = std::max(g.lpNorm<Eigen::Infinity>(), fd.lpNorm<Eigen::Infinity>());
    const double err = (g - fd).lpNorm<Eigen::Infinity>();
    if (err == 0) continue;
    worst = std::max(worst, scale > 0 ? err / scale : err);
  }
  return worst;
}

}  // namespace moogvcf
