#ifndef MOOGVCF_CLI_HPP
#define MOOGVCF_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

#include "moogvcf/experiments.hpp"

namespace moogvcf::cli {

enum ExitCode : int {
  kSuccess = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kNumericalFailure = 3,
};

/// Injection points used by the test harness.
struct Hooks {
  GradientFn gradient;  // gradcheck: replaces grad_V when set
};

/// Runs `moogvcf <subcommand> ...`; args excludes the program name. Normal
/// output goes to out (or the --out file), diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks = {});

}  // namespace moogvcf::cli

#endif  // MOOGVCF_CLI_HPP
