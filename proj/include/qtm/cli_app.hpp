// cli_app.hpp — command-line front end: scenario files, sweeps, collision
// cross-validation, CSV emission. Kept as a library so tests can drive the
// commands directly.

#pragma once

#include "qtm/thermo.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qtm::cli {

// Exit codes: 0 success, 2 validation/config error, 3 degenerate NESS kernel.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// One CSV row per (scenario, grid point); deterministic 17-significant-digit
// serialization.
std::string sweep_csv(const std::string& tag, const SweepResult& result);

// Engine-branch parametric (eta, W) rows.
std::string power_efficiency_csv(const std::string& tag, const SweepResult& result);

std::string format_g17(double v);

}  // namespace qtm::cli
