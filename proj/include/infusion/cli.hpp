#pragma once

#include <iosfwd>
#include <string>
#include <vector>

// Batch command-line front end. Exit codes: 0 ok, 1 configuration error,
// 2 numeric failure (divergence, infeasible tuning).
namespace infusion::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace infusion::cli
