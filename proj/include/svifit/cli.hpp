#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svifit::cli {

// Exit codes: 0 success, 1 usage or I/O error, 2 arbitrage detected (check-arb).
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitArbitrage = 2;

// Runs one subcommand (fit, check-arb, repair, query, density, report).
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace svifit::cli
