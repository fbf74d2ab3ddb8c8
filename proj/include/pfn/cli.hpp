#pragma once
#include <cstdint>
#include <string>

namespace pfn {

// Entry point behind the pfn binary. Exit codes: 0 success, 1 usage error
// (bad flags, unknown subcommand, rejected config keys or values), 2 runtime
// error (solver, numeric, or i/o failures during the run).
int cli_dispatch(int argc, const char* const* argv);

// Current time as 20260814T101530Z.
std::string utc_timestamp();

// Creates parent/<subcommand>-<seed>-<utc timestamp>/ and returns its path.
// A -2, -3, ... suffix keeps same-second runs in separate directories.
std::string make_run_dir(const std::string& parent, const std::string& subcommand,
                         uint64_t seed);

}  // namespace pfn
