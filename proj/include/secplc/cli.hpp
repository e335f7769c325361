#pragma once

#include <ostream>
#include <string_view>

namespace secplc::cli {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

/// Exit codes of the command-line front end.
enum Exit : int { ok = 0, config_error = 1, io_error = 2 };

/// Runs one subcommand. Diagnostics go to `err`, reports to `out`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace secplc::cli
