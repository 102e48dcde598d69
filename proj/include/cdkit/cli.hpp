#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdkit {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Runs one command line (without the program name). Subcommands: discover,
// simulate, compare, oracle, dsep, effects, rerun.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lower-case hex SHA-256 of a byte string and of a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace cdkit
