#ifndef POPSYNTH_TOOLS_COMMANDS_H_
#define POPSYNTH_TOOLS_COMMANDS_H_

#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace popsynth::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kNumericError = 4;
inline constexpr int kInternalError = 1;

// Runs one invocation. args excludes the program name. Failures print a
// single "error[<kind>]: <message>" line to err and return the matching
// exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// `key = value` lines; blank lines and lines starting with '#' are skipped,
// surrounding quotes on a value are removed. Throws ConfigError on a line
// without '=' or a repeated key.
std::map<std::string, std::string> parse_config(std::string_view text);

}  // namespace popsynth::cli

#endif  // POPSYNTH_TOOLS_COMMANDS_H_
