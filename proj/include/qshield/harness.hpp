#pragma once

#include "qshield/fedcore.hpp"

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// Command-line front end: experiment runs, scheme benchmarks and protocol
/// demos. Everything except argv handling lives here so tests can drive it.
namespace qshield::harness {

/// Bad configuration or usage. Maps to exit code 2.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitAllAborted = 3 };

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` lines; `#` starts a comment. Duplicate keys are an
/// error.
KeyValues parse_key_values(std::string_view text);

/// Keys understood by build_config (underscore form; CLI flags use dashes).
const std::vector<std::string>& config_keys();

/// Validates and converts. Unknown keys, unparsable values and out-of-range
/// counts throw ConfigError. `seed` falls back to QSHIELD_SEED, then 0.
fed::ExperimentConfig build_config(const KeyValues& kv);

/// Summary document written next to the metrics CSV.
std::string summary_json(const fed::ExperimentConfig& cfg, const fed::ExperimentResult& res);

/// Entry point behind the `qshield` binary. `args` excludes the program
/// name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qshield::harness
