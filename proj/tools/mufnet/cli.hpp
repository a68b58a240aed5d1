#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mufnet::cli {

// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kRuntime = 1,
  kBadFlag = 2,
  kMissingFile = 3,
  kBadConfig = 4,
  kMalformedInput = 5,
};

// Runs one command line (without the program name). Normal output goes to
// `out`; failures print exactly one line to `err`:
//   error: <kind>: <message>
// with kind one of bad_flag, missing_file, config, malformed_input, runtime.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mufnet::cli
