#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dirfmm::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kMissingCache = 3,
  kInvalidInput = 4,
  kNotConverged = 5,
  kIoError = 6,
};

// args excludes the program name. Results go to `out` unless --output is given;
// diagnostics go to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

// key=value lines; blank lines and lines starting with '#' are skipped.
// Throws std::runtime_error on a malformed line.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream &in);

}  // namespace dirfmm::cli
