#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vstain::cli {

// Runs one command line. Output artifacts go to --out; progress goes to
// `out`; failures are reported on `err` as one JSON line. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vstain::cli
