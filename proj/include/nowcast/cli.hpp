#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nowcast::cli {

// Runs one subcommand. `args` excludes the program name. On success exactly
// one JSON line is written to `out` and 0 is returned; usage errors return 2
// and rejected operations 1, with diagnostics on `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nowcast::cli
