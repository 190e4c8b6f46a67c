#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace scop::cli {

/// Named starting configuration; `default` mirrors the published setup,
/// `toy` is sized for small graphs on a laptop CPU.
std::map<std::string, std::string> preset(const std::string& name);

/// Runs one subcommand. `args` excludes the program name. Returns the process
/// exit status; diagnostics go to `err`, progress and summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scop::cli
