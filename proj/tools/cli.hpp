#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nogap::cli {

/// Runs `nogap <command> [options]`. Returns 0 on success, 2 on usage or
/// configuration errors, 1 on numeric or I/O failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nogap::cli
