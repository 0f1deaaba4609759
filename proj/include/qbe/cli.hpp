#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qbe::cli {

// Entry point behind the qbe binary. args excludes argv[0].
// Exit codes: 0 success, 2 usage/config error, 3 I/O or format error,
// 4 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace qbe::cli
