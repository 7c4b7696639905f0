#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace genmil {

// Runs one subcommand (train, infer, eval, simulate, benchmark). `args`
// excludes the program name. Returns 0 on success; on failure writes a
// single diagnostic line to `err` and returns nonzero.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace genmil
