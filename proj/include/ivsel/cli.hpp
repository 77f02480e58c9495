#pragma once

#include <ostream>

namespace ivsel {

/// Exit codes: 0 success, 2 usage, 3 config, 4 data, 5 numeric, 6 contract,
/// 1 anything else.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ivsel
