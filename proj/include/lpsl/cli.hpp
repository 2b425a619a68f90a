#pragma once

#include <iosfwd>

namespace lpsl {

/// Entry point of the `lpsl` tool. Returns 0 on success, 1 on invalid input
/// or usage, 2 when the numerics fail.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lpsl
