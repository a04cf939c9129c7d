#pragma once

#include <iosfwd>

namespace nvcssl {

// Exit codes: 0 success, 1 internal failure, 2 invalid input or arguments.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nvcssl
