#pragma once

#include <ostream>

namespace h2tf::cli {

// Parses argv and dispatches to the matching command. Returns the exit code.
int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace h2tf::cli
