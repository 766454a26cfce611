#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ala::cli {

inline constexpr const char* kToolVersion = "0.3.0";

// Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ala::cli
