#pragma once

namespace fewmol::cli {

// Entry point shared by the binary and tests. Exit codes: 0 success,
// 1 usage/configuration error, 2 data error, 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace fewmol::cli
