#pragma once

#include <string>
#include <vector>

namespace diversify {

// Process exit codes. 1 is reserved for unexpected internal failures.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitGeneration = 3;
inline constexpr int kExitIdentity = 4;
inline constexpr int kExitQueueExhausted = 5;

// Full command-line driver; args exclude argv[0]. Never throws: every error
// is reported on stderr and mapped to an exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace diversify
