#pragma once

#include <stdexcept>
#include <string>

namespace diversify {

// Error taxonomy maps 1:1 onto process exit codes (see cli.hpp):
//   ValidationError   -> 2   bad input, bad flag combination, malformed file
//   GenerationError   -> 3   a generator could not satisfy its contract
//   IdentityError     -> 4   artifacts from different source programs mixed
//   QueueExhausted    -> 5   distribution queue empty under a finite policy

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IdentityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QueueExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace diversify
