#pragma once

// Pattern set generators. Three engineered families plus a random baseline:
//
//   perm       seeded base permutation of the function order and all of its
//              rotations (one pattern per function), order then shuffled
//   pad        per-build front padding: each build grows every function's
//              head NOP pad by the smallest amount whose reachability map is
//              disjoint from everything generated before it
//   pad-noise  pad plus accumulating interior NOP noise; noise collisions
//              with earlier builds are repaired by extra padding at the
//              colliding gadget
//   bernoulli  independent per-instruction coin flips, one NOP in front of
//              each winner; models blind compile-time randomization
//
// pad / pad-noise guarantee pairwise disjoint reachability across the set by
// construction. bernoulli intentionally guarantees nothing.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "diversify/model.hpp"

namespace diversify {

inline constexpr uint32_t kDefaultPadSearchBound = 4096;

enum class Method : uint8_t { Perm, Pad, PadNoise, Bernoulli };

std::string method_name(Method m);
Method method_from_name(const std::string& name);  // ValidationError on unknown

// Cumulative union of reachability maps of already-emitted builds.
class Blacklist {
 public:
  void absorb(const ReachabilityMap& reach);
  bool contains(int32_t cls, uint64_t offset) const;
  bool intersects(const ReachabilityMap& reach) const;
  uint64_t size() const;

 private:
  std::unordered_map<int32_t, std::unordered_set<uint64_t>> map_;
};

struct GeneratedPattern {
  Pattern pattern;
  uint32_t generation_index = 0;  // position in generation order, pre-shuffle
};

struct PatternSet {
  Method method = Method::Pad;
  uint32_t population = 0;
  uint64_t seed = 0;
  std::optional<double> noise_rate;        // pad-noise
  std::optional<double> bernoulli_rate;    // bernoulli
  std::optional<uint32_t> pad_search_bound;  // pad, pad-noise
  std::vector<GeneratedPattern> patterns;  // final (possibly shuffled) order

  std::vector<std::string> labels() const;
};

// Smallest k >= 1 such that growing every function's head pad of `build` by k
// NOPs yields a reachability map disjoint from `prior`. The program must
// contain at least one gadget; throws GenerationError past `bound`.
uint32_t minimum_pad(const Program& build, const Blacklist& prior,
                     uint32_t sled_window = kDefaultSledWindow,
                     uint32_t bound = kDefaultPadSearchBound);

// One pattern per function: seeded base permutation plus its F-1 rotations.
PatternSet permutation_patterns(uint32_t function_count, uint64_t seed);

// All left rotations of base, rotation 0 first. Exposed for tests.
std::vector<std::vector<uint32_t>> rotation_set(const std::vector<uint32_t>& base);

PatternSet nop_padding_patterns(const Program& p, uint32_t population, uint64_t seed,
                                uint32_t sled_window = kDefaultSledWindow,
                                uint32_t bound = kDefaultPadSearchBound);

PatternSet nop_noise_patterns(const Program& p, uint32_t population, double noise_rate,
                              uint64_t seed, uint32_t sled_window = kDefaultSledWindow,
                              uint32_t bound = kDefaultPadSearchBound);

PatternSet bernoulli_patterns(const Program& p, uint32_t population, double rate,
                              uint64_t seed);

nlohmann::ordered_json pattern_set_to_json(const PatternSet& set,
                                           const std::string& program_hash);
// program_hash_out receives the recorded source program hash if non-null.
PatternSet pattern_set_from_json(const nlohmann::json& j,
                                 std::string* program_hash_out = nullptr);

}  // namespace diversify
