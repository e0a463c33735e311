#pragma once

// Community diversity measurement. A community is N variants of one source
// program. The survivor analysis catalogs gadget states: a state is one
// (class, offset) pair taken from the literal gadget placements across the
// community, and its spread b is the number of variants in which that class
// is reachable at that offset (sled window included). A state surviving in
// b variants defeats diversification between C(b,2) variant pairs.
//
//   raw_count        sum over states of C(b,2)
//   aggregate_count  number of states with b >= 2
//   shannon_bits     S = sum over states of -(b/N) * log2(b/N); a state
//                    present in every variant (b = N) contributes 0, a
//                    singleton (b = 1) contributes -(1/N)*log2(1/N)
//
// Higher S means an attacker observing one variant learns less about the
// others. Disjoint communities maximize S for a given instance mass.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "diversify/model.hpp"

namespace diversify {

struct GadgetState {
  int32_t gadget_class = 0;
  uint64_t offset = 0;
  auto operator<=>(const GadgetState&) const = default;
};

struct GadgetSpread {
  GadgetState state;
  uint32_t build_count = 0;  // b, in [1, N]
  auto operator<=>(const GadgetSpread&) const = default;
};

struct SurvivorReport {
  uint32_t population = 0;                 // N
  uint64_t raw_count = 0;
  uint64_t aggregate_count = 0;
  uint64_t singleton_states = 0;           // states with b == 1
  std::vector<GadgetSpread> spreads;       // all states, sorted by state
  std::map<uint32_t, uint64_t> histogram;  // b -> state count, b >= 2 only
};

struct EntropyReport {
  double shannon_bits = 0.0;
  bool empty_spread = false;  // no states at all; S = 0 with a warning
  std::optional<std::vector<double>> per_state;  // aligned with spreads
};

// Catalog survivors across a community. Requires >= 2 variants; all variants
// must stem from the same source program (the CLI enforces that via hashes).
SurvivorReport survivors(const std::vector<Variant>& community,
                         uint32_t sled_window = kDefaultSledWindow);

// Build a report from an explicit spread profile (population N, one entry per
// state). Used to cross-check the counting arithmetic against known figures.
SurvivorReport report_from_spreads(std::vector<GadgetSpread> spreads, uint32_t population);

EntropyReport entropy(const SurvivorReport& report, bool with_detail = false);

// b -> state count for b >= 2 (the singleton count is report.singleton_states).
std::map<uint32_t, uint64_t> spread_histogram(const SurvivorReport& report);

// b -> state count including singletons (b >= 1).
std::map<uint32_t, uint64_t> full_histogram(const SurvivorReport& report);

// --- cross-method comparison ------------------------------------------------

struct MethodReport {
  std::string label;
  std::string program_hash;  // may be empty when unknown
  SurvivorReport survivors;
  EntropyReport entropy;
};

struct ComparisonRow {
  std::string label;
  uint64_t raw_count = 0;
  uint64_t aggregate_count = 0;
  std::string spread_summary;  // "2:379 3:3", or "-" when no state repeats
  double shannon_bits = 0.0;
};

struct ComparisonTable {
  uint32_t population = 0;
  std::vector<ComparisonRow> rows;  // sorted by entropy desc, label asc
};

// Throws ValidationError on mismatched populations, IdentityError when two
// reports carry different (non-empty) program hashes.
ComparisonTable compare(const std::vector<MethodReport>& reports);

// Fixed-width text rendering, stable across runs for identical input.
std::string render_table(const ComparisonTable& table);

nlohmann::ordered_json report_to_json(const SurvivorReport& report,
                                      const EntropyReport& entropy);
// Reads the fields written by report_to_json; ignores extra fields.
MethodReport report_from_json(const nlohmann::json& j);

}  // namespace diversify
