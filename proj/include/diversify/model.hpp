#pragma once

// Simulated binary model: programs are ordered lists of functions, functions
// are ordered lists of instructions. Instructions carry a byte length and an
// optional gadget class. Loading a program into an address space is modeled
// by layout(): functions are concatenated in order, with optional power-of-2
// start alignment realized as 1-byte NOP fill between functions.
//
// A gadget of class e placed at byte offset o is *reachable* at o, and also
// at every byte of an immediately preceding contiguous NOP run of length
// <= sled_window instructions: a jump landing inside the run slides into the
// gadget. Window 1 is the default everywhere; window 0 means literal offsets
// only. NOP runs are counted in instructions, reachable positions in bytes,
// and alignment fill participates in runs like any other NOP.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "diversify/errors.hpp"

namespace diversify {

inline constexpr uint32_t kDefaultSledWindow = 1;

enum class InstrKind : uint8_t { Nop, Plain, GadgetStart };

struct Instruction {
  InstrKind kind = InstrKind::Plain;
  uint32_t byte_len = 1;
  int32_t gadget_class = -1;  // meaningful only for GadgetStart

  static Instruction nop(uint32_t len = 1) { return {InstrKind::Nop, len, -1}; }
  static Instruction plain(uint32_t len = 1) { return {InstrKind::Plain, len, -1}; }
  static Instruction gadget(int32_t cls, uint32_t len = 1) {
    return {InstrKind::GadgetStart, len, cls};
  }
  bool operator==(const Instruction&) const = default;
};

struct Function {
  uint32_t id = 0;
  std::vector<Instruction> body;
  bool operator==(const Function&) const = default;
};

struct Program {
  std::vector<Function> functions;
  uint32_t alignment = 0;  // 0 disables; otherwise a power of two
  uint32_t nop_byte_len = 1;

  uint32_t function_count() const { return static_cast<uint32_t>(functions.size()); }
  uint64_t instruction_count() const;
  uint64_t gadget_count() const;
  // Throws ValidationError: ids must be 0..F-1 in order, byte lengths >= 1,
  // gadget classes >= 0 exactly on GadgetStart, alignment 0 or a power of 2.
  void validate() const;
  bool operator==(const Program&) const = default;
};

// Parameters for synthesizing a program (gen-program).
struct SynthSpec {
  uint32_t functions = 1;
  uint32_t instructions_per_function = 1;
  double gadget_density = 0.0;       // P(instruction is a gadget start)
  uint32_t class_count = 1;          // classes drawn from [0, class_count)
  double duplicate_class_rate = 0.0; // P(reuse an already-placed class)
  uint32_t alignment = 0;
  uint32_t max_instr_len = 1;        // byte lengths uniform in [1, max]
  uint32_t nop_byte_len = 1;
  uint64_t seed = 0;

  void validate() const;
};

Program build_program(const SynthSpec& spec);

// --- patterns -------------------------------------------------------------

enum class PatternKind : uint8_t { Permutation, NopInsertion };

// nop_count NOPs inserted immediately before body[instruction_index] of
// function function_id (indices refer to the pre-insertion body).
struct NopSite {
  uint32_t function_id = 0;
  uint32_t instruction_index = 0;
  uint32_t nop_count = 0;
  auto operator<=>(const NopSite&) const = default;
};

struct Pattern {
  PatternKind kind = PatternKind::NopInsertion;
  std::vector<uint32_t> permutation;  // Permutation: new order of function ids
  std::vector<NopSite> insertions;    // NopInsertion: sorted, unique sites
  std::string label;

  // Throws ValidationError unless the pattern is applicable to p.
  void validate_for(const Program& p) const;
  uint64_t total_nops() const;
  bool operator==(const Pattern&) const = default;
};

struct Variant {
  Program program;
  std::string pattern_label;
  uint64_t total_bytes = 0;
};

// Applies a pattern to a copy of the program; the source is untouched.
// Permutations renumber function ids to match the new order.
Variant apply_pattern(const Program& p, const Pattern& pattern);

// --- layout and reachability ------------------------------------------------

struct LayoutItem {
  InstrKind kind;
  uint32_t byte_len;
  int32_t gadget_class;
  uint64_t offset;
};

// Address-space image: alignment fill materialized as 1-byte NOP items.
std::vector<LayoutItem> layout(const Program& p);
uint64_t layout_size(const Program& p);

class ReachabilityMap {
 public:
  void add(int32_t cls, uint64_t offset);  // offsets must arrive ascending per class
  bool reaches(int32_t cls, uint64_t offset) const;
  uint64_t size() const;  // total (class, offset) entries
  const std::map<int32_t, std::vector<uint64_t>>& entries() const { return map_; }
  bool operator==(const ReachabilityMap&) const = default;

 private:
  std::map<int32_t, std::vector<uint64_t>> map_;
};

ReachabilityMap scan_reachability(const Program& p, uint32_t sled_window = kDefaultSledWindow);
ReachabilityMap scan_reachability(const Variant& v, uint32_t sled_window = kDefaultSledWindow);

// Total image size in bytes (instruction bytes plus alignment fill).
uint64_t file_size(const Variant& v);
double overhead_percent(uint64_t variant_bytes, uint64_t baseline_bytes);

// --- serialization ----------------------------------------------------------

nlohmann::ordered_json program_to_json(const Program& p);
Program program_from_json(const nlohmann::json& j);  // validates

// 16 lowercase hex digits, FNV-1a over the canonical JSON encoding. Used to
// pin every downstream artifact to its source program.
std::string program_hash(const Program& p);

std::string read_text_file(const std::string& path);       // ValidationError on failure
void write_text_file(const std::string& path, const std::string& text);
nlohmann::json load_json_file(const std::string& path);    // ValidationError on bad JSON

}  // namespace diversify
