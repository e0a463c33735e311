#include <cmath>
#include <set>

#include "doctest.h"

#include "diversify/model.hpp"
#include "diversify/rng.hpp"
#include "oracles.hpp"

using namespace diversify;

namespace {

SynthSpec default_spec() {
  SynthSpec s;
  s.functions = 10;
  s.instructions_per_function = 200;
  s.gadget_density = 0.08;
  s.class_count = 120;
  s.duplicate_class_rate = 0.1;
  s.alignment = 16;
  s.seed = 42;
  return s;
}

std::set<uint64_t> reach_set(const ReachabilityMap& m, int32_t cls) {
  auto it = m.entries().find(cls);
  if (it == m.entries().end()) return {};
  return {it->second.begin(), it->second.end()};
}

}  // namespace

TEST_CASE("build_program: zero density yields zero gadgets") {
  auto s = default_spec();
  s.gadget_density = 0.0;
  CHECK(build_program(s).gadget_count() == 0);
}

TEST_CASE("build_program: determinism") {
  const auto s = default_spec();
  CHECK(build_program(s) == build_program(s));
  auto s2 = s;
  s2.seed = 43;
  CHECK(build_program(s) != build_program(s2));
}

TEST_CASE("build_program: gadget count near binomial mean") {
  const auto s = default_spec();
  const Program p = build_program(s);
  CHECK(p.instruction_count() == 2000);
  const double mean = 2000 * 0.08;
  const double sigma = std::sqrt(2000 * 0.08 * 0.92);
  CHECK(std::abs(static_cast<double>(p.gadget_count()) - mean) <= 3 * sigma);
}

TEST_CASE("build_program: rejects invalid specs") {
  auto s = default_spec();
  s.gadget_density = 1.5;
  CHECK_THROWS_AS(build_program(s), ValidationError);
  s = default_spec();
  s.functions = 0;
  CHECK_THROWS_AS(build_program(s), ValidationError);
  s = default_spec();
  s.alignment = 12;  // not a power of two
  CHECK_THROWS_AS(build_program(s), ValidationError);
  s = default_spec();
  s.duplicate_class_rate = -0.1;
  CHECK_THROWS_AS(build_program(s), ValidationError);
}

TEST_CASE("layout: packs functions back to back without alignment") {
  const Program p = oracle::slot_program({"A B", "C D E"});
  CHECK(layout_size(p) == 5);
  const auto items = layout(p);
  REQUIRE(items.size() == 5);
  CHECK(items[2].offset == 2);
  CHECK(items[2].gadget_class == 'C' - 'A');
}

TEST_CASE("layout: alignment fill becomes 1-byte NOP items") {
  const Program p = oracle::slot_program({"A B C", "D"}, 4);
  // f0 at 0..2, one fill NOP at 3, f1 at 4
  CHECK(layout_size(p) == 5);
  const auto items = layout(p);
  REQUIRE(items.size() == 5);
  CHECK(items[3].kind == InstrKind::Nop);
  CHECK(items[3].offset == 3);
  CHECK(items[4].offset == 4);
  CHECK(items[4].gadget_class == 'D' - 'A');
}

TEST_CASE("scan_reachability: base example with interior NOP") {
  const auto m = scan_reachability(oracle::slot_program({"A B N C D"}), 1);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{0});
  CHECK(reach_set(m, 1) == std::set<uint64_t>{1});
  CHECK(reach_set(m, 2) == std::set<uint64_t>{2, 3});
  CHECK(reach_set(m, 3) == std::set<uint64_t>{4});
}

TEST_CASE("scan_reachability: single front pad sleds into the first gadget") {
  const auto m = scan_reachability(oracle::slot_program({"N A B N C D"}), 1);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{0, 1});
  CHECK(reach_set(m, 2) == std::set<uint64_t>{3, 4});
}

TEST_CASE("scan_reachability: runs longer than the window do not sled") {
  const auto m = scan_reachability(oracle::slot_program({"N N A B N C D"}), 1);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{2});
  CHECK(reach_set(m, 2) == std::set<uint64_t>{4, 5});
}

TEST_CASE("scan_reachability: window 0 returns literal offsets only") {
  const auto m = scan_reachability(oracle::slot_program({"N A B N C D"}), 0);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{1});
  CHECK(reach_set(m, 2) == std::set<uint64_t>{4});
}

TEST_CASE("scan_reachability: wider window reaches through longer runs") {
  const auto m = scan_reachability(oracle::slot_program({"N N A B N C D"}), 2);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{0, 1, 2});
}

TEST_CASE("scan_reachability: multi-byte NOP sleds are byte-granular") {
  Program p;
  p.nop_byte_len = 2;
  Function f;
  f.id = 0;
  f.body = {Instruction::nop(2), Instruction::gadget(0, 1)};
  p.functions.push_back(f);
  const auto m = scan_reachability(p, 1);
  CHECK(reach_set(m, 0) == std::set<uint64_t>{0, 1, 2});
}

TEST_CASE("scan_reachability: NOP runs continue across function boundaries") {
  const auto m = scan_reachability(oracle::slot_program({"A N", "C D"}), 1);
  // trailing N of f0 immediately precedes C at offset 2
  CHECK(reach_set(m, 2) == std::set<uint64_t>{1, 2});
}

TEST_CASE("scan_reachability: alignment fill participates in runs") {
  // f0 = [A B C], fill NOP at 3, f1 = [D ...]: run of one fill NOP sleds D
  const auto one = scan_reachability(oracle::slot_program({"A B C", "D"}, 4), 1);
  CHECK(reach_set(one, 3) == std::set<uint64_t>{3, 4});
  // two fill NOPs exceed W=1, no sled
  const auto two = scan_reachability(oracle::slot_program({"A B", "D"}, 4), 1);
  CHECK(reach_set(two, 3) == std::set<uint64_t>{4});
}

TEST_CASE("scan_reachability agrees with the token oracle on random programs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> funcs;
    const auto fcount = 1 + rng.below(3);
    for (uint64_t f = 0; f < fcount; ++f) {
      std::string body;
      const auto len = 1 + rng.below(12);
      for (uint64_t j = 0; j < len; ++j) {
        const char pool[] = {'A', 'B', 'C', 'N', 'N', '.'};
        body += pool[rng.below(6)];
        body += ' ';
      }
      funcs.push_back(body);
    }
    const uint32_t align = rng.bernoulli(0.5) ? 4 : 0;
    const uint32_t window = static_cast<uint32_t>(rng.below(3));
    const Program p = oracle::slot_program(funcs, align);
    const auto got = scan_reachability(p, window);
    const auto want = oracle::reach(oracle::flatten(p), window);
    for (char cls = 'A'; cls <= 'C'; ++cls) {
      auto it = want.find(cls);
      const std::set<uint64_t> expect = it == want.end() ? std::set<uint64_t>{} : it->second;
      CHECK(reach_set(got, cls - 'A') == expect);
    }
  }
}

TEST_CASE("apply_pattern: single head insertion shifts the stream") {
  const Program p = oracle::slot_program({"A B C D"});
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  pat.insertions = {{0, 0, 1}};
  const Variant v = apply_pattern(p, pat);
  CHECK(oracle::flatten(v.program) == oracle::parse_slots("N A B C D"));
  CHECK(v.total_bytes == 5);
}

TEST_CASE("apply_pattern: empty insertion pattern is the identity") {
  const Program p = oracle::slot_program({"A B C D"}, 8);
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  const Variant v = apply_pattern(p, pat);
  CHECK(v.program == p);
  CHECK(v.total_bytes == layout_size(p));
}

TEST_CASE("apply_pattern: permutation reorders and renumbers") {
  const Program p = oracle::slot_program({"A", "B B", "C C C"});
  Pattern pat;
  pat.kind = PatternKind::Permutation;
  pat.permutation = {2, 0, 1};
  const Variant v = apply_pattern(p, pat);
  CHECK(oracle::flatten(v.program) == oracle::parse_slots("C C C A B B"));
  CHECK(v.program.functions[0].id == 0);
  CHECK(v.program.functions[1].id == 1);
  CHECK(v.program.functions[2].id == 2);
  CHECK(v.program.functions[0].body.size() == 3);
}

TEST_CASE("apply_pattern: permutation preserves the instruction multiset") {
  const auto s = default_spec();
  const Program p = build_program(s);
  Pattern pat;
  pat.kind = PatternKind::Permutation;
  pat.permutation = {3, 1, 4, 0, 9, 2, 7, 5, 8, 6};
  const Variant v = apply_pattern(p, pat);
  std::multiset<std::pair<int, uint64_t>> before, after;
  for (const auto& f : p.functions)
    for (const auto& ins : f.body)
      before.insert({static_cast<int>(ins.kind), (uint64_t(ins.byte_len) << 32) ^
                                                     uint64_t(uint32_t(ins.gadget_class))});
  for (const auto& f : v.program.functions)
    for (const auto& ins : f.body)
      after.insert({static_cast<int>(ins.kind), (uint64_t(ins.byte_len) << 32) ^
                                                    uint64_t(uint32_t(ins.gadget_class))});
  CHECK(before == after);
  CHECK(v.total_bytes == layout_size(p));  // same bodies, same alignment
}

TEST_CASE("apply_pattern: reorder keeps intra-function relative offsets at alignment 0") {
  const Program p = oracle::slot_program({"A B", "C D E", ". ."});
  Pattern pat;
  pat.kind = PatternKind::Permutation;
  pat.permutation = {1, 2, 0};
  const Variant v = apply_pattern(p, pat);
  // function originally [C D E]: relative offsets of its gadgets stay 0,1,2
  const auto items = layout(v.program);
  CHECK(items[0].gadget_class == 'C' - 'A');
  CHECK(items[1].offset - items[0].offset == 1);
  CHECK(items[2].offset - items[0].offset == 2);
}

TEST_CASE("apply_pattern: NopInsertion grows total_bytes by inserted NOP bytes") {
  const Program p = oracle::slot_program({"A B C D", "A B"});
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  pat.insertions = {{0, 0, 2}, {0, 3, 1}, {1, 1, 4}};
  const Variant v = apply_pattern(p, pat);
  CHECK(v.total_bytes == layout_size(p) + 7);
  CHECK(oracle::flatten(v.program) == oracle::parse_slots("N N A B C N D A N N N N B"));
}

TEST_CASE("apply_pattern: source program is untouched") {
  const Program p = oracle::slot_program({"A B"});
  const Program copy = p;
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  pat.insertions = {{0, 1, 3}};
  apply_pattern(p, pat);
  CHECK(p == copy);
}

TEST_CASE("apply_pattern: validation failures") {
  const Program p = oracle::slot_program({"A B", "C"});
  Pattern pat;
  pat.kind = PatternKind::Permutation;
  pat.permutation = {0, 0};
  CHECK_THROWS_AS(apply_pattern(p, pat), ValidationError);
  pat.permutation = {0, 1, 2};
  CHECK_THROWS_AS(apply_pattern(p, pat), ValidationError);
  Pattern ins;
  ins.kind = PatternKind::NopInsertion;
  ins.insertions = {{0, 2, 1}};  // index past end
  CHECK_THROWS_AS(apply_pattern(p, ins), ValidationError);
  ins.insertions = {{2, 0, 1}};  // function out of range
  CHECK_THROWS_AS(apply_pattern(p, ins), ValidationError);
  ins.insertions = {{0, 0, 0}};  // zero count
  CHECK_THROWS_AS(apply_pattern(p, ins), ValidationError);
  ins.insertions = {{0, 1, 1}, {0, 0, 1}};  // out of order
  CHECK_THROWS_AS(apply_pattern(p, ins), ValidationError);
}

TEST_CASE("file_size: pads and noise add up") {
  // 100-byte base + 60-byte pad + 3 interior NOPs = 163
  std::string body = "A";
  for (int i = 0; i < 99; ++i) body += " .";
  const Program p = oracle::slot_program({body});
  CHECK(layout_size(p) == 100);
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  pat.insertions = {{0, 0, 60}, {0, 10, 1}, {0, 20, 1}, {0, 30, 1}};
  CHECK(file_size(apply_pattern(p, pat)) == 163);
}

TEST_CASE("overhead_percent") {
  CHECK(overhead_percent(100, 100) == doctest::Approx(0.0));
  CHECK(overhead_percent(163, 100) == doctest::Approx(63.0));
  CHECK_THROWS_AS(overhead_percent(1, 0), ValidationError);
}

TEST_CASE("program json round-trip preserves equality") {
  auto s = default_spec();
  s.max_instr_len = 4;
  s.nop_byte_len = 2;
  const Program p = build_program(s);
  const Program q = program_from_json(program_to_json(p));
  CHECK(p == q);
  CHECK(program_hash(p) == program_hash(q));
}

TEST_CASE("program json rejects malformed input") {
  CHECK_THROWS_AS(program_from_json(nlohmann::json::object()), ValidationError);
  auto j = program_to_json(oracle::slot_program({"A B"}));
  j["functions"][0]["body"][0]["kind"] = "jump";
  CHECK_THROWS_AS(program_from_json(j), ValidationError);
  auto j2 = program_to_json(oracle::slot_program({"A B"}));
  j2["alignment"] = 3;
  CHECK_THROWS_AS(program_from_json(j2), ValidationError);
}

TEST_CASE("program_hash is stable and content-sensitive") {
  const Program p = oracle::slot_program({"A B N C D"});
  CHECK(program_hash(p) == program_hash(p));
  CHECK(program_hash(p).size() == 16);
  const Program q = oracle::slot_program({"A B N C C"});
  CHECK(program_hash(p) != program_hash(q));
}
