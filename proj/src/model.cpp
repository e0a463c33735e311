#include "diversify/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diversify/rng.hpp"

namespace diversify {

namespace {

bool is_pow2(uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

}  // namespace

uint64_t Program::instruction_count() const {
  uint64_t n = 0;
  for (const auto& f : functions) n += f.body.size();
  return n;
}

uint64_t Program::gadget_count() const {
  uint64_t n = 0;
  for (const auto& f : functions)
    for (const auto& ins : f.body)
      if (ins.kind == InstrKind::GadgetStart) ++n;
  return n;
}

void Program::validate() const {
  if (functions.empty()) fail("program has no functions");
  if (alignment != 0 && !is_pow2(alignment)) fail("alignment must be 0 or a power of two");
  if (nop_byte_len < 1) fail("nop_byte_len must be >= 1");
  for (size_t i = 0; i < functions.size(); ++i) {
    const auto& f = functions[i];
    if (f.id != i) fail("function ids must be 0..F-1 in order");
    for (const auto& ins : f.body) {
      if (ins.byte_len < 1) fail("instruction byte_len must be >= 1");
      if (ins.kind == InstrKind::GadgetStart) {
        if (ins.gadget_class < 0) fail("gadget instruction without a class");
      } else if (ins.gadget_class != -1) {
        fail("non-gadget instruction carries a class");
      }
    }
  }
}

void SynthSpec::validate() const {
  if (functions < 1) fail("functions must be >= 1");
  if (instructions_per_function < 1) fail("instructions per function must be >= 1");
  if (gadget_density < 0.0 || gadget_density > 1.0) fail("gadget density must be in [0, 1]");
  if (class_count < 1) fail("class count must be >= 1");
  if (duplicate_class_rate < 0.0 || duplicate_class_rate > 1.0)
    fail("duplicate class rate must be in [0, 1]");
  if (alignment != 0 && !is_pow2(alignment)) fail("alignment must be 0 or a power of two");
  if (max_instr_len < 1) fail("max instruction length must be >= 1");
  if (nop_byte_len < 1) fail("nop byte length must be >= 1");
}

Program build_program(const SynthSpec& spec) {
  spec.validate();
  Rng rng = Rng::derive(spec.seed, kStreamProgram);
  Program p;
  p.alignment = spec.alignment;
  p.nop_byte_len = spec.nop_byte_len;
  p.functions.resize(spec.functions);
  std::vector<int32_t> used;
  for (uint32_t f = 0; f < spec.functions; ++f) {
    p.functions[f].id = f;
    auto& body = p.functions[f].body;
    body.reserve(spec.instructions_per_function);
    for (uint32_t j = 0; j < spec.instructions_per_function; ++j) {
      const auto len = static_cast<uint32_t>(1 + rng.below(spec.max_instr_len));
      if (!rng.bernoulli(spec.gadget_density)) {
        body.push_back(Instruction::plain(len));
        continue;
      }
      int32_t cls;
      if (!used.empty() && rng.bernoulli(spec.duplicate_class_rate)) {
        cls = used[rng.below(used.size())];
      } else {
        cls = static_cast<int32_t>(rng.below(spec.class_count));
      }
      used.push_back(cls);
      body.push_back(Instruction::gadget(cls, len));
    }
  }
  return p;
}

uint64_t Pattern::total_nops() const {
  uint64_t n = 0;
  for (const auto& s : insertions) n += s.nop_count;
  return n;
}

void Pattern::validate_for(const Program& p) const {
  const uint32_t fcount = p.function_count();
  if (kind == PatternKind::Permutation) {
    if (!insertions.empty()) fail("permutation pattern carries insertion sites");
    if (permutation.size() != fcount) fail("permutation length != function count");
    std::vector<bool> seen(fcount, false);
    for (uint32_t id : permutation) {
      if (id >= fcount || seen[id]) fail("not a permutation of 0..F-1");
      seen[id] = true;
    }
    return;
  }
  if (!permutation.empty()) fail("insertion pattern carries a permutation");
  const NopSite* prev = nullptr;
  for (const auto& s : insertions) {
    if (s.function_id >= fcount) fail("insertion site: function id out of range");
    if (s.instruction_index >= p.functions[s.function_id].body.size())
      fail("insertion site: instruction index out of range");
    if (s.nop_count < 1) fail("insertion site: nop_count must be >= 1");
    if (prev && !(std::pair{prev->function_id, prev->instruction_index} <
                  std::pair{s.function_id, s.instruction_index}))
      fail("insertion sites must be sorted and unique");
    prev = &s;
  }
}

Variant apply_pattern(const Program& p, const Pattern& pattern) {
  pattern.validate_for(p);
  Variant v;
  v.pattern_label = pattern.label;
  v.program.alignment = p.alignment;
  v.program.nop_byte_len = p.nop_byte_len;
  if (pattern.kind == PatternKind::Permutation) {
    v.program.functions.reserve(p.functions.size());
    for (size_t i = 0; i < pattern.permutation.size(); ++i) {
      Function f = p.functions[pattern.permutation[i]];
      f.id = static_cast<uint32_t>(i);
      v.program.functions.push_back(std::move(f));
    }
  } else {
    v.program.functions.resize(p.functions.size());
    auto site = pattern.insertions.begin();
    for (size_t f = 0; f < p.functions.size(); ++f) {
      const auto& src = p.functions[f].body;
      auto& dst = v.program.functions[f];
      dst.id = static_cast<uint32_t>(f);
      dst.body.reserve(src.size());
      for (size_t j = 0; j < src.size(); ++j) {
        if (site != pattern.insertions.end() && site->function_id == f &&
            site->instruction_index == j) {
          dst.body.insert(dst.body.end(), site->nop_count, Instruction::nop(p.nop_byte_len));
          ++site;
        }
        dst.body.push_back(src[j]);
      }
    }
  }
  v.total_bytes = layout_size(v.program);
  return v;
}

std::vector<LayoutItem> layout(const Program& p) {
  std::vector<LayoutItem> items;
  uint64_t offset = 0;
  for (const auto& f : p.functions) {
    if (p.alignment != 0) {
      uint64_t gap = (p.alignment - offset % p.alignment) % p.alignment;
      while (gap-- > 0) {
        items.push_back({InstrKind::Nop, 1, -1, offset});
        ++offset;
      }
    }
    for (const auto& ins : f.body) {
      items.push_back({ins.kind, ins.byte_len, ins.gadget_class, offset});
      offset += ins.byte_len;
    }
  }
  return items;
}

uint64_t layout_size(const Program& p) {
  uint64_t offset = 0;
  for (const auto& f : p.functions) {
    if (p.alignment != 0) offset += (p.alignment - offset % p.alignment) % p.alignment;
    for (const auto& ins : f.body) offset += ins.byte_len;
  }
  return offset;
}

void ReachabilityMap::add(int32_t cls, uint64_t offset) {
  auto& v = map_[cls];
  if (!v.empty() && v.back() == offset) return;
  v.push_back(offset);
}

bool ReachabilityMap::reaches(int32_t cls, uint64_t offset) const {
  auto it = map_.find(cls);
  if (it == map_.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), offset);
}

uint64_t ReachabilityMap::size() const {
  uint64_t n = 0;
  for (const auto& [cls, offs] : map_) n += offs.size();
  return n;
}

ReachabilityMap scan_reachability(const Program& p, uint32_t sled_window) {
  ReachabilityMap reach;
  uint64_t run_len = 0;         // instructions in the current NOP run
  uint64_t run_start_byte = 0;  // first byte of that run
  uint64_t offset = 0;
  auto feed = [&](InstrKind kind, uint32_t byte_len, int32_t cls) {
    if (kind == InstrKind::Nop) {
      if (run_len == 0) run_start_byte = offset;
      ++run_len;
    } else {
      if (kind == InstrKind::GadgetStart) {
        // A run longer than the window overshoots: no slide, literal hit only.
        if (run_len >= 1 && run_len <= sled_window)
          for (uint64_t b = run_start_byte; b < offset; ++b) reach.add(cls, b);
        reach.add(cls, offset);
      }
      run_len = 0;
    }
    offset += byte_len;
  };
  for (const auto& f : p.functions) {
    if (p.alignment != 0) {
      uint64_t gap = (p.alignment - offset % p.alignment) % p.alignment;
      while (gap-- > 0) feed(InstrKind::Nop, 1, -1);
    }
    for (const auto& ins : f.body) feed(ins.kind, ins.byte_len, ins.gadget_class);
  }
  return reach;
}

ReachabilityMap scan_reachability(const Variant& v, uint32_t sled_window) {
  return scan_reachability(v.program, sled_window);
}

uint64_t file_size(const Variant& v) { return layout_size(v.program); }

double overhead_percent(uint64_t variant_bytes, uint64_t baseline_bytes) {
  if (baseline_bytes == 0) fail("baseline size must be nonzero");
  return (static_cast<double>(variant_bytes) - static_cast<double>(baseline_bytes)) /
         static_cast<double>(baseline_bytes) * 100.0;
}

nlohmann::ordered_json program_to_json(const Program& p) {
  nlohmann::ordered_json j;
  j["alignment"] = p.alignment;
  j["nop_byte_len"] = p.nop_byte_len;
  auto& funcs = j["functions"] = nlohmann::ordered_json::array();
  for (const auto& f : p.functions) {
    nlohmann::ordered_json jf;
    jf["id"] = f.id;
    auto& body = jf["body"] = nlohmann::ordered_json::array();
    for (const auto& ins : f.body) {
      nlohmann::ordered_json ji;
      switch (ins.kind) {
        case InstrKind::Nop: ji["kind"] = "nop"; break;
        case InstrKind::Plain: ji["kind"] = "plain"; break;
        case InstrKind::GadgetStart: ji["kind"] = "gadget"; break;
      }
      ji["len"] = ins.byte_len;
      if (ins.kind == InstrKind::GadgetStart) ji["class"] = ins.gadget_class;
      body.push_back(std::move(ji));
    }
    funcs.push_back(std::move(jf));
  }
  return j;
}

Program program_from_json(const nlohmann::json& j) {
  Program p;
  try {
    p.alignment = j.at("alignment").get<uint32_t>();
    p.nop_byte_len = j.at("nop_byte_len").get<uint32_t>();
    for (const auto& jf : j.at("functions")) {
      Function f;
      f.id = jf.at("id").get<uint32_t>();
      for (const auto& ji : jf.at("body")) {
        const std::string kind = ji.at("kind").get<std::string>();
        const auto len = ji.at("len").get<uint32_t>();
        if (kind == "nop") {
          f.body.push_back(Instruction::nop(len));
        } else if (kind == "plain") {
          f.body.push_back(Instruction::plain(len));
        } else if (kind == "gadget") {
          f.body.push_back(Instruction::gadget(ji.at("class").get<int32_t>(), len));
        } else {
          fail("unknown instruction kind '" + kind + "'");
        }
      }
      p.functions.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed program json: ") + e.what());
  }
  p.validate();
  return p;
}

std::string program_hash(const Program& p) {
  const std::string text = program_to_json(p).dump();
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) fail("error while reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out.good()) fail("error while writing '" + path + "'");
}

nlohmann::json load_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("'" + path + "' is not valid json");
  return j;
}

}  // namespace diversify
