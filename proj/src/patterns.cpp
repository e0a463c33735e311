#include "diversify/patterns.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <utility>

#include "diversify/rng.hpp"

namespace diversify {

namespace {

// Total fix-up insertions allowed per pattern set before giving up.
constexpr uint64_t kFixupGuard = 1u << 20;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

std::string make_label(Method m, uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04u", method_name(m).c_str(), index);
  return buf;
}

// Mutable head-pad / interior-noise state accumulated across one generation
// run. Keys are (function id, pre-insertion instruction index).
struct PadState {
  std::vector<uint32_t> pads;
  std::map<std::pair<uint32_t, uint32_t>, uint32_t> noise;

  uint32_t noise_at(uint32_t f, uint32_t j) const {
    auto it = noise.find({f, j});
    return it == noise.end() ? 0 : it->second;
  }
};

Pattern to_pattern(const PadState& st, std::string label) {
  Pattern pat;
  pat.kind = PatternKind::NopInsertion;
  pat.label = std::move(label);
  for (uint32_t f = 0; f < st.pads.size(); ++f) {
    const uint32_t head = st.pads[f] + st.noise_at(f, 0);
    if (head > 0) pat.insertions.push_back({f, 0, head});
  }
  for (const auto& [site, count] : st.noise)
    if (site.second >= 1) pat.insertions.push_back({site.first, site.second, count});
  std::sort(pat.insertions.begin(), pat.insertions.end());
  return pat;
}

Program materialize(const Program& base, const PadState& st) {
  Program out;
  out.alignment = base.alignment;
  out.nop_byte_len = base.nop_byte_len;
  out.functions.resize(base.functions.size());
  for (size_t f = 0; f < base.functions.size(); ++f) {
    const auto& src = base.functions[f].body;
    auto& dst = out.functions[f];
    dst.id = static_cast<uint32_t>(f);
    dst.body.reserve(src.size() + st.pads[f]);
    for (size_t j = 0; j < src.size(); ++j) {
      uint32_t extra = st.noise_at(static_cast<uint32_t>(f), static_cast<uint32_t>(j));
      if (j == 0) extra += st.pads[f];
      dst.body.insert(dst.body.end(), extra, Instruction::nop(base.nop_byte_len));
      dst.body.push_back(src[j]);
    }
  }
  return out;
}

// First gadget (stream order) of base+st whose reachable offsets intersect the
// blacklist; follows the same run/window rules as scan_reachability.
std::optional<std::pair<uint32_t, uint32_t>> first_collision(const Program& base,
                                                             const PadState& st,
                                                             const Blacklist& bl,
                                                             uint32_t window) {
  uint64_t offset = 0;
  uint64_t run_len = 0;
  uint64_t run_start = 0;
  auto nops = [&](uint64_t count, uint32_t byte_len) {
    if (count == 0) return;
    if (run_len == 0) run_start = offset;
    run_len += count;
    offset += count * byte_len;
  };
  for (const auto& f : base.functions) {
    if (base.alignment != 0)
      nops((base.alignment - offset % base.alignment) % base.alignment, 1);
    for (uint32_t j = 0; j < f.body.size(); ++j) {
      uint32_t extra = st.noise_at(f.id, j);
      if (j == 0) extra += st.pads[f.id];
      nops(extra, base.nop_byte_len);
      const auto& ins = f.body[j];
      if (ins.kind == InstrKind::Nop) {
        nops(1, ins.byte_len);
        continue;
      }
      if (ins.kind == InstrKind::GadgetStart) {
        bool hit = bl.contains(ins.gadget_class, offset);
        if (!hit && run_len >= 1 && run_len <= window)
          for (uint64_t b = run_start; b < offset && !hit; ++b)
            hit = bl.contains(ins.gadget_class, b);
        if (hit) return std::pair{f.id, j};
      }
      run_len = 0;
      offset += ins.byte_len;
    }
  }
  return std::nullopt;
}

PatternSet generate_padded(const Program& base, uint32_t population, double noise_rate,
                           uint64_t seed, uint32_t window, uint32_t bound, Method method) {
  base.validate();
  if (population < 1) fail("population must be >= 1");
  if (noise_rate < 0.0 || noise_rate > 1.0) fail("noise rate must be in [0, 1]");
  if (bound < 1) fail("pad search bound must be >= 1");

  const bool has_gadgets = base.gadget_count() > 0;
  Rng noise_rng = Rng::derive(seed, kStreamNoise);
  PadState st;
  st.pads.assign(base.function_count(), 0);
  Blacklist bl;
  std::vector<GeneratedPattern> out;
  out.reserve(population);
  uint64_t fixups = 0;

  for (uint32_t i = 0; i < population; ++i) {
    if (i > 0) {
      const uint32_t k = has_gadgets ? minimum_pad(materialize(base, st), bl, window, bound)
                                     : 1;
      for (auto& pad : st.pads) pad += k;
      if (noise_rate > 0.0) {
        for (const auto& f : base.functions)
          for (uint32_t j = 1; j < f.body.size(); ++j)
            if (noise_rng.bernoulli(noise_rate)) ++st.noise[{f.id, j}];
        while (auto col = first_collision(base, st, bl, window)) {
          ++st.noise[*col];
          if (++fixups > kFixupGuard)
            throw GenerationError("noise fix-up did not converge (guard " +
                                  std::to_string(kFixupGuard) + " insertions exceeded)");
        }
      }
    }
    const ReachabilityMap reach = scan_reachability(materialize(base, st), window);
    if (bl.intersects(reach))
      throw GenerationError("generated build is not disjoint from its predecessors");
    bl.absorb(reach);
    out.push_back({to_pattern(st, make_label(method, i)), i});
  }

  Rng::derive(seed, kStreamShuffle).shuffle(out);

  PatternSet set;
  set.method = method;
  set.population = population;
  set.seed = seed;
  if (method == Method::PadNoise) set.noise_rate = noise_rate;
  set.pad_search_bound = bound;
  set.patterns = std::move(out);
  return set;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Perm: return "perm";
    case Method::Pad: return "pad";
    case Method::PadNoise: return "pad-noise";
    case Method::Bernoulli: return "bernoulli";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "perm") return Method::Perm;
  if (name == "pad") return Method::Pad;
  if (name == "pad-noise") return Method::PadNoise;
  if (name == "bernoulli") return Method::Bernoulli;
  fail("unknown method '" + name + "'");
}

void Blacklist::absorb(const ReachabilityMap& reach) {
  for (const auto& [cls, offsets] : reach.entries())
    map_[cls].insert(offsets.begin(), offsets.end());
}

bool Blacklist::contains(int32_t cls, uint64_t offset) const {
  auto it = map_.find(cls);
  return it != map_.end() && it->second.count(offset) != 0;
}

bool Blacklist::intersects(const ReachabilityMap& reach) const {
  for (const auto& [cls, offsets] : reach.entries()) {
    auto it = map_.find(cls);
    if (it == map_.end()) continue;
    for (uint64_t off : offsets)
      if (it->second.count(off) != 0) return true;
  }
  return false;
}

uint64_t Blacklist::size() const {
  uint64_t n = 0;
  for (const auto& [cls, offsets] : map_) n += offsets.size();
  return n;
}

std::vector<std::string> PatternSet::labels() const {
  std::vector<std::string> out;
  out.reserve(patterns.size());
  for (const auto& gp : patterns) out.push_back(gp.pattern.label);
  return out;
}

uint32_t minimum_pad(const Program& build, const Blacklist& prior, uint32_t sled_window,
                     uint32_t bound) {
  build.validate();
  if (build.gadget_count() == 0) fail("minimum_pad requires at least one gadget");
  if (bound < 1) fail("pad search bound must be >= 1");
  Program candidate = build;
  for (uint32_t k = 1; k <= bound; ++k) {
    for (auto& f : candidate.functions)
      f.body.insert(f.body.begin(), Instruction::nop(build.nop_byte_len));
    if (!prior.intersects(scan_reachability(candidate, sled_window))) return k;
  }
  throw GenerationError("no disjoint pad found within bound " + std::to_string(bound));
}

std::vector<std::vector<uint32_t>> rotation_set(const std::vector<uint32_t>& base) {
  const size_t n = base.size();
  std::vector<std::vector<uint32_t>> rots(n, std::vector<uint32_t>(n));
  for (size_t r = 0; r < n; ++r)
    for (size_t k = 0; k < n; ++k) rots[r][k] = base[(k + r) % n];
  return rots;
}

PatternSet permutation_patterns(uint32_t function_count, uint64_t seed) {
  if (function_count < 1) fail("function count must be >= 1");
  std::vector<uint32_t> base(function_count);
  for (uint32_t i = 0; i < function_count; ++i) base[i] = i;
  Rng::derive(seed, kStreamPermBase).shuffle(base);

  std::vector<GeneratedPattern> out;
  out.reserve(function_count);
  const auto rots = rotation_set(base);
  for (uint32_t r = 0; r < function_count; ++r) {
    Pattern pat;
    pat.kind = PatternKind::Permutation;
    pat.permutation = rots[r];
    pat.label = make_label(Method::Perm, r);
    out.push_back({std::move(pat), r});
  }
  Rng::derive(seed, kStreamShuffle).shuffle(out);

  PatternSet set;
  set.method = Method::Perm;
  set.population = function_count;
  set.seed = seed;
  set.patterns = std::move(out);
  return set;
}

PatternSet nop_padding_patterns(const Program& p, uint32_t population, uint64_t seed,
                                uint32_t sled_window, uint32_t bound) {
  return generate_padded(p, population, 0.0, seed, sled_window, bound, Method::Pad);
}

PatternSet nop_noise_patterns(const Program& p, uint32_t population, double noise_rate,
                              uint64_t seed, uint32_t sled_window, uint32_t bound) {
  return generate_padded(p, population, noise_rate, seed, sled_window, bound,
                         Method::PadNoise);
}

PatternSet bernoulli_patterns(const Program& p, uint32_t population, double rate,
                              uint64_t seed) {
  p.validate();
  if (population < 1) fail("population must be >= 1");
  if (rate < 0.0 || rate > 1.0) fail("rate must be in [0, 1]");
  PatternSet set;
  set.method = Method::Bernoulli;
  set.population = population;
  set.seed = seed;
  set.bernoulli_rate = rate;
  set.patterns.reserve(population);
  for (uint32_t i = 0; i < population; ++i) {
    Rng rng = Rng::derive(seed, kStreamBernoulliBase + i);
    Pattern pat;
    pat.kind = PatternKind::NopInsertion;
    pat.label = make_label(Method::Bernoulli, i);
    for (const auto& f : p.functions)
      for (uint32_t j = 0; j < f.body.size(); ++j)
        if (rng.bernoulli(rate)) pat.insertions.push_back({f.id, j, 1});
    set.patterns.push_back({std::move(pat), i});
  }
  return set;
}

nlohmann::ordered_json pattern_set_to_json(const PatternSet& set,
                                           const std::string& program_hash) {
  nlohmann::ordered_json j;
  j["method"] = method_name(set.method);
  j["population"] = set.population;
  j["seed"] = set.seed;
  j["program_hash"] = program_hash;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  if (set.noise_rate) params["noise_rate"] = *set.noise_rate;
  if (set.bernoulli_rate) params["bernoulli_rate"] = *set.bernoulli_rate;
  if (set.pad_search_bound) params["pad_search_bound"] = *set.pad_search_bound;
  j["params"] = std::move(params);
  auto& arr = j["patterns"] = nlohmann::ordered_json::array();
  for (const auto& gp : set.patterns) {
    nlohmann::ordered_json jp;
    jp["label"] = gp.pattern.label;
    jp["generation_index"] = gp.generation_index;
    if (gp.pattern.kind == PatternKind::Permutation) {
      jp["kind"] = "permutation";
      jp["permutation"] = gp.pattern.permutation;
    } else {
      jp["kind"] = "nop_insertion";
      auto& sites = jp["insertions"] = nlohmann::ordered_json::array();
      for (const auto& s : gp.pattern.insertions)
        sites.push_back({s.function_id, s.instruction_index, s.nop_count});
    }
    arr.push_back(std::move(jp));
  }
  return j;
}

PatternSet pattern_set_from_json(const nlohmann::json& j, std::string* program_hash_out) {
  PatternSet set;
  try {
    set.method = method_from_name(j.at("method").get<std::string>());
    set.population = j.at("population").get<uint32_t>();
    set.seed = j.at("seed").get<uint64_t>();
    if (program_hash_out) *program_hash_out = j.at("program_hash").get<std::string>();
    const auto& params = j.at("params");
    if (params.contains("noise_rate")) set.noise_rate = params["noise_rate"].get<double>();
    if (params.contains("bernoulli_rate"))
      set.bernoulli_rate = params["bernoulli_rate"].get<double>();
    if (params.contains("pad_search_bound"))
      set.pad_search_bound = params["pad_search_bound"].get<uint32_t>();
    for (const auto& jp : j.at("patterns")) {
      GeneratedPattern gp;
      gp.pattern.label = jp.at("label").get<std::string>();
      gp.generation_index = jp.at("generation_index").get<uint32_t>();
      const std::string kind = jp.at("kind").get<std::string>();
      if (kind == "permutation") {
        gp.pattern.kind = PatternKind::Permutation;
        gp.pattern.permutation = jp.at("permutation").get<std::vector<uint32_t>>();
      } else if (kind == "nop_insertion") {
        gp.pattern.kind = PatternKind::NopInsertion;
        for (const auto& js : jp.at("insertions")) {
          if (!js.is_array() || js.size() != 3) fail("insertion site must be [f, i, n]");
          gp.pattern.insertions.push_back({js[0].get<uint32_t>(), js[1].get<uint32_t>(),
                                           js[2].get<uint32_t>()});
        }
      } else {
        fail("unknown pattern kind '" + kind + "'");
      }
      set.patterns.push_back(std::move(gp));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed pattern set json: ") + e.what());
  }
  if (set.patterns.size() != set.population) fail("pattern count != population");
  return set;
}

}  // namespace diversify
