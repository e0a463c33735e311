#include "diversify/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "diversify/kernels.hpp"

namespace diversify {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

// Shared tail: given per-state spreads and N, fill in the counting fields.
SurvivorReport finalize(std::vector<GadgetSpread> spreads, uint32_t population) {
  SurvivorReport r;
  r.population = population;
  std::sort(spreads.begin(), spreads.end());
  r.spreads = std::move(spreads);

  std::vector<uint32_t> counts;
  counts.reserve(r.spreads.size());
  for (const auto& s : r.spreads) {
    if (s.build_count < 1 || s.build_count > population)
      fail("spread outside [1, N]");
    counts.push_back(s.build_count);
  }
  const auto& k = kernels::active();
  r.raw_count = k.pair_count_sum(counts.data(), counts.size());
  r.aggregate_count = k.count_at_least(counts.data(), counts.size(), 2);
  r.singleton_states = counts.size() - r.aggregate_count;
  for (uint32_t b : counts)
    if (b >= 2) ++r.histogram[b];
  return r;
}

}  // namespace

SurvivorReport survivors(const std::vector<Variant>& community, uint32_t sled_window) {
  if (community.size() < 2) fail("survivor analysis needs at least 2 variants");
  const auto population = static_cast<uint32_t>(community.size());

  // Universe: literal gadget placements seen anywhere in the community.
  std::map<GadgetState, uint32_t> states;
  std::vector<ReachabilityMap> reach;
  reach.reserve(community.size());
  for (const auto& v : community) {
    reach.push_back(scan_reachability(v, sled_window));
    for (const auto& item : layout(v.program))
      if (item.kind == InstrKind::GadgetStart)
        states.try_emplace({item.gadget_class, item.offset}, 0);
  }
  for (auto& [state, b] : states)
    for (const auto& rm : reach)
      if (rm.reaches(state.gadget_class, state.offset)) ++b;

  std::vector<GadgetSpread> spreads;
  spreads.reserve(states.size());
  for (const auto& [state, b] : states) spreads.push_back({state, b});
  return finalize(std::move(spreads), population);
}

SurvivorReport report_from_spreads(std::vector<GadgetSpread> spreads, uint32_t population) {
  if (population < 1) fail("population must be >= 1");
  return finalize(std::move(spreads), population);
}

EntropyReport entropy(const SurvivorReport& report, bool with_detail) {
  EntropyReport er;
  if (report.spreads.empty()) {
    er.empty_spread = true;
    if (with_detail) er.per_state.emplace();
    return er;
  }
  const uint32_t n = report.population;
  if (n < 1) fail("population must be >= 1");

  // Term table: t[b] = -(b/N) log2(b/N), pinned to exactly 0 at b = N.
  std::vector<double> table(static_cast<size_t>(n) + 1, 0.0);
  for (uint32_t b = 1; b < n; ++b) {
    const double p = static_cast<double>(b) / static_cast<double>(n);
    table[b] = -p * std::log2(p);
  }

  std::vector<uint32_t> counts;
  counts.reserve(report.spreads.size());
  for (const auto& s : report.spreads) {
    if (s.build_count < 1 || s.build_count > n) fail("spread outside [1, N]");
    counts.push_back(s.build_count);
  }
  er.shannon_bits =
      kernels::active().indexed_table_sum(counts.data(), counts.size(), table.data(),
                                          table.size());
  if (with_detail) {
    er.per_state.emplace();
    er.per_state->reserve(counts.size());
    for (uint32_t b : counts) er.per_state->push_back(table[b]);
  }
  return er;
}

std::map<uint32_t, uint64_t> spread_histogram(const SurvivorReport& report) {
  return report.histogram;
}

std::map<uint32_t, uint64_t> full_histogram(const SurvivorReport& report) {
  std::map<uint32_t, uint64_t> h;
  for (const auto& s : report.spreads) ++h[s.build_count];
  return h;
}

namespace {

std::string summarize_histogram(const std::map<uint32_t, uint64_t>& h) {
  if (h.empty()) return "-";
  std::string out;
  for (const auto& [b, count] : h) {
    if (!out.empty()) out += ' ';
    out += std::to_string(b) + ":" + std::to_string(count);
  }
  return out;
}

}  // namespace

ComparisonTable compare(const std::vector<MethodReport>& reports) {
  if (reports.size() < 2) fail("comparison needs at least 2 reports");
  ComparisonTable table;
  table.population = reports[0].survivors.population;
  std::string hash;
  for (const auto& r : reports) {
    if (r.survivors.population != table.population)
      fail("mismatched community sizes across reports (" +
           std::to_string(r.survivors.population) + " vs " +
           std::to_string(table.population) + ")");
    if (!r.program_hash.empty()) {
      if (hash.empty()) {
        hash = r.program_hash;
      } else if (hash != r.program_hash) {
        throw IdentityError("reports stem from different source programs (" + hash +
                            " vs " + r.program_hash + ")");
      }
    }
    table.rows.push_back({r.label, r.survivors.raw_count, r.survivors.aggregate_count,
                          summarize_histogram(r.survivors.histogram),
                          r.entropy.shannon_bits});
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const ComparisonRow& a, const ComparisonRow& b) {
              if (a.shannon_bits != b.shannon_bits) return a.shannon_bits > b.shannon_bits;
              return a.label < b.label;
            });
  return table;
}

std::string render_table(const ComparisonTable& table) {
  // Column widths derive from the content, so the table stays aligned for
  // any input and identical input always renders identical text.
  size_t label_w = std::string("method").size();
  size_t spread_w = std::string("spread(b:count)").size();
  for (const auto& row : table.rows) {
    label_w = std::max(label_w, row.label.size());
    spread_w = std::max(spread_w, row.spread_summary.size());
  }
  std::ostringstream out;
  auto emit = [&](const std::string& label, const std::string& raw,
                  const std::string& agg, const std::string& spread,
                  const std::string& bits) {
    out << label << std::string(label_w - label.size(), ' ') << "  ";
    out << std::string(12 - std::min<size_t>(12, raw.size()), ' ') << raw << "  ";
    out << std::string(12 - std::min<size_t>(12, agg.size()), ' ') << agg << "  ";
    out << spread << std::string(spread_w - spread.size(), ' ') << "  ";
    out << std::string(14 - std::min<size_t>(14, bits.size()), ' ') << bits << "\n";
  };
  out << "population: " << table.population << "\n\n";
  emit("method", "raw", "aggregate", "spread(b:count)", "entropy_bits");
  emit(std::string(label_w, '-'), std::string(12, '-'), std::string(12, '-'),
       std::string(spread_w, '-'), std::string(14, '-'));
  char bits[32];
  for (const auto& row : table.rows) {
    std::snprintf(bits, sizeof(bits), "%.6f", row.shannon_bits);
    emit(row.label, std::to_string(row.raw_count), std::to_string(row.aggregate_count),
         row.spread_summary, bits);
  }
  return out.str();
}

nlohmann::ordered_json report_to_json(const SurvivorReport& report,
                                      const EntropyReport& entropy) {
  nlohmann::ordered_json j;
  j["population"] = report.population;
  j["raw"] = report.raw_count;
  j["aggregate"] = report.aggregate_count;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [b, count] : report.histogram) hist[std::to_string(b)] = count;
  j["histogram"] = std::move(hist);
  j["singleton_states"] = report.singleton_states;
  j["entropy_bits"] = entropy.shannon_bits;
  j["empty_spread"] = entropy.empty_spread;
  return j;
}

MethodReport report_from_json(const nlohmann::json& j) {
  MethodReport r;
  try {
    r.survivors.population = j.at("population").get<uint32_t>();
    r.survivors.raw_count = j.at("raw").get<uint64_t>();
    r.survivors.aggregate_count = j.at("aggregate").get<uint64_t>();
    for (const auto& [key, value] : j.at("histogram").items())
      r.survivors.histogram[static_cast<uint32_t>(std::stoul(key))] =
          value.get<uint64_t>();
    r.survivors.singleton_states = j.at("singleton_states").get<uint64_t>();
    r.entropy.shannon_bits = j.at("entropy_bits").get<double>();
    if (j.contains("empty_spread")) r.entropy.empty_spread = j["empty_spread"].get<bool>();
    if (j.contains("method")) r.label = j["method"].get<std::string>();
    if (j.contains("program_hash")) r.program_hash = j["program_hash"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed report json: ") + e.what());
  } catch (const std::logic_error& e) {
    fail(std::string("malformed report json: ") + e.what());
  }
  return r;
}

}  // namespace diversify
