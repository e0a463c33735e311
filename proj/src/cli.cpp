#include "diversify/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "diversify/analysis.hpp"
#include "diversify/model.hpp"
#include "diversify/patterns.hpp"
#include "diversify/queue.hpp"

namespace diversify {

namespace {

namespace fs = std::filesystem;

struct GenProgramOpts {
  SynthSpec spec;
  std::string out;
};

struct GenPatternsOpts {
  std::string program_path;
  std::string method;
  uint32_t population = 0;
  uint64_t seed = 0;
  double noise_rate = 0.0;
  double bernoulli_rate = 0.0;
  uint32_t window = kDefaultSledWindow;
  uint32_t pad_bound = kDefaultPadSearchBound;
  std::string out;
};

struct BuildAllOpts {
  std::string program_path;
  std::string patterns_path;
  std::string outdir;
};

struct AnalyzeOpts {
  std::string dir;
  uint32_t window = kDefaultSledWindow;
  std::string out;
};

struct CompareOpts {
  std::vector<std::string> reports;
  std::string out_text;
  std::string out_json;
};

struct QueueInitOpts {
  std::string patterns_path;
  std::string policy = "strict";
  uint64_t seed = 0;
  std::string state_path;
};

struct QueueStateOpts {
  std::string state_path;
};

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Program load_program(const std::string& path) {
  return program_from_json(load_json_file(path));
}

int cmd_gen_program(const GenProgramOpts& o) {
  const Program p = build_program(o.spec);
  write_json_file(o.out, program_to_json(p));
  std::cout << "wrote " << o.out << " (hash " << program_hash(p) << ", "
            << p.function_count() << " functions, " << p.instruction_count()
            << " instructions, " << p.gadget_count() << " gadgets, " << layout_size(p)
            << " bytes)\n";
  return kExitOk;
}

int cmd_gen_patterns(const GenPatternsOpts& o, bool population_given, bool noise_given,
                     bool rate_given, bool window_given, bool bound_given) {
  const Method method = method_from_name(o.method);

  // Flags that do not participate in the chosen method are refused rather
  // than ignored, so a command line always means what it says.
  auto irrelevant = [&](const char* flag) {
    throw ValidationError(std::string(flag) + " does not apply to method '" + o.method +
                          "'");
  };
  if (noise_given && method != Method::PadNoise) irrelevant("--noise-rate");
  if (rate_given && method != Method::Bernoulli) irrelevant("--rate");
  if ((window_given || bound_given) &&
      (method == Method::Perm || method == Method::Bernoulli))
    irrelevant(window_given ? "--window" : "--pad-bound");
  if (method == Method::PadNoise && !noise_given)
    throw ValidationError("--noise-rate is required for method 'pad-noise'");
  if (method == Method::Bernoulli && !rate_given)
    throw ValidationError("--rate is required for method 'bernoulli'");
  if (method != Method::Perm && !population_given)
    throw ValidationError("--population is required for method '" + o.method + "'");

  const Program p = load_program(o.program_path);
  const std::string hash = program_hash(p);

  PatternSet set;
  switch (method) {
    case Method::Perm:
      if (population_given && o.population != p.function_count())
        throw ValidationError("--population for method 'perm' must equal the function "
                              "count (" +
                              std::to_string(p.function_count()) + ")");
      set = permutation_patterns(p.function_count(), o.seed);
      break;
    case Method::Pad:
      set = nop_padding_patterns(p, o.population, o.seed, o.window, o.pad_bound);
      break;
    case Method::PadNoise:
      set = nop_noise_patterns(p, o.population, o.noise_rate, o.seed, o.window,
                               o.pad_bound);
      break;
    case Method::Bernoulli:
      set = bernoulli_patterns(p, o.population, o.bernoulli_rate, o.seed);
      break;
  }
  write_json_file(o.out, pattern_set_to_json(set, hash));
  std::cout << "wrote " << o.out << " (" << method_name(set.method) << ", population "
            << set.population << ", program " << hash << ")\n";
  return kExitOk;
}

int cmd_build_all(const BuildAllOpts& o) {
  const Program p = load_program(o.program_path);
  const std::string hash = program_hash(p);
  std::string recorded;
  const PatternSet set = pattern_set_from_json(load_json_file(o.patterns_path), &recorded);
  if (recorded != hash)
    throw IdentityError("pattern set was generated for program " + recorded +
                        " but --program hashes to " + hash);

  std::error_code ec;
  fs::create_directories(fs::path(o.outdir) / "variants", ec);
  if (ec) throw ValidationError("cannot create '" + o.outdir + "': " + ec.message());

  const uint64_t baseline = layout_size(p);
  nlohmann::ordered_json index;
  index["program_hash"] = hash;
  index["method"] = method_name(set.method);
  index["population"] = set.population;
  index["seed"] = set.seed;
  index["labels"] = set.labels();

  nlohmann::ordered_json sizes;
  sizes["baseline_bytes"] = baseline;
  auto& rows = sizes["rows"] = nlohmann::ordered_json::array();
  std::string table;
  {
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s  %5s  %12s  %10s\n", "label", "gen", "bytes",
                  "overhead%");
    table += line;
    std::snprintf(line, sizeof(line), "%-24s  %5s  %12s  %10s\n", "------------------------",
                  "-----", "------------", "----------");
    table += line;
    for (const auto& gp : set.patterns) {
      const Variant v = apply_pattern(p, gp.pattern);
      write_json_file((fs::path(o.outdir) / "variants" / (v.pattern_label + ".json")).string(),
                      program_to_json(v.program));
      const double pct = overhead_percent(v.total_bytes, baseline);
      nlohmann::ordered_json row;
      row["label"] = v.pattern_label;
      row["generation_index"] = gp.generation_index;
      row["bytes"] = v.total_bytes;
      row["overhead_pct"] = pct;
      rows.push_back(std::move(row));
      std::snprintf(line, sizeof(line), "%-24s  %5u  %12llu  %10.4f\n",
                    v.pattern_label.c_str(), gp.generation_index,
                    static_cast<unsigned long long>(v.total_bytes), pct);
      table += line;
    }
  }
  write_json_file((fs::path(o.outdir) / "index.json").string(), index);
  write_json_file((fs::path(o.outdir) / "sizes.json").string(), sizes);
  write_text_file((fs::path(o.outdir) / "sizes.txt").string(), table);
  std::cout << "built " << set.population << " variants into " << o.outdir << "\n";
  return kExitOk;
}

int cmd_analyze(const AnalyzeOpts& o) {
  const nlohmann::json index = load_json_file((fs::path(o.dir) / "index.json").string());
  std::string hash, method;
  std::vector<std::string> labels;
  try {
    hash = index.at("program_hash").get<std::string>();
    method = index.at("method").get<std::string>();
    labels = index.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed index json: ") + e.what());
  }

  std::vector<Variant> community;
  community.reserve(labels.size());
  for (const auto& label : labels) {
    Variant v;
    v.program = load_program((fs::path(o.dir) / "variants" / (label + ".json")).string());
    v.pattern_label = label;
    v.total_bytes = layout_size(v.program);
    community.push_back(std::move(v));
  }

  const SurvivorReport report = survivors(community, o.window);
  const EntropyReport er = entropy(report);
  if (er.empty_spread)
    std::cerr << "warning: no gadget states in this community; entropy is 0 by "
                 "convention\n";

  nlohmann::ordered_json j = report_to_json(report, er);
  j["method"] = method;
  j["program_hash"] = hash;
  j["window"] = o.window;
  const std::string out = o.out.empty() ? (fs::path(o.dir) / "report.json").string() : o.out;
  write_json_file(out, j);

  char line[160];
  std::snprintf(line, sizeof(line),
                "%s: population=%u raw=%llu aggregate=%llu singletons=%llu "
                "entropy_bits=%.6f\n",
                method.c_str(), report.population,
                static_cast<unsigned long long>(report.raw_count),
                static_cast<unsigned long long>(report.aggregate_count),
                static_cast<unsigned long long>(report.singleton_states),
                er.shannon_bits);
  std::cout << line;
  return kExitOk;
}

int cmd_compare(const CompareOpts& o) {
  std::vector<MethodReport> reports;
  reports.reserve(o.reports.size());
  for (const auto& path : o.reports) reports.push_back(report_from_json(load_json_file(path)));
  const ComparisonTable table = compare(reports);
  const std::string text = render_table(table);
  if (o.out_text.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out_text, text);
    std::cout << "wrote " << o.out_text << "\n";
  }
  if (!o.out_json.empty()) {
    nlohmann::ordered_json j;
    j["population"] = table.population;
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
      nlohmann::ordered_json jr;
      jr["method"] = row.label;
      jr["raw"] = row.raw_count;
      jr["aggregate"] = row.aggregate_count;
      jr["spread"] = row.spread_summary;
      jr["entropy_bits"] = row.shannon_bits;
      rows.push_back(std::move(jr));
    }
    write_json_file(o.out_json, j);
  }
  return kExitOk;
}

int cmd_queue_init(const QueueInitOpts& o) {
  const PatternSet set = pattern_set_from_json(load_json_file(o.patterns_path));
  DistributionQueue q = DistributionQueue::enqueue(set, o.seed, policy_from_name(o.policy));
  q.save(o.state_path);
  std::cout << "queue initialized with " << set.population << " patterns ("
            << o.policy << ") at " << o.state_path << "\n";
  return kExitOk;
}

int cmd_queue_pop(const QueueStateOpts& o) {
  DistributionQueue q = DistributionQueue::load(o.state_path);
  const std::string label = q.pop_next();  // may throw QueueExhausted
  q.save(o.state_path);
  std::cout << label << "\n";
  return kExitOk;
}

int cmd_queue_status(const QueueStateOpts& o) {
  const DistributionQueue q = DistributionQueue::load(o.state_path);
  const auto remaining = q.remaining();
  std::cout << "policy: " << policy_name(q.policy()) << "\n"
            << "seed: " << q.seed() << "\n"
            << "remaining: " << remaining.size() << "\n"
            << "dispensed: " << q.dispensed().size() << "\n"
            << "next: " << (remaining.empty() ? "(empty)" : remaining.front()) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"diversified-build workbench over a simulated binary model"};
  app.require_subcommand(1);

  GenProgramOpts gp;
  auto* gen_program = app.add_subcommand("gen-program", "synthesize a source program");
  gen_program->add_option("--functions", gp.spec.functions, "function count")
      ->capture_default_str()->check(CLI::Range(1u, 1u << 20));
  gen_program->add_option("--instructions,--instrs", gp.spec.instructions_per_function,
                          "instructions per function")
      ->capture_default_str()->check(CLI::Range(1u, 1u << 24));
  gen_program->add_option("--gadget-density", gp.spec.gadget_density,
                          "probability an instruction starts a gadget")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen_program->add_option("--classes", gp.spec.class_count, "gadget class universe size")
      ->capture_default_str()->check(CLI::Range(1u, 1u << 24));
  gen_program->add_option("--duplicate-rate", gp.spec.duplicate_class_rate,
                          "probability a gadget reuses an already placed class")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen_program->add_option("--alignment,--align", gp.spec.alignment,
                          "function start alignment (0 disables, else power of two)")
      ->capture_default_str();
  gen_program->add_option("--max-instr-len", gp.spec.max_instr_len,
                          "instruction byte lengths drawn uniformly from [1, max]")
      ->capture_default_str()->check(CLI::Range(1u, 64u));
  gen_program->add_option("--nop-byte-len", gp.spec.nop_byte_len, "NOP byte length")
      ->capture_default_str()->check(CLI::Range(1u, 64u));
  gen_program->add_option("--seed", gp.spec.seed, "generator seed")->required();
  gen_program->add_option("-o,--out", gp.out, "output program json")->required();

  GenPatternsOpts gpa;
  auto* gen_patterns = app.add_subcommand("gen-patterns", "generate a pattern set");
  gen_patterns->add_option("--program", gpa.program_path, "source program json")
      ->required()->check(CLI::ExistingFile);
  gen_patterns->add_option("--method", gpa.method,
                           "perm | pad | pad-noise | bernoulli")->required();
  auto* opt_population =
      gen_patterns->add_option("--population", gpa.population, "patterns to generate")
          ->check(CLI::Range(1u, 1u << 20));
  gen_patterns->add_option("--seed", gpa.seed, "generator seed")->required();
  auto* opt_noise = gen_patterns->add_option("--noise-rate", gpa.noise_rate,
                                             "interior noise rate (pad-noise)")
                        ->check(CLI::Range(0.0, 1.0));
  auto* opt_rate = gen_patterns->add_option("--rate", gpa.bernoulli_rate,
                                            "per-instruction insertion rate (bernoulli)")
                       ->check(CLI::Range(0.0, 1.0));
  auto* opt_window = gen_patterns->add_option("--window", gpa.window,
                                              "sled window used during generation")
                         ->capture_default_str();
  auto* opt_bound = gen_patterns->add_option("--pad-bound", gpa.pad_bound,
                                             "pad search bound per build")
                        ->capture_default_str()->check(CLI::Range(1u, 1u << 24));
  gen_patterns->add_option("-o,--out", gpa.out, "output pattern set json")->required();

  BuildAllOpts ba;
  auto* build_all = app.add_subcommand("build-all", "apply a pattern set to a program");
  build_all->add_option("--program", ba.program_path, "source program json")
      ->required()->check(CLI::ExistingFile);
  build_all->add_option("--patterns", ba.patterns_path, "pattern set json")
      ->required()->check(CLI::ExistingFile);
  build_all->add_option("-o,--outdir", ba.outdir, "output directory")->required();

  AnalyzeOpts an;
  auto* analyze = app.add_subcommand("analyze", "survivor and entropy analysis");
  analyze->add_option("--dir", an.dir, "build-all output directory")
      ->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--window", an.window, "sled window")->capture_default_str();
  analyze->add_option("-o,--out", an.out, "report path (default <dir>/report.json)");

  CompareOpts co;
  auto* cmp = app.add_subcommand("compare", "rank method reports side by side");
  cmp->add_option("reports", co.reports, "report json files")
      ->required()->expected(2, -1)->check(CLI::ExistingFile);
  cmp->add_option("-o,--out", co.out_text, "write the text table here instead of stdout");
  cmp->add_option("--json", co.out_json, "also write the table as json");

  auto* queue = app.add_subcommand("queue", "pattern distribution queue");
  queue->require_subcommand(1);
  QueueInitOpts qi;
  auto* q_init = queue->add_subcommand("init", "create a queue from a pattern set");
  q_init->add_option("--patterns", qi.patterns_path, "pattern set json")
      ->required()->check(CLI::ExistingFile);
  q_init->add_option("--policy", qi.policy, "strict | reuse | extend")
      ->capture_default_str();
  q_init->add_option("--seed", qi.seed, "shuffle seed for the dispensing order")
      ->required();
  q_init->add_option("--state", qi.state_path, "queue state file")->required();
  QueueStateOpts qp;
  auto* q_pop = queue->add_subcommand("pop", "dispense the next pattern label");
  q_pop->add_option("--state", qp.state_path, "queue state file")
      ->required()->check(CLI::ExistingFile);
  QueueStateOpts qs;
  auto* q_status = queue->add_subcommand("status", "show queue state");
  q_status->add_option("--state", qs.state_path, "queue state file")
      ->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("diversify");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (gen_program->parsed()) return cmd_gen_program(gp);
    if (gen_patterns->parsed())
      return cmd_gen_patterns(gpa, opt_population->count() > 0, opt_noise->count() > 0,
                              opt_rate->count() > 0, opt_window->count() > 0,
                              opt_bound->count() > 0);
    if (build_all->parsed()) return cmd_build_all(ba);
    if (analyze->parsed()) return cmd_analyze(an);
    if (cmp->parsed()) return cmd_compare(co);
    if (queue->parsed()) {
      if (q_init->parsed()) return cmd_queue_init(qi);
      if (q_pop->parsed()) return cmd_queue_pop(qp);
      if (q_status->parsed()) return cmd_queue_status(qs);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneration;
  } catch (const IdentityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIdentity;
  } catch (const QueueExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitQueueExhausted;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace diversify
