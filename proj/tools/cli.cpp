// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "asreval/aer.hpp"
#include "asreval/corpus.hpp"
#include "asreval/correction.hpp"
#include "asreval/perturb.hpp"
#include "asreval/prompts.hpp"
#include "asreval/providers.hpp"
#include "asreval/report.hpp"

namespace asreval::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return std::string(s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    if (auto item = trim(s.substr(start, end - start)); !item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw ConfigError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::string number_text(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void print_failures(std::span<const RecordFailure> failures, std::ostream& err) {
  for (const auto& f : failures) {
    err << "  " << f.record_id << " [" << f.stage << "] " << f.error_kind << ": " << f.message << '\n';
  }
}

// Options shared by the manifest-driven commands.
struct Common {
  std::string manifest;
  std::string corpus;
  std::string output_dir;
  std::string format = "text";
  std::string policy;
  std::string prompt_variant;
  std::string roles;
  int max_parallel = 0;
  int max_failures = -1;
  int workers = 0;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--manifest,-m", c.manifest, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
  sub.add_option("--corpus", c.corpus, "Override the manifest's corpus path")->check(CLI::ExistingFile);
  sub.add_option("--output-dir,-o", c.output_dir, "Override the manifest's output directory");
  sub.add_option("--format,-f", c.format, "Table printed on stdout: text, csv or markdown");
  sub.add_option("--policy", c.policy, "Normalization switches, e.g. no-lowercase,no-punctuation");
  sub.add_option("--prompt-variant", c.prompt_variant, "verbatim or cleaned");
  sub.add_option("--max-parallel", c.max_parallel, "Cap on in-flight requests per provider")
      ->check(CLI::PositiveNumber);
  sub.add_option("--max-failures", c.max_failures, "Record failures tolerated before exiting 1")
      ->check(CLI::NonNegativeNumber);
  sub.add_option("--workers", c.workers, "Records processed concurrently")->check(CLI::NonNegativeNumber);
}

struct Session {
  RunManifest manifest;
  std::vector<EvalRecord> records;
  std::shared_ptr<ResponseCache> cache;
  std::map<std::string, std::unique_ptr<Provider>> providers;  // by provider name

  Provider& for_role(std::string_view role) {
    const ProviderConfig& config = manifest.provider_for(role);
    auto& slot = providers[config.name];
    if (!slot) slot = Provider::create(config, cache);
    return *slot;
  }
};

Session open_session(const Common& c) {
  const ManifestValidation v = load_manifest(c.manifest);
  if (!v.ok()) throw ConfigError("invalid manifest " + c.manifest + ":\n" + v.describe());

  Session s;
  s.manifest = *v.manifest;
  RunManifest& m = s.manifest;
  if (!c.corpus.empty()) m.corpus = c.corpus;
  if (!c.output_dir.empty()) m.output_dir = c.output_dir;
  if (!c.policy.empty()) m.policy = parse_policy(c.policy, m.policy);
  if (!c.prompt_variant.empty()) m.prompt_variant = parse_prompt_variant(c.prompt_variant);
  if (c.max_failures >= 0) m.max_failures = c.max_failures;
  if (c.workers > 0) m.workers = c.workers;
  if (c.max_parallel > 0) {
    for (auto& [name, p] : m.providers) p.max_parallel = std::min(p.max_parallel, c.max_parallel);
  }
  for (const auto& item : split_list(c.roles)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--roles expects role=provider, got '" + item + "'");
    const std::string role = trim(item.substr(0, eq));
    const std::string name = trim(item.substr(eq + 1));
    if (role != kRoleCorrection && role != kRoleQuestionGenerator && role != kRoleAnswerer && role != kRoleJudge) {
      throw ConfigError("--roles: unknown role '" + role + "' (expected correction, llm1, llm2 or llm3)");
    }
    if (!m.providers.contains(name)) throw ConfigError("--roles: no provider named '" + name + "' in the manifest");
    m.roles[role] = name;
  }

  s.records = load_corpus(m.corpus);
  s.cache = std::make_shared<ResponseCache>(ResponseCache::resolve_dir(m.cache_dir));
  return s;
}

std::map<std::string, std::string> describe_provider(const ProviderConfig& p) {
  return {{"name", p.name},
          {"kind", std::string(to_string(p.kind))},
          {"model", p.model_name},
          {"base_url", p.base_url},
          {"api_key_env", p.api_key_env},
          {"temperature", number_text(p.temperature)},
          {"max_retries", std::to_string(p.max_retries)},
          {"max_parallel", std::to_string(p.max_parallel)},
          {"request_timeout_ms", std::to_string(p.request_timeout.count())},
          {"backoff_base_ms", std::to_string(p.backoff_base.count())},
          {"identity", provider_identity(p)}};
}

RunMetadata base_metadata(const Session& s, std::string command, std::initializer_list<PromptId> prompts,
                          std::initializer_list<std::string_view> roles) {
  RunMetadata meta;
  meta.command = std::move(command);
  meta.policy = s.manifest.policy.describe();
  meta.prompt_variant = std::string(to_string(s.manifest.prompt_variant));
  for (const PromptId id : prompts) {
    meta.prompt_digests[std::string(to_string(id))] = prompt_digest(id, s.manifest.prompt_variant);
  }
  for (const auto role : roles) meta.providers[std::string(role)] = describe_provider(s.manifest.provider_for(role));
  meta.parameters["corpus"] = s.manifest.corpus.filename().string();
  meta.parameters["corpus_sha256"] = sha256_hex(read_text(s.manifest.corpus));
  meta.parameters["records"] = std::to_string(s.records.size());
  meta.parameters["workers"] = std::to_string(s.manifest.workers);
  return meta;
}

std::string stats_json(const Session& s, std::size_t failures) {
  ordered_json doc;
  doc["records"] = s.records.size();
  doc["failures"] = failures;
  doc["providers"] = ordered_json::object();
  for (const auto& [name, p] : s.providers) {
    const ProviderStats st = p->stats();
    doc["providers"][name] = {{"requests", st.requests},   {"backend_calls", st.backend_calls},
                              {"cache_hits", st.cache_hits}, {"retries", st.retries},
                              {"failures", st.failures}};
  }
  return doc.dump(2) + "\n";
}

void write_tables(const fs::path& dir, const RunSummary& summary) {
  write_text(dir / "summary.json", summary_to_json(summary));
  write_text(dir / "table.md", emit_table(summary, TableFormat::Markdown));
  write_text(dir / "table.csv", emit_table(summary, TableFormat::Csv));
  write_text(dir / "table.txt", emit_table(summary, TableFormat::Text));
}

int finish(std::size_t failures, int tolerance, std::ostream& err) {
  if (failures > static_cast<std::size_t>(tolerance)) {
    err << "asr-eval: " << failures << " record failure(s) exceed the tolerance of " << tolerance << '\n';
    return kExitRecordFailures;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_wer(const std::string& corpus, const std::string& policy_list, const std::string& format, int max_failures,
            std::ostream& out, std::ostream& err) {
  const TableFormat fmt = parse_table_format(format);
  const NormalizationPolicy policy = parse_policy(policy_list);
  const auto records = load_corpus(corpus);
  RunMetadata meta;
  meta.command = "wer";
  meta.policy = policy.describe();
  const RunSummary summary = summarize(records, policy, nullptr, nullptr, std::move(meta));
  out << emit_table(summary, fmt);

  const GroupSummary all = summary.overall();
  err << "corpus WER " << format_percent(all.wer) << " over " << all.records << " records (policy "
      << policy.describe() << ")\n";
  if (all.wer_failures > 0) err << all.wer_failures << " record(s) have an undefined WER (empty normalized reference)\n";
  return finish(all.wer_failures, max_failures, err);
}

int cmd_correct(const Common& c, std::ostream& out, std::ostream& err) {
  const TableFormat fmt = parse_table_format(c.format);
  Session s = open_session(c);
  Provider& provider = s.for_role(kRoleCorrection);
  const fs::path dir = s.manifest.output_dir / "correct";

  CorrectionReport report;
  try {
    report = correct_corpus(s.records, provider, s.manifest.policy, s.manifest.prompt_variant,
                            static_cast<std::size_t>(s.manifest.workers));
  } catch (const AllRecordsFailedError& e) {
    report.failures = e.failures();
  }

  RunMetadata meta = base_metadata(s, "correct", {PromptId::Correction}, {kRoleCorrection});
  const RunSummary summary = summarize(s.records, s.manifest.policy, &report, nullptr, std::move(meta));
  write_tables(dir, summary);
  write_text(dir / "records.jsonl", record_details_jsonl(s.records, s.manifest.policy, &report, nullptr));
  write_text(dir / "manifest.json", echo_manifest(s.manifest));
  write_text(dir / "run_stats.json", stats_json(s, report.failures.size()));
  out << emit_table(summary, fmt);

  // Before and after over the same (successfully corrected) records.
  err << "corrected " << report.outcomes.size() << "/" << s.records.size() << " records; WER "
      << format_percent(Ratio{report.before.errors, report.before.ref_words}) << " -> "
      << format_percent(Ratio{report.after.errors, report.after.ref_words}) << "; outputs in " << dir.string()
      << '\n';
  if (!report.failures.empty()) {
    err << report.failures.size() << " record(s) failed:\n";
    print_failures(report.failures, err);
  }
  return finish(report.failures.size(), s.manifest.max_failures, err);
}

int cmd_aer(const Common& c, std::ostream& out, std::ostream& err) {
  const TableFormat fmt = parse_table_format(c.format);
  Session s = open_session(c);
  AerRoles roles{&s.for_role(kRoleQuestionGenerator), &s.for_role(kRoleAnswerer), &s.for_role(kRoleJudge)};
  const fs::path dir = s.manifest.output_dir / "aer";
  AerOptions options;
  options.variant = s.manifest.prompt_variant;
  options.trace_dir = dir / "traces";
  options.workers = static_cast<std::size_t>(s.manifest.workers);
  fs::remove_all(options.trace_dir);

  CorpusAer result;
  try {
    result = aer_for_corpus(s.records, roles, options);
  } catch (const AllRecordsFailedError& e) {
    result.failures = e.failures();
  }

  RunMetadata meta = base_metadata(s, "aer", {PromptId::Questions, PromptId::Answers, PromptId::Judge},
                                   {kRoleQuestionGenerator, kRoleAnswerer, kRoleJudge});
  meta.parameters["aer_aggregation"] = "micro";
  meta.parameters["answer_batching"] = "one call per context";
  meta.parameters["parse_retries"] = "1";
  const RunSummary summary = summarize(s.records, s.manifest.policy, nullptr, &result, std::move(meta));
  write_tables(dir, summary);
  write_text(dir / "records.jsonl", record_details_jsonl(s.records, s.manifest.policy, nullptr, &result));
  write_text(dir / "manifest.json", echo_manifest(s.manifest));
  write_text(dir / "run_stats.json", stats_json(s, result.failures.size()));
  try {
    const PairData pairs = emit_pairs(summary);
    write_text(dir / "pairs.csv", pairs.csv());
    for (const auto& note : pairs.notes) err << "pairs: " << note << '\n';
  } catch (const PreconditionError&) {
    err << "pairs: no group has both WER and AER; pairs.csv not written\n";
  }
  out << emit_table(summary, fmt);

  if (!result.records.empty()) {
    err << "AER " << format_percent(Ratio{result.corpus.mismatches, result.corpus.total_questions}) << " ("
        << result.corpus.mismatches << "/" << result.corpus.total_questions << " questions, macro "
        << number_text(result.macro) << ") over " << result.records.size() << "/" << s.records.size()
        << " records; outputs in " << dir.string() << '\n';
  }
  if (!result.failures.empty()) {
    err << result.failures.size() << " record(s) failed:\n";
    print_failures(result.failures, err);
  }
  return finish(result.failures.size(), s.manifest.max_failures, err);
}

struct InjectArgs {
  std::string corpus;
  std::string manifest;
  std::string out;
  std::string vocab;
  std::uint64_t seed = 0;
  double sub = 0, del = 0, ins = 0, bias = 0;
};

int cmd_inject(const InjectArgs& a, const CLI::App& sub, std::ostream& err) {
  PerturbationSpec spec;
  std::string corpus = a.corpus;
  if (!a.manifest.empty()) {
    const ManifestValidation v = load_manifest(a.manifest);
    if (!v.ok()) throw ConfigError("invalid manifest " + a.manifest + ":\n" + v.describe());
    if (v.manifest->perturbation) spec = *v.manifest->perturbation;
    if (corpus.empty()) corpus = v.manifest->corpus.string();
  }
  if (corpus.empty()) throw ConfigError("inject needs a corpus (positional argument or manifest)");
  if (sub.count("--seed") > 0) spec.seed = a.seed;
  if (sub.count("--sub") > 0) spec.sub_rate = a.sub;
  if (sub.count("--del") > 0) spec.del_rate = a.del;
  if (sub.count("--ins") > 0) spec.ins_rate = a.ins;
  if (sub.count("--bias") > 0) spec.rare_word_bias = a.bias;
  if (!a.vocab.empty()) {
    spec.vocabulary.clear();
    std::istringstream lines(read_text(a.vocab));
    for (std::string line; std::getline(lines, line);) {
      if (auto t = trim(line); !t.empty()) spec.vocabulary.push_back(std::move(t));
    }
  }
  validate(spec);

  auto records = load_corpus(corpus);
  // Whitespace tokenization only, so untouched references survive byte-exact.
  const NormalizationPolicy raw{false, false, true, false};
  std::vector<TokenSequence> refs;
  refs.reserve(records.size());
  for (const auto& r : records) refs.push_back(normalize(r.reference, raw));
  const FrequencyMap freqs = count_frequencies(refs);

  WerTotals totals;
  for (std::size_t i = 0; i < records.size(); ++i) {
    PerturbationSpec per_record = spec;
    per_record.seed = derive_record_seed(spec.seed, i);
    const TokenSequence hyp = inject(refs[i], per_record, freqs);
    totals.add(wer(refs[i], hyp));
    records[i].hypothesis = hyp == refs[i] ? records[i].reference : join_tokens(hyp);
  }
  write_corpus(a.out, records);

  ordered_json side;
  side["source"] = fs::path(corpus).filename().string();
  side["source_sha256"] = sha256_hex(read_text(corpus));
  side["rng"] = kInjectorRng;
  side["seed"] = spec.seed;
  side["record_seed"] = "seed XOR splitmix64(record ordinal)";
  side["sub_rate"] = spec.sub_rate;
  side["del_rate"] = spec.del_rate;
  side["ins_rate"] = spec.ins_rate;
  side["rare_word_bias"] = spec.rare_word_bias;
  side["vocabulary_size"] = spec.vocabulary.empty() ? freqs.size() : spec.vocabulary.size();
  side["expected_wer"] = expected_wer(spec);
  side["measured_wer"] = totals.rate() ? ordered_json(*totals.rate()) : ordered_json();
  write_text(a.out + ".perturbation.json", side.dump(2) + "\n");

  err << "wrote " << records.size() << " records to " << a.out << " (expected WER " << number_text(expected_wer(spec))
      << ", measured " << (totals.rate() ? number_text(*totals.rate()) : std::string(kAbsent)) << ")\n";
  return kExitOk;
}

int cmd_report(const std::string& path, const std::string& format, bool pairs, std::ostream& out,
               std::ostream& err) {
  const RunSummary summary = summary_from_json(read_text(path));
  if (pairs) {
    const PairData data = emit_pairs(summary);
    for (const auto& note : data.notes) err << "pairs: " << note << '\n';
    out << data.csv();
  } else {
    out << emit_table(summary, parse_table_format(format));
  }
  return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  const ManifestValidation v = load_manifest(path);
  if (!v.ok()) {
    err << v.describe() << '\n';
    return kExitUsage;
  }
  out << echo_manifest(*v.manifest);
  return kExitOk;
}

}  // namespace

NormalizationPolicy parse_policy(std::string_view list, NormalizationPolicy policy) {
  for (const auto& item : split_list(list)) {
    if (item == "default") {
      policy = NormalizationPolicy{};
      continue;
    }
    const bool on = !item.starts_with("no-");
    const std::string name = on ? item : item.substr(3);
    if (name == "lowercase") {
      policy.lowercase = on;
    } else if (name == "strip-punctuation" || name == "punctuation") {
      policy.strip_punctuation = on;
    } else if (name == "collapse-whitespace" || name == "whitespace") {
      policy.collapse_whitespace = on;
    } else if (name == "intra-word-apostrophes" || name == "apostrophes") {
      policy.keep_intra_word_apostrophes = on;
    } else {
      throw ConfigError("unknown policy switch '" + item + "'");
    }
  }
  return policy;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ASR transcript evaluation: WER, LLM correction and Answer Error Rate", "asr-eval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "asr-eval 0.1.0");

  std::string wer_corpus, wer_policy, wer_format = "text";
  int wer_max_failures = 0;
  auto* wer_cmd = app.add_subcommand("wer", "Baseline WER per (dataset, model) group");
  wer_cmd->add_option("corpus", wer_corpus, "Corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  wer_cmd->add_option("--policy", wer_policy, "Normalization switches, e.g. no-lowercase,no-punctuation");
  wer_cmd->add_option("--format,-f", wer_format, "text, csv or markdown");
  wer_cmd->add_option("--max-failures", wer_max_failures, "Undefined-WER records tolerated")
      ->check(CLI::NonNegativeNumber);

  Common correct_opts;
  auto* correct_cmd = app.add_subcommand("correct", "One-shot LLM correction, WER before and after");
  add_common(*correct_cmd, correct_opts);
  correct_cmd->add_option("--roles", correct_opts.roles, "Role overrides, e.g. correction=gemini");

  Common aer_opts;
  auto* aer_cmd = app.add_subcommand("aer", "Answer Error Rate with audit traces");
  add_common(*aer_cmd, aer_opts);
  aer_cmd->add_option("--roles", aer_opts.roles, "Role overrides, e.g. llm1=gemini,llm2=mini,llm3=judge");

  InjectArgs inject_args;
  auto* inject_cmd = app.add_subcommand("inject", "Write a synthetically corrupted copy of a corpus");
  inject_cmd->add_option("corpus", inject_args.corpus, "Corpus whose references are corrupted")
      ->check(CLI::ExistingFile);
  inject_cmd->add_option("--manifest,-m", inject_args.manifest, "Take the perturbation spec from a manifest")
      ->check(CLI::ExistingFile);
  inject_cmd->add_option("--out", inject_args.out, "Output corpus path")->required();
  inject_cmd->add_option("--seed", inject_args.seed, "RNG seed");
  inject_cmd->add_option("--sub", inject_args.sub, "Substitution rate");
  inject_cmd->add_option("--del", inject_args.del, "Deletion rate");
  inject_cmd->add_option("--ins", inject_args.ins, "Insertion rate");
  inject_cmd->add_option("--bias", inject_args.bias, "Rare-word bias (0 = uniform)");
  inject_cmd->add_option("--vocab", inject_args.vocab, "Replacement vocabulary, one token per line")
      ->check(CLI::ExistingFile);

  std::string report_path, report_format = "text";
  bool report_pairs = false;
  auto* report_cmd = app.add_subcommand("report", "Re-render a summary.json");
  report_cmd->add_option("summary", report_path, "summary.json from correct or aer")->required()->check(
      CLI::ExistingFile);
  report_cmd->add_option("--format,-f", report_format, "text, csv or markdown");
  report_cmd->add_flag("--pairs", report_pairs, "Emit WER-vs-AER points instead of the table");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a manifest and print it with defaults filled in");
  validate_cmd->add_option("manifest", validate_path, "Run manifest")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*wer_cmd) return cmd_wer(wer_corpus, wer_policy, wer_format, wer_max_failures, out, err);
    if (*correct_cmd) return cmd_correct(correct_opts, out, err);
    if (*aer_cmd) return cmd_aer(aer_opts, out, err);
    if (*inject_cmd) return cmd_inject(inject_args, *inject_cmd, err);
    if (*report_cmd) return cmd_report(report_path, report_format, report_pairs, out, err);
    if (*validate_cmd) return cmd_validate(validate_path, out, err);
  } catch (const std::exception& e) {
    err << "asr-eval: error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace asreval::cli
