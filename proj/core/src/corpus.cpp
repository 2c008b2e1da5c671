// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/corpus.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "asreval/errors.hpp"
#include "fs_util.hpp"

namespace asreval {

using nlohmann::json;
using nlohmann::ordered_json;

bool EvalRecord::empty_hypothesis() const {
  return hypothesis.find_first_not_of(" \t\r\n\v\f") == std::string::npos;
}

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

const json* optional_string_field(const json& obj, const char* key, std::string_view source, std::size_t line) {
  if (!obj.contains(key) || obj.at(key).is_null()) return nullptr;
  const json& v = obj.at(key);
  if (!v.is_string()) throw CorpusError(where(source, line) + ": field '" + key + "' must be a string");
  return &v;
}

void check_unique(std::vector<EvalRecord>& records, std::unordered_map<std::string, std::size_t>& seen,
                  std::size_t line, std::string_view source) {
  const auto& id = records.back().id;
  auto [it, inserted] = seen.emplace(id, line);
  if (!inserted) {
    throw CorpusError(std::string(source) + ": duplicate id '" + id + "' on lines " + std::to_string(it->second) +
                      " and " + std::to_string(line));
  }
}

}  // namespace

std::vector<EvalRecord> parse_corpus(std::istream& in, std::string_view source_name) {
  std::vector<EvalRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::exception& e) {
      throw CorpusError(where(source_name, line) + ": malformed record: " + e.what());
    }
    if (!obj.is_object()) throw CorpusError(where(source_name, line) + ": malformed record: expected a JSON object");
    EvalRecord r;
    for (const char* required : {"id", "reference", "hypothesis"}) {
      const json* v = optional_string_field(obj, required, source_name, line);
      if (v == nullptr) {
        throw CorpusError(where(source_name, line) + ": malformed record: missing field '" + required + "'");
      }
    }
    r.id = obj.at("id").get<std::string>();
    r.reference = obj.at("reference").get<std::string>();
    r.hypothesis = obj.at("hypothesis").get<std::string>();
    if (r.id.empty()) throw CorpusError(where(source_name, line) + ": malformed record: empty id");
    if (r.reference.find_first_not_of(" \t\r\n\v\f") == std::string::npos) {
      throw CorpusError(where(source_name, line) + ": malformed record: empty reference for id '" + r.id + "'");
    }
    if (const json* v = optional_string_field(obj, "dataset_tag", source_name, line)) r.dataset_tag = *v;
    if (const json* v = optional_string_field(obj, "model_tag", source_name, line)) r.model_tag = *v;
    if (const json* v = optional_string_field(obj, "audio_path", source_name, line)) r.audio_path = *v;
    records.push_back(std::move(r));
    check_unique(records, seen, line, source_name);
  }
  if (records.empty()) throw CorpusError(std::string(source_name) + ": corpus contains no records");
  return records;
}

std::vector<EvalRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus " + path.string());
  return parse_corpus(in, path.string());
}

std::vector<EvalRecord> import_tsv(std::istream& in, std::string_view source_name) {
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto tab = s.find('\t', start);
      cells.push_back(s.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return cells;
  };

  std::string text;
  std::size_t line = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (!text.empty()) header = split(text);
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
  for (const char* required : {"id", "reference", "hypothesis"}) {
    if (!column.contains(required)) {
      throw CorpusError(std::string(source_name) + ": header lacks required column '" + required + "'");
    }
  }

  std::vector<EvalRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto cells = split(text);
    if (cells.size() != header.size()) {
      throw CorpusError(where(source_name, line) + ": expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
    }
    auto cell = [&](const char* name) -> std::optional<std::string> {
      const auto it = column.find(name);
      if (it == column.end()) return std::nullopt;
      return cells[it->second];
    };
    EvalRecord r;
    r.id = *cell("id");
    r.reference = *cell("reference");
    r.hypothesis = *cell("hypothesis");
    r.dataset_tag = cell("dataset_tag").value_or("");
    r.model_tag = cell("model_tag").value_or("");
    if (auto audio = cell("audio_path"); audio && !audio->empty()) r.audio_path = *audio;
    if (r.id.empty()) throw CorpusError(where(source_name, line) + ": empty id");
    if (r.reference.find_first_not_of(" \t\r\n\v\f") == std::string::npos) {
      throw CorpusError(where(source_name, line) + ": empty reference for id '" + r.id + "'");
    }
    records.push_back(std::move(r));
    check_unique(records, seen, line, source_name);
  }
  if (records.empty()) throw CorpusError(std::string(source_name) + ": corpus contains no records");
  return records;
}

std::vector<EvalRecord> import_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  return import_tsv(in, path.string());
}

std::string to_jsonl(const EvalRecord& record) {
  ordered_json obj;
  obj["id"] = record.id;
  obj["reference"] = record.reference;
  obj["hypothesis"] = record.hypothesis;
  if (!record.dataset_tag.empty()) obj["dataset_tag"] = record.dataset_tag;
  if (!record.model_tag.empty()) obj["model_tag"] = record.model_tag;
  if (record.audio_path) obj["audio_path"] = *record.audio_path;
  return obj.dump();
}

std::string to_jsonl(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_jsonl(r);
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  detail::write_file_atomic(path, to_jsonl(records));
}

// ---------------------------------------------------------------------------
// Manifest

const ProviderConfig& RunManifest::provider_for(std::string_view role) const {
  const auto r = roles.find(std::string(role));
  if (r == roles.end()) throw ConfigError("no provider assigned to role '" + std::string(role) + "'");
  const auto p = providers.find(r->second);
  if (p == providers.end()) {
    throw ConfigError("role '" + std::string(role) + "' names unknown provider '" + r->second + "'");
  }
  return p->second;
}

std::string ManifestValidation::describe() const {
  std::string out;
  for (const auto& issue : issues) {
    out += issue.field;
    out += ": ";
    out += issue.message;
    out += '\n';
  }
  return out;
}

namespace {

class FieldReader {
 public:
  explicit FieldReader(std::vector<ValidationIssue>& issues) : issues_(issues) {}

  void issue(std::string field, std::string message) { issues_.push_back({std::move(field), std::move(message)}); }

  std::optional<std::string> string(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string()) {
      issue(path, "must be a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  std::optional<double> number(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_number()) {
      issue(path, "must be a number");
      return std::nullopt;
    }
    return obj.at(key).get<double>();
  }

  std::optional<long long> integer(const json& obj, const char* key, const std::string& path) {
    const auto v = number(obj, key, path);
    if (!v) return std::nullopt;
    if (std::floor(*v) != *v || std::abs(*v) > 9.0e15) {
      issue(path, "must be an integer");
      return std::nullopt;
    }
    return static_cast<long long>(*v);
  }

  std::optional<bool> boolean(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      issue(path, "must be true or false");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  const json* object(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || obj.at(key).is_null()) return nullptr;
    if (!obj.at(key).is_object()) {
      issue(path, "must be an object");
      return nullptr;
    }
    return &obj.at(key);
  }

 private:
  std::vector<ValidationIssue>& issues_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

ProviderConfig read_provider(FieldReader& rd, const std::string& name, const json& obj,
                             const std::filesystem::path& base) {
  const std::string at = "providers." + name;
  ProviderConfig cfg;
  cfg.name = name;
  if (obj.contains("api_key")) rd.issue(at + ".api_key", "keys are never read from manifests; use api_key_env");

  if (auto kind = rd.string(obj, "kind", at + ".kind")) {
    try {
      cfg.kind = parse_provider_kind(*kind);
    } catch (const ConfigError& e) {
      rd.issue(at + ".kind", e.what());
    }
  } else if (!obj.contains("kind")) {
    rd.issue(at + ".kind", "required");
  }
  switch (cfg.kind) {
    case ProviderKind::OpenAiCompatible:
      cfg.base_url = "https://api.openai.com/v1";
      cfg.api_key_env = "OPENAI_API_KEY";
      break;
    case ProviderKind::GeminiCompatible:
      cfg.base_url = "https://generativelanguage.googleapis.com/v1beta";
      cfg.api_key_env = "GEMINI_API_KEY";
      break;
    case ProviderKind::Mock:
      cfg.model_name = "mock";
      break;
  }
  if (auto v = rd.string(obj, "base_url", at + ".base_url")) cfg.base_url = *v;
  if (auto v = rd.string(obj, "model", at + ".model")) cfg.model_name = *v;
  if (auto v = rd.string(obj, "api_key_env", at + ".api_key_env")) cfg.api_key_env = *v;
  if (auto v = rd.number(obj, "temperature", at + ".temperature")) {
    cfg.temperature = *v;
    if (!(*v >= 0.0)) rd.issue(at + ".temperature", "must be >= 0");
  }
  if (auto v = rd.integer(obj, "max_retries", at + ".max_retries")) {
    if (*v < 0) rd.issue(at + ".max_retries", "must be >= 0");
    else cfg.max_retries = static_cast<int>(std::min<long long>(*v, 100));
  }
  if (auto v = rd.integer(obj, "max_parallel", at + ".max_parallel")) {
    if (*v < 1) rd.issue(at + ".max_parallel", "must be >= 1");
    else cfg.max_parallel = static_cast<int>(std::min<long long>(*v, 1024));
  }
  if (auto v = rd.number(obj, "request_timeout_s", at + ".request_timeout_s")) {
    if (!(*v > 0.0) || *v > 86400.0) rd.issue(at + ".request_timeout_s", "must be in (0, 86400]");
    else cfg.request_timeout = std::chrono::milliseconds(static_cast<long long>(*v * 1000.0));
  }
  if (auto v = rd.number(obj, "backoff_base_ms", at + ".backoff_base_ms")) {
    if (!(*v >= 0.0) || *v > 600000.0) rd.issue(at + ".backoff_base_ms", "must be in [0, 600000]");
    else cfg.backoff_base = std::chrono::milliseconds(static_cast<long long>(*v));
  }
  if (auto v = rd.string(obj, "mock_script", at + ".mock_script")) {
    cfg.mock_script = resolve(base, *v);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(cfg.mock_script, ec)) {
      rd.issue(at + ".mock_script", "file does not exist: " + cfg.mock_script.string());
    }
  }
  if (auto v = rd.string(obj, "mock_record", at + ".mock_record")) cfg.mock_record = resolve(base, *v);

  if (cfg.kind == ProviderKind::Mock) {
    if (cfg.mock_script.empty() && !obj.contains("mock_script")) rd.issue(at + ".mock_script", "required for mock providers");
  } else {
    if (cfg.model_name.empty()) rd.issue(at + ".model", "required");
    if (cfg.base_url.rfind("http://", 0) != 0 && cfg.base_url.rfind("https://", 0) != 0) {
      rd.issue(at + ".base_url", "must start with http:// or https://");
    }
    if (cfg.api_key_env.empty()) rd.issue(at + ".api_key_env", "must name an environment variable");
  }
  return cfg;
}

}  // namespace

ManifestValidation validate_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  ManifestValidation result;
  FieldReader rd(result.issues);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    rd.issue("(document)", std::string("not valid JSON: ") + e.what());
    return result;
  }
  if (!doc.is_object()) {
    rd.issue("(document)", "must be a JSON object");
    return result;
  }

  try {
    RunManifest m;
    if (auto corpus = rd.string(doc, "corpus", "corpus")) {
      m.corpus = resolve(base_dir, *corpus);
      std::error_code ec;
      if (!std::filesystem::is_regular_file(m.corpus, ec)) {
        rd.issue("corpus", "file does not exist: " + m.corpus.string());
      }
    } else if (!doc.contains("corpus") || doc.at("corpus").is_null()) {
      rd.issue("corpus", "required");
    }
    m.output_dir = resolve(base_dir, rd.string(doc, "output_dir", "output_dir").value_or("asr-eval-out"));
    if (auto v = rd.string(doc, "cache_dir", "cache_dir")) {
      m.cache_dir = resolve(base_dir, *v);
    } else {
      m.cache_dir = m.output_dir / "cache";
    }

    if (const json* norm = rd.object(doc, "normalization", "normalization")) {
      auto flag = [&](const char* key, bool& target) {
        if (auto v = rd.boolean(*norm, key, std::string("normalization.") + key)) target = *v;
      };
      flag("lowercase", m.policy.lowercase);
      flag("strip_punctuation", m.policy.strip_punctuation);
      flag("collapse_whitespace", m.policy.collapse_whitespace);
      flag("keep_intra_word_apostrophes", m.policy.keep_intra_word_apostrophes);
    }

    if (auto v = rd.string(doc, "prompt_variant", "prompt_variant")) {
      try {
        m.prompt_variant = parse_prompt_variant(*v);
      } catch (const ConfigError& e) {
        rd.issue("prompt_variant", e.what());
      }
    }

    if (const json* providers = rd.object(doc, "providers", "providers")) {
      for (const auto& [name, obj] : providers->items()) {
        if (!obj.is_object()) {
          rd.issue("providers." + name, "must be an object");
          continue;
        }
        m.providers.emplace(name, read_provider(rd, name, obj, base_dir));
      }
    }

    if (const json* roles = rd.object(doc, "roles", "roles")) {
      for (const auto& [role, value] : roles->items()) {
        const std::string at = "roles." + role;
        if (role != kRoleCorrection && role != kRoleQuestionGenerator && role != kRoleAnswerer && role != kRoleJudge) {
          rd.issue(at, "unknown role (expected correction, llm1, llm2 or llm3)");
          continue;
        }
        if (!value.is_string()) {
          rd.issue(at, "must name a provider");
          continue;
        }
        const auto name = value.get<std::string>();
        if (!m.providers.contains(name)) rd.issue(at, "unknown provider '" + name + "'");
        m.roles.emplace(role, name);
      }
    }

    if (const json* p = rd.object(doc, "perturbation", "perturbation")) {
      PerturbationSpec spec;
      if (auto v = rd.integer(*p, "seed", "perturbation.seed")) spec.seed = static_cast<std::uint64_t>(*v);
      if (auto v = rd.number(*p, "sub_rate", "perturbation.sub_rate")) spec.sub_rate = *v;
      if (auto v = rd.number(*p, "del_rate", "perturbation.del_rate")) spec.del_rate = *v;
      if (auto v = rd.number(*p, "ins_rate", "perturbation.ins_rate")) spec.ins_rate = *v;
      if (auto v = rd.number(*p, "rare_word_bias", "perturbation.rare_word_bias")) spec.rare_word_bias = *v;
      if (p->contains("vocabulary")) {
        const json& vocab = p->at("vocabulary");
        if (!vocab.is_array()) {
          rd.issue("perturbation.vocabulary", "must be an array of strings");
        } else {
          for (const auto& w : vocab) {
            if (w.is_string()) spec.vocabulary.push_back(w.get<std::string>());
            else rd.issue("perturbation.vocabulary", "must be an array of strings");
          }
        }
      }
      try {
        validate(spec);
      } catch (const PreconditionError& e) {
        rd.issue("perturbation", e.what());
      }
      m.perturbation = std::move(spec);
    }

    if (auto v = rd.integer(doc, "max_failures", "max_failures")) {
      if (*v < 0) rd.issue("max_failures", "must be >= 0");
      else m.max_failures = static_cast<int>(std::min<long long>(*v, 1 << 30));
    }
    if (auto v = rd.integer(doc, "workers", "workers")) {
      if (*v < 0) rd.issue("workers", "must be >= 0");
      else m.workers = static_cast<int>(std::min<long long>(*v, 1024));
    }

    static const std::set<std::string> known = {"corpus",  "output_dir", "cache_dir",    "normalization",
                                                "prompt_variant", "providers", "roles", "perturbation",
                                                "max_failures",   "workers"};
    for (const auto& [key, value] : doc.items()) {
      if (!known.contains(key)) rd.issue(key, "unknown field");
    }
    result.manifest = std::move(m);
  } catch (const std::exception& e) {
    rd.issue("(document)", std::string("unexpected structure: ") + e.what());
  }
  return result;
}

ManifestValidation load_manifest(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error&) {
    ManifestValidation v;
    v.issues.push_back({"(file)", "cannot read manifest " + path.string()});
    return v;
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return validate_manifest(text, base);
}

std::string echo_manifest(const RunManifest& m) {
  ordered_json doc;
  doc["corpus"] = m.corpus.generic_string();
  doc["output_dir"] = m.output_dir.generic_string();
  doc["cache_dir"] = m.cache_dir.generic_string();
  doc["normalization"] = {{"lowercase", m.policy.lowercase},
                          {"strip_punctuation", m.policy.strip_punctuation},
                          {"collapse_whitespace", m.policy.collapse_whitespace},
                          {"keep_intra_word_apostrophes", m.policy.keep_intra_word_apostrophes}};
  doc["prompt_variant"] = to_string(m.prompt_variant);
  doc["providers"] = ordered_json::object();
  for (const auto& [name, p] : m.providers) {
    ordered_json e;
    e["kind"] = to_string(p.kind);
    e["base_url"] = p.base_url;
    e["model"] = p.model_name;
    e["api_key_env"] = p.api_key_env;
    e["temperature"] = p.temperature;
    e["max_retries"] = p.max_retries;
    e["request_timeout_s"] = static_cast<double>(p.request_timeout.count()) / 1000.0;
    e["max_parallel"] = p.max_parallel;
    e["backoff_base_ms"] = p.backoff_base.count();
    if (!p.mock_script.empty()) e["mock_script"] = p.mock_script.generic_string();
    if (!p.mock_record.empty()) e["mock_record"] = p.mock_record.generic_string();
    doc["providers"][name] = std::move(e);
  }
  doc["roles"] = ordered_json::object();
  for (const auto& [role, name] : m.roles) doc["roles"][role] = name;
  if (m.perturbation) {
    const auto& s = *m.perturbation;
    doc["perturbation"] = {{"seed", s.seed},         {"sub_rate", s.sub_rate},
                           {"del_rate", s.del_rate}, {"ins_rate", s.ins_rate},
                           {"rare_word_bias", s.rare_word_bias}, {"vocabulary", s.vocabulary}};
  }
  doc["max_failures"] = m.max_failures;
  doc["workers"] = m.workers;
  return doc.dump(2) + "\n";
}

}  // namespace asreval
