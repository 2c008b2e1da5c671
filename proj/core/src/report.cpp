// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-eval Authors

#include "asreval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "utf8.hpp"

namespace asreval {

using nlohmann::ordered_json;

double Ratio::value() const {
  if (den == 0) throw PreconditionError("ratio with a zero denominator has no value");
  return static_cast<double>(num) / static_cast<double>(den);
}

namespace {

// round(num * scale / den), half up, without floating point.
std::uint64_t scaled_round(const Ratio& r, std::uint64_t scale) {
  __extension__ typedef unsigned __int128 u128;
  const u128 n = static_cast<u128>(r.num) * scale;
  return static_cast<std::uint64_t>((2 * n + r.den) / (2 * static_cast<u128>(r.den)));
}

struct GroupIndex {
  std::vector<GroupSummary> groups;
  std::unordered_map<std::string, std::size_t> by_record;

  GroupSummary& of(const std::string& record_id) {
    const auto it = by_record.find(record_id);
    if (it == by_record.end()) throw PreconditionError("result for unknown record '" + record_id + "'");
    return groups[it->second];
  }
};

GroupIndex index_groups(std::span<const EvalRecord> records) {
  // Dataset tags in first-appearance order, then model tags within each.
  std::vector<std::string> datasets;
  std::map<std::string, std::vector<std::string>> models;
  for (const auto& r : records) {
    auto& list = models[r.dataset_tag];
    if (list.empty()) datasets.push_back(r.dataset_tag);
    if (std::find(list.begin(), list.end(), r.model_tag) == list.end()) list.push_back(r.model_tag);
  }
  GroupIndex index;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& d : datasets) {
    for (const auto& m : models[d]) {
      slot[{d, m}] = index.groups.size();
      GroupSummary g;
      g.dataset_tag = d;
      g.model_tag = m;
      index.groups.push_back(std::move(g));
    }
  }
  for (const auto& r : records) {
    const std::size_t i = slot.at({r.dataset_tag, r.model_tag});
    if (!index.by_record.emplace(r.id, i).second) throw PreconditionError("duplicate record id '" + r.id + "'");
    ++index.groups[i].records;
  }
  return index;
}

ordered_json ratio_json(const Ratio& r, const char* num_key, const char* den_key) {
  return {{num_key, r.num}, {den_key, r.den}};
}

Ratio ratio_from(const ordered_json& j, const char* num_key, const char* den_key) {
  return Ratio{j.at(num_key).get<std::uint64_t>(), j.at(den_key).get<std::uint64_t>()};
}

ordered_json breakdown_json(const WerBreakdown& b) {
  return {{"substitutions", b.substitutions}, {"deletions", b.deletions}, {"insertions", b.insertions},
          {"matches", b.matches},             {"ref_len", b.ref_len},     {"wer", b.wer}};
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '|') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

std::string optional_percent(const std::optional<Ratio>& r) {
  return r ? format_percent(*r) : std::string(kAbsent);
}

}  // namespace

GroupSummary RunSummary::overall() const {
  GroupSummary all;
  all.dataset_tag = "*";
  all.model_tag = "*";
  double macro_weighted = 0.0;
  std::uint64_t macro_records = 0;
  for (const auto& g : groups) {
    all.records += g.records;
    all.wer.num += g.wer.num;
    all.wer.den += g.wer.den;
    if (g.wer_corrected) {
      if (!all.wer_corrected) all.wer_corrected = Ratio{};
      all.wer_corrected->num += g.wer_corrected->num;
      all.wer_corrected->den += g.wer_corrected->den;
    }
    if (g.aer) {
      if (!all.aer) all.aer = Ratio{};
      all.aer->num += g.aer->num;
      all.aer->den += g.aer->den;
    }
    if (g.aer_macro) {
      const std::uint64_t n = g.records - g.aer_failures;
      macro_weighted += *g.aer_macro * static_cast<double>(n);
      macro_records += n;
    }
    all.wer_failures += g.wer_failures;
    all.correction_failures += g.correction_failures;
    all.aer_failures += g.aer_failures;
  }
  if (macro_records > 0) all.aer_macro = macro_weighted / static_cast<double>(macro_records);
  return all;
}

RunSummary summarize(std::span<const EvalRecord> records, const NormalizationPolicy& policy,
                     const CorrectionReport* correction, const CorpusAer* aer, RunMetadata metadata) {
  if (records.empty()) throw PreconditionError("cannot summarize an empty corpus");
  GroupIndex index = index_groups(records);

  for (const auto& r : records) {
    GroupSummary& g = index.of(r.id);
    try {
      const WerBreakdown b = wer(r.reference, r.hypothesis, policy);
      g.wer.num += b.errors();
      g.wer.den += b.ref_len;
    } catch (const UndefinedWerError&) {
      ++g.wer_failures;
    }
  }

  if (correction != nullptr) {
    std::vector<std::uint64_t> successes(index.groups.size(), 0);
    for (auto& g : index.groups) g.wer_corrected = Ratio{};
    for (const auto& o : correction->outcomes) {
      GroupSummary& g = index.of(o.record_id);
      g.wer_corrected->num += o.wer_after.errors();
      g.wer_corrected->den += o.wer_after.ref_len;
      ++successes[static_cast<std::size_t>(&g - index.groups.data())];
    }
    for (const auto& f : correction->failures) ++index.of(f.record_id).correction_failures;
    for (std::size_t i = 0; i < index.groups.size(); ++i) {
      if (successes[i] == 0) index.groups[i].wer_corrected.reset();
    }
  }

  if (aer != nullptr) {
    std::vector<std::uint64_t> successes(index.groups.size(), 0);
    std::vector<double> macro_sum(index.groups.size(), 0.0);
    for (auto& g : index.groups) g.aer = Ratio{};
    for (const auto& rec : aer->records) {
      GroupSummary& g = index.of(rec.result.record_id);
      const auto i = static_cast<std::size_t>(&g - index.groups.data());
      g.aer->num += rec.result.mismatches;
      g.aer->den += rec.result.total_questions;
      macro_sum[i] += rec.result.aer();
      ++successes[i];
    }
    for (const auto& f : aer->failures) ++index.of(f.record_id).aer_failures;
    for (std::size_t i = 0; i < index.groups.size(); ++i) {
      if (successes[i] == 0) {
        index.groups[i].aer.reset();
      } else {
        index.groups[i].aer_macro = macro_sum[i] / static_cast<double>(successes[i]);
      }
    }
  }

  RunSummary summary;
  summary.metadata = std::move(metadata);
  summary.groups = std::move(index.groups);
  return summary;
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "csv") return TableFormat::Csv;
  if (name == "text" || name == "txt") return TableFormat::Text;
  if (name == "markdown" || name == "md") return TableFormat::Markdown;
  throw ConfigError("unknown table format '" + std::string(name) + "' (expected csv, text or markdown)");
}

std::string format_percent(const Ratio& r) {
  if (!r.defined()) return std::string(kAbsent);
  const std::uint64_t h = scaled_round(r, 10000);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02llu.%02llu%%", static_cast<unsigned long long>(h / 100),
                static_cast<unsigned long long>(h % 100));
  return buf;
}

std::string format_fraction(const Ratio& r) {
  if (!r.defined()) return std::string(kAbsent);
  const std::uint64_t t = scaled_round(r, 10000);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%llu.%04llu", static_cast<unsigned long long>(t / 10000),
                static_cast<unsigned long long>(t % 10000));
  return buf;
}

std::string emit_table(const RunSummary& summary, TableFormat format) {
  const std::vector<std::string> header = {"Model Name", "Dataset", "Records", "WER", "WER (corrected)", "AER",
                                           "Failures"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& g : summary.groups) {
    rows.push_back({g.model_tag, g.dataset_tag, std::to_string(g.records), format_percent(g.wer),
                    optional_percent(g.wer_corrected), optional_percent(g.aer), std::to_string(g.failures())});
  }

  std::string out;
  switch (format) {
    case TableFormat::Csv: {
      auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (i > 0) out += ',';
          out += csv_cell(cells[i]);
        }
        out += '\n';
      };
      line(header);
      for (const auto& r : rows) line(r);
      break;
    }
    case TableFormat::Markdown: {
      auto line = [&](const std::vector<std::string>& cells) {
        out += '|';
        for (const auto& c : cells) out += ' ' + md_cell(c) + " |";
        out += '\n';
      };
      line(header);
      out += '|';
      for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
      out += '\n';
      for (const auto& r : rows) line(r);
      break;
    }
    case TableFormat::Text: {
      std::vector<std::size_t> widths(header.size());
      for (std::size_t i = 0; i < header.size(); ++i) widths[i] = utf8::width(header[i]);
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], utf8::width(r[i]));
      }
      auto line = [&](const std::vector<std::string>& cells) {
        std::string l;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (i > 0) l += "  ";
          const std::string pad(widths[i] - utf8::width(cells[i]), ' ');
          l += i < 2 ? cells[i] + pad : pad + cells[i];
        }
        l.erase(l.find_last_not_of(' ') + 1);
        out += l + '\n';
      };
      line(header);
      std::vector<std::string> rule;
      for (const auto w : widths) rule.emplace_back(w, '-');
      line(rule);
      for (const auto& r : rows) line(r);
      break;
    }
  }
  return out;
}

std::string PairData::csv() const {
  std::string out = "model_tag,dataset_tag,wer,aer\n";
  for (const auto& p : points) {
    out += csv_cell(p.model_tag) + ',' + csv_cell(p.dataset_tag) + ',' + format_fraction(p.wer) + ',' +
           format_fraction(p.aer) + '\n';
  }
  return out;
}

PairData emit_pairs(const RunSummary& summary) {
  PairData data;
  for (const auto& g : summary.groups) {
    const std::string label = g.model_tag + " / " + g.dataset_tag;
    if (!g.wer.defined()) {
      data.notes.push_back("skipped " + label + ": no WER");
    } else if (!g.aer || !g.aer->defined()) {
      data.notes.push_back("skipped " + label + ": no AER");
    } else {
      data.points.push_back({g.dataset_tag, g.model_tag, g.wer, *g.aer});
    }
  }
  if (data.points.empty()) throw PreconditionError("no group has both WER and AER");
  return data;
}

std::string summary_to_json(const RunSummary& summary) {
  ordered_json doc;
  doc["format"] = "asr-eval-summary/1";
  const auto& m = summary.metadata;
  doc["metadata"] = {{"command", m.command},
                     {"policy", m.policy},
                     {"prompt_variant", m.prompt_variant},
                     {"prompt_digests", m.prompt_digests},
                     {"providers", m.providers},
                     {"parameters", m.parameters}};
  ordered_json groups = ordered_json::array();
  for (const auto& g : summary.groups) {
    ordered_json j;
    j["dataset_tag"] = g.dataset_tag;
    j["model_tag"] = g.model_tag;
    j["records"] = g.records;
    j["wer"] = ratio_json(g.wer, "errors", "ref_words");
    j["wer_corrected"] = g.wer_corrected ? ratio_json(*g.wer_corrected, "errors", "ref_words") : ordered_json();
    j["aer"] = g.aer ? ratio_json(*g.aer, "mismatches", "questions") : ordered_json();
    j["aer_macro"] = g.aer_macro ? ordered_json(*g.aer_macro) : ordered_json();
    j["failures"] = {{"wer", g.wer_failures}, {"correction", g.correction_failures}, {"aer", g.aer_failures}};
    groups.push_back(std::move(j));
  }
  doc["groups"] = std::move(groups);
  return doc.dump(2) + "\n";
}

RunSummary summary_from_json(std::string_view text) {
  try {
    const auto doc = ordered_json::parse(text);
    if (doc.value("format", "") != "asr-eval-summary/1") throw ConfigError("summary: unsupported or missing format tag");
    RunSummary s;
    if (doc.contains("metadata")) {
      const auto& m = doc.at("metadata");
      s.metadata.command = m.value("command", "");
      s.metadata.policy = m.value("policy", "");
      s.metadata.prompt_variant = m.value("prompt_variant", "");
      if (m.contains("prompt_digests")) {
        s.metadata.prompt_digests = m.at("prompt_digests").get<std::map<std::string, std::string>>();
      }
      if (m.contains("providers")) {
        s.metadata.providers = m.at("providers").get<std::map<std::string, std::map<std::string, std::string>>>();
      }
      if (m.contains("parameters")) {
        s.metadata.parameters = m.at("parameters").get<std::map<std::string, std::string>>();
      }
    }
    for (const auto& j : doc.at("groups")) {
      GroupSummary g;
      g.dataset_tag = j.at("dataset_tag").get<std::string>();
      g.model_tag = j.at("model_tag").get<std::string>();
      g.records = j.at("records").get<std::uint64_t>();
      g.wer = ratio_from(j.at("wer"), "errors", "ref_words");
      if (j.contains("wer_corrected") && !j.at("wer_corrected").is_null()) {
        g.wer_corrected = ratio_from(j.at("wer_corrected"), "errors", "ref_words");
      }
      if (j.contains("aer") && !j.at("aer").is_null()) g.aer = ratio_from(j.at("aer"), "mismatches", "questions");
      if (j.contains("aer_macro") && !j.at("aer_macro").is_null()) g.aer_macro = j.at("aer_macro").get<double>();
      if (j.contains("failures")) {
        const auto& f = j.at("failures");
        g.wer_failures = f.value("wer", std::uint64_t{0});
        g.correction_failures = f.value("correction", std::uint64_t{0});
        g.aer_failures = f.value("aer", std::uint64_t{0});
      }
      if (g.aer && g.aer->num > g.aer->den) throw ConfigError("summary: AER above 1 in group " + g.model_tag);
      s.groups.push_back(std::move(g));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("summary: ") + e.what());
  }
}

std::string record_details_jsonl(std::span<const EvalRecord> records, const NormalizationPolicy& policy,
                                 const CorrectionReport* correction, const CorpusAer* aer) {
  std::unordered_map<std::string, const CorrectionOutcome*> corrected;
  std::unordered_map<std::string, const RecordAer*> scored;
  std::unordered_map<std::string, std::vector<const RecordFailure*>> failed;
  if (correction != nullptr) {
    for (const auto& o : correction->outcomes) corrected[o.record_id] = &o;
    for (const auto& f : correction->failures) failed[f.record_id].push_back(&f);
  }
  if (aer != nullptr) {
    for (const auto& r : aer->records) scored[r.result.record_id] = &r;
    for (const auto& f : aer->failures) failed[f.record_id].push_back(&f);
  }

  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["dataset_tag"] = r.dataset_tag;
    j["model_tag"] = r.model_tag;
    try {
      j["wer"] = breakdown_json(wer(r.reference, r.hypothesis, policy));
    } catch (const UndefinedWerError&) {
      j["wer"] = nullptr;
    }
    if (const auto it = corrected.find(r.id); it != corrected.end()) {
      j["corrected_hypothesis"] = it->second->corrected_hypothesis;
      j["wer_corrected"] = breakdown_json(it->second->wer_after);
    }
    if (const auto it = scored.find(r.id); it != scored.end()) {
      j["aer"] = {{"mismatches", it->second->result.mismatches},
                  {"total_questions", it->second->result.total_questions}};
    }
    if (const auto it = failed.find(r.id); it != failed.end()) {
      ordered_json list = ordered_json::array();
      for (const auto* f : it->second) {
        list.push_back({{"stage", f->stage}, {"error_kind", f->error_kind}, {"message", f->message}});
      }
      j["failures"] = std::move(list);
    }
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace asreval
