#pragma once

// Knowledge-base store: Wikipedia-style paragraph records and
// Wikidata-style entity records ingested from newline-delimited JSON
// into a per-language append-only log, plus the String-to-Qid and
// Qid-to-Types lookup tables with English type fallback.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragtag/serial.hpp"
#include "ragtag/text.hpp"

namespace ragtag::kb {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kStoreVersion = 1;

struct KbDocument {
  std::int64_t doc_id = 0;
  std::string title;
  std::string text;
  std::string language;
};

struct KbEntity {
  std::string qid;
  std::string label;
  std::vector<std::string> aliases;
  std::string description;
  std::vector<std::string> types;  // instance_of then subclass_of, first-seen dedup
  std::string language;
};

struct IngestStats {
  std::size_t ingested = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

struct TypedMatch {
  std::string qid;
  std::vector<std::string> types;
  std::string description;
};

/// One language's String-to-Qid / Qid-to-Types tables.
class EntityLookup {
 public:
  EntityLookup() = default;
  explicit EntityLookup(std::string language) : language_(std::move(language)) {}

  void add(const KbEntity& e) {
    auto& qids = by_surface_[text::normalize_surface(e.label)];
    insert_sorted(qids, e.qid);
    for (const auto& a : e.aliases) insert_sorted(by_surface_[text::normalize_surface(a)], e.qid);
    types_[e.qid] = e.types;
    desc_[e.qid] = e.description;
  }

  bool has_qid(const std::string& qid) const { return types_.count(qid) != 0; }

  const std::vector<std::string>* qids_for(const std::string& normalized_surface) const {
    auto it = by_surface_.find(normalized_surface);
    return it == by_surface_.end() ? nullptr : &it->second;
  }

  const std::vector<std::string>* types_of(const std::string& qid) const {
    auto it = types_.find(qid);
    return it == types_.end() ? nullptr : &it->second;
  }

  const std::string& description_of(const std::string& qid) const {
    static const std::string kEmpty;
    auto it = desc_.find(qid);
    return it == desc_.end() ? kEmpty : it->second;
  }

  const std::string& language() const { return language_; }
  std::size_t entity_count() const { return types_.size(); }
  std::size_t surface_count() const { return by_surface_.size(); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write lookup: " + path);
    out << "RGLKP1";
    serial::put_str(out, language_);
    serial::put_u64(out, by_surface_.size());
    // std::map iteration keeps the file byte-stable across rebuilds
    for (const auto& [surface, qids] : std::map<std::string, std::vector<std::string>>(
             by_surface_.begin(), by_surface_.end())) {
      serial::put_str(out, surface);
      serial::put_u64(out, qids.size());
      for (const auto& q : qids) serial::put_str(out, q);
    }
    serial::put_u64(out, types_.size());
    for (const auto& [qid, types] :
         std::map<std::string, std::vector<std::string>>(types_.begin(), types_.end())) {
      serial::put_str(out, qid);
      serial::put_u64(out, types.size());
      for (const auto& t : types) serial::put_str(out, t);
      serial::put_str(out, description_of(qid));
    }
  }

  static EntityLookup load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lookup: " + path);
    serial::check_magic(in, "RGLKP1", path);
    EntityLookup lk;
    lk.language_ = serial::get_str(in);
    const std::uint64_t ns = serial::get_u64(in);
    for (std::uint64_t i = 0; i < ns; ++i) {
      std::string surface = serial::get_str(in);
      const std::uint64_t nq = serial::get_u64(in);
      std::vector<std::string> qids(nq);
      for (auto& q : qids) q = serial::get_str(in);
      lk.by_surface_.emplace(std::move(surface), std::move(qids));
    }
    const std::uint64_t ne = serial::get_u64(in);
    for (std::uint64_t i = 0; i < ne; ++i) {
      std::string qid = serial::get_str(in);
      const std::uint64_t nt = serial::get_u64(in);
      std::vector<std::string> types(nt);
      for (auto& t : types) t = serial::get_str(in);
      lk.desc_[qid] = serial::get_str(in);
      lk.types_[std::move(qid)] = std::move(types);
    }
    return lk;
  }

 private:
  static void insert_sorted(std::vector<std::string>& v, const std::string& s) {
    auto it = std::lower_bound(v.begin(), v.end(), s);
    if (it == v.end() || *it != s) v.insert(it, s);
  }

  std::string language_;
  std::unordered_map<std::string, std::vector<std::string>> by_surface_;
  std::unordered_map<std::string, std::vector<std::string>> types_;
  std::unordered_map<std::string, std::string> desc_;
};

namespace detail {

inline std::optional<KbDocument> parse_document(const json& j, const std::string& language) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer()) return std::nullopt;
  if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty())
    return std::nullopt;
  KbDocument d;
  d.doc_id = j["id"].get<std::int64_t>();
  d.title = j.value("title", "");
  d.text = j["text"].get<std::string>();
  d.language = language;
  return d;
}

inline std::optional<KbEntity> parse_entity(const json& j, const std::string& language) {
  if (!j.is_object()) return std::nullopt;
  if (!j.contains("qid") || !j["qid"].is_string() || j["qid"].get<std::string>().empty())
    return std::nullopt;
  if (!j.contains("label") || !j["label"].is_string() || j["label"].get<std::string>().empty())
    return std::nullopt;
  KbEntity e;
  e.qid = j["qid"].get<std::string>();
  e.label = j["label"].get<std::string>();
  if (j.contains("aliases") && j["aliases"].is_array())
    for (const auto& a : j["aliases"])
      if (a.is_string()) e.aliases.push_back(a.get<std::string>());
  e.description = j.value("description", "");
  auto take_types = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) return;
    for (const auto& t : j[key])
      if (t.is_string()) {
        const auto s = t.get<std::string>();
        if (std::find(e.types.begin(), e.types.end(), s) == e.types.end()) e.types.push_back(s);
      }
  };
  take_types("instance_of");
  take_types("subclass_of");
  e.language = language;
  return e;
}

inline json document_record(const KbDocument& d) {
  json j;
  j["id"] = d.doc_id;
  j["title"] = d.title;
  j["text"] = d.text;
  return j;
}

inline json entity_record(const KbEntity& e) {
  json j;
  j["qid"] = e.qid;
  j["label"] = e.label;
  j["aliases"] = e.aliases;
  j["description"] = e.description;
  j["instance_of"] = e.types;  // renormalized: merged list under instance_of
  j["subclass_of"] = json::array();
  return j;
}

}  // namespace detail

/// On-disk store: per-language jsonl logs plus rebuildable key indexes.
/// Layout under the store directory:
///   meta.json
///   documents.<lang>.jsonl  documents.<lang>.ids.bin
///   entities.<lang>.jsonl   entities.<lang>.lookup.bin
class KbStore {
 public:
  static KbStore open(const std::string& dir) {
    fs::create_directories(dir);
    KbStore store;
    store.dir_ = dir;
    store.load_meta();
    return store;
  }

  const std::string& dir() const { return dir_; }

  IngestStats ingest_documents(const std::string& path, const std::string& language) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open document file: " + path);
    IngestStats stats;
    std::vector<KbDocument> batch;
    std::set<std::int64_t> ids = load_doc_ids(language);
    std::set<std::int64_t> batch_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      auto doc = j.is_discarded() ? std::nullopt : detail::parse_document(j, language);
      if (!doc) {
        ++stats.skipped;
        stats.warnings.push_back(path + ":" + std::to_string(lineno) + ": malformed document record, skipped");
        continue;
      }
      if (ids.count(doc->doc_id) || batch_ids.count(doc->doc_id))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate doc_id " +
                                 std::to_string(doc->doc_id));
      batch_ids.insert(doc->doc_id);
      batch.push_back(std::move(*doc));
    }
    // All-or-nothing append keeps the store unchanged on rejection.
    std::ofstream log(doc_log(language), std::ios::app | std::ios::binary);
    if (!log) throw std::runtime_error("cannot append to store log");
    for (const auto& d : batch) {
      log << detail::document_record(d).dump() << '\n';
      ids.insert(d.doc_id);
    }
    log.close();
    save_doc_ids(language, ids);
    doc_counts_[language] = ids.size();
    save_meta();
    stats.ingested = batch.size();
    return stats;
  }

  IngestStats ingest_entities(const std::string& path, const std::string& language) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open entity file: " + path);
    IngestStats stats;
    std::vector<KbEntity> batch;
    std::set<std::string> qids = load_entity_qids(language);
    std::set<std::string> batch_qids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      auto ent = j.is_discarded() ? std::nullopt : detail::parse_entity(j, language);
      if (!ent) {
        ++stats.skipped;
        stats.warnings.push_back(path + ":" + std::to_string(lineno) + ": malformed entity record, skipped");
        continue;
      }
      if (qids.count(ent->qid) || batch_qids.count(ent->qid))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate qid " + ent->qid);
      batch_qids.insert(ent->qid);
      batch.push_back(std::move(*ent));
    }
    std::ofstream log(entity_log(language), std::ios::app | std::ios::binary);
    if (!log) throw std::runtime_error("cannot append to store log");
    for (const auto& e : batch) log << detail::entity_record(e).dump() << '\n';
    log.close();
    EntityLookup lk = build_lookup_from_log(language);
    lk.save(lookup_path(language));
    entity_counts_[language] = lk.entity_count();
    save_meta();
    stats.ingested = batch.size();
    return stats;
  }

  std::size_t document_count(const std::string& language) const {
    auto it = doc_counts_.find(language);
    return it == doc_counts_.end() ? 0 : it->second;
  }

  std::vector<KbDocument> documents(const std::string& language) const {
    std::vector<KbDocument> out;
    std::ifstream in(doc_log(language));
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto doc = detail::parse_document(json::parse(line), language);
      if (doc) out.push_back(std::move(*doc));
    }
    return out;
  }

  std::vector<KbEntity> entities(const std::string& language) const {
    std::vector<KbEntity> out;
    std::ifstream in(entity_log(language));
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ent = detail::parse_entity(json::parse(line), language);
      if (ent) out.push_back(std::move(*ent));
    }
    return out;
  }

  EntityLookup entity_lookup(const std::string& language) const {
    if (fs::exists(lookup_path(language))) return EntityLookup::load(lookup_path(language));
    return build_lookup_from_log(language);
  }

  std::vector<std::string> document_languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, n] : doc_counts_) out.push_back(lang);
    return out;
  }
  std::vector<std::string> entity_languages() const {
    std::vector<std::string> out;
    for (const auto& [lang, n] : entity_counts_) out.push_back(lang);
    return out;
  }

 private:
  std::string doc_log(const std::string& lang) const {
    return (fs::path(dir_) / ("documents." + lang + ".jsonl")).string();
  }
  std::string doc_ids_path(const std::string& lang) const {
    return (fs::path(dir_) / ("documents." + lang + ".ids.bin")).string();
  }
  std::string entity_log(const std::string& lang) const {
    return (fs::path(dir_) / ("entities." + lang + ".jsonl")).string();
  }
  std::string lookup_path(const std::string& lang) const {
    return (fs::path(dir_) / ("entities." + lang + ".lookup.bin")).string();
  }

  std::set<std::int64_t> load_doc_ids(const std::string& lang) const {
    std::set<std::int64_t> ids;
    std::ifstream in(doc_ids_path(lang), std::ios::binary);
    if (in) {
      serial::check_magic(in, "RGDID1", doc_ids_path(lang));
      const std::uint64_t n = serial::get_u64(in);
      for (std::uint64_t i = 0; i < n; ++i) ids.insert(serial::get_i64(in));
      return ids;
    }
    for (const auto& d : documents(lang)) ids.insert(d.doc_id);
    return ids;
  }

  void save_doc_ids(const std::string& lang, const std::set<std::int64_t>& ids) const {
    std::ofstream out(doc_ids_path(lang), std::ios::binary);
    out << "RGDID1";
    serial::put_u64(out, ids.size());
    for (auto id : ids) serial::put_i64(out, id);
  }

  std::set<std::string> load_entity_qids(const std::string& lang) const {
    std::set<std::string> qids;
    for (const auto& e : entities(lang)) qids.insert(e.qid);
    return qids;
  }

  EntityLookup build_lookup_from_log(const std::string& lang) const {
    EntityLookup lk(lang);
    for (const auto& e : entities(lang)) lk.add(e);
    return lk;
  }

  void load_meta() {
    const auto meta_path = fs::path(dir_) / "meta.json";
    if (!fs::exists(meta_path)) return;
    std::ifstream in(meta_path);
    json j = json::parse(in);
    if (j.value("version", 0) != kStoreVersion)
      throw std::runtime_error("kb store version mismatch at " + dir_);
    const json docs = j.value("documents", json::object());
    for (auto& [k, v] : docs.items()) doc_counts_[k] = v.get<std::size_t>();
    const json ents = j.value("entities", json::object());
    for (auto& [k, v] : ents.items()) entity_counts_[k] = v.get<std::size_t>();
  }

  void save_meta() const {
    json j;
    j["version"] = kStoreVersion;
    j["documents"] = json::object();
    for (const auto& [k, v] : doc_counts_) j["documents"][k] = v;
    j["entities"] = json::object();
    for (const auto& [k, v] : entity_counts_) j["entities"][k] = v;
    std::ofstream out(fs::path(dir_) / "meta.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

  std::string dir_;
  std::map<std::string, std::size_t> doc_counts_;
  std::map<std::string, std::size_t> entity_counts_;
};

/// Builds one language's lookup straight from an entity record file.
inline EntityLookup build_entity_lookup(const std::string& path, const std::string& language,
                                        IngestStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open entity file: " + path);
  EntityLookup lk(language);
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    auto ent = j.is_discarded() ? std::nullopt : detail::parse_entity(j, language);
    if (!ent) {
      if (stats) {
        ++stats->skipped;
        stats->warnings.push_back(path + ":" + std::to_string(lineno) + ": malformed entity record, skipped");
      }
      continue;
    }
    if (!seen.insert(ent->qid).second)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate qid " + ent->qid);
    lk.add(*ent);
    if (stats) ++stats->ingested;
  }
  return lk;
}

/// Exact normalized-surface match in the language table. Matched qids with
/// an empty type list take the English types when a non-empty English entry
/// exists for the same qid. Returns matches ordered by qid.
inline std::vector<TypedMatch> types_with_fallback(const EntityLookup& table,
                                                   const EntityLookup* english,
                                                   std::string_view surface) {
  std::vector<TypedMatch> out;
  const auto* qids = table.qids_for(text::normalize_surface(surface));
  if (!qids) return out;
  for (const auto& qid : *qids) {
    TypedMatch m;
    m.qid = qid;
    if (const auto* t = table.types_of(qid)) m.types = *t;
    if (m.types.empty() && english != nullptr && english != &table) {
      if (const auto* et = english->types_of(qid); et && !et->empty()) m.types = *et;
    }
    m.description = table.description_of(qid);
    out.push_back(std::move(m));
  }
  return out;
}

/// Per-language lookups with the cross-language fallback wired in.
class EntityCatalog {
 public:
  void add(EntityLookup lk) { by_lang_[lk.language()] = std::move(lk); }

  bool has(const std::string& language) const { return by_lang_.count(language) != 0; }

  const EntityLookup* lookup(const std::string& language) const {
    auto it = by_lang_.find(language);
    return it == by_lang_.end() ? nullptr : &it->second;
  }

  std::vector<TypedMatch> types_with_fallback(std::string_view surface,
                                              const std::string& language) const {
    const auto* table = lookup(language);
    if (!table) return {};
    const EntityLookup* english = language == "en" ? nullptr : lookup("en");
    return kb::types_with_fallback(*table, english, surface);
  }

 private:
  std::map<std::string, EntityLookup> by_lang_;
};

}  // namespace ragtag::kb
