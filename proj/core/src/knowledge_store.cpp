#include "hoptrace/knowledge_store.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hoptrace/error.hpp"
#include "hoptrace/hashing.hpp"
#include "hoptrace/jsonl.hpp"

namespace hoptrace {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kTextSearchTextQuery: return "TextSearchTextQuery";
    case ActionKind::kImageSearchTextQuery: return "ImageSearchTextQuery";
    case ActionKind::kImageSearchImageQuery: return "ImageSearchImageQuery";
  }
  return "?";
}

ActionKind parse_action_kind(std::string_view s) {
  if (s == "TextSearchTextQuery") return ActionKind::kTextSearchTextQuery;
  if (s == "ImageSearchTextQuery") return ActionKind::kImageSearchTextQuery;
  if (s == "ImageSearchImageQuery") return ActionKind::kImageSearchImageQuery;
  throw Error(ErrorCode::kParseError, "unknown action kind '" + std::string(s) + "'");
}

Modality target_modality(ActionKind kind) {
  return kind == ActionKind::kTextSearchTextQuery ? Modality::kText : Modality::kImage;
}

RetrievalAction RetrievalAction::text_search(std::string query) {
  return {ActionKind::kTextSearchTextQuery, std::move(query), std::nullopt};
}
RetrievalAction RetrievalAction::image_search_text(std::string query) {
  return {ActionKind::kImageSearchTextQuery, std::move(query), std::nullopt};
}
RetrievalAction RetrievalAction::image_search_image(std::string image_id) {
  return {ActionKind::kImageSearchImageQuery, std::nullopt, std::move(image_id)};
}

ojson item_to_json(const KnowledgeItem& item) {
  ojson j;
  j["id"] = item.id;
  j["modality"] = std::string(to_string(item.modality));
  j["payload"] = item.payload;
  if (item.image_path) j["image_path"] = *item.image_path;
  if (item.cluster_id) j["cluster_id"] = *item.cluster_id;
  j["embedding"] = item.embedding;
  return j;
}

namespace {

struct ManifestRecord {
  KnowledgeItem item;
  bool has_embedding = false;
};

ManifestRecord record_from_json(const ojson& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "manifest record must be an object");
  ManifestRecord r;
  auto get_str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw Error(ErrorCode::kParseError, std::string("field '") + key + "' must be a string");
  };
  auto id = get_str("id");
  auto modality = get_str("modality");
  if (!id || id->empty()) throw Error(ErrorCode::kParseError, "manifest record without id");
  if (!modality) throw Error(ErrorCode::kParseError, "item '" + *id + "' has no modality");
  r.item.id = *id;
  r.item.modality = parse_modality(*modality);
  r.item.payload = get_str("payload").value_or("");
  r.item.image_path = get_str("image_path");
  r.item.cluster_id = get_str("cluster_id");
  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    r.item.embedding = it->get<Vector>();
    r.has_embedding = true;
  }
  return r;
}

}  // namespace

KnowledgeStore KnowledgeStore::from_items(std::vector<KnowledgeItem> items,
                                          std::shared_ptr<const EmbeddingProvider> provider) {
  KnowledgeStore store;
  store.items_ = std::move(items);
  store.provider_ = std::move(provider);
  if (store.provider_) store.embedder_ = store.provider_->describe();
  store.finalize();
  return store;
}

KnowledgeStore KnowledgeStore::ingest(const std::string& manifest_path,
                                      std::shared_ptr<const EmbeddingProvider> provider) {
  std::vector<ManifestRecord> records;
  for_each_line(manifest_path, [&](std::string_view line, std::size_t n) {
    try {
      records.push_back(record_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  manifest_path + ":" + std::to_string(n) + ": " + e.what());
    }
  });

  // Batch the embedding calls per modality; ids are checked first so a
  // duplicate never costs a provider round-trip.
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.item.id).second) {
      throw Error(ErrorCode::kDuplicateId, "item id '" + r.item.id + "' appears twice");
    }
  }
  std::set<std::string> image_sources;
  for (Modality m : {Modality::kText, Modality::kImage}) {
    std::vector<std::size_t> todo;
    std::vector<std::string> inputs;
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& r = records[i];
      if (r.item.modality != m) continue;
      if (r.has_embedding) {
        if (m == Modality::kImage) image_sources.insert("precomputed");
        continue;
      }
      if (!provider) {
        throw Error(ErrorCode::kMissingEmbedding,
                    "item '" + r.item.id + "' has no embedding and no provider is configured");
      }
      todo.push_back(i);
      if (m == Modality::kImage && r.item.payload.empty() && r.item.image_path) {
        inputs.push_back(*r.item.image_path);
        image_sources.insert("image_file");
      } else {
        inputs.push_back(r.item.payload);
        if (m == Modality::kImage) image_sources.insert("caption");
      }
    }
    if (todo.empty()) continue;
    auto vectors = provider->embed_batch(inputs, m);
    for (std::size_t i = 0; i < todo.size(); ++i) records[todo[i]].item.embedding = std::move(vectors[i]);
  }

  std::vector<KnowledgeItem> items;
  items.reserve(records.size());
  for (auto& r : records) items.push_back(std::move(r.item));
  KnowledgeStore store = from_items(std::move(items), std::move(provider));
  if (image_sources.size() == 1) {
    store.image_source_ = *image_sources.begin();
  } else if (image_sources.size() > 1) {
    store.image_source_ = "mixed";
  }
  return store;
}

void KnowledgeStore::finalize() {
  index_.clear();
  dimension_ = 0;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& item = items_[i];
    if (!index_.emplace(item.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "item id '" + item.id + "' appears twice");
    }
    if (item.embedding.empty()) {
      throw Error(ErrorCode::kMissingEmbedding, "item '" + item.id + "' has no embedding");
    }
    if (dimension_ == 0) dimension_ = item.embedding.size();
    if (item.embedding.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch, "item '" + item.id + "' has " +
                                                     std::to_string(item.embedding.size()) +
                                                     " dims, store has " + std::to_string(dimension_));
    }
    double sq = 0.0;
    for (double x : item.embedding) sq += x * x;
    if (sq == 0.0 || !std::isfinite(sq)) {
      throw Error(ErrorCode::kInvalidEmbedding, "item '" + item.id + "' has a degenerate embedding");
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) normalize_in_place(item.embedding);
  }
  if (provider_ && dimension_ != 0 && provider_->dimension() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "provider dimension " + std::to_string(provider_->dimension()) +
                    " does not match store dimension " + std::to_string(dimension_));
  }
  std::string canon = std::to_string(dimension_) + "\n";
  for (const auto& item : items_) {
    canon += item_to_json(item).dump();
    canon += '\n';
  }
  hash_ = sha256_hex(canon);
}

void KnowledgeStore::save(const std::string& path) const {
  const auto c = counts();
  ojson meta;
  meta["store_version"] = 1;
  meta["dimension"] = dimension_;
  meta["embedder"] = embedder_;
  meta["image_embedding_source"] = image_source_;
  meta["counts"] = {{"text", c.text}, {"image", c.image}};
  meta["content_hash"] = hash_;
  std::string buf = ojson{{"meta", meta}}.dump() + "\n";
  for (const auto& item : items_) {
    buf += item_to_json(item).dump();
    buf += '\n';
  }
  write_file(path, buf);
}

KnowledgeStore KnowledgeStore::load(const std::string& path,
                                    std::shared_ptr<const EmbeddingProvider> provider) {
  std::vector<KnowledgeItem> items;
  ojson meta;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(n) + ": " + e.what());
    }
    if (n == 1 && j.contains("meta")) {
      meta = j["meta"];
      return;
    }
    auto r = record_from_json(j);
    if (!r.has_embedding) throw Error(ErrorCode::kMissingEmbedding, "stored item '" + r.item.id + "'");
    items.push_back(std::move(r.item));
  });
  std::string embedder = meta.value("embedder", std::string());
  if (!provider && !embedder.empty()) {
    try {
      provider = make_embedding_provider(embedder);
    } catch (const Error&) {
      // Unknown providers leave text queries unavailable; image-to-image
      // retrieval and similarity lookups still work.
    }
  }
  KnowledgeStore store = from_items(std::move(items), std::move(provider));
  store.embedder_ = embedder.empty() ? store.embedder_ : embedder;
  store.image_source_ = meta.value("image_embedding_source", std::string("precomputed"));
  if (meta.contains("content_hash") && meta["content_hash"] != store.hash_) {
    throw Error(ErrorCode::kParseError, path + ": content hash mismatch");
  }
  return store;
}

ModalityCounts KnowledgeStore::counts() const {
  ModalityCounts c;
  for (const auto& item : items_) (item.modality == Modality::kText ? c.text : c.image)++;
  return c;
}

const KnowledgeItem* KnowledgeStore::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

const KnowledgeItem& KnowledgeStore::at(const std::string& id) const {
  const auto* item = find(id);
  if (!item) throw Error(ErrorCode::kDanglingEvidence, "no item with id '" + id + "'");
  return *item;
}

std::vector<RetrievalHit> KnowledgeStore::retrieve(const RetrievalAction& action, std::size_t k,
                                                   const Scope* scope) const {
  Vector query;
  switch (action.kind) {
    case ActionKind::kTextSearchTextQuery:
    case ActionKind::kImageSearchTextQuery: {
      if (!action.query_text) {
        throw Error(ErrorCode::kInvalidArgument, std::string(to_string(action.kind)) + " needs query_text");
      }
      if (!provider_) throw Error(ErrorCode::kProviderUnavailable, "no query embedder configured");
      query = provider_->embed(*action.query_text, Modality::kText);
      break;
    }
    case ActionKind::kImageSearchImageQuery: {
      if (!action.query_image_id) {
        throw Error(ErrorCode::kInvalidArgument, "ImageSearchImageQuery needs query_image_id");
      }
      const auto* item = find(*action.query_image_id);
      if (!item || item->modality != Modality::kImage) {
        throw Error(ErrorCode::kUnknownImageId, "'" + *action.query_image_id + "'");
      }
      query = item->embedding;
      break;
    }
  }
  return retrieve_vector(query, target_modality(action.kind), k, scope);
}

std::vector<RetrievalHit> KnowledgeStore::retrieve_vector(const Vector& query, Modality target,
                                                          std::size_t k, const Scope* scope) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  const auto c = counts();
  if ((target == Modality::kText ? c.text : c.image) == 0) {
    throw Error(ErrorCode::kEmptyStoreForModality, std::string(to_string(target)));
  }
  if (query.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch, "query has " + std::to_string(query.size()) +
                                                   " dims, store has " + std::to_string(dimension_));
  }
  std::vector<RetrievalHit> hits;
  for (const auto& item : items_) {
    if (item.modality != target) continue;
    if (scope && !scope->count(item.id)) continue;
    hits.push_back({item.id, dot(query, item.embedding), 0});
  }
  auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.item_id < b.item_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  for (std::size_t i = 0; i < n; ++i) hits[i].rank = static_cast<int>(i + 1);
  return hits;
}

double KnowledgeStore::similarity(const std::string& a, const std::string& b) const {
  if (a == b) {
    at(a);
    return 1.0;
  }
  return dot(at(a).embedding, at(b).embedding);
}

std::vector<const KnowledgeItem*> KnowledgeStore::cluster_members(const std::string& cluster_id) const {
  std::vector<const KnowledgeItem*> out;
  for (const auto& item : items_) {
    if (item.cluster_id && *item.cluster_id == cluster_id) out.push_back(&item);
  }
  return out;
}

}  // namespace hoptrace
