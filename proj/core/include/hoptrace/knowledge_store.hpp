#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoptrace/embedding.hpp"
#include "hoptrace/types.hpp"

namespace hoptrace {

struct KnowledgeItem {
  std::string id;
  Modality modality = Modality::kText;
  std::string payload;  // passage body, or image caption
  std::optional<std::string> image_path;
  Vector embedding;  // unit norm
  std::optional<std::string> cluster_id;

  bool operator==(const KnowledgeItem&) const = default;
};

nlohmann::ordered_json item_to_json(const KnowledgeItem& item);

enum class ActionKind { kTextSearchTextQuery, kImageSearchTextQuery, kImageSearchImageQuery };

std::string_view to_string(ActionKind kind);
ActionKind parse_action_kind(std::string_view s);
/// Modality of the items an action searches over.
Modality target_modality(ActionKind kind);

struct RetrievalAction {
  ActionKind kind = ActionKind::kTextSearchTextQuery;
  std::optional<std::string> query_text;
  std::optional<std::string> query_image_id;

  static RetrievalAction text_search(std::string query);
  static RetrievalAction image_search_text(std::string query);
  static RetrievalAction image_search_image(std::string image_id);

  bool operator==(const RetrievalAction&) const = default;
};

struct RetrievalHit {
  std::string item_id;
  double similarity = 0.0;
  int rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

using Scope = std::unordered_set<std::string>;

struct ModalityCounts {
  std::size_t text = 0;
  std::size_t image = 0;
};

/// Write-once multimodal store with exact cosine retrieval. Immutable after
/// construction, so concurrent `retrieve` calls need no locking.
class KnowledgeStore {
 public:
  /// Reads a corpus manifest (one item per line). Items without an
  /// `embedding` are embedded with `provider` (captions for images).
  static KnowledgeStore ingest(const std::string& manifest_path,
                               std::shared_ptr<const EmbeddingProvider> provider);
  static KnowledgeStore from_items(std::vector<KnowledgeItem> items,
                                   std::shared_ptr<const EmbeddingProvider> provider);

  /// Persisted form: a metadata line followed by canonical item lines.
  void save(const std::string& path) const;
  static KnowledgeStore load(const std::string& path,
                             std::shared_ptr<const EmbeddingProvider> provider = nullptr);

  std::size_t size() const { return items_.size(); }
  std::size_t dimension() const { return dimension_; }
  ModalityCounts counts() const;
  const std::vector<KnowledgeItem>& items() const { return items_; }
  const KnowledgeItem* find(const std::string& id) const;
  const KnowledgeItem& at(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }

  /// sha256 over the canonical item serialization.
  const std::string& content_hash() const { return hash_; }
  /// Which source produced image vectors: "precomputed", "caption", "image_file" or "mixed".
  const std::string& image_embedding_source() const { return image_source_; }
  const std::string& embedder() const { return embedder_; }
  const EmbeddingProvider* provider() const { return provider_.get(); }

  std::vector<RetrievalHit> retrieve(const RetrievalAction& action, std::size_t k,
                                     const Scope* scope = nullptr) const;
  std::vector<RetrievalHit> retrieve_vector(const Vector& query, Modality target, std::size_t k,
                                            const Scope* scope = nullptr) const;

  /// Cosine between two stored items; 1.0 exactly when the ids are equal.
  double similarity(const std::string& a, const std::string& b) const;

  /// Items sharing a cluster id, in store order.
  std::vector<const KnowledgeItem*> cluster_members(const std::string& cluster_id) const;

 private:
  KnowledgeStore() = default;
  void finalize();

  std::vector<KnowledgeItem> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  std::size_t dimension_ = 0;
  std::string hash_;
  std::string image_source_ = "precomputed";
  std::string embedder_;
};

using KnowledgeStoreHandle = KnowledgeStore;

}  // namespace hoptrace
