#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hoptrace/types.hpp"

namespace hoptrace {

using Vector = std::vector<double>;

/// Scales `v` to unit L2 norm. A zero vector becomes the first basis vector.
void normalize_in_place(Vector& v);
double dot(const Vector& a, const Vector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;
  /// Short reproducible description recorded in run metadata, e.g. "hash:64:7".
  virtual std::string describe() const = 0;
  /// Unit vectors, one per input. Image inputs are captions or file references.
  virtual std::vector<Vector> embed_batch(const std::vector<std::string>& inputs,
                                          Modality modality) const = 0;

  Vector embed(const std::string& input, Modality modality = Modality::kText) const;
};

/// Offline, seeded bag-of-tokens embedding. Scheme (see docs/formats.md):
///   tokens  = maximal runs of [a-z0-9] or bytes >= 0x80 after ASCII lowercasing
///   per token w: state = fnv1a64(w) ^ seed; for i in [0, dim):
///       x = splitmix64(state); v[i] += (x >> 11) * 2^-53 * 2 - 1
///   result  = sum over tokens, L2-normalized; no tokens -> e_0
/// Modality is ignored, so captions and text queries share one space.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed = 0);

  std::size_t dimension() const override { return dimension_; }
  std::string describe() const override;
  std::vector<Vector> embed_batch(const std::vector<std::string>& inputs,
                                  Modality modality) const override;

  static std::vector<std::string> tokenize(const std::string& text);

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct HttpEndpointOptions {
  std::string url;  // http://host:port/path
  int timeout_seconds = 30;
  int retries = 2;
};

/// Wire client: POST {"inputs":[...],"modality":"text"|"image"} and expects
/// {"vectors":[[...], ...]} back.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpEndpointOptions options, std::size_t dimension);

  std::size_t dimension() const override { return dimension_; }
  std::string describe() const override { return options_.url; }
  std::vector<Vector> embed_batch(const std::vector<std::string>& inputs,
                                  Modality modality) const override;

 private:
  HttpEndpointOptions options_;
  std::size_t dimension_;
};

/// "hash:<dim>[:<seed>]" or "http://host:port/path#<dim>".
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const std::string& spec);

}  // namespace hoptrace
