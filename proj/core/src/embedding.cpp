#include "hoptrace/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "hoptrace/error.hpp"
#include "hoptrace/hashing.hpp"
#include "http_post.hpp"

namespace hoptrace {

void normalize_in_place(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vector EmbeddingProvider::embed(const std::string& input, Modality modality) const {
  auto out = embed_batch({input}, modality);
  return std::move(out.front());
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be > 0");
}

std::string HashEmbeddingProvider::describe() const {
  return "hash:" + std::to_string(dimension_) + ":" + std::to_string(seed_);
}

std::vector<std::string> HashEmbeddingProvider::tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<Vector> HashEmbeddingProvider::embed_batch(const std::vector<std::string>& inputs,
                                                       Modality /*modality*/) const {
  std::vector<Vector> out;
  out.reserve(inputs.size());
  for (const auto& input : inputs) {
    Vector v(dimension_, 0.0);
    for (const auto& tok : tokenize(input)) {
      std::uint64_t state = fnv1a64(tok) ^ seed_;
      for (std::size_t i = 0; i < dimension_; ++i) {
        const std::uint64_t x = splitmix64(state);
        v[i] += static_cast<double>(x >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      }
    }
    normalize_in_place(v);
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpointOptions options, std::size_t dimension)
    : options_(std::move(options)), dimension_(dimension) {}

std::vector<Vector> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& inputs,
                                                       Modality modality) const {
  nlohmann::json req = {{"inputs", inputs}, {"modality", std::string(to_string(modality))}};
  nlohmann::json reply;
  try {
    reply = detail::post_json(options_.url, req, options_.timeout_seconds, options_.retries);
  } catch (const Error& e) {
    throw Error(ErrorCode::kProviderUnavailable, e.what());
  }
  if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
      reply["vectors"].size() != inputs.size()) {
    throw Error(ErrorCode::kProviderUnavailable, "reply lacks one vector per input");
  }
  std::vector<Vector> out;
  for (const auto& jv : reply["vectors"]) {
    Vector v = jv.get<Vector>();
    if (v.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch, "provider returned " + std::to_string(v.size()) +
                                                     " dims, expected " +
                                                     std::to_string(dimension_));
    }
    normalize_in_place(v);
    out.push_back(std::move(v));
  }
  return out;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const std::string& spec) {
  if (spec.rfind("hash:", 0) == 0) {
    std::string rest = spec.substr(5);
    auto colon = rest.find(':');
    try {
      const auto dim = std::stoul(rest.substr(0, colon));
      const std::uint64_t seed = colon == std::string::npos ? 0 : std::stoull(rest.substr(colon + 1));
      return std::make_shared<HashEmbeddingProvider>(dim, seed);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgument, "bad embedder spec '" + spec + "'");
    }
  }
  if (spec.rfind("http://", 0) == 0) {
    auto hash = spec.rfind('#');
    if (hash == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "http embedder needs '#<dim>' suffix: " + spec);
    }
    HttpEndpointOptions opts;
    opts.url = spec.substr(0, hash);
    return std::make_shared<HttpEmbeddingProvider>(opts, std::stoul(spec.substr(hash + 1)));
  }
  throw Error(ErrorCode::kProviderUnavailable, "unknown embedder '" + spec + "'");
}

}  // namespace hoptrace
