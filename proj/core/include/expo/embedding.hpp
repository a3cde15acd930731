#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "expo/types.hpp"

namespace expo {

struct EmbeddingVector {
    std::vector<double> values;
    size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

EmbeddingVector concat(const EmbeddingVector& a, const EmbeddingVector& b);

// FNV-1a 64-bit content hash; cache key for embedded texts.
uint64_t text_hash(const std::string& text);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual size_t dim() const = 0;
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

// Deterministic provider: seeded hash of the text expanded into dim reals
// in [-1, 1] via a counter-based generator. Distinct texts map to
// near-orthogonal vectors at dim >= 64.
class SyntheticEmbedder : public EmbeddingProvider {
public:
    SyntheticEmbedder(size_t dim, uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    size_t dim() const override { return dim_; }
    EmbeddingVector embed(const std::string& text) override;

private:
    size_t dim_;
    uint64_t seed_;
};

struct RemoteEmbedderConfig {
    std::string base_url;       // e.g. http://host:port
    std::string path = "/v1/embeddings";
    std::string model;          // e.g. text-embedding-3-large
    std::string api_key_env;    // name of the env var holding the credential
    size_t dim = 3072;
    int max_attempts = 3;       // exponential backoff between attempts
    int timeout_seconds = 30;
};

// Chat-completions-style embeddings endpoint over HTTP.
class RemoteEmbedder : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {}
    size_t dim() const override { return cfg_.dim; }
    EmbeddingVector embed(const std::string& text) override;

private:
    RemoteEmbedderConfig cfg_;
};

// Content-addressed store; a hit returns a vector identical to the first
// computation. Single writer during precompute, readers afterwards.
class EmbeddingCache {
public:
    const EmbeddingVector& get_or_compute(const std::string& text, EmbeddingProvider& provider);
    bool contains(const std::string& text) const;
    size_t size() const { return by_hash_.size(); }
    size_t misses() const { return misses_; }
    void reset_counters() { misses_ = 0; }

    void save(const std::string& path) const;
    static EmbeddingCache load(const std::string& path);

private:
    std::unordered_map<uint64_t, EmbeddingVector> by_hash_;
    size_t misses_ = 0;
};

// Embeds every description and instruction text in the domain.
void precompute_domain(const PromptDomain& domain, EmbeddingProvider& provider,
                       EmbeddingCache& cache);

}  // namespace expo
