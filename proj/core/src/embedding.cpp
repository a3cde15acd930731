#include "expo/embedding.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace expo {

EmbeddingVector concat(const EmbeddingVector& a, const EmbeddingVector& b) {
    EmbeddingVector out;
    out.values.reserve(a.dim() + b.dim());
    out.values.insert(out.values.end(), a.values.begin(), a.values.end());
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    return out;
}

uint64_t text_hash(const std::string& text) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

// splitmix64; counter-based so embed is a pure function of (seed, text, i).
uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

EmbeddingVector SyntheticEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    const uint64_t key = mix64(text_hash(text) ^ seed_);
    EmbeddingVector v;
    v.values.resize(dim_);
    for (size_t i = 0; i < dim_; ++i) {
        uint64_t bits = mix64(key + i + 1);
        // top 53 bits -> [0,1) -> [-1,1)
        double u = static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
        v.values[i] = 2.0 * u - 1.0;
    }
    return v;
}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    std::string key;
    if (!cfg_.api_key_env.empty()) {
        const char* val = std::getenv(cfg_.api_key_env.c_str());
        if (val) key = val;
    }
    nlohmann::json req{{"model", cfg_.model}, {"input", text}};
    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        auto res = client.Post(cfg_.path, headers, req.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        auto j = nlohmann::json::parse(res->body);
        EmbeddingVector v;
        v.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
        if (v.dim() != cfg_.dim)
            throw TransportError("provider returned dim " + std::to_string(v.dim()) +
                                 ", expected " + std::to_string(cfg_.dim));
        return v;
    }
    throw TransportError("embedding request failed after " + std::to_string(cfg_.max_attempts) +
                         " attempts: " + last_error);
}

const EmbeddingVector& EmbeddingCache::get_or_compute(const std::string& text,
                                                      EmbeddingProvider& provider) {
    uint64_t h = text_hash(text);
    auto it = by_hash_.find(h);
    if (it != by_hash_.end()) return it->second;
    ++misses_;
    auto [ins, ok] = by_hash_.emplace(h, provider.embed(text));
    return ins->second;
}

bool EmbeddingCache::contains(const std::string& text) const {
    return by_hash_.count(text_hash(text)) > 0;
}

namespace {
constexpr uint32_t kCacheMagic = 0x45584543;  // "EXEC"
constexpr uint32_t kCacheVersion = 1;
}  // namespace

void EmbeddingCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write cache file: " + path);
    auto put = [&](const void* p, size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
    put(&kCacheMagic, 4);
    put(&kCacheVersion, 4);
    uint64_t count = by_hash_.size();
    put(&count, 8);
    for (const auto& [h, v] : by_hash_) {
        put(&h, 8);
        uint64_t dim = v.dim();
        put(&dim, 8);
        put(v.values.data(), dim * sizeof(double));
    }
}

EmbeddingCache EmbeddingCache::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read cache file: " + path);
    auto get = [&](void* p, size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw ValidationError("truncated cache file: " + path);
    };
    uint32_t magic = 0, version = 0;
    get(&magic, 4);
    get(&version, 4);
    if (magic != kCacheMagic || version != kCacheVersion)
        throw ValidationError("unsupported cache file format: " + path);
    uint64_t count = 0;
    get(&count, 8);
    EmbeddingCache cache;
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t h = 0, dim = 0;
        get(&h, 8);
        get(&dim, 8);
        EmbeddingVector v;
        v.values.resize(dim);
        get(v.values.data(), dim * sizeof(double));
        cache.by_hash_.emplace(h, std::move(v));
    }
    return cache;
}

void precompute_domain(const PromptDomain& domain, EmbeddingProvider& provider,
                       EmbeddingCache& cache) {
    std::vector<int> missing;
    for (const auto& d : domain.descs()) {
        try {
            cache.get_or_compute(d.text, provider);
        } catch (const TransportError&) {
            missing.push_back(d.id);
        }
    }
    for (const auto& ins : domain.instrs()) {
        try {
            cache.get_or_compute(ins.text, provider);
        } catch (const TransportError&) {
            missing.push_back(ins.id);
        }
    }
    if (!missing.empty()) {
        std::string ids;
        for (int id : missing) ids += (ids.empty() ? "" : ",") + std::to_string(id);
        throw TransportError("precompute incomplete, missing ids: " + ids);
    }
}

}  // namespace expo
