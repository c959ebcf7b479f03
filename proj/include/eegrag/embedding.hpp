#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace eegrag {

constexpr std::size_t kEmbeddingDim = 768;

using EmbeddingVector = std::vector<double>;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double norm(const EmbeddingVector& v);
// Returns v / ||v||; throws on zero norm.
EmbeddingVector normalized(const EmbeddingVector& v);

// Sentence embedding source. embed() enforces the shared contract for all
// providers: non-empty input, exact dimension, finite entries, and L2
// normalization of the returned vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const { return kEmbeddingDim; }

    EmbeddingVector embed(const std::string& text) const;
    // Element i equals embed(texts[i]); failures carry the item index.
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;

protected:
    virtual EmbeddingVector embed_raw(const std::string& text) const = 0;
};

// Deterministic stand-in for the external sentence-embedding model: seeded
// hashing of token unigrams and bigrams into 768 signed buckets. Texts that
// share tokens land in shared buckets and therefore score higher cosine
// similarity than disjoint texts.
class OfflineHashProvider : public EmbeddingProvider {
public:
    explicit OfflineHashProvider(std::uint64_t seed);
    std::string name() const override;
    std::uint64_t seed() const { return seed_; }

protected:
    EmbeddingVector embed_raw(const std::string& text) const override;

private:
    std::uint64_t seed_;
};

// HTTP plug-in for a hosted sentence-embedding model. POSTs
// {"model", "texts"} to <endpoint>/embed and expects {"embeddings": [[..]]}.
class ExternalHttpProvider : public EmbeddingProvider {
public:
    ExternalHttpProvider(std::string model, std::string endpoint);
    std::string name() const override { return model_; }

protected:
    EmbeddingVector embed_raw(const std::string& text) const override;

private:
    std::string model_;
    std::string endpoint_;
};

// Config: {"kind": "offline"|"external", "model": str, "endpoint": url, "seed": int}
std::unique_ptr<EmbeddingProvider> make_provider(const nlohmann::json& config);

using EmbeddingMap = std::map<std::string, EmbeddingVector>;

void save_embedding_cache(const std::string& path, const EmbeddingMap& embeddings,
                          const std::string& provider_name);
EmbeddingMap load_embedding_cache(const std::string& path);

} // namespace eegrag
