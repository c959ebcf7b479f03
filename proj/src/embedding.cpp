#include "eegrag/embedding.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "eegrag/hash.hpp"
#include "eegrag/tensor_io.hpp"

using nlohmann::json;

namespace eegrag {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

EmbeddingVector normalized(const EmbeddingVector& v) {
    const double n = norm(v);
    if (n <= 0.0 || !std::isfinite(n)) {
        throw std::runtime_error("cannot normalize zero-norm embedding vector");
    }
    EmbeddingVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

EmbeddingVector EmbeddingProvider::embed(const std::string& text) const {
    if (text.empty()) throw std::invalid_argument("embed: text is empty");
    EmbeddingVector v = embed_raw(text);
    if (v.size() != dimension()) {
        throw std::runtime_error("provider '" + name() + "' returned dimension " +
                                 std::to_string(v.size()) + ", expected " +
                                 std::to_string(dimension()));
    }
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error("provider '" + name() + "' returned non-finite value");
        }
    }
    return normalized(v);
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(
        const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            out.push_back(embed(texts[i]));
        } catch (const std::exception& e) {
            throw std::runtime_error("embed_batch item " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

} // namespace

OfflineHashProvider::OfflineHashProvider(std::uint64_t seed) : seed_(seed) {}

std::string OfflineHashProvider::name() const {
    return "offline-hash-" + std::to_string(seed_);
}

EmbeddingVector OfflineHashProvider::embed_raw(const std::string& text) const {
    EmbeddingVector v(kEmbeddingDim, 0.0);
    const auto add_feature = [&](const std::string& feature, double weight) {
        std::uint64_t h = mix64(fnv1a64(feature) ^ mix64(seed_));
        // Two buckets per feature soften hash collisions.
        for (int slot = 0; slot < 2; ++slot) {
            const std::size_t idx = h % kEmbeddingDim;
            const double sign = ((h >> 62) & 1) ? 1.0 : -1.0;
            v[idx] += sign * weight;
            h = mix64(h);
        }
    };

    const auto tokens = tokenize(text);
    for (const auto& tok : tokens) add_feature("u:" + tok, 1.0);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        add_feature("b:" + tokens[i] + " " + tokens[i + 1], 0.7);
    }
    if (tokens.empty()) {
        // Whitespace-only input still must produce a valid unit vector.
        add_feature("u:", 1.0);
    }
    return v;
}

ExternalHttpProvider::ExternalHttpProvider(std::string model, std::string endpoint)
    : model_(std::move(model)), endpoint_(std::move(endpoint)) {
    if (endpoint_.empty()) {
        throw std::invalid_argument("external embedding provider needs an endpoint");
    }
}

EmbeddingVector ExternalHttpProvider::embed_raw(const std::string& text) const {
    httplib::Client client(endpoint_);
    client.set_read_timeout(30, 0);
    const json body = {{"model", model_}, {"texts", json::array({text})}};
    auto res = client.Post("/embed", body.dump(), "application/json");
    if (!res) {
        throw std::runtime_error("embedding provider '" + model_ + "' unavailable at " + endpoint_);
    }
    if (res->status != 200) {
        throw std::runtime_error("embedding provider '" + model_ + "' returned HTTP " +
                                 std::to_string(res->status));
    }
    const json reply = json::parse(res->body);
    const auto& rows = reply.at("embeddings");
    if (!rows.is_array() || rows.size() != 1) {
        throw std::runtime_error("embedding provider '" + model_ + "' returned malformed reply");
    }
    return rows[0].get<EmbeddingVector>();
}

std::unique_ptr<EmbeddingProvider> make_provider(const json& config) {
    const std::string kind = config.value("kind", "offline");
    if (kind == "offline") {
        return std::make_unique<OfflineHashProvider>(config.value("seed", std::uint64_t{0}));
    }
    if (kind == "external") {
        return std::make_unique<ExternalHttpProvider>(
                config.value("model", "all-mpnet-base-v2"), config.at("endpoint").get<std::string>());
    }
    throw std::invalid_argument("unknown embedding provider kind '" + kind + "'");
}

void save_embedding_cache(const std::string& path, const EmbeddingMap& embeddings,
                          const std::string& provider_name) {
    json ids = json::array();
    std::vector<float> payload;
    payload.reserve(embeddings.size() * kEmbeddingDim);
    for (const auto& [id, vec] : embeddings) {
        if (vec.size() != kEmbeddingDim) {
            throw std::runtime_error("embedding for '" + id + "' has wrong dimension");
        }
        ids.push_back(id);
        for (double x : vec) payload.push_back(static_cast<float>(x));
    }
    const json header = {{"kind", "embedding-cache"},
                         {"dim", kEmbeddingDim},
                         {"provider", provider_name},
                         {"ids", ids}};
    write_blob(path, header, payload);
}

EmbeddingMap load_embedding_cache(const std::string& path) {
    const Blob blob = read_blob(path);
    if (blob.header.value("kind", "") != "embedding-cache") {
        throw std::runtime_error("'" + path + "' is not an embedding cache");
    }
    const auto dim = blob.header.at("dim").get<std::size_t>();
    const auto& ids = blob.header.at("ids");
    if (blob.payload.size() != ids.size() * dim) {
        throw std::runtime_error("embedding cache '" + path + "' payload size mismatch");
    }
    EmbeddingMap out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        EmbeddingVector v(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            v[j] = static_cast<double>(blob.payload[i * dim + j]);
        }
        out[ids[i].get<std::string>()] = std::move(v);
    }
    return out;
}

} // namespace eegrag
