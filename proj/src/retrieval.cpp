#include "eegrag/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "eegrag/tensor_io.hpp"

using nlohmann::json;

namespace eegrag {

VectorStore VectorStore::build(const std::vector<StoreEntry>& entries,
                               const std::set<std::string>& allowed_ids) {
    VectorStore store;
    store.allowed_ = allowed_ids;
    std::set<std::string> seen;
    for (const auto& entry : entries) {
        if (!allowed_ids.count(entry.sentence_id)) {
            throw std::runtime_error("test-partition leakage: sentence '" + entry.sentence_id +
                                     "' is not in the allowed id set");
        }
        if (!seen.insert(entry.sentence_id).second) {
            throw std::runtime_error("duplicate sentence '" + entry.sentence_id +
                                     "' in store input");
        }
        if (entry.vec.size() != kEmbeddingDim) {
            throw std::runtime_error("store entry '" + entry.sentence_id + "' has dimension " +
                                     std::to_string(entry.vec.size()) + ", expected " +
                                     std::to_string(kEmbeddingDim));
        }
        StoreEntry normalized_entry = entry;
        normalized_entry.vec = normalized(entry.vec); // throws on zero norm
        store.entries_.push_back(std::move(normalized_entry));
    }
    return store;
}

RetrievalResult VectorStore::query(const EmbeddingVector& z, std::size_t k,
                                   const std::string& query_sentence_id) const {
    if (entries_.empty()) throw std::runtime_error("query on empty vector store");
    if (k < 1 || k > entries_.size()) {
        throw std::invalid_argument("k=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(entries_.size()) + "]");
    }
    const EmbeddingVector q = normalized(z);

    std::vector<double> sims(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) sims[i] = dot(q, entries_[i].vec);

    // stable partial ordering: equal similarities keep insertion order
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });

    RetrievalResult result;
    result.query_sentence_id = query_sentence_id;
    result.hits.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& e = entries_[order[i]];
        result.hits.push_back({e.sentence_id, e.text, sims[order[i]]});
    }
    return result;
}

void VectorStore::save(const std::string& path) const {
    json ids = json::array();
    json texts = json::array();
    std::vector<float> payload;
    payload.reserve(entries_.size() * kEmbeddingDim);
    for (const auto& e : entries_) {
        ids.push_back(e.sentence_id);
        texts.push_back(e.text);
        for (double x : e.vec) payload.push_back(static_cast<float>(x));
    }
    json allowed = json::array();
    for (const auto& id : allowed_) allowed.push_back(id);
    const json header = {{"kind", "vector-store"},
                         {"dim", kEmbeddingDim},
                         {"ids", ids},
                         {"texts", texts},
                         {"allowed_ids", allowed}};
    write_blob(path, header, payload);
}

VectorStore VectorStore::load(const std::string& path) {
    const Blob blob = read_blob(path);
    if (blob.header.value("kind", "") != "vector-store") {
        throw std::runtime_error("'" + path + "' is not a vector store");
    }
    const auto dim = blob.header.at("dim").get<std::size_t>();
    if (dim != kEmbeddingDim) {
        throw std::runtime_error("store '" + path + "' has dimension " + std::to_string(dim));
    }
    const auto& ids = blob.header.at("ids");
    const auto& texts = blob.header.at("texts");
    if (blob.payload.size() != ids.size() * dim || texts.size() != ids.size()) {
        throw std::runtime_error("store '" + path + "' header/payload mismatch");
    }
    std::set<std::string> allowed;
    for (const auto& id : blob.header.at("allowed_ids")) allowed.insert(id.get<std::string>());

    std::vector<StoreEntry> entries(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        entries[i].sentence_id = ids[i].get<std::string>();
        entries[i].text = texts[i].get<std::string>();
        entries[i].vec.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            entries[i].vec[j] = static_cast<double>(blob.payload[i * dim + j]);
        }
    }
    return build(entries, allowed);
}

} // namespace eegrag
