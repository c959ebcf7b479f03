#pragma once

#include <set>
#include <string>
#include <vector>

#include "eegrag/embedding.hpp"

namespace eegrag {

struct StoreEntry {
    std::string sentence_id;
    std::string text;
    EmbeddingVector vec; // unit-normalized on insert
};

struct RetrievalHit {
    std::string sentence_id;
    std::string text;
    double similarity = 0.0;
};

struct RetrievalResult {
    std::string query_sentence_id;
    std::vector<RetrievalHit> hits; // descending similarity, ties by insertion order
};

// Exact flat cosine-similarity index over training-sentence embeddings.
// Construction refuses any id outside the allowed set, which is how the
// train/test isolation of the evaluation protocol is enforced in code.
class VectorStore {
public:
    // Builds from (sentence_id, text, embedding) triples. Vectors are
    // normalized on insert; a zero-norm vector or an id not in allowed_ids
    // is an error, not a skip.
    static VectorStore build(const std::vector<StoreEntry>& entries,
                             const std::set<std::string>& allowed_ids);

    std::size_t size() const { return entries_.size(); }
    const std::vector<StoreEntry>& entries() const { return entries_; }
    const std::set<std::string>& provenance() const { return allowed_; }

    // Exact top-k scan; requires 1 <= k <= size().
    RetrievalResult query(const EmbeddingVector& z, std::size_t k,
                          const std::string& query_sentence_id = "") const;

    void save(const std::string& path) const;
    static VectorStore load(const std::string& path);

private:
    std::vector<StoreEntry> entries_;
    std::set<std::string> allowed_;
};

} // namespace eegrag
