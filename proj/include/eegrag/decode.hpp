#pragma once

#include <string>

#include "eegrag/embedding.hpp"
#include "eegrag/encoder.hpp"
#include "eegrag/refine.hpp"
#include "eegrag/retrieval.hpp"

namespace eegrag {

// Marker stamped on every decode outcome. Real and baseline evaluations
// run through this one function, so identical tags certify the shared
// code path.
inline constexpr const char* kPipelineTag = "encode/retrieve/refine/embed@1";

struct DecodeOutcome {
    std::string pipeline_tag;
    RetrievalResult retrieval;
    RefineResult refined;
    EmbeddingVector output_embedding; // unit norm (provider contract)
};

// encode -> top-k retrieve -> refine -> embed the refined sentence.
// Ground-truth targets are deliberately not reachable from here; scoring
// against them is the caller's separate stage.
DecodeOutcome decode_trial(const EncoderModel& model, const Matrix& data,
                           const VectorStore& store, std::size_t k, RefineClient& refiner,
                           const EmbeddingProvider& provider,
                           const std::string& query_sentence_id);

} // namespace eegrag
