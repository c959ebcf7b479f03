#include "eegrag/decode.hpp"

namespace eegrag {

DecodeOutcome decode_trial(const EncoderModel& model, const Matrix& data,
                           const VectorStore& store, std::size_t k, RefineClient& refiner,
                           const EmbeddingProvider& provider,
                           const std::string& query_sentence_id) {
    DecodeOutcome outcome;
    outcome.pipeline_tag = kPipelineTag;

    const EmbeddingVector z_eeg = model.forward(data);
    outcome.retrieval = store.query(z_eeg, k, query_sentence_id);

    RefineRequest request;
    for (const auto& hit : outcome.retrieval.hits) request.retrieved.push_back(hit.text);
    outcome.refined = refiner.refine(request);

    outcome.output_embedding = provider.embed(outcome.refined.output_sentence);
    return outcome;
}

} // namespace eegrag
