#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eegrag/corpus.hpp"
#include "eegrag/decode.hpp"

namespace eegrag {

// Whether one time permutation is shared by all channels (preserves the
// instantaneous spatial pattern) or each channel is permuted on its own.
enum class PermutationMode { joint, per_channel };

struct BaselineConfig {
    std::size_t n_seeds = 10;
    std::uint64_t seed_base = 0;
    PermutationMode mode = PermutationMode::joint;
};

struct BaselineRun {
    std::uint64_t seed = 0;
    std::vector<EEGTrial> shuffled_trials;
    // label_assignment[i] is the test sentence assigned to shuffled_trials[i]
    std::vector<std::string> label_assignment;
};

struct BaselineScore {
    std::uint64_t seed = 0;
    std::string sentence_id; // the assigned label
    double cosine = 0.0;
};

// Permutes the trial along time only: per-channel sample multisets (and so
// mean and standard deviation) are exactly preserved while temporal
// structure is destroyed.
EEGTrial shuffle_temporal(const EEGTrial& trial, std::uint64_t seed,
                          PermutationMode mode = PermutationMode::joint);

// Run i uses seed_base + i: every test trial is shuffled and the shuffled
// trials are assigned to the true test labels by a seeded permutation.
std::vector<BaselineRun> make_baseline_runs(const std::vector<EEGTrial>& test_trials,
                                            const std::vector<std::string>& test_ids,
                                            const BaselineConfig& bc);

// Pushes every run through the identical decoding pipeline and scores each
// output against the embedding of its assigned sentence. Results are keyed
// (seed, sentence_id).
std::vector<BaselineScore> run_baseline(const std::vector<BaselineRun>& runs,
                                        const EncoderModel& model, const VectorStore& store,
                                        std::size_t k, RefineClient& refiner,
                                        const EmbeddingProvider& provider,
                                        const EmbeddingMap& target_embeddings);

// Per-sentence mean over seeds: the baseline score a sentence is compared
// against downstream.
std::map<std::string, double> average_over_seeds(const std::vector<BaselineScore>& scores);

} // namespace eegrag
