#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eegrag/matrix.hpp"

namespace eegrag {

// One sentence-reading trial: channels x time samples.
struct EEGTrial {
    std::string subject_id;
    std::string sentence_id;
    Matrix data; // C x T, row-major
    double sample_rate_hz = 0.0;

    std::size_t channels() const { return data.rows(); }
    std::size_t samples() const { return data.cols(); }
};

struct SentenceRecord {
    std::string sentence_id;
    std::string text;
};

struct CorpusSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

struct SubjectCorpus {
    std::string subject_id;
    double sample_rate_hz = 0.0;
    std::vector<EEGTrial> trials; // order matches manifest order
    std::map<std::string, SentenceRecord> sentences;
    std::optional<CorpusSplit> split;
    std::size_t dropped_trials = 0; // excluded entries skipped at ingestion

    const SentenceRecord& sentence(const std::string& sentence_id) const;
    std::vector<std::string> sentence_ids_in_trial_order() const;
};

// Throws with a specific diagnostic if any structural invariant is broken
// (empty shapes, non-finite samples, unresolved or duplicate sentence ids).
void validate_corpus(const SubjectCorpus& corpus);

// Directory layout: manifest.json + one raw float32-LE file per trial.
SubjectCorpus load_corpus(const std::string& dir);
void save_corpus(const SubjectCorpus& corpus, const std::string& dir);

// Zero-pads every trial to the longest length within this corpus. Even
// deficits split half/half; odd deficits put the extra zero at the end.
SubjectCorpus pad_symmetric(const SubjectCorpus& corpus);

// Test partition is exactly `test_ids`; validation is drawn from the rest
// by a seeded shuffle; everything else is train. Partitions are disjoint
// and cover all sentence ids of the corpus.
CorpusSplit split_corpus(const SubjectCorpus& corpus, const std::vector<std::string>& test_ids,
                         std::size_t val_count, std::uint64_t seed);

// Synthetic corpus for desk-scale experiments. Sentence texts and their
// spatiotemporal templates depend only on the sentence index, so corpora
// generated with different seeds share stimuli (as ZuCo subjects do) while
// the additive noise is seed-specific. snr scales the template; snr=0
// yields pure noise.
SubjectCorpus generate_synthetic(std::size_t n_sentences, std::size_t channels,
                                 std::size_t samples, double snr, std::uint64_t seed);

} // namespace eegrag
