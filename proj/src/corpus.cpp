#include "eegrag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "eegrag/rng.hpp"
#include "eegrag/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace eegrag {

const SentenceRecord& SubjectCorpus::sentence(const std::string& sentence_id) const {
    auto it = sentences.find(sentence_id);
    if (it == sentences.end()) {
        throw std::runtime_error("unknown sentence id '" + sentence_id + "' in corpus '" +
                                 subject_id + "'");
    }
    return it->second;
}

std::vector<std::string> SubjectCorpus::sentence_ids_in_trial_order() const {
    std::vector<std::string> ids;
    ids.reserve(trials.size());
    for (const auto& t : trials) ids.push_back(t.sentence_id);
    return ids;
}

void validate_corpus(const SubjectCorpus& corpus) {
    std::set<std::string> seen;
    for (const auto& [id, rec] : corpus.sentences) {
        if (rec.text.empty()) throw std::runtime_error("sentence '" + id + "' has empty text");
        if (!seen.insert(id).second) {
            throw std::runtime_error("duplicate sentence id '" + id + "'");
        }
    }
    for (const auto& trial : corpus.trials) {
        if (trial.channels() == 0 || trial.samples() == 0) {
            throw std::runtime_error("trial '" + trial.sentence_id + "' has empty shape");
        }
        if (trial.sample_rate_hz <= 0.0) {
            throw std::runtime_error("trial '" + trial.sentence_id + "' has non-positive sample rate");
        }
        for (double v : trial.data.data()) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("non-finite sample in trial '" + trial.sentence_id + "'");
            }
        }
        if (corpus.sentences.find(trial.sentence_id) == corpus.sentences.end()) {
            throw std::runtime_error("trial references unknown sentence id '" +
                                     trial.sentence_id + "'");
        }
    }
    if (corpus.split) {
        std::set<std::string> train(corpus.split->train_ids.begin(), corpus.split->train_ids.end());
        for (const auto& id : corpus.split->test_ids) {
            if (train.count(id)) {
                throw std::runtime_error("split overlap: '" + id + "' is in both train and test");
            }
        }
    }
}

SubjectCorpus load_corpus(const std::string& dir) {
    const fs::path root(dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing manifest: '" + manifest_path.string() + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest '" + manifest_path.string() + "': " + e.what());
    }

    SubjectCorpus corpus;
    corpus.subject_id = manifest.at("subject_id").get<std::string>();
    corpus.sample_rate_hz = manifest.at("sample_rate_hz").get<double>();

    std::set<std::string> ids;
    for (const auto& entry : manifest.at("trials")) {
        const auto sentence_id = entry.at("sentence_id").get<std::string>();
        if (!ids.insert(sentence_id).second) {
            throw std::runtime_error("duplicate sentence id '" + sentence_id + "' in manifest");
        }
        if (entry.value("excluded", false)) {
            ++corpus.dropped_trials;
            continue;
        }
        const auto channels = entry.at("channels").get<std::size_t>();
        const auto samples = entry.at("samples").get<std::size_t>();
        const auto file = entry.at("file").get<std::string>();
        const fs::path data_path = root / file;
        if (!fs::exists(data_path)) {
            throw std::runtime_error("missing trial data: '" + data_path.string() +
                                     "' for sentence '" + sentence_id + "'");
        }

        EEGTrial trial;
        trial.subject_id = corpus.subject_id;
        trial.sentence_id = sentence_id;
        trial.sample_rate_hz = corpus.sample_rate_hz;
        const auto values = read_f32_le(data_path.string(), channels * samples);
        trial.data = Matrix(channels, samples);
        for (std::size_t i = 0; i < values.size(); ++i) {
            trial.data.data()[i] = static_cast<double>(values[i]);
        }
        corpus.trials.push_back(std::move(trial));
        corpus.sentences[sentence_id] = {sentence_id, entry.at("text").get<std::string>()};
    }
    if (corpus.dropped_trials > 0) {
        std::clog << "corpus '" << corpus.subject_id << "': dropped " << corpus.dropped_trials
                  << " excluded trial(s) at ingestion\n";
    }
    validate_corpus(corpus);
    return corpus;
}

void save_corpus(const SubjectCorpus& corpus, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root);

    json trials = json::array();
    for (const auto& trial : corpus.trials) {
        const std::string file = trial.sentence_id + ".f32";
        std::vector<float> payload(trial.data.size());
        for (std::size_t i = 0; i < payload.size(); ++i) {
            payload[i] = static_cast<float>(trial.data.data()[i]);
        }
        write_f32_le((root / file).string(), payload);
        trials.push_back({{"sentence_id", trial.sentence_id},
                          {"text", corpus.sentence(trial.sentence_id).text},
                          {"file", file},
                          {"channels", trial.channels()},
                          {"samples", trial.samples()}});
    }
    json manifest = {{"subject_id", corpus.subject_id},
                     {"sample_rate_hz", corpus.sample_rate_hz},
                     {"trials", trials}};
    std::ofstream out(root / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in '" + dir + "'");
    out << manifest.dump(2) << "\n";
}

SubjectCorpus pad_symmetric(const SubjectCorpus& corpus) {
    if (corpus.trials.empty()) return corpus;

    const std::size_t channels = corpus.trials.front().channels();
    std::size_t t_max = 0;
    for (const auto& trial : corpus.trials) {
        if (trial.channels() != channels) {
            throw std::runtime_error("inconsistent channel counts: trial '" + trial.sentence_id +
                                     "' has " + std::to_string(trial.channels()) + ", expected " +
                                     std::to_string(channels));
        }
        t_max = std::max(t_max, trial.samples());
    }

    SubjectCorpus padded = corpus;
    for (auto& trial : padded.trials) {
        const std::size_t t = trial.samples();
        if (t == t_max) continue;
        const std::size_t deficit = t_max - t;
        const std::size_t lead = deficit / 2; // odd deficit: extra zero trails
        Matrix out(channels, t_max, 0.0);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < t; ++i) out(c, lead + i) = trial.data(c, i);
        }
        trial.data = std::move(out);
    }
    return padded;
}

CorpusSplit split_corpus(const SubjectCorpus& corpus, const std::vector<std::string>& test_ids,
                         std::size_t val_count, std::uint64_t seed) {
    std::set<std::string> test_set;
    for (const auto& id : test_ids) {
        if (corpus.sentences.find(id) == corpus.sentences.end()) {
            throw std::runtime_error("unknown test id '" + id + "'");
        }
        if (!test_set.insert(id).second) {
            throw std::runtime_error("duplicate test id '" + id + "'");
        }
    }

    std::vector<std::string> rest;
    for (const auto& id : corpus.sentence_ids_in_trial_order()) {
        if (!test_set.count(id)) rest.push_back(id);
    }
    if (val_count >= rest.size() && !(val_count == 0 && rest.empty())) {
        throw std::runtime_error("val_count " + std::to_string(val_count) +
                                 " too large for " + std::to_string(rest.size()) +
                                 " non-test sentences");
    }

    Rng rng = Rng(seed).substream("split");
    rng.shuffle(rest);

    CorpusSplit split;
    split.test_ids = test_ids;
    split.val_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(val_count));
    split.train_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(val_count), rest.end());
    return split;
}

namespace {

// Fixed vocabulary for synthetic sentences. Texts are a function of the
// sentence index alone so every synthetic subject reads the same stimuli.
const char* kTopics[] = {"weather", "music", "garden", "river", "market", "engine",
                         "forest", "harbor", "kitchen", "library", "mountain", "desert"};
const char* kTopicWordsA[] = {"storm", "melody", "blossom", "current", "stall", "piston",
                              "canopy", "anchor", "kettle", "shelf", "summit", "dune"};
const char* kTopicWordsB[] = {"cloud", "rhythm", "soil", "bank", "trader", "valve",
                              "moss", "tide", "spice", "volume", "ridge", "mirage"};
const char* kSyllables[] = {"ba", "do", "fi", "gu", "ka", "lo", "mi", "nu",
                            "pa", "re", "si", "tu", "va", "we", "zo", "ly"};
constexpr std::size_t kTopicCount = sizeof(kTopics) / sizeof(kTopics[0]);

std::string pseudo_word(std::uint64_t key) {
    Rng rng(mix64(key ^ 0x5e17e9ceULL));
    std::string w;
    const std::size_t len = 2 + rng.below(2);
    for (std::size_t i = 0; i < len; ++i) w += kSyllables[rng.below(16)];
    return w;
}

std::string synthetic_text(std::size_t index) {
    const std::size_t topic = index % kTopicCount;
    return std::string("the ") + kTopics[topic] + " " + kTopicWordsA[topic] + " and " +
           kTopicWordsB[topic] + " near the " + pseudo_word(2 * index) + " " +
           pseudo_word(2 * index + 1);
}

// Templates are keyed by topic/sentence index only, never by the corpus
// seed: subjects share stimuli, noise is what differs between them.
Matrix pattern(std::string_view kind, std::size_t index, std::size_t channels,
               std::size_t samples) {
    Rng rng = Rng(0).substream(kind, index);
    Matrix m(channels, samples);
    for (double& v : m.data()) v = rng.gaussian();
    return m;
}

} // namespace

SubjectCorpus generate_synthetic(std::size_t n_sentences, std::size_t channels,
                                 std::size_t samples, double snr, std::uint64_t seed) {
    if (n_sentences < 2) throw std::invalid_argument("generate_synthetic: need n_sentences >= 2");
    if (channels == 0 || samples == 0) {
        throw std::invalid_argument("generate_synthetic: channels and samples must be positive");
    }
    if (snr < 0.0) throw std::invalid_argument("generate_synthetic: snr must be nonnegative");

    SubjectCorpus corpus;
    corpus.subject_id = "synth-" + std::to_string(seed);
    corpus.sample_rate_hz = 128.0;

    Rng root(seed);
    for (std::size_t i = 0; i < n_sentences; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%04zu", i);
        const std::string sid(buf);
        corpus.sentences[sid] = {sid, synthetic_text(i)};

        EEGTrial trial;
        trial.subject_id = corpus.subject_id;
        trial.sentence_id = sid;
        trial.sample_rate_hz = corpus.sample_rate_hz;
        trial.data = Matrix(channels, samples);

        Rng noise = root.substream("noise", i);
        for (double& v : trial.data.data()) v = noise.gaussian();
        if (snr > 0.0) {
            const Matrix topic = pattern("topic", i % kTopicCount, channels, samples);
            const Matrix sent = pattern("sentence", i, channels, samples);
            for (std::size_t j = 0; j < trial.data.size(); ++j) {
                trial.data.data()[j] += snr * (topic.data()[j] + 0.3 * sent.data()[j]);
            }
        }
        corpus.trials.push_back(std::move(trial));
    }
    validate_corpus(corpus);
    return corpus;
}

} // namespace eegrag
