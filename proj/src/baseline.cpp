#include "eegrag/baseline.hpp"

#include <stdexcept>

#include "eegrag/rng.hpp"
#include "eegrag/stats.hpp"

namespace eegrag {

EEGTrial shuffle_temporal(const EEGTrial& trial, std::uint64_t seed, PermutationMode mode) {
    const std::size_t C = trial.channels();
    const std::size_t T = trial.samples();
    EEGTrial out = trial;
    Rng rng = Rng(seed).substream("temporal");

    if (mode == PermutationMode::joint) {
        const auto perm = rng.permutation(T);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < T; ++t) out.data(c, t) = trial.data(c, perm[t]);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            const auto perm = rng.substream("channel", c).permutation(T);
            for (std::size_t t = 0; t < T; ++t) out.data(c, t) = trial.data(c, perm[t]);
        }
    }
    return out;
}

std::vector<BaselineRun> make_baseline_runs(const std::vector<EEGTrial>& test_trials,
                                            const std::vector<std::string>& test_ids,
                                            const BaselineConfig& bc) {
    if (test_trials.size() != test_ids.size()) {
        throw std::invalid_argument("make_baseline_runs: " + std::to_string(test_trials.size()) +
                                    " trials vs " + std::to_string(test_ids.size()) + " ids");
    }
    if (bc.n_seeds == 0) throw std::invalid_argument("make_baseline_runs: n_seeds must be >= 1");

    std::vector<BaselineRun> runs;
    runs.reserve(bc.n_seeds);
    for (std::size_t i = 0; i < bc.n_seeds; ++i) {
        BaselineRun run;
        run.seed = bc.seed_base + i;
        const Rng rng(run.seed);

        run.shuffled_trials.reserve(test_trials.size());
        for (std::size_t j = 0; j < test_trials.size(); ++j) {
            run.shuffled_trials.push_back(shuffle_temporal(
                    test_trials[j], rng.substream("shuffle", j).seed(), bc.mode));
        }
        const auto perm = rng.substream("labels").permutation(test_ids.size());
        run.label_assignment.reserve(test_ids.size());
        for (std::size_t j = 0; j < test_ids.size(); ++j) {
            run.label_assignment.push_back(test_ids[perm[j]]);
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::vector<BaselineScore> run_baseline(const std::vector<BaselineRun>& runs,
                                        const EncoderModel& model, const VectorStore& store,
                                        std::size_t k, RefineClient& refiner,
                                        const EmbeddingProvider& provider,
                                        const EmbeddingMap& target_embeddings) {
    std::vector<BaselineScore> scores;
    for (const auto& run : runs) {
        for (std::size_t j = 0; j < run.shuffled_trials.size(); ++j) {
            const std::string& assigned = run.label_assignment[j];
            try {
                const DecodeOutcome outcome = decode_trial(
                        model, run.shuffled_trials[j].data, store, k, refiner, provider, assigned);
                auto it = target_embeddings.find(assigned);
                if (it == target_embeddings.end()) {
                    throw std::runtime_error("no target embedding for '" + assigned + "'");
                }
                scores.push_back(
                        {run.seed, assigned,
                         cosine_similarity(outcome.output_embedding, it->second)});
            } catch (const std::exception& e) {
                throw std::runtime_error("baseline run seed=" + std::to_string(run.seed) +
                                         " sentence='" + assigned + "': " + e.what());
            }
        }
    }
    return scores;
}

std::map<std::string, double> average_over_seeds(const std::vector<BaselineScore>& scores) {
    std::map<std::string, double> sums;
    std::map<std::string, std::size_t> counts;
    for (const auto& s : scores) {
        sums[s.sentence_id] += s.cosine;
        ++counts[s.sentence_id];
    }
    std::map<std::string, double> means;
    for (const auto& [id, sum] : sums) {
        means[id] = sum / static_cast<double>(counts[id]);
    }
    return means;
}

} // namespace eegrag
