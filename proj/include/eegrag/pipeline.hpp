#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegrag/baseline.hpp"
#include "eegrag/corpus.hpp"
#include "eegrag/decode.hpp"
#include "eegrag/stats.hpp"

namespace eegrag {

extern const char* kToolVersion;

struct ExperimentConfig {
    std::vector<std::string> corpus_dirs;
    nlohmann::json embedding_config = {{"kind", "offline"}, {"seed", 0}};
    EncoderConfig encoder;
    TrainConfig train;
    std::vector<GridPoint> grid; // empty: configured encoder/train used as-is
    std::vector<std::uint64_t> grid_seeds = {1, 2, 3};
    std::size_t k = 3;
    std::vector<std::string> test_ids; // explicit, or drawn when test_count > 0
    std::size_t test_count = 0;
    std::size_t val_count = 0;
    BaselineConfig baseline;
    nlohmann::json refiner_config = {{"kind", "offline"}};
    std::string output_dir;
    std::uint64_t seed = 0;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);

// A stage failure keeps its partial artifacts on disk (manifest marked
// incomplete) and surfaces the stage name.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& message)
        : std::runtime_error("stage '" + stage + "' failed: " + message), stage_name(stage) {}
    std::string stage_name;
};

struct SubjectArtifacts {
    std::string subject_id;
    std::string subject_dir;
    std::string model_path;
    std::string store_path;
    std::string targets_path;
    CorpusSplit split;
    std::optional<GridSearchResult> grid; // present when a grid search ran
};

struct AuditEvent {
    std::string stage; // "generation" or "scoring"
    std::string sentence_id;
};

struct AuditLog {
    std::vector<AuditEvent> target_accesses;
    std::vector<std::string> texts_seen_by_refiner;
    std::size_t accesses_before_scoring() const;
};

struct DecodedRecord {
    std::string sentence_id;
    std::string output_sentence;
    std::vector<RetrievalHit> retrieved;
    double cosine = 0.0;
};

struct InferenceOutputs {
    std::map<std::string, double> real_scores; // sentence_id -> cosine
    std::vector<DecodedRecord> decoded;
    AuditLog audit;
};

// Offline training stage: pad -> split -> embed targets -> (grid search)
// -> final retrain on train+validation -> encode training sentences ->
// build the vector store. Writes model/store/targets plus a manifest.
SubjectArtifacts run_offline(const ExperimentConfig& config, const std::string& corpus_dir,
                             std::size_t subject_index);

// Online stage: decode every test trial from the persisted artifacts and
// score against the ground-truth sentence embeddings. Targets are consulted
// only in the scoring stage, which the audit log substantiates.
InferenceOutputs run_inference(const ExperimentConfig& config, const SubjectArtifacts& artifacts);

std::vector<BaselineScore> run_baseline_stage(const ExperimentConfig& config,
                                              const SubjectArtifacts& artifacts);

// Whole workflow over all configured subjects; writes report.json,
// report.txt, plot CSVs and the top-level run manifest.
EvalReport run_full_experiment(const ExperimentConfig& config);

// Plot data: per-subject paired lines (solid when p < 0.05) and box
// summaries for both conditions.
void emit_plots(const EvalReport& report, const std::string& out_dir);

// Artifact-hash manifest helpers (FNV-1a content hashes).
nlohmann::json make_manifest(const ExperimentConfig& config,
                             const std::map<std::string, std::string>& artifact_paths,
                             bool incomplete, const std::string& failed_stage);
void write_manifest(const std::string& path, const nlohmann::json& manifest);
void verify_manifest_artifact(const nlohmann::json& manifest, const std::string& name,
                              const std::string& path);

// Rebuilds a SubjectArtifacts handle from a subject output directory, using
// the manifest written by run_offline.
SubjectArtifacts load_subject_artifacts(const std::string& subject_dir);

// Explicit test_ids from the config, or a deterministic draw of test_count
// ids from the corpus. The draw depends only on config.seed and the sorted
// sentence ids, so subjects sharing stimuli share the drawn set.
std::vector<std::string> resolve_test_ids(const ExperimentConfig& config,
                                          const SubjectCorpus& corpus);

// Score-file readers for the JSONL formats written by the stages.
std::map<std::string, double> load_real_scores(const std::string& path);
std::vector<BaselineScore> load_baseline_scores(const std::string& path);

} // namespace eegrag
