#include "eegrag/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "eegrag/hash.hpp"
#include "eegrag/rng.hpp"
#include "eegrag/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace eegrag {

const char* kToolVersion = "eegrag 0.1.0";

namespace {

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig cfg;
    if (j.contains("temporal_dilations")) {
        cfg.temporal_dilations = j.at("temporal_dilations").get<std::vector<std::size_t>>();
    }
    cfg.temporal_kernel = j.value("temporal_kernel", cfg.temporal_kernel);
    cfg.spatial_kernel_channels = j.value("spatial_kernel_channels", cfg.spatial_kernel_channels);
    cfg.residual_blocks = j.value("residual_blocks", cfg.residual_blocks);
    cfg.hidden_width = j.value("hidden_width", cfg.hidden_width);
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.leaky_relu_slope = j.value("leaky_relu_slope", cfg.leaky_relu_slope);
    cfg.output_dim = j.value("output_dim", cfg.output_dim);
    return cfg;
}

json encoder_config_to_json(const EncoderConfig& cfg) {
    return {{"temporal_dilations", cfg.temporal_dilations},
            {"temporal_kernel", cfg.temporal_kernel},
            {"spatial_kernel_channels", cfg.spatial_kernel_channels},
            {"residual_blocks", cfg.residual_blocks},
            {"hidden_width", cfg.hidden_width},
            {"dropout_rate", cfg.dropout_rate},
            {"leaky_relu_slope", cfg.leaky_relu_slope},
            {"output_dim", cfg.output_dim}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig tc;
    tc.epochs = j.value("epochs", tc.epochs);
    tc.batch_size = j.value("batch_size", tc.batch_size);
    tc.learning_rate = j.value("learning_rate", tc.learning_rate);
    tc.min_lr = j.value("min_lr", tc.min_lr);
    tc.weight_decay = j.value("weight_decay", tc.weight_decay);
    tc.seed = j.value("seed", tc.seed);
    return tc;
}

json train_config_to_json(const TrainConfig& tc) {
    return {{"epochs", tc.epochs},
            {"batch_size", tc.batch_size},
            {"learning_rate", tc.learning_rate},
            {"min_lr", tc.min_lr},
            {"weight_decay", tc.weight_decay},
            {"seed", tc.seed}};
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig config;
    config.corpus_dirs = j.at("corpora").get<std::vector<std::string>>();
    if (j.contains("embedding")) config.embedding_config = j.at("embedding");
    if (j.contains("encoder")) config.encoder = encoder_config_from_json(j.at("encoder"));
    if (j.contains("train")) config.train = train_config_from_json(j.at("train"));
    if (j.contains("grid")) {
        for (const auto& g : j.at("grid")) {
            GridPoint gp;
            if (g.contains("encoder")) gp.encoder = encoder_config_from_json(g.at("encoder"));
            if (g.contains("train")) gp.train = train_config_from_json(g.at("train"));
            config.grid.push_back(std::move(gp));
        }
    }
    if (j.contains("grid_seeds")) {
        config.grid_seeds = j.at("grid_seeds").get<std::vector<std::uint64_t>>();
    }
    config.k = j.value("k", config.k);
    if (j.contains("test_ids")) config.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    config.test_count = j.value("test_count", config.test_count);
    config.val_count = j.value("val_count", config.val_count);
    if (j.contains("baseline")) {
        const auto& b = j.at("baseline");
        config.baseline.n_seeds = b.value("n_seeds", config.baseline.n_seeds);
        config.baseline.seed_base = b.value("seed_base", config.baseline.seed_base);
        const std::string mode = b.value("mode", "joint");
        if (mode == "joint") {
            config.baseline.mode = PermutationMode::joint;
        } else if (mode == "per_channel") {
            config.baseline.mode = PermutationMode::per_channel;
        } else {
            throw std::invalid_argument("unknown baseline mode '" + mode + "'");
        }
    }
    if (j.contains("refiner")) config.refiner_config = j.at("refiner");
    config.output_dir = j.at("output_dir").get<std::string>();
    config.seed = j.value("seed", config.seed);

    if (config.corpus_dirs.empty()) throw std::invalid_argument("config: no corpora listed");
    if (config.test_ids.empty() && config.test_count == 0) {
        throw std::invalid_argument("config: need test_ids or test_count");
    }
    return config;
}

json experiment_config_to_json(const ExperimentConfig& config) {
    json grid = json::array();
    for (const auto& gp : config.grid) {
        grid.push_back({{"encoder", encoder_config_to_json(gp.encoder)},
                        {"train", train_config_to_json(gp.train)}});
    }
    return {{"corpora", config.corpus_dirs},
            {"embedding", config.embedding_config},
            {"encoder", encoder_config_to_json(config.encoder)},
            {"train", train_config_to_json(config.train)},
            {"grid", grid},
            {"grid_seeds", config.grid_seeds},
            {"k", config.k},
            {"test_ids", config.test_ids},
            {"test_count", config.test_count},
            {"val_count", config.val_count},
            {"baseline",
             {{"n_seeds", config.baseline.n_seeds},
              {"seed_base", config.baseline.seed_base},
              {"mode", config.baseline.mode == PermutationMode::joint ? "joint" : "per_channel"}}},
            {"refiner", config.refiner_config},
            {"output_dir", config.output_dir},
            {"seed", config.seed}};
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed config '" + path + "': " + e.what());
    }
    return experiment_config_from_json(j);
}

std::size_t AuditLog::accesses_before_scoring() const {
    std::size_t n = 0;
    for (const auto& e : target_accesses) {
        if (e.stage != "scoring") ++n;
    }
    return n;
}

nlohmann::json make_manifest(const ExperimentConfig& config,
                             const std::map<std::string, std::string>& artifact_paths,
                             bool incomplete, const std::string& failed_stage) {
    json artifacts = json::object();
    for (const auto& [name, path] : artifact_paths) {
        artifacts[name] = {{"path", path}, {"fnv1a64", hex64(hash_file(path))}};
    }
    json manifest = {{"kind", "run-manifest"},
                     {"tool_version", kToolVersion},
                     {"config", experiment_config_to_json(config)},
                     {"artifacts", artifacts},
                     {"written_at", timestamp_utc()},
                     {"incomplete", incomplete}};
    if (incomplete) manifest["failed_stage"] = failed_stage;
    return manifest;
}

void write_manifest(const std::string& path, const nlohmann::json& manifest) {
    write_text(path, manifest.dump(2) + "\n");
}

void verify_manifest_artifact(const nlohmann::json& manifest, const std::string& name,
                              const std::string& path) {
    const auto& artifacts = manifest.at("artifacts");
    if (!artifacts.contains(name)) {
        throw std::runtime_error("manifest has no artifact entry '" + name + "'");
    }
    const std::string expected = artifacts.at(name).at("fnv1a64").get<std::string>();
    const std::string actual = hex64(hash_file(path));
    if (expected != actual) {
        throw std::runtime_error("artifact '" + name + "' hash mismatch: manifest " + expected +
                                 " vs file " + actual + " (" + path + ")");
    }
}

std::vector<std::string> resolve_test_ids(const ExperimentConfig& config,
                                          const SubjectCorpus& corpus) {
    if (!config.test_ids.empty()) return config.test_ids;
    // Deterministic draw from the sorted sentence ids. Subjects must share
    // sentence ids for the drawn set to be identical across them, which
    // split_corpus verifies per subject.
    std::vector<std::string> ids;
    for (const auto& [id, rec] : corpus.sentences) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    if (config.test_count >= ids.size()) {
        throw std::runtime_error("test_count " + std::to_string(config.test_count) +
                                 " >= corpus size " + std::to_string(ids.size()));
    }
    Rng rng = Rng(config.seed).substream("test-select");
    rng.shuffle(ids);
    ids.resize(config.test_count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

std::vector<TrainExample> make_examples(const SubjectCorpus& corpus,
                                        const std::vector<std::string>& ids,
                                        const EmbeddingMap& targets) {
    std::map<std::string, const EEGTrial*> by_id;
    for (const auto& t : corpus.trials) by_id[t.sentence_id] = &t;
    std::vector<TrainExample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("no trial for sentence '" + id + "'");
        auto target = targets.find(id);
        if (target == targets.end()) {
            throw std::runtime_error("no target embedding for sentence '" + id + "'");
        }
        out.push_back({id, it->second->data, target->second});
    }
    return out;
}

json grid_result_to_json(const GridSearchResult& result) {
    json rows = json::array();
    for (const auto& row : result.rows) {
        rows.push_back({{"index", row.index},
                        {"seed_val_losses", row.seed_val_losses},
                        {"mean_val_loss", row.mean_val_loss},
                        {"loss_variance", row.loss_variance},
                        {"failed", row.failed},
                        {"error", row.error}});
    }
    return {{"rows", rows}, {"best_index", result.best_index}};
}

} // namespace

SubjectArtifacts run_offline(const ExperimentConfig& config, const std::string& corpus_dir,
                             std::size_t subject_index) {
    SubjectArtifacts artifacts;

    const SubjectCorpus raw = stage("load-corpus", [&] { return load_corpus(corpus_dir); });
    const SubjectCorpus corpus = stage("pad", [&] { return pad_symmetric(raw); });
    artifacts.subject_id = corpus.subject_id;
    artifacts.subject_dir =
            (fs::path(config.output_dir) / "subjects" / corpus.subject_id).string();
    fs::create_directories(artifacts.subject_dir);
    artifacts.model_path = (fs::path(artifacts.subject_dir) / "model.ckpt").string();
    artifacts.store_path = (fs::path(artifacts.subject_dir) / "store.vs").string();
    artifacts.targets_path = (fs::path(artifacts.subject_dir) / "targets.emb").string();

    artifacts.split = stage("split", [&] {
        const auto test_ids = resolve_test_ids(config, corpus);
        return split_corpus(corpus, test_ids, config.val_count,
                            Rng(config.seed).substream("subject-split", subject_index).seed());
    });
    const std::set<std::string> forbidden(artifacts.split.test_ids.begin(),
                                          artifacts.split.test_ids.end());

    const auto provider = make_provider(config.embedding_config);
    const EmbeddingMap targets = stage("embed-targets", [&] {
        if (provider->dimension() != config.encoder.output_dim) {
            throw std::runtime_error("provider dimension " + std::to_string(provider->dimension()) +
                                     " != encoder output dim " +
                                     std::to_string(config.encoder.output_dim));
        }
        EmbeddingMap m;
        for (const auto& [id, rec] : corpus.sentences) m[id] = provider->embed(rec.text);
        save_embedding_cache(artifacts.targets_path, m, provider->name());
        return m;
    });

    const auto train_examples = make_examples(corpus, artifacts.split.train_ids, targets);
    const auto val_examples = make_examples(corpus, artifacts.split.val_ids, targets);

    GridPoint best{config.encoder, config.train};
    if (!config.grid.empty()) {
        artifacts.grid = stage("grid-search", [&] {
            return grid_search(train_examples, val_examples, config.grid, config.grid_seeds,
                               &forbidden);
        });
        best = config.grid[artifacts.grid->best_index];
        write_text((fs::path(artifacts.subject_dir) / "grid.json").string(),
                   grid_result_to_json(*artifacts.grid).dump(2) + "\n");
    }

    const EncoderModel model = stage("final-train", [&] {
        // final retrain on train+validation, test untouched
        std::vector<TrainExample> full = train_examples;
        full.insert(full.end(), val_examples.begin(), val_examples.end());
        TrainConfig tc = best.train;
        tc.seed = Rng(config.seed).substream("final-train", subject_index).seed();
        return finalize_encoder(best.encoder, full, tc, &forbidden);
    });

    stage("build-store", [&] {
        std::vector<StoreEntry> entries;
        std::set<std::string> allowed;
        std::map<std::string, const EEGTrial*> by_id;
        for (const auto& t : corpus.trials) by_id[t.sentence_id] = &t;
        auto add = [&](const std::vector<std::string>& ids) {
            for (const auto& id : ids) {
                allowed.insert(id);
                entries.push_back({id, corpus.sentence(id).text, model.forward(by_id.at(id)->data)});
            }
        };
        add(artifacts.split.train_ids);
        add(artifacts.split.val_ids);
        const VectorStore store = VectorStore::build(entries, allowed);
        store.save(artifacts.store_path);
        model.save(artifacts.model_path);
        return 0;
    });

    const std::map<std::string, std::string> artifact_paths = {
            {"model", artifacts.model_path},
            {"store", artifacts.store_path},
            {"targets", artifacts.targets_path},
            {"corpus_manifest", (fs::path(corpus_dir) / "manifest.json").string()}};
    json manifest = make_manifest(config, artifact_paths, false, "");
    manifest["subject_id"] = corpus.subject_id;
    manifest["corpus_dir"] = corpus_dir;
    manifest["split"] = {{"train_ids", artifacts.split.train_ids},
                         {"val_ids", artifacts.split.val_ids},
                         {"test_ids", artifacts.split.test_ids}};
    manifest["grid_used"] = !config.grid.empty();
    write_manifest((fs::path(artifacts.subject_dir) / "manifest.json").string(), manifest);
    return artifacts;
}

namespace {

struct LoadedArtifacts {
    SubjectCorpus corpus; // padded
    EncoderModel model;
    VectorStore store;
    EmbeddingMap targets;
};

LoadedArtifacts load_stage_inputs(const SubjectArtifacts& artifacts,
                                  const std::string& corpus_dir) {
    // stage isolation: consumed artifacts must match the manifest hashes
    const std::string manifest_path = (fs::path(artifacts.subject_dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing subject manifest '" + manifest_path + "'");
    json manifest;
    in >> manifest;
    verify_manifest_artifact(manifest, "model", artifacts.model_path);
    verify_manifest_artifact(manifest, "store", artifacts.store_path);
    verify_manifest_artifact(manifest, "targets", artifacts.targets_path);

    return LoadedArtifacts{pad_symmetric(load_corpus(corpus_dir)),
                           EncoderModel::load(artifacts.model_path),
                           VectorStore::load(artifacts.store_path),
                           load_embedding_cache(artifacts.targets_path)};
}

std::string subject_corpus_dir(const SubjectArtifacts& artifacts) {
    // the manifest records which corpus the artifacts came from
    const std::string manifest_path = (fs::path(artifacts.subject_dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing subject manifest '" + manifest_path + "'");
    json manifest;
    in >> manifest;
    return manifest.at("corpus_dir").get<std::string>();
}

std::vector<EEGTrial> test_trials_in_order(const SubjectCorpus& corpus,
                                           const std::vector<std::string>& test_ids) {
    std::map<std::string, const EEGTrial*> by_id;
    for (const auto& t : corpus.trials) by_id[t.sentence_id] = &t;
    std::vector<EEGTrial> out;
    out.reserve(test_ids.size());
    for (const auto& id : test_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("no trial for test sentence '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

} // namespace

InferenceOutputs run_inference(const ExperimentConfig& config, const SubjectArtifacts& artifacts) {
    return stage("inference", [&]() -> InferenceOutputs {
        const std::string corpus_dir = subject_corpus_dir(artifacts);
        LoadedArtifacts loaded = load_stage_inputs(artifacts, corpus_dir);
        const auto provider = make_provider(config.embedding_config);
        const auto refiner = make_client(config.refiner_config);

        InferenceOutputs outputs;
        // targets are only reachable through this accessor, so the audit
        // log is a complete record of ground-truth embedding accesses
        const auto audited_target = [&](const std::string& id,
                                        const std::string& stage_name) -> const EmbeddingVector& {
            outputs.audit.target_accesses.push_back({stage_name, id});
            auto it = loaded.targets.find(id);
            if (it == loaded.targets.end()) {
                throw std::runtime_error("no target embedding for '" + id + "'");
            }
            return it->second;
        };

        const auto test_trials = test_trials_in_order(loaded.corpus, artifacts.split.test_ids);
        for (const auto& trial : test_trials) {
            const DecodeOutcome outcome =
                    decode_trial(loaded.model, trial.data, loaded.store, config.k, *refiner,
                                 *provider, trial.sentence_id);
            for (const auto& hit : outcome.retrieval.hits) {
                outputs.audit.texts_seen_by_refiner.push_back(hit.text);
            }
            // scoring stage: first and only place ground truth is consulted
            const double cosine = cosine_similarity(
                    outcome.output_embedding, audited_target(trial.sentence_id, "scoring"));
            outputs.real_scores[trial.sentence_id] = cosine;

            DecodedRecord rec;
            rec.sentence_id = trial.sentence_id;
            rec.output_sentence = outcome.refined.output_sentence;
            rec.retrieved = outcome.retrieval.hits;
            rec.cosine = cosine;
            outputs.decoded.push_back(std::move(rec));
        }

        // no-leakage audit: the refiner must never have seen a test sentence
        std::set<std::string> test_texts;
        for (const auto& id : artifacts.split.test_ids) {
            test_texts.insert(loaded.corpus.sentence(id).text);
        }
        for (const auto& text : outputs.audit.texts_seen_by_refiner) {
            if (test_texts.count(text)) {
                throw std::runtime_error("leakage: refiner saw a test ground-truth sentence");
            }
        }

        std::string decoded_lines;
        for (const auto& rec : outputs.decoded) {
            json hits = json::array();
            for (const auto& h : rec.retrieved) {
                hits.push_back({{"sentence_id", h.sentence_id},
                                {"text", h.text},
                                {"similarity", h.similarity}});
            }
            decoded_lines += json{{"sentence_id", rec.sentence_id},
                                  {"output", rec.output_sentence},
                                  {"cosine", rec.cosine},
                                  {"retrieved", hits}}
                                     .dump() +
                             "\n";
        }
        write_text((fs::path(artifacts.subject_dir) / "decoded.jsonl").string(), decoded_lines);

        std::string score_lines;
        for (const auto& [id, cosine] : outputs.real_scores) {
            score_lines += json{{"sentence_id", id}, {"cosine", cosine}}.dump() + "\n";
        }
        write_text((fs::path(artifacts.subject_dir) / "real_scores.jsonl").string(), score_lines);

        json audit_events = json::array();
        for (const auto& e : outputs.audit.target_accesses) {
            audit_events.push_back({{"stage", e.stage}, {"sentence_id", e.sentence_id}});
        }
        const json audit = {{"target_accesses", audit_events},
                            {"accesses_before_scoring", outputs.audit.accesses_before_scoring()},
                            {"refiner_text_count", outputs.audit.texts_seen_by_refiner.size()},
                            {"refiner_saw_test_text", false}};
        write_text((fs::path(artifacts.subject_dir) / "audit.json").string(),
                   audit.dump(2) + "\n");
        return outputs;
    });
}

std::vector<BaselineScore> run_baseline_stage(const ExperimentConfig& config,
                                              const SubjectArtifacts& artifacts) {
    return stage("baseline", [&] {
        const std::string corpus_dir = subject_corpus_dir(artifacts);
        LoadedArtifacts loaded = load_stage_inputs(artifacts, corpus_dir);
        const auto provider = make_provider(config.embedding_config);
        const auto refiner = make_client(config.refiner_config);

        BaselineConfig bc = config.baseline;
        if (bc.seed_base == 0) {
            bc.seed_base = Rng(config.seed).substream("baseline").seed();
        }
        const auto test_trials = test_trials_in_order(loaded.corpus, artifacts.split.test_ids);
        const auto runs = make_baseline_runs(test_trials, artifacts.split.test_ids, bc);
        const auto scores = run_baseline(runs, loaded.model, loaded.store, config.k, *refiner,
                                         *provider, loaded.targets);

        std::string lines;
        for (const auto& s : scores) {
            lines += json{{"seed", s.seed}, {"sentence_id", s.sentence_id}, {"cosine", s.cosine}}
                             .dump() +
                     "\n";
        }
        write_text((fs::path(artifacts.subject_dir) / "baseline_scores.jsonl").string(), lines);
        return scores;
    });
}

EvalReport run_full_experiment(const ExperimentConfig& config) {
    fs::create_directories(config.output_dir);
    std::map<std::string, std::string> artifact_paths;
    try {
        std::vector<Analysis> analyses;
        std::vector<PairedSample> dataset_pairs;

        for (std::size_t i = 0; i < config.corpus_dirs.size(); ++i) {
            const SubjectArtifacts artifacts = run_offline(config, config.corpus_dirs[i], i);
            const InferenceOutputs inference = run_inference(config, artifacts);
            const auto baseline_scores = run_baseline_stage(config, artifacts);
            const auto baseline_means = average_over_seeds(baseline_scores);

            analyses.push_back(stage("stats", [&] {
                return subject_analysis(artifacts.subject_id, inference.real_scores,
                                        baseline_means);
            }));
            const auto& a = analyses.back();
            dataset_pairs.push_back({artifacts.subject_id, a.real.mu, a.baseline.mu});

            artifact_paths["subject:" + artifacts.subject_id + ":model"] = artifacts.model_path;
            artifact_paths["subject:" + artifacts.subject_id + ":store"] = artifacts.store_path;
            artifact_paths["subject:" + artifacts.subject_id + ":scores"] =
                    (fs::path(artifacts.subject_dir) / "real_scores.jsonl").string();
            artifact_paths["subject:" + artifacts.subject_id + ":baseline_scores"] =
                    (fs::path(artifacts.subject_dir) / "baseline_scores.jsonl").string();
        }

        const EvalReport report = stage("report", [&] {
            std::optional<Analysis> dataset;
            if (dataset_pairs.size() >= 2) {
                dataset = dataset_analysis(dataset_pairs);
            } else {
                std::clog << "single subject: whole-dataset row omitted "
                             "(the paired test needs at least 2 subjects)\n";
            }
            EvalReport r = build_report(analyses, dataset);
            write_text((fs::path(config.output_dir) / "report.json").string(),
                       report_to_json(r).dump(2) + "\n");
            write_text((fs::path(config.output_dir) / "report.txt").string(),
                       report_table_text(r));
            write_text((fs::path(config.output_dir) / "boxplots.csv").string(),
                       report_boxplot_csv(r));
            emit_plots(r, config.output_dir);
            return r;
        });

        artifact_paths["report"] = (fs::path(config.output_dir) / "report.json").string();
        write_manifest((fs::path(config.output_dir) / "manifest.json").string(),
                       make_manifest(config, artifact_paths, false, ""));
        return report;
    } catch (const StageError& e) {
        // keep partial artifacts, mark the run incomplete
        write_manifest((fs::path(config.output_dir) / "manifest.json").string(),
                       make_manifest(config, artifact_paths, true, e.stage_name));
        throw;
    }
}

SubjectArtifacts load_subject_artifacts(const std::string& subject_dir) {
    const std::string manifest_path = (fs::path(subject_dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("missing subject manifest '" + manifest_path + "'");
    json manifest;
    in >> manifest;

    SubjectArtifacts artifacts;
    artifacts.subject_id = manifest.at("subject_id").get<std::string>();
    artifacts.subject_dir = subject_dir;
    artifacts.model_path = manifest.at("artifacts").at("model").at("path").get<std::string>();
    artifacts.store_path = manifest.at("artifacts").at("store").at("path").get<std::string>();
    artifacts.targets_path = manifest.at("artifacts").at("targets").at("path").get<std::string>();
    const auto& split = manifest.at("split");
    artifacts.split.train_ids = split.at("train_ids").get<std::vector<std::string>>();
    artifacts.split.val_ids = split.at("val_ids").get<std::vector<std::string>>();
    artifacts.split.test_ids = split.at("test_ids").get<std::vector<std::string>>();
    return artifacts;
}

std::map<std::string, double> load_real_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scores file '" + path + "'");
    std::map<std::string, double> scores;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        scores[j.at("sentence_id").get<std::string>()] = j.at("cosine").get<double>();
    }
    return scores;
}

std::vector<BaselineScore> load_baseline_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scores file '" + path + "'");
    std::vector<BaselineScore> scores;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        scores.push_back({j.at("seed").get<std::uint64_t>(),
                          j.at("sentence_id").get<std::string>(), j.at("cosine").get<double>()});
    }
    return scores;
}

void emit_plots(const EvalReport& report, const std::string& out_dir) {
    std::string lines = "subject_id,real_mu,rand_mu,p_raw,style\n";
    for (const auto& row : report.per_subject) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%s\n", row.subject_id.c_str(),
                      row.real_mu, row.rand_mu, row.p_raw, row.significant ? "solid" : "dashed");
        lines += buf;
    }
    write_text((fs::path(out_dir) / "paired_lines.csv").string(), lines);

    std::string boxes = "condition,q1,median,q3,whisker_low,whisker_high\n";
    if (report.whole_dataset) {
        const auto emit = [&](const char* cond, const BoxStats& b) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", cond, b.q1, b.median,
                          b.q3, b.whisker_low, b.whisker_high);
            boxes += buf;
        };
        emit("real", report.dataset_real_box);
        emit("baseline", report.dataset_baseline_box);
    }
    write_text((fs::path(out_dir) / "boxes.csv").string(), boxes);
}

} // namespace eegrag
