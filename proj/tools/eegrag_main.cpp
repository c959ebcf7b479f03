// eegrag command-line front end. Subcommands mirror the pipeline stages;
// exit codes: 0 success, 1 validation error, 2 stage failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eegrag/baseline.hpp"
#include "eegrag/corpus.hpp"
#include "eegrag/embedding.hpp"
#include "eegrag/encoder.hpp"
#include "eegrag/pipeline.hpp"
#include "eegrag/refine.hpp"
#include "eegrag/retrieval.hpp"
#include "eegrag/rng.hpp"
#include "eegrag/stats.hpp"
#include "eegrag/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eegrag;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    json j;
    in >> j;
    return j;
}

int cmd_corpus_validate(const std::string& path) {
    const SubjectCorpus corpus = load_corpus(path);
    std::size_t t_min = SIZE_MAX;
    std::size_t t_max = 0;
    for (const auto& t : corpus.trials) {
        t_min = std::min(t_min, t.samples());
        t_max = std::max(t_max, t.samples());
    }
    std::cout << "subject " << corpus.subject_id << ": " << corpus.trials.size() << " trials, "
              << corpus.sentences.size() << " sentences, "
              << (corpus.trials.empty() ? 0 : corpus.trials.front().channels()) << " channels, "
              << "samples " << (corpus.trials.empty() ? 0 : t_min) << ".." << t_max << ", "
              << corpus.dropped_trials << " dropped\n";
    std::cout << "corpus OK\n";
    return 0;
}

int cmd_corpus_synth(std::size_t n, std::size_t channels, std::size_t samples, double snr,
                     std::uint64_t seed, const std::string& out) {
    const SubjectCorpus corpus = generate_synthetic(n, channels, samples, snr, seed);
    save_corpus(corpus, out);
    std::cout << "wrote synthetic corpus '" << corpus.subject_id << "' (" << n << " sentences) to "
              << out << "\n";
    return 0;
}

// Loads a corpus, computes padded train/val examples and target embeddings
// from an experiment config; shared by the encoder subcommands.
struct PreparedSubject {
    SubjectCorpus corpus; // padded
    CorpusSplit split;
    EmbeddingMap targets;
    std::vector<TrainExample> train_examples;
    std::vector<TrainExample> val_examples;
    std::set<std::string> forbidden;
};

PreparedSubject prepare_subject(const ExperimentConfig& config, const std::string& corpus_dir) {
    PreparedSubject p;
    p.corpus = pad_symmetric(load_corpus(corpus_dir));
    p.split = split_corpus(p.corpus, resolve_test_ids(config, p.corpus), config.val_count,
                           Rng(config.seed).substream("subject-split", 0).seed());
    const auto provider = make_provider(config.embedding_config);
    for (const auto& [id, rec] : p.corpus.sentences) p.targets[id] = provider->embed(rec.text);

    std::map<std::string, const EEGTrial*> by_id;
    for (const auto& t : p.corpus.trials) by_id[t.sentence_id] = &t;
    const auto collect = [&](const std::vector<std::string>& ids) {
        std::vector<TrainExample> out;
        for (const auto& id : ids) out.push_back({id, by_id.at(id)->data, p.targets.at(id)});
        return out;
    };
    p.train_examples = collect(p.split.train_ids);
    p.val_examples = collect(p.split.val_ids);
    p.forbidden.insert(p.split.test_ids.begin(), p.split.test_ids.end());
    return p;
}

int cmd_encoder_train(const std::string& config_path, const std::string& corpus_dir,
                      const std::string& out) {
    const ExperimentConfig config = load_experiment_config(config_path);
    PreparedSubject p = prepare_subject(config, corpus_dir);
    const EncoderModel model = train_encoder(config.encoder, p.train_examples, p.val_examples,
                                             config.train, &p.forbidden);
    model.save(out);
    const auto& last = model.history().back();
    std::cout << "trained " << model.parameters().size() << " parameters; final train loss "
              << last.train_loss;
    if (last.val_loss) std::cout << ", val loss " << *last.val_loss;
    std::cout << "; checkpoint: " << out << "\n";
    return 0;
}

int cmd_encoder_gridsearch(const std::string& config_path, const std::string& corpus_dir,
                           const std::string& out) {
    const ExperimentConfig config = load_experiment_config(config_path);
    if (config.grid.empty()) throw std::runtime_error("config has no grid");
    PreparedSubject p = prepare_subject(config, corpus_dir);
    const GridSearchResult result = grid_search(p.train_examples, p.val_examples, config.grid,
                                                config.grid_seeds, &p.forbidden);
    json rows = json::array();
    for (const auto& row : result.rows) {
        rows.push_back({{"index", row.index},
                        {"seed_val_losses", row.seed_val_losses},
                        {"mean_val_loss", row.mean_val_loss},
                        {"loss_variance", row.loss_variance},
                        {"failed", row.failed},
                        {"error", row.error}});
    }
    std::ofstream(out) << json{{"rows", rows}, {"best_index", result.best_index}}.dump(2) << "\n";
    std::cout << "best grid point: " << result.best_index << " (table: " << out << ")\n";
    return 0;
}

int cmd_encoder_embed(const std::string& model_path, const std::string& corpus_dir,
                      const std::string& out) {
    const EncoderModel model = EncoderModel::load(model_path);
    const SubjectCorpus corpus = pad_symmetric(load_corpus(corpus_dir));
    EmbeddingMap embeddings;
    for (const auto& trial : corpus.trials) {
        embeddings[trial.sentence_id] = model.forward(trial.data);
    }
    save_embedding_cache(out, embeddings, "eeg-encoder");
    std::cout << "wrote " << embeddings.size() << " EEG embeddings to " << out << "\n";
    return 0;
}

int cmd_index_build(const std::string& embeddings_path, const std::string& ids_path,
                    const std::string& corpus_dir, const std::string& out) {
    const EmbeddingMap embeddings = load_embedding_cache(embeddings_path);
    const SubjectCorpus corpus = load_corpus(corpus_dir);
    const auto ids = read_json_file(ids_path).get<std::vector<std::string>>();
    std::set<std::string> allowed(ids.begin(), ids.end());
    std::vector<StoreEntry> entries;
    for (const auto& id : ids) {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw std::runtime_error("no embedding for sentence '" + id + "'");
        }
        entries.push_back({id, corpus.sentence(id).text, it->second});
    }
    const VectorStore store = VectorStore::build(entries, allowed);
    store.save(out);
    std::cout << "built store with " << store.size() << " entries: " << out << "\n";
    return 0;
}

int cmd_index_query(const std::string& store_path, const std::string& vector_file, std::size_t k) {
    const VectorStore store = VectorStore::load(store_path);
    const auto floats = read_f32_le(vector_file, kEmbeddingDim);
    const RetrievalResult result = store.query(floats_to_doubles(floats), k);
    json hits = json::array();
    for (const auto& h : result.hits) {
        hits.push_back({{"sentence_id", h.sentence_id},
                        {"text", h.text},
                        {"similarity", h.similarity}});
    }
    std::cout << hits.dump(2) << "\n";
    return 0;
}

int cmd_refine_run(const std::string& in_path, const std::string& client_config_path,
                   const std::string& out) {
    const auto client = make_client(read_json_file(client_config_path));
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open '" + in_path + "'");
    std::ofstream results(out, std::ios::trunc);
    if (!results) throw std::runtime_error("cannot write '" + out + "'");

    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        RefineRequest request;
        for (const auto& item : j.at("retrieved")) {
            request.retrieved.push_back(item.is_string() ? item.get<std::string>()
                                                         : item.at("text").get<std::string>());
        }
        const RefineResult r = client->refine(request);
        results << json{{"sentence_id", j.value("sentence_id", "")},
                        {"output", r.output_sentence},
                        {"client", r.client_name},
                        {"latency_ms", r.latency_ms}}
                           .dump()
                << "\n";
        ++count;
    }
    std::cout << "refined " << count << " items -> " << out << "\n";
    return 0;
}

int cmd_baseline_run(const std::string& config_path, const std::string& subject_dir,
                     std::size_t seeds, std::uint64_t seed_base, const std::string& out) {
    ExperimentConfig config = load_experiment_config(config_path);
    if (seeds > 0) config.baseline.n_seeds = seeds;
    if (seed_base > 0) config.baseline.seed_base = seed_base;
    const SubjectArtifacts artifacts = load_subject_artifacts(subject_dir);
    const auto scores = run_baseline_stage(config, artifacts);
    if (!out.empty()) {
        fs::copy_file(fs::path(subject_dir) / "baseline_scores.jsonl", out,
                      fs::copy_options::overwrite_existing);
    }
    std::cout << "baseline: " << scores.size() << " scores over " << config.baseline.n_seeds
              << " seeds\n";
    return 0;
}

int cmd_stats_report(const std::string& real_path, const std::string& baseline_path,
                     const std::string& subject_id, const std::string& scores_dir,
                     const std::string& out) {
    std::vector<Analysis> analyses;
    if (!scores_dir.empty()) {
        const fs::path subjects = fs::path(scores_dir) / "subjects";
        if (!fs::exists(subjects)) {
            throw std::runtime_error("no subjects/ directory under '" + scores_dir + "'");
        }
        for (const auto& entry : fs::directory_iterator(subjects)) {
            if (!entry.is_directory()) continue;
            const auto real = load_real_scores((entry.path() / "real_scores.jsonl").string());
            const auto baseline =
                    load_baseline_scores((entry.path() / "baseline_scores.jsonl").string());
            analyses.push_back(subject_analysis(entry.path().filename().string(), real,
                                                average_over_seeds(baseline)));
        }
        std::sort(analyses.begin(), analyses.end(),
                  [](const Analysis& a, const Analysis& b) { return a.label < b.label; });
    } else {
        const auto real = load_real_scores(real_path);
        const auto baseline = load_baseline_scores(baseline_path);
        analyses.push_back(subject_analysis(subject_id, real, average_over_seeds(baseline)));
    }
    if (analyses.empty()) throw std::runtime_error("no score files found");

    std::optional<Analysis> dataset;
    if (analyses.size() >= 2) {
        std::vector<PairedSample> pairs;
        for (const auto& a : analyses) pairs.push_back({a.label, a.real.mu, a.baseline.mu});
        dataset = dataset_analysis(pairs);
    }
    const EvalReport report = build_report(analyses, dataset);
    std::ofstream(out) << report_to_json(report).dump(2) << "\n";
    std::cout << report_table_text(report);
    return 0;
}

int cmd_experiment_run(const std::string& config_path) {
    const ExperimentConfig config = load_experiment_config(config_path);
    const EvalReport report = run_full_experiment(config);
    std::cout << report_table_text(report);
    std::cout << "artifacts under " << config.output_dir << "\n";
    return 0;
}

int cmd_experiment_plots(const std::string& report_path, const std::string& out_dir) {
    const EvalReport report = report_from_json(read_json_file(report_path));
    fs::create_directories(out_dir);
    emit_plots(report, out_dir);
    std::ofstream((fs::path(out_dir) / "boxplots.csv").string()) << report_boxplot_csv(report);
    std::cout << "plot data written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG-to-text decoding pipeline: corpus tools, encoder training, retrieval "
                 "index, refinement, permutation baseline and statistics"};
    app.require_subcommand(1);

    // corpus
    auto* corpus = app.add_subcommand("corpus", "corpus inspection and synthesis");
    corpus->require_subcommand(1);
    std::string corpus_path;
    auto* validate = corpus->add_subcommand("validate", "validate a corpus directory");
    validate->add_option("path", corpus_path)->required();

    std::size_t synth_n = 100, synth_c = 8, synth_t = 64;
    double synth_snr = 1.0;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = corpus->add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--n", synth_n, "number of sentences");
    synth->add_option("--channels", synth_c);
    synth->add_option("--samples", synth_t);
    synth->add_option("--snr", synth_snr);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();

    // encoder
    auto* encoder = app.add_subcommand("encoder", "encoder training and embedding export");
    encoder->require_subcommand(1);
    std::string enc_config, enc_corpus, enc_out, enc_model;
    auto* train = encoder->add_subcommand("train", "train an encoder for one subject");
    train->add_option("--config", enc_config)->required();
    train->add_option("--corpus", enc_corpus)->required();
    train->add_option("--out", enc_out)->required();
    auto* gridsearch = encoder->add_subcommand("gridsearch", "hyperparameter grid search");
    gridsearch->add_option("--config", enc_config)->required();
    gridsearch->add_option("--corpus", enc_corpus)->required();
    gridsearch->add_option("--out", enc_out)->required();
    auto* embed = encoder->add_subcommand("embed", "write per-sentence EEG embeddings");
    embed->add_option("--model", enc_model)->required();
    embed->add_option("--corpus", enc_corpus)->required();
    embed->add_option("--out", enc_out)->required();

    // index
    auto* index = app.add_subcommand("index", "vector store build/query");
    index->require_subcommand(1);
    std::string idx_embeddings, idx_ids, idx_corpus, idx_out, idx_store, idx_vector;
    std::size_t idx_k = 3;
    auto* build = index->add_subcommand("build", "build a store from an embedding cache");
    build->add_option("--embeddings", idx_embeddings)->required();
    build->add_option("--train-ids", idx_ids)->required();
    build->add_option("--corpus", idx_corpus)->required();
    build->add_option("--out", idx_out)->required();
    auto* query = index->add_subcommand("query", "query a store with a raw f32 vector");
    query->add_option("--store", idx_store)->required();
    query->add_option("--vector-file", idx_vector)->required();
    query->add_option("--k", idx_k);

    // refine
    auto* refine = app.add_subcommand("refine", "LLM refinement stage");
    refine->require_subcommand(1);
    std::string ref_in, ref_client, ref_out;
    auto* refine_run = refine->add_subcommand("run", "refine retrieved sentences");
    refine_run->add_option("--in", ref_in)->required();
    refine_run->add_option("--client", ref_client)->required();
    refine_run->add_option("--store-results", ref_out)->required();

    // baseline
    auto* baseline = app.add_subcommand("baseline", "temporal-permutation baseline");
    baseline->require_subcommand(1);
    std::string bl_config, bl_subject_dir, bl_out;
    std::size_t bl_seeds = 0;
    std::uint64_t bl_seed_base = 0;
    auto* baseline_run = baseline->add_subcommand("run", "run the baseline for one subject");
    baseline_run->add_option("--config", bl_config)->required();
    baseline_run->add_option("--subject-dir", bl_subject_dir)->required();
    baseline_run->add_option("--seeds", bl_seeds);
    baseline_run->add_option("--seed-base", bl_seed_base);
    baseline_run->add_option("--out", bl_out);

    // stats
    auto* stats = app.add_subcommand("stats", "statistical report");
    stats->require_subcommand(1);
    std::string st_real, st_baseline, st_subject = "S1", st_dir, st_out = "report.json";
    auto* report = stats->add_subcommand("report", "build an evaluation report");
    report->add_option("--real", st_real);
    report->add_option("--baseline", st_baseline);
    report->add_option("--subject", st_subject);
    report->add_option("--scores-dir", st_dir);
    report->add_option("--out", st_out);

    // experiment
    auto* experiment = app.add_subcommand("experiment", "full workflow");
    experiment->require_subcommand(1);
    std::string exp_config, exp_report, exp_out_dir;
    auto* exp_run = experiment->add_subcommand("run", "run the whole experiment");
    exp_run->add_option("--config", exp_config)->required();
    auto* exp_plots = experiment->add_subcommand("plots", "emit plot CSVs from a report");
    exp_plots->add_option("--report", exp_report)->required();
    exp_plots->add_option("--out-dir", exp_out_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_corpus_validate(corpus_path);
        if (synth->parsed()) {
            return cmd_corpus_synth(synth_n, synth_c, synth_t, synth_snr, synth_seed, synth_out);
        }
        if (train->parsed()) return cmd_encoder_train(enc_config, enc_corpus, enc_out);
        if (gridsearch->parsed()) return cmd_encoder_gridsearch(enc_config, enc_corpus, enc_out);
        if (embed->parsed()) return cmd_encoder_embed(enc_model, enc_corpus, enc_out);
        if (build->parsed()) return cmd_index_build(idx_embeddings, idx_ids, idx_corpus, idx_out);
        if (query->parsed()) return cmd_index_query(idx_store, idx_vector, idx_k);
        if (refine_run->parsed()) return cmd_refine_run(ref_in, ref_client, ref_out);
        if (baseline_run->parsed()) {
            return cmd_baseline_run(bl_config, bl_subject_dir, bl_seeds, bl_seed_base, bl_out);
        }
        if (report->parsed()) {
            return cmd_stats_report(st_real, st_baseline, st_subject, st_dir, st_out);
        }
        if (exp_run->parsed()) return cmd_experiment_run(exp_config);
        if (exp_plots->parsed()) return cmd_experiment_plots(exp_report, exp_out_dir);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
