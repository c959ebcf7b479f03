#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eegrag/corpus.hpp"
#include "eegrag/embedding.hpp"
#include "eegrag/matrix.hpp"
#include "eegrag/rng.hpp"

namespace eegrag {

struct EncoderConfig {
    std::vector<std::size_t> temporal_dilations = {1, 2, 4, 8};
    std::size_t temporal_kernel = 7; // odd
    std::size_t spatial_kernel_channels = 0; // 0 = span all input channels
    std::size_t residual_blocks = 2;
    std::size_t hidden_width = 128;
    double dropout_rate = 0.3;
    double leaky_relu_slope = 0.01;
    std::size_t output_dim = kEmbeddingDim;
};

void validate_config(const EncoderConfig& cfg);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double min_lr = 1e-5; // cosine annealing floor
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct TrainExample {
    std::string sentence_id;
    Matrix data;            // C x T, padded
    EmbeddingVector target; // unit norm (alignment target)
};

// Eq.-style alignment loss: 1 - cos(z_eeg, z_txt), range [0, 2].
double cosine_loss(const EmbeddingVector& z_eeg, const EmbeddingVector& z_txt);

struct ParamSegment {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

// Convolutional EEG encoder: parallel dilated depthwise temporal
// convolutions, one spatial convolution across all channels, residual
// blocks (depthwise temporal + pointwise), global average pooling over
// time and a linear projection to the embedding space. All parameters
// live in one flat vector with named segments; forward/backward are
// implemented directly so gradients can be checked against finite
// differences.
class EncoderModel {
public:
    EncoderModel(EncoderConfig cfg, std::size_t channels, std::size_t samples,
                 std::uint64_t init_seed);

    const EncoderConfig& config() const { return cfg_; }
    std::size_t channels() const { return channels_; }
    std::size_t samples() const { return samples_; }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    const std::vector<ParamSegment>& segments() const { return segments_; }

    std::vector<EpochStats>& history() { return history_; }
    const std::vector<EpochStats>& history() const { return history_; }

    // Inference-mode forward (dropout disabled); deterministic.
    EmbeddingVector forward(const Matrix& input) const;
    EmbeddingVector forward(const EEGTrial& trial) const;

    // Mean cosine loss over the batch plus its gradient w.r.t. the flat
    // parameter vector. dropout_rng == nullptr disables dropout.
    double loss_and_gradient(const std::vector<const TrainExample*>& batch,
                             std::vector<double>& grad, Rng* dropout_rng) const;
    double mean_loss(const std::vector<TrainExample>& examples) const;

    void save(const std::string& path) const;
    static EncoderModel load(const std::string& path);

private:
    void check_shape(const Matrix& input) const;

    EncoderConfig cfg_;
    std::size_t channels_ = 0;
    std::size_t samples_ = 0;
    std::vector<double> params_;
    std::vector<ParamSegment> segments_;
    std::vector<EpochStats> history_;
};

// Trains a fresh model (initialized from tc.seed) by SGD with decoupled
// weight decay and cosine-annealed learning rate. forbidden_ids is the
// test partition: any batch containing one of those ids aborts the run.
EncoderModel train_encoder(const EncoderConfig& cfg,
                           const std::vector<TrainExample>& train_set,
                           const std::vector<TrainExample>& val_set, const TrainConfig& tc,
                           const std::set<std::string>* forbidden_ids = nullptr);

// Retraining on train+validation for the final per-subject model.
EncoderModel finalize_encoder(const EncoderConfig& cfg,
                              const std::vector<TrainExample>& full_train_set,
                              const TrainConfig& tc,
                              const std::set<std::string>* forbidden_ids = nullptr);

struct GridPoint {
    EncoderConfig encoder;
    TrainConfig train;
};

struct GridRow {
    std::size_t index = 0;
    std::vector<double> seed_val_losses;
    double mean_val_loss = 0.0;
    double loss_variance = 0.0;
    bool failed = false;
    std::string error;
};

struct GridSearchResult {
    std::vector<GridRow> rows;
    std::size_t best_index = 0;
};

// Trains every grid point once per seed and picks the lowest mean
// validation loss; ties go to the lower across-seed variance, then to grid
// order. Grid points whose training fails are recorded and skipped; if all
// fail the search fails.
GridSearchResult grid_search(const std::vector<TrainExample>& train_set,
                             const std::vector<TrainExample>& val_set,
                             const std::vector<GridPoint>& grid,
                             const std::vector<std::uint64_t>& seeds,
                             const std::set<std::string>* forbidden_ids = nullptr);

} // namespace eegrag
