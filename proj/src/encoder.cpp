#include "eegrag/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eegrag/tensor_io.hpp"

using nlohmann::json;

namespace eegrag {

void validate_config(const EncoderConfig& cfg) {
    if (cfg.temporal_dilations.empty()) {
        throw std::invalid_argument("encoder config: need at least one dilation");
    }
    for (std::size_t i = 0; i + 1 < cfg.temporal_dilations.size(); ++i) {
        if (cfg.temporal_dilations[i] >= cfg.temporal_dilations[i + 1]) {
            throw std::invalid_argument("encoder config: dilations must be strictly increasing");
        }
    }
    if (cfg.temporal_dilations.front() == 0) {
        throw std::invalid_argument("encoder config: dilations must be positive");
    }
    if (cfg.temporal_kernel == 0 || cfg.temporal_kernel % 2 == 0) {
        throw std::invalid_argument("encoder config: temporal kernel must be odd");
    }
    if (cfg.hidden_width == 0) throw std::invalid_argument("encoder config: hidden width is zero");
    if (cfg.output_dim == 0) throw std::invalid_argument("encoder config: output dim is zero");
    if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
        throw std::invalid_argument("encoder config: dropout must be in [0, 1)");
    }
    if (cfg.leaky_relu_slope <= 0.0) {
        throw std::invalid_argument("encoder config: leaky relu slope must be positive");
    }
}

double cosine_loss(const EmbeddingVector& z_eeg, const EmbeddingVector& z_txt) {
    const double nz = norm(z_eeg);
    const double nt = norm(z_txt);
    if (nz <= 0.0 || nt <= 0.0) {
        throw std::runtime_error("cosine_loss: zero-norm input");
    }
    return 1.0 - dot(z_eeg, z_txt) / (nz * nt);
}

namespace {

// Parameter layout inside the flat vector.
struct Layout {
    std::size_t n_d, C, K, H, R, O, M;
    std::size_t dw_w, dw_b, sp_w, sp_b;
    std::vector<std::size_t> r_dw_w, r_dw_b, r_pw_w, r_pw_b;
    std::size_t proj_w, proj_b, total;

    Layout(const EncoderConfig& cfg, std::size_t channels) {
        n_d = cfg.temporal_dilations.size();
        C = channels;
        K = cfg.temporal_kernel;
        H = cfg.hidden_width;
        R = cfg.residual_blocks;
        O = cfg.output_dim;
        M = n_d * C;
        std::size_t off = 0;
        const auto take = [&off](std::size_t n) {
            const std::size_t at = off;
            off += n;
            return at;
        };
        dw_w = take(M * K);
        dw_b = take(M);
        sp_w = take(H * M);
        sp_b = take(H);
        for (std::size_t r = 0; r < R; ++r) {
            r_dw_w.push_back(take(H * K));
            r_dw_b.push_back(take(H));
            r_pw_w.push_back(take(H * H));
            r_pw_b.push_back(take(H));
        }
        proj_w = take(O * H);
        proj_b = take(O);
        total = off;
    }

    std::vector<ParamSegment> segments() const {
        std::vector<ParamSegment> segs = {{"temporal_dw.weight", dw_w, M * K},
                                          {"temporal_dw.bias", dw_b, M},
                                          {"spatial.weight", sp_w, H * M},
                                          {"spatial.bias", sp_b, H}};
        for (std::size_t r = 0; r < R; ++r) {
            const std::string p = "res" + std::to_string(r);
            segs.push_back({p + ".dw.weight", r_dw_w[r], H * K});
            segs.push_back({p + ".dw.bias", r_dw_b[r], H});
            segs.push_back({p + ".pw.weight", r_pw_w[r], H * H});
            segs.push_back({p + ".pw.bias", r_pw_b[r], H});
        }
        segs.push_back({"proj.weight", proj_w, O * H});
        segs.push_back({"proj.bias", proj_b, O});
        return segs;
    }
};

// y[t] = b + sum_j w[j] * x[t + (j - K/2) * dil], zero padding outside [0, T)
void dwconv_row(const double* x, std::size_t T, const double* w, double b, std::size_t K,
                std::size_t dil, double* y) {
    const auto half = static_cast<std::ptrdiff_t>(K / 2);
    const auto Ts = static_cast<std::ptrdiff_t>(T);
    for (std::ptrdiff_t t = 0; t < Ts; ++t) {
        double acc = b;
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(K); ++j) {
            const std::ptrdiff_t u = t + (j - half) * static_cast<std::ptrdiff_t>(dil);
            if (u >= 0 && u < Ts) acc += w[j] * x[u];
        }
        y[t] = acc;
    }
}

void dwconv_row_backward(const double* x, const double* dy, std::size_t T, const double* w,
                         std::size_t K, std::size_t dil, double* dw, double* db, double* dx) {
    const auto half = static_cast<std::ptrdiff_t>(K / 2);
    const auto Ts = static_cast<std::ptrdiff_t>(T);
    for (std::ptrdiff_t t = 0; t < Ts; ++t) {
        const double g = dy[t];
        if (db) *db += g;
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(K); ++j) {
            const std::ptrdiff_t u = t + (j - half) * static_cast<std::ptrdiff_t>(dil);
            if (u < 0 || u >= Ts) continue;
            dw[j] += g * x[u];
            if (dx) dx[u] += g * w[j];
        }
    }
}

struct Workspace {
    Matrix a1, h1;
    Matrix a2, h2, mask0;
    std::vector<Matrix> z, a3, h3, a4, mask;
    std::vector<double> g;
    EmbeddingVector out;
};

double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }
double lrelu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

void apply_lrelu(const Matrix& a, Matrix& h, double slope) {
    h = Matrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) h.data()[i] = lrelu(a.data()[i], slope);
}

// Inverted-dropout mask of keep-scales; all ones when rng is null or rate 0.
void fill_mask(Matrix& mask, std::size_t rows, std::size_t cols, double rate, Rng* rng) {
    mask = Matrix(rows, cols, 1.0);
    if (!rng || rate <= 0.0) return;
    const double scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data()) m = (rng->uniform() < rate) ? 0.0 : scale;
}

void forward_impl(const Layout& L, const std::vector<double>& p, const EncoderConfig& cfg,
                  const Matrix& x, Workspace& ws, Rng* dropout_rng) {
    const std::size_t T = x.cols();
    const double slope = cfg.leaky_relu_slope;

    ws.a1 = Matrix(L.M, T);
    for (std::size_t d = 0; d < L.n_d; ++d) {
        const std::size_t dil = cfg.temporal_dilations[d];
        for (std::size_t c = 0; c < L.C; ++c) {
            const std::size_t m = d * L.C + c;
            dwconv_row(&x.data()[c * T], T, &p[L.dw_w + m * L.K], p[L.dw_b + m], L.K, dil,
                       &ws.a1.data()[m * T]);
        }
    }
    apply_lrelu(ws.a1, ws.h1, slope);

    ws.a2 = Matrix(L.H, T);
    for (std::size_t h = 0; h < L.H; ++h) {
        double* row = &ws.a2.data()[h * T];
        std::fill(row, row + T, p[L.sp_b + h]);
        for (std::size_t m = 0; m < L.M; ++m) {
            const double w = p[L.sp_w + h * L.M + m];
            const double* src = &ws.h1.data()[m * T];
            for (std::size_t t = 0; t < T; ++t) row[t] += w * src[t];
        }
    }
    apply_lrelu(ws.a2, ws.h2, slope);
    fill_mask(ws.mask0, L.H, T, cfg.dropout_rate, dropout_rng);

    ws.z.assign(L.R + 1, Matrix());
    ws.a3.assign(L.R, Matrix());
    ws.h3.assign(L.R, Matrix());
    ws.a4.assign(L.R, Matrix());
    ws.mask.assign(L.R, Matrix());

    ws.z[0] = Matrix(L.H, T);
    for (std::size_t i = 0; i < ws.z[0].size(); ++i) {
        ws.z[0].data()[i] = ws.h2.data()[i] * ws.mask0.data()[i];
    }

    for (std::size_t r = 0; r < L.R; ++r) {
        ws.a3[r] = Matrix(L.H, T);
        for (std::size_t h = 0; h < L.H; ++h) {
            dwconv_row(&ws.z[r].data()[h * T], T, &p[L.r_dw_w[r] + h * L.K], p[L.r_dw_b[r] + h],
                       L.K, 1, &ws.a3[r].data()[h * T]);
        }
        apply_lrelu(ws.a3[r], ws.h3[r], slope);

        ws.a4[r] = Matrix(L.H, T);
        for (std::size_t h = 0; h < L.H; ++h) {
            double* row = &ws.a4[r].data()[h * T];
            std::fill(row, row + T, p[L.r_pw_b[r] + h]);
            for (std::size_t g = 0; g < L.H; ++g) {
                const double w = p[L.r_pw_w[r] + h * L.H + g];
                const double* src = &ws.h3[r].data()[g * T];
                for (std::size_t t = 0; t < T; ++t) row[t] += w * src[t];
            }
        }
        fill_mask(ws.mask[r], L.H, T, cfg.dropout_rate, dropout_rng);

        ws.z[r + 1] = Matrix(L.H, T);
        for (std::size_t i = 0; i < ws.z[r + 1].size(); ++i) {
            ws.z[r + 1].data()[i] =
                    ws.z[r].data()[i] + ws.a4[r].data()[i] * ws.mask[r].data()[i];
        }
    }

    ws.g.assign(L.H, 0.0);
    const Matrix& zf = ws.z[L.R];
    for (std::size_t h = 0; h < L.H; ++h) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc += zf.data()[h * T + t];
        ws.g[h] = acc / static_cast<double>(T);
    }

    ws.out.assign(L.O, 0.0);
    for (std::size_t o = 0; o < L.O; ++o) {
        double acc = p[L.proj_b + o];
        const double* w = &p[L.proj_w + o * L.H];
        for (std::size_t h = 0; h < L.H; ++h) acc += w[h] * ws.g[h];
        ws.out[o] = acc;
    }
}

void backward_impl(const Layout& L, const std::vector<double>& p, const EncoderConfig& cfg,
                   const Matrix& x, const Workspace& ws, const std::vector<double>& dout,
                   std::vector<double>& grad) {
    const std::size_t T = x.cols();
    const double slope = cfg.leaky_relu_slope;

    std::vector<double> dg(L.H, 0.0);
    for (std::size_t o = 0; o < L.O; ++o) {
        grad[L.proj_b + o] += dout[o];
        const double* w = &p[L.proj_w + o * L.H];
        for (std::size_t h = 0; h < L.H; ++h) {
            grad[L.proj_w + o * L.H + h] += dout[o] * ws.g[h];
            dg[h] += dout[o] * w[h];
        }
    }

    Matrix dz(L.H, T);
    for (std::size_t h = 0; h < L.H; ++h) {
        const double v = dg[h] / static_cast<double>(T);
        for (std::size_t t = 0; t < T; ++t) dz.data()[h * T + t] = v;
    }

    Matrix da4(L.H, T), dh3(L.H, T), da3(L.H, T), dskip(L.H, T);
    for (std::size_t r = L.R; r-- > 0;) {
        for (std::size_t i = 0; i < dz.size(); ++i) {
            da4.data()[i] = dz.data()[i] * ws.mask[r].data()[i];
        }
        // pointwise conv
        std::fill(dh3.data().begin(), dh3.data().end(), 0.0);
        for (std::size_t h = 0; h < L.H; ++h) {
            const double* gout = &da4.data()[h * T];
            double acc_b = 0.0;
            for (std::size_t t = 0; t < T; ++t) acc_b += gout[t];
            grad[L.r_pw_b[r] + h] += acc_b;
            for (std::size_t g = 0; g < L.H; ++g) {
                const double* src = &ws.h3[r].data()[g * T];
                double acc_w = 0.0;
                for (std::size_t t = 0; t < T; ++t) acc_w += gout[t] * src[t];
                grad[L.r_pw_w[r] + h * L.H + g] += acc_w;
                const double w = p[L.r_pw_w[r] + h * L.H + g];
                double* dst = &dh3.data()[g * T];
                for (std::size_t t = 0; t < T; ++t) dst[t] += w * gout[t];
            }
        }
        for (std::size_t i = 0; i < da3.size(); ++i) {
            da3.data()[i] = dh3.data()[i] * lrelu_grad(ws.a3[r].data()[i], slope);
        }
        // depthwise conv; dskip collects the gradient flowing into z[r]
        std::fill(dskip.data().begin(), dskip.data().end(), 0.0);
        for (std::size_t h = 0; h < L.H; ++h) {
            dwconv_row_backward(&ws.z[r].data()[h * T], &da3.data()[h * T], T,
                                &p[L.r_dw_w[r] + h * L.K], L.K, 1,
                                &grad[L.r_dw_w[r] + h * L.K], &grad[L.r_dw_b[r] + h],
                                &dskip.data()[h * T]);
        }
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data()[i] += dskip.data()[i];
    }

    Matrix da2(L.H, T);
    for (std::size_t i = 0; i < dz.size(); ++i) {
        const double dh2 = dz.data()[i] * ws.mask0.data()[i];
        da2.data()[i] = dh2 * lrelu_grad(ws.a2.data()[i], slope);
    }

    Matrix dh1(L.M, T, 0.0);
    for (std::size_t h = 0; h < L.H; ++h) {
        const double* gout = &da2.data()[h * T];
        double acc_b = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc_b += gout[t];
        grad[L.sp_b + h] += acc_b;
        for (std::size_t m = 0; m < L.M; ++m) {
            const double* src = &ws.h1.data()[m * T];
            double acc_w = 0.0;
            for (std::size_t t = 0; t < T; ++t) acc_w += gout[t] * src[t];
            grad[L.sp_w + h * L.M + m] += acc_w;
            const double w = p[L.sp_w + h * L.M + m];
            double* dst = &dh1.data()[m * T];
            for (std::size_t t = 0; t < T; ++t) dst[t] += w * gout[t];
        }
    }

    Matrix da1(L.M, T);
    for (std::size_t i = 0; i < da1.size(); ++i) {
        da1.data()[i] = dh1.data()[i] * lrelu_grad(ws.a1.data()[i], slope);
    }
    for (std::size_t d = 0; d < L.n_d; ++d) {
        const std::size_t dil = cfg.temporal_dilations[d];
        for (std::size_t c = 0; c < L.C; ++c) {
            const std::size_t m = d * L.C + c;
            dwconv_row_backward(&x.data()[c * T], &da1.data()[m * T], T, &p[L.dw_w + m * L.K],
                                L.K, dil, &grad[L.dw_w + m * L.K], &grad[L.dw_b + m], nullptr);
        }
    }
}

// d/dz of (1 - z.t / (|z| |t|)) for fixed t
std::vector<double> cosine_loss_grad(const EmbeddingVector& z, const EmbeddingVector& t) {
    const double nz = norm(z);
    const double nt = norm(t);
    if (nz <= 0.0 || nt <= 0.0) throw std::runtime_error("cosine_loss: zero-norm input");
    const double s = dot(z, t);
    std::vector<double> dz(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        dz[i] = -(t[i] / (nz * nt) - s * z[i] / (nz * nz * nz * nt));
    }
    return dz;
}

} // namespace

EncoderModel::EncoderModel(EncoderConfig cfg, std::size_t channels, std::size_t samples,
                           std::uint64_t init_seed)
    : cfg_(std::move(cfg)), channels_(channels), samples_(samples) {
    validate_config(cfg_);
    if (channels_ == 0 || samples_ == 0) {
        throw std::invalid_argument("encoder: channels and samples must be positive");
    }
    if (cfg_.spatial_kernel_channels == 0) {
        cfg_.spatial_kernel_channels = channels_;
    } else if (cfg_.spatial_kernel_channels != channels_) {
        throw std::invalid_argument("encoder config: spatial kernel spans " +
                                    std::to_string(cfg_.spatial_kernel_channels) +
                                    " channels but input has " + std::to_string(channels_));
    }

    const Layout L(cfg_, channels_);
    params_.assign(L.total, 0.0);
    segments_ = L.segments();

    // Kaiming-uniform weights, zero biases.
    Rng rng = Rng(init_seed).substream("init");
    const auto init_uniform = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) params_[offset + i] = rng.uniform(-bound, bound);
    };
    init_uniform(L.dw_w, L.M * L.K, L.K);
    init_uniform(L.sp_w, L.H * L.M, L.M);
    for (std::size_t r = 0; r < L.R; ++r) {
        init_uniform(L.r_dw_w[r], L.H * L.K, L.K);
        init_uniform(L.r_pw_w[r], L.H * L.H, L.H);
    }
    init_uniform(L.proj_w, L.O * L.H, L.H);
}

void EncoderModel::check_shape(const Matrix& input) const {
    if (input.rows() != channels_ || input.cols() != samples_) {
        throw std::runtime_error("encoder input shape mismatch: expected " +
                                 std::to_string(channels_) + "x" + std::to_string(samples_) +
                                 ", got " + std::to_string(input.rows()) + "x" +
                                 std::to_string(input.cols()));
    }
}

EmbeddingVector EncoderModel::forward(const Matrix& input) const {
    check_shape(input);
    const Layout L(cfg_, channels_);
    Workspace ws;
    forward_impl(L, params_, cfg_, input, ws, nullptr);
    for (double v : ws.out) {
        if (!std::isfinite(v)) throw std::runtime_error("encoder produced non-finite output");
    }
    return ws.out;
}

EmbeddingVector EncoderModel::forward(const EEGTrial& trial) const {
    return forward(trial.data);
}

double EncoderModel::loss_and_gradient(const std::vector<const TrainExample*>& batch,
                                       std::vector<double>& grad, Rng* dropout_rng) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
    const Layout L(cfg_, channels_);
    grad.assign(L.total, 0.0);

    double loss_sum = 0.0;
    Workspace ws;
    std::vector<double> example_grad(L.total, 0.0);
    for (const TrainExample* ex : batch) {
        check_shape(ex->data);
        forward_impl(L, params_, cfg_, ex->data, ws, dropout_rng);
        loss_sum += cosine_loss(ws.out, ex->target);
        const auto dz = cosine_loss_grad(ws.out, ex->target);
        backward_impl(L, params_, cfg_, ex->data, ws, dz, grad);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= inv;
    return loss_sum * inv;
}

double EncoderModel::mean_loss(const std::vector<TrainExample>& examples) const {
    if (examples.empty()) throw std::invalid_argument("mean_loss: empty set");
    double sum = 0.0;
    for (const auto& ex : examples) sum += cosine_loss(forward(ex.data), ex.target);
    return sum / static_cast<double>(examples.size());
}

void EncoderModel::save(const std::string& path) const {
    json hist = json::array();
    for (const auto& e : history_) {
        json h = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
        h["val_loss"] = e.val_loss ? json(*e.val_loss) : json(nullptr);
        hist.push_back(h);
    }
    json segs = json::array();
    for (const auto& s : segments_) {
        segs.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
    }
    const json header = {{"kind", "encoder-checkpoint"},
                         {"config",
                          {{"temporal_dilations", cfg_.temporal_dilations},
                           {"temporal_kernel", cfg_.temporal_kernel},
                           {"spatial_kernel_channels", cfg_.spatial_kernel_channels},
                           {"residual_blocks", cfg_.residual_blocks},
                           {"hidden_width", cfg_.hidden_width},
                           {"dropout_rate", cfg_.dropout_rate},
                           {"leaky_relu_slope", cfg_.leaky_relu_slope},
                           {"output_dim", cfg_.output_dim}}},
                         {"channels", channels_},
                         {"samples", samples_},
                         {"history", hist},
                         {"segments", segs}};
    write_blob(path, header, doubles_to_floats(params_));
}

EncoderModel EncoderModel::load(const std::string& path) {
    const Blob blob = read_blob(path);
    if (blob.header.value("kind", "") != "encoder-checkpoint") {
        throw std::runtime_error("'" + path + "' is not an encoder checkpoint");
    }
    const auto& c = blob.header.at("config");
    EncoderConfig cfg;
    cfg.temporal_dilations = c.at("temporal_dilations").get<std::vector<std::size_t>>();
    cfg.temporal_kernel = c.at("temporal_kernel").get<std::size_t>();
    cfg.spatial_kernel_channels = c.at("spatial_kernel_channels").get<std::size_t>();
    cfg.residual_blocks = c.at("residual_blocks").get<std::size_t>();
    cfg.hidden_width = c.at("hidden_width").get<std::size_t>();
    cfg.dropout_rate = c.at("dropout_rate").get<double>();
    cfg.leaky_relu_slope = c.at("leaky_relu_slope").get<double>();
    cfg.output_dim = c.at("output_dim").get<std::size_t>();

    EncoderModel model(cfg, blob.header.at("channels").get<std::size_t>(),
                       blob.header.at("samples").get<std::size_t>(), 0);
    if (blob.payload.size() != model.params_.size()) {
        throw std::runtime_error("checkpoint '" + path + "' parameter count mismatch: expected " +
                                 std::to_string(model.params_.size()) + ", found " +
                                 std::to_string(blob.payload.size()));
    }
    model.params_ = floats_to_doubles(blob.payload);
    model.history_.clear();
    for (const auto& h : blob.header.at("history")) {
        EpochStats e;
        e.epoch = h.at("epoch").get<std::size_t>();
        e.train_loss = h.at("train_loss").get<double>();
        if (!h.at("val_loss").is_null()) e.val_loss = h.at("val_loss").get<double>();
        model.history_.push_back(e);
    }
    return model;
}

namespace {

void audit_batch(const std::vector<const TrainExample*>& batch,
                 const std::set<std::string>* forbidden_ids) {
    if (!forbidden_ids) return;
    for (const TrainExample* ex : batch) {
        if (forbidden_ids->count(ex->sentence_id)) {
            throw std::runtime_error("test-partition leakage: sentence '" + ex->sentence_id +
                                     "' appeared in a training batch");
        }
    }
}

void check_examples(const std::vector<TrainExample>& set, std::size_t C, std::size_t T,
                    std::size_t O, const char* which) {
    for (const auto& ex : set) {
        if (ex.data.rows() != C || ex.data.cols() != T) {
            throw std::invalid_argument(std::string(which) + " example '" + ex.sentence_id +
                                        "' has shape " + std::to_string(ex.data.rows()) + "x" +
                                        std::to_string(ex.data.cols()) + ", expected " +
                                        std::to_string(C) + "x" + std::to_string(T));
        }
        if (ex.target.size() != O) {
            throw std::invalid_argument(std::string(which) + " target '" + ex.sentence_id +
                                        "' has dimension " + std::to_string(ex.target.size()));
        }
        const double n = norm(ex.target);
        if (std::fabs(n - 1.0) > 1e-4) {
            throw std::invalid_argument(std::string(which) + " target '" + ex.sentence_id +
                                        "' is not unit-normalized (norm " + std::to_string(n) +
                                        ")");
        }
    }
}

} // namespace

EncoderModel train_encoder(const EncoderConfig& cfg, const std::vector<TrainExample>& train_set,
                           const std::vector<TrainExample>& val_set, const TrainConfig& tc,
                           const std::set<std::string>* forbidden_ids) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (tc.epochs == 0 || tc.batch_size == 0) {
        throw std::invalid_argument("train: epochs and batch_size must be >= 1");
    }
    const std::size_t C = train_set.front().data.rows();
    const std::size_t T = train_set.front().data.cols();
    check_examples(train_set, C, T, cfg.output_dim == 0 ? kEmbeddingDim : cfg.output_dim, "train");
    check_examples(val_set, C, T, cfg.output_dim == 0 ? kEmbeddingDim : cfg.output_dim, "val");

    EncoderModel model(cfg, C, T, tc.seed);
    const Rng root(tc.seed);

    const std::size_t n = train_set.size();
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        const double cosine_phase =
                tc.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(tc.epochs) : 0.0;
        const double lr = tc.min_lr + 0.5 * (tc.learning_rate - tc.min_lr) *
                                              (1.0 + std::cos(3.14159265358979323846 * cosine_phase));

        Rng batch_rng = root.substream("batching", epoch);
        Rng dropout_rng = root.substream("dropout", epoch);
        const auto order = batch_rng.permutation(n);

        double loss_sum = 0.0;
        for (std::size_t start = 0, batch_index = 0; start < n;
             start += tc.batch_size, ++batch_index) {
            const std::size_t end = std::min(start + tc.batch_size, n);
            std::vector<const TrainExample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
            audit_batch(batch, forbidden_ids);

            const double loss = model.loss_and_gradient(batch, grad, &dropout_rng);
            if (!std::isfinite(loss)) {
                std::ostringstream ids;
                for (const auto* ex : batch) ids << ex->sentence_id << " ";
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index) +
                                         " (sentences: " + ids.str() + ")");
            }
            loss_sum += loss * static_cast<double>(end - start);

            auto& params = model.parameters();
            for (std::size_t i = 0; i < params.size(); ++i) {
                params[i] -= lr * grad[i] + lr * tc.weight_decay * params[i];
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n);
        if (!val_set.empty()) stats.val_loss = model.mean_loss(val_set);
        model.history().push_back(stats);
    }
    return model;
}

EncoderModel finalize_encoder(const EncoderConfig& cfg,
                              const std::vector<TrainExample>& full_train_set,
                              const TrainConfig& tc, const std::set<std::string>* forbidden_ids) {
    return train_encoder(cfg, full_train_set, {}, tc, forbidden_ids);
}

GridSearchResult grid_search(const std::vector<TrainExample>& train_set,
                             const std::vector<TrainExample>& val_set,
                             const std::vector<GridPoint>& grid,
                             const std::vector<std::uint64_t>& seeds,
                             const std::set<std::string>* forbidden_ids) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (seeds.empty()) throw std::invalid_argument("grid_search: no seeds");
    if (val_set.empty()) throw std::invalid_argument("grid_search: validation set required");

    GridSearchResult result;
    bool have_best = false;
    double best_mean = 0.0;
    double best_var = 0.0;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        GridRow row;
        row.index = i;
        try {
            for (std::uint64_t seed : seeds) {
                TrainConfig tc = grid[i].train;
                tc.seed = seed;
                const EncoderModel m =
                        train_encoder(grid[i].encoder, train_set, val_set, tc, forbidden_ids);
                row.seed_val_losses.push_back(*m.history().back().val_loss);
            }
            row.mean_val_loss = mean(row.seed_val_losses);
            double var = 0.0;
            for (double v : row.seed_val_losses) {
                var += (v - row.mean_val_loss) * (v - row.mean_val_loss);
            }
            row.loss_variance = var / static_cast<double>(row.seed_val_losses.size());
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        if (!row.failed) {
            const bool better = !have_best || row.mean_val_loss < best_mean ||
                                (row.mean_val_loss == best_mean && row.loss_variance < best_var);
            if (better) {
                have_best = true;
                best_mean = row.mean_val_loss;
                best_var = row.loss_variance;
                result.best_index = i;
            }
        }
        result.rows.push_back(std::move(row));
    }
    if (!have_best) throw std::runtime_error("grid_search: every grid point failed");
    return result;
}

} // namespace eegrag
