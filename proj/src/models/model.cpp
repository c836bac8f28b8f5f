#include "skyroute/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace skyroute::models {

using nn::Tensor;

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::greedy: return "greedy";
        case ModelKind::knn: return "knn";
        case ModelKind::ffnn: return "ffnn";
        case ModelKind::transformer: return "transformer";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "greedy") return ModelKind::greedy;
    if (s == "knn") return ModelKind::knn;
    if (s == "ffnn") return ModelKind::ffnn;
    if (s == "transformer") return ModelKind::transformer;
    throw std::invalid_argument("unknown model kind: " + s);
}

void ModelConfig::validate() const {
    if (kind == ModelKind::ffnn) {
        if (ffnn_hidden.empty()) throw std::invalid_argument("ffnn needs at least one hidden layer");
        for (int h : ffnn_hidden) {
            if (h <= 0) throw std::invalid_argument("ffnn hidden sizes must be positive");
        }
    }
    if (kind == ModelKind::transformer) {
        attention.validate();
        if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
        if (ff_dim < 1) throw std::invalid_argument("ff_dim must be >= 1");
    }
    if (kind == ModelKind::knn) {
        if (knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
        if (!(knn_current_weight > 0.0) || !(knn_dest_weight >= 0.0) || !(knn_context_weight >= 0.0)) {
            throw std::invalid_argument("knn weights must be non-negative (current weight positive)");
        }
    }
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"ffnn_hidden", c.ffnn_hidden},
            {"d_model", c.attention.d_model},
            {"n_heads", c.attention.n_heads},
            {"dropout", c.attention.dropout_p},
            {"n_layers", c.n_layers},
            {"ff_dim", c.ff_dim},
            {"weather_aware", c.weather_aware},
            {"knn_k", c.knn_k},
            {"knn_current_weight", c.knn_current_weight},
            {"knn_dest_weight", c.knn_dest_weight},
            {"knn_context_weight", c.knn_context_weight}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.kind = model_kind_from_string(j.at("kind").get<std::string>());
    c.ffnn_hidden = j.value("ffnn_hidden", c.ffnn_hidden);
    c.attention.d_model = j.value("d_model", c.attention.d_model);
    c.attention.n_heads = j.value("n_heads", c.attention.n_heads);
    c.attention.dropout_p = j.value("dropout", c.attention.dropout_p);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.weather_aware = j.value("weather_aware", c.weather_aware);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.knn_current_weight = j.value("knn_current_weight", c.knn_current_weight);
    c.knn_dest_weight = j.value("knn_dest_weight", c.knn_dest_weight);
    c.knn_context_weight = j.value("knn_context_weight", c.knn_context_weight);
    c.validate();
    return c;
}

std::vector<const Sample*> sample_ptrs(std::span<const Sample> samples) {
    std::vector<const Sample*> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(&s);
    return out;
}

int argmax(std::span<const double> p) {
    if (p.empty()) return -1;
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> Model::predict_next(const Sample& s) const {
    const Sample* one[] = {&s};
    return std::move(predict_batch(one).front());
}

Tensor Model::logits(Batch, bool, Rng*) const {
    throw std::logic_error(name() + " has no trainable logits");
}

namespace {

int max_candidates(Batch batch) {
    int c = 0;
    for (const auto* s : batch) c = std::max(c, s->candidate_count());
    return c;
}

std::vector<std::uint8_t> candidate_mask(Batch batch, int cmax) {
    std::vector<std::uint8_t> mask(batch.size() * static_cast<std::size_t>(cmax), 0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(b * cmax), batch[b]->candidate_count(), 1);
    }
    return mask;
}

// Masked softmax of [B, cmax] logits, cut back to each sample's candidates.
std::vector<std::vector<double>> to_probabilities(const Tensor& logits, Batch batch) {
    const int cmax = logits.cols();
    const auto mask = candidate_mask(batch, cmax);
    const auto p = nn::masked_softmax_rows(logits.data(), static_cast<int>(batch.size()), cmax, mask);
    std::vector<std::vector<double>> out(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto* row = p.data() + b * cmax;
        out[b].assign(row, row + batch[b]->candidate_count());
    }
    return out;
}

std::vector<double> one_hot(int size, int index) {
    std::vector<double> p(static_cast<std::size_t>(size), 0.0);
    p[static_cast<std::size_t>(index)] = 1.0;
    return p;
}

int greedy_choice(const Sample& s) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < s.candidate_count(); ++c) {
        const double d = s.node_features[static_cast<std::size_t>(c + 2) * kNodeFeatures + 2];
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

// --- greedy -----------------------------------------------------------------

std::vector<std::vector<double>> GreedyModel::predict_batch(Batch batch) const {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto* s : batch) out.push_back(one_hot(s->candidate_count(), greedy_choice(*s)));
    return out;
}

// --- knn --------------------------------------------------------------------

void KnnModel::fit(std::span<const Sample> train) {
    features_.clear();
    labels_.clear();
    for (const auto& s : train) {
        if (s.label < 0) continue;
        features_.insert(features_.end(), s.context.begin(), s.context.end());
        labels_.push_back(s.label);
    }
}

std::vector<double> KnnModel::query(const Sample& s) const {
    const int n = static_cast<int>(labels_.size());
    const int cc = s.candidate_count();
    // context layout: start xy, dest xy, current xy, payload, total distance
    const double w[kContextFeatures] = {cfg_.knn_context_weight, cfg_.knn_context_weight, cfg_.knn_dest_weight,
                                        cfg_.knn_dest_weight,    cfg_.knn_current_weight, cfg_.knn_current_weight,
                                        cfg_.knn_context_weight, cfg_.knn_context_weight};
    std::vector<std::pair<double, int>> near;  // (distance, row)
    for (int r = 0; r < n; ++r) {
        if (s.candidate_index(labels_[r]) < 0) continue;
        const double* f = features_.data() + static_cast<std::size_t>(r) * kContextFeatures;
        double d2 = 0.0;
        for (int i = 0; i < kContextFeatures; ++i) {
            const double diff = w[i] * (f[i] - s.context[i]);
            d2 += diff * diff;
        }
        near.emplace_back(d2, r);
    }
    if (near.empty()) return one_hot(cc, greedy_choice(s));
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.knn_k), near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end());
    std::vector<double> votes(static_cast<std::size_t>(cc), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = 1.0 / (std::sqrt(near[i].first) + 1e-9);
        votes[static_cast<std::size_t>(s.candidate_index(labels_[near[i].second]))] += w;
        total += w;
    }
    for (auto& v : votes) v /= total;
    return votes;
}

std::vector<std::vector<double>> KnnModel::predict_batch(Batch batch) const {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto* s : batch) out.push_back(query(*s));
    return out;
}

std::vector<nn::NamedTensor> KnnModel::memory() const {
    const int n = static_cast<int>(labels_.size());
    std::vector<double> labels(labels_.begin(), labels_.end());
    return {{"knn.features", Tensor({n, kContextFeatures}, features_)}, {"knn.labels", Tensor({n}, labels)}};
}

void KnnModel::restore(const std::vector<nn::NamedTensor>& tensors) {
    features_.clear();
    labels_.clear();
    for (const auto& t : tensors) {
        if (t.name == "knn.features") {
            features_.assign(t.tensor.data().begin(), t.tensor.data().end());
        } else if (t.name == "knn.labels") {
            for (double v : t.tensor.data()) labels_.push_back(static_cast<int>(v));
        }
    }
    if (features_.size() != labels_.size() * kContextFeatures) {
        throw std::invalid_argument("knn memory is inconsistent");
    }
}

// --- ffnn -------------------------------------------------------------------

FfnnModel::FfnnModel(ModelConfig cfg, int node_count, Rng& rng) : StoredModel(std::move(cfg), node_count) {
    int in = input_dim();
    for (int h : cfg_.ffnn_hidden) {
        layers_.emplace_back(in, h, rng);
        in = h;
    }
    layers_.emplace_back(in, 1, rng);
}

Tensor FfnnModel::logits(Batch batch, bool, Rng*) const {
    const int B = static_cast<int>(batch.size());
    const int cmax = max_candidates(batch);
    const int in = input_dim();
    std::vector<double> x(static_cast<std::size_t>(B) * cmax * in, 0.0);
    for (int b = 0; b < B; ++b) {
        const Sample& s = *batch[b];
        for (int c = 0; c < s.candidate_count(); ++c) {
            double* row = x.data() + (static_cast<std::size_t>(b) * cmax + c) * in;
            const double* nf = s.node_features.data() + static_cast<std::size_t>(c + 2) * kNodeFeatures;
            std::copy_n(nf, kNodeFeatures, row);
            std::copy_n(s.context.data(), kContextFeatures, row + kNodeFeatures);
            row[kNodeFeatures + kContextFeatures + s.tokens[c + 2]] = 1.0;
            row[kNodeFeatures + kContextFeatures + node_count_ + s.end_node] = 1.0;
        }
    }
    Tensor h({B * cmax, in}, std::move(x));
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = nn::relu(layers_[i](h));
    return nn::reshape(layers_.back()(h), {B, cmax});
}

// Inference without the tape. The one-hot id inputs select rows of the first
// weight matrix instead of multiplying through it.
std::vector<std::vector<double>> FfnnModel::predict_batch(Batch batch) const {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const RowMat>;
    constexpr int dense = kNodeFeatures + kContextFeatures;
    const int B = static_cast<int>(batch.size());
    const int cmax = max_candidates(batch);
    const int rows = B * cmax;

    const auto& first = layers_.front();
    const int h0 = first.weight.cols();
    const CMap w0(first.weight.data().data(), first.weight.rows(), h0);
    RowMat x = RowMat::Zero(rows, dense);
    for (int b = 0; b < B; ++b) {
        const Sample& s = *batch[b];
        for (int c = 0; c < s.candidate_count(); ++c) {
            const int r = b * cmax + c;
            for (int f = 0; f < kNodeFeatures; ++f) {
                x(r, f) = s.node_features[static_cast<std::size_t>(c + 2) * kNodeFeatures + f];
            }
            for (int f = 0; f < kContextFeatures; ++f) x(r, kNodeFeatures + f) = s.context[f];
        }
    }
    RowMat h = x * w0.topRows(dense);
    for (int b = 0; b < B; ++b) {
        const Sample& s = *batch[b];
        for (int c = 0; c < s.candidate_count(); ++c) {
            const int r = b * cmax + c;
            h.row(r) += w0.row(dense + s.tokens[c + 2]) + w0.row(dense + node_count_ + s.end_node);
        }
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        if (i > 0) {
            const CMap w(layer.weight.data().data(), layer.weight.rows(), layer.weight.cols());
            RowMat next = h * w;
            h = std::move(next);
        }
        h.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data().data(), layer.bias.numel());
        if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
    }
    return to_probabilities(Tensor({B, cmax}, std::vector<double>(h.data(), h.data() + rows)), batch);
}

std::vector<nn::NamedTensor> FfnnModel::parameters() const {
    std::vector<nn::NamedTensor> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("ffnn." + std::to_string(i), out);
    return out;
}

// --- transformer ------------------------------------------------------------

TransformerModel::TransformerModel(ModelConfig cfg, int node_count, Rng& rng)
    : StoredModel(std::move(cfg), node_count) {
    const int d = cfg_.attention.d_model;
    embed_ = nn::Embedding(node_count, d, rng);
    node_proj_ = nn::Linear(kNodeFeatures, d, rng);
    if (cfg_.weather_aware) weather_proj_ = nn::Linear(kWeatherFeatures, d, rng);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        Block blk;
        blk.attn = nn::MultiHeadAttention(cfg_.attention, rng);
        blk.ln1 = nn::LayerNorm(d);
        blk.ln2 = nn::LayerNorm(d);
        blk.ff1 = nn::Linear(d, cfg_.ff_dim, rng);
        blk.ff2 = nn::Linear(cfg_.ff_dim, d, rng);
        blocks_.push_back(std::move(blk));
    }
    head_ = nn::Linear(d, 1, rng);
}

TokenBatch TransformerModel::tokens(Batch batch, bool weather_aware) {
    TokenBatch tb;
    tb.batch = static_cast<int>(batch.size());
    const int len = 2 + max_candidates(batch);
    tb.query_len = tb.key_len = len;
    const auto cells = static_cast<std::size_t>(tb.batch) * len;
    tb.query_ids.assign(cells, 0);
    tb.query_features.assign(cells * kNodeFeatures, 0.0);
    tb.key_mask.assign(cells, 0);
    if (weather_aware) tb.memory_weather.assign(cells * kWeatherFeatures, 0.0);
    for (int b = 0; b < tb.batch; ++b) {
        const Sample& s = *batch[b];
        if (weather_aware && s.weather.empty()) {
            throw std::invalid_argument("weather-aware model needs samples encoded with weather");
        }
        const auto base = static_cast<std::size_t>(b) * len;
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
            tb.query_ids[base + t] = s.tokens[t];
            tb.key_mask[base + t] = 1;
        }
        std::copy(s.node_features.begin(), s.node_features.end(),
                  tb.query_features.begin() + static_cast<std::ptrdiff_t>(base * kNodeFeatures));
        if (weather_aware) {
            std::copy(s.weather.begin(), s.weather.end(),
                      tb.memory_weather.begin() + static_cast<std::ptrdiff_t>(base * kWeatherFeatures));
        }
    }
    tb.memory_ids = tb.query_ids;
    tb.memory_features = tb.query_features;
    return tb;
}

Tensor TransformerModel::forward_tokens(const TokenBatch& tb, bool training, Rng* rng) const {
    if (training && cfg_.attention.dropout_p > 0.0 && rng == nullptr) {
        throw std::invalid_argument("training with dropout needs an rng");
    }
    const int nq = tb.batch * tb.query_len;
    const int nk = tb.batch * tb.key_len;
    Tensor h = nn::add(embed_(tb.query_ids), node_proj_(Tensor({nq, kNodeFeatures}, tb.query_features)));
    Tensor mem = nn::add(embed_(tb.memory_ids), node_proj_(Tensor({nk, kNodeFeatures}, tb.memory_features)));
    if (cfg_.weather_aware) {
        mem = nn::add(mem, weather_proj_(Tensor({nk, kWeatherFeatures}, tb.memory_weather)));
    }
    Rng unused(0);
    Rng& drop = rng ? *rng : unused;
    const double p = cfg_.attention.dropout_p;
    nn::MultiHeadAttention::Call call{tb.batch, tb.query_len, tb.key_len, tb.key_mask, training, rng};
    for (const auto& blk : blocks_) {
        h = blk.ln1(nn::add(h, nn::dropout(blk.attn(h, mem, call), p, training, drop)));
        const Tensor ff = blk.ff2(nn::relu(blk.ff1(h)));
        h = blk.ln2(nn::add(h, nn::dropout(ff, p, training, drop)));
    }
    return head_(h);
}

Tensor TransformerModel::logits(Batch batch, bool training, Rng* rng) const {
    const auto tb = tokens(batch, cfg_.weather_aware);
    const Tensor scores = nn::reshape(forward_tokens(tb, training, rng), {tb.batch, tb.query_len});
    return nn::slice_cols(scores, 2, tb.query_len - 2);
}

namespace {

template <class T>
struct FrozenTransformer final : TransformerModel::Frozen {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
    using CMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    struct Lin {
        Mat w;
        Row b;
        Mat operator()(const Mat& x) const {
            Mat y = x * w;
            y.rowwise() += b;
            return y;
        }
    };
    // A projection of token inputs (embedding + node features + weather)
    // folded into one lookup table and two small feature matrices.
    struct Folded {
        Mat table, feat, wx;
        Row bias;
        Mat operator()(const int* ids, const double* f, const double* w, int n) const {
            Mat y(n, table.cols());
            for (int i = 0; i < n; ++i) y.row(i) = table.row(ids[i]);
            y.noalias() += CMap(f, n, kNodeFeatures).template cast<T>() * feat;
            if (w) y.noalias() += CMap(w, n, kWeatherFeatures).template cast<T>() * wx;
            y.rowwise() += bias;
            return y;
        }
    };
    struct Blk {
        Lin q, o, f1, f2;
        Folded k, v;  // memory tokens never change across blocks
        Row g1, b1, g2, b2;
    };

    int heads = 1;
    bool aware = true;
    Mat embed;
    Lin node, head;
    Folded q0;  // first block's query projection
    std::vector<Blk> blocks;

    static Mat mat(const nn::Tensor& t) {
        const int r = t.shape().size() == 1 ? 1 : t.rows();
        const int c = t.shape().size() == 1 ? t.dim(0) : t.cols();
        return CMap(t.data().data(), r, c).template cast<T>();
    }
    static Lin lin(const nn::Tensor& w, const nn::Tensor& b) { return {mat(w), mat(b)}; }

    static void layer_norm(Mat& x, const Row& g, const Row& b) {
        const T d = static_cast<T>(x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            auto row = x.row(r);
            const T mean = row.sum() / d;
            const T var = (row.array() - mean).square().sum() / d;
            const T rs = T(1) / std::sqrt(var + T(1e-5));
            row = ((row.array() - mean) * rs * g.array() + b.array()).matrix();
        }
    }

    Mat tokens_in(const int* ids, const double* feats, int n) const {
        Mat x(n, embed.cols());
        for (int i = 0; i < n; ++i) x.row(i) = embed.row(ids[i]);
        x.noalias() += CMap(feats, n, kNodeFeatures).template cast<T>() * node.w;
        x.rowwise() += node.b;
        return x;
    }

    std::vector<double> forward(const TokenBatch& tb, int first_row) const override {
        const int lq = tb.query_len, lk = tb.key_len;
        const int rows = lq - first_row;
        const int d = static_cast<int>(embed.cols());
        const int dh = d / heads;
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        std::vector<double> out(static_cast<std::size_t>(tb.batch) * lq, 0.0);
        for (int b = 0; b < tb.batch; ++b) {
            const auto qb = static_cast<std::size_t>(b) * lq;
            const auto kb = static_cast<std::size_t>(b) * lk;
            if (rows <= 0) continue;
            const int* qids = tb.query_ids.data() + qb + first_row;
            const double* qf = tb.query_features.data() + (qb + first_row) * kNodeFeatures;
            const int* mids = tb.memory_ids.data() + kb;
            const double* mf = tb.memory_features.data() + kb * kNodeFeatures;
            const double* mw = aware ? tb.memory_weather.data() + kb * kWeatherFeatures : nullptr;
            Mat x = tokens_in(qids, qf, rows);
            const std::uint8_t* mask = tb.key_mask.empty() ? nullptr : tb.key_mask.data() + kb;
            for (std::size_t l = 0; l < blocks.size(); ++l) {
                const auto& blk = blocks[l];
                const Mat q = l == 0 ? q0(qids, qf, nullptr, rows) : blk.q(x);
                const Mat k = blk.k(mids, mf, mw, lk), v = blk.v(mids, mf, mw, lk);
                Mat att(rows, d);
                for (int h = 0; h < heads; ++h) {
                    Mat s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
                    for (int i = 0; i < rows; ++i) {
                        auto row = s.row(i);
                        if (mask) {
                            for (int j = 0; j < lk; ++j) {
                                if (!mask[j]) row(j) = -std::numeric_limits<T>::infinity();
                            }
                        }
                        row = (row.array() - row.maxCoeff()).exp().matrix();
                        row /= row.sum();
                    }
                    att.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
                }
                x += blk.o(att);
                layer_norm(x, blk.g1, blk.b1);
                x += blk.f2(blk.f1(x).cwiseMax(T(0)));
                layer_norm(x, blk.g2, blk.b2);
            }
            const Mat scores = head(x);
            for (int i = 0; i < rows; ++i) out[qb + first_row + i] = static_cast<double>(scores(i, 0));
        }
        return out;
    }
};

template <class T>
std::shared_ptr<const TransformerModel::Frozen> freeze_as(const std::vector<nn::NamedTensor>& params,
                                                          const ModelConfig& cfg) {
    using F = FrozenTransformer<T>;
    using DMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto f = std::make_shared<F>();
    f->heads = cfg.attention.n_heads;
    f->aware = cfg.weather_aware;
    std::size_t i = 0;
    auto next = [&]() -> const nn::Tensor& { return params.at(i++).tensor; };
    auto next_lin = [&]() {
        const auto& w = next();
        return F::lin(w, next());
    };
    auto dmat = [](const nn::Tensor& t) -> DMat {
        const int r = t.shape().size() == 1 ? 1 : t.rows();
        const int c = t.shape().size() == 1 ? t.dim(0) : t.cols();
        return typename F::CMap(t.data().data(), r, c);
    };
    const DMat embed = dmat(next());
    const DMat node_w = dmat(next());
    const DMat node_b = dmat(next());
    DMat wx_w, wx_b;
    if (cfg.weather_aware) {
        wx_w = dmat(next());
        wx_b = dmat(next());
    }
    f->embed = embed.cast<T>();
    f->node = {node_w.cast<T>(), node_b.cast<T>()};
    // Folding is done in double, then rounded once.
    auto fold = [&](const nn::Tensor& w, const nn::Tensor& b, bool with_weather) {
        const DMat pw = dmat(w);
        DMat bias = node_b * pw + dmat(b);
        typename F::Folded out;
        out.table = (embed * pw).cast<T>();
        out.feat = (node_w * pw).cast<T>();
        if (with_weather) {
            out.wx = (wx_w * pw).cast<T>();
            bias += wx_b * pw;
        }
        out.bias = bias.cast<T>();
        return out;
    };
    for (int l = 0; l < cfg.n_layers; ++l) {
        typename F::Blk blk;
        const auto& qw = next();
        const auto& qb = next();
        blk.q = F::lin(qw, qb);
        if (l == 0) f->q0 = fold(qw, qb, false);
        const auto& kw = next();
        blk.k = fold(kw, next(), cfg.weather_aware);
        const auto& vw = next();
        blk.v = fold(vw, next(), cfg.weather_aware);
        blk.o = next_lin();
        blk.g1 = FrozenTransformer<T>::mat(next());
        blk.b1 = FrozenTransformer<T>::mat(next());
        blk.g2 = FrozenTransformer<T>::mat(next());
        blk.b2 = FrozenTransformer<T>::mat(next());
        blk.f1 = next_lin();
        blk.f2 = next_lin();
        f->blocks.push_back(std::move(blk));
    }
    f->head = next_lin();
    if (i != params.size()) throw std::logic_error("frozen transformer parameter layout mismatch");
    return f;
}

}  // namespace

void TransformerModel::freeze(Precision p) {
    const auto params = parameters();
    frozen_ = p == Precision::f32 ? freeze_as<float>(params, cfg_) : freeze_as<double>(params, cfg_);
}

std::vector<double> TransformerModel::score_tokens(const TokenBatch& tb) const {
    if (frozen_) return frozen_->forward(tb);
    nn::NoGradGuard ng;
    const auto t = forward_tokens(tb, false, nullptr);
    return {t.data().begin(), t.data().end()};
}

std::vector<std::vector<double>> TransformerModel::predict_batch(Batch batch) const {
    if (!frozen_) {
        nn::NoGradGuard ng;
        return to_probabilities(logits(batch, false, nullptr), batch);
    }
    const auto tb = tokens(batch, cfg_.weather_aware);
    const auto scores = frozen_->forward(tb, 2);
    const int cmax = tb.query_len - 2;
    std::vector<double> logit(static_cast<std::size_t>(tb.batch) * cmax);
    for (int b = 0; b < tb.batch; ++b) {
        for (int c = 0; c < cmax; ++c) {
            logit[static_cast<std::size_t>(b) * cmax + c] = scores[static_cast<std::size_t>(b) * tb.query_len + 2 + c];
        }
    }
    return to_probabilities(nn::Tensor({tb.batch, cmax}, std::move(logit)), batch);
}

std::vector<nn::NamedTensor> TransformerModel::parameters() const {
    std::vector<nn::NamedTensor> out;
    embed_.collect("embed", out);
    node_proj_.collect("node_proj", out);
    if (cfg_.weather_aware) weather_proj_.collect("weather_proj", out);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string p = "block" + std::to_string(l);
        blocks_[l].attn.collect(p + ".attn", out);
        blocks_[l].ln1.collect(p + ".ln1", out);
        blocks_[l].ln2.collect(p + ".ln2", out);
        blocks_[l].ff1.collect(p + ".ff1", out);
        blocks_[l].ff2.collect(p + ".ff2", out);
    }
    head_.collect("head", out);
    return out;
}

std::unique_ptr<StoredModel> make_model(const ModelConfig& cfg, int node_count, std::uint64_t seed) {
    cfg.validate();
    if (node_count < 2) throw std::invalid_argument("models need at least two nodes");
    Rng rng(derive_seed(seed, stream::kInit));
    switch (cfg.kind) {
        case ModelKind::greedy: return std::make_unique<GreedyModel>(cfg, node_count);
        case ModelKind::knn: return std::make_unique<KnnModel>(cfg, node_count);
        case ModelKind::ffnn: return std::make_unique<FfnnModel>(cfg, node_count, rng);
        case ModelKind::transformer: return std::make_unique<TransformerModel>(cfg, node_count, rng);
    }
    throw std::invalid_argument("unknown model kind");
}

// --- oracle -----------------------------------------------------------------

std::vector<std::vector<double>> PlannerOracle::predict_batch(Batch batch) const {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto* s : batch) {
        const auto route =
            planner::plan_route(net_, wx_, drone_, s->payload, s->departure_time, s->current_node, s->end_node);
        const int next = route.node_sequence.size() > 1 ? route.node_sequence[1] : s->current_node;
        const int idx = s->candidate_index(next);
        out.push_back(idx >= 0 ? one_hot(s->candidate_count(), idx)
                               : std::vector<double>(static_cast<std::size_t>(s->candidate_count()),
                                                     1.0 / s->candidate_count()));
    }
    return out;
}

}  // namespace skyroute::models
