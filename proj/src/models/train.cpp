#include "skyroute/models/train.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace skyroute::models {

using nn::Tensor;

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    optim.validate();
    loss.validate();
    if (sched.warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
    if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw std::invalid_argument("split fractions must be positive and sum to at most 1");
    }
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"lr", c.optim.lr},
            {"weight_decay", c.optim.weight_decay},
            {"beta1", c.optim.beta1},
            {"beta2", c.optim.beta2},
            {"eps", c.optim.eps},
            {"clip_norm", c.optim.clip_norm},
            {"warmup_steps", c.sched.warmup_steps},
            {"total_steps", c.sched.total_steps},
            {"lambda", c.loss.lambda},
            {"weather_weights", c.loss.weather_weights},
            {"train_frac", c.train_frac},
            {"val_frac", c.val_frac},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.optim.lr = j.value("lr", c.optim.lr);
    c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
    c.optim.beta1 = j.value("beta1", c.optim.beta1);
    c.optim.beta2 = j.value("beta2", c.optim.beta2);
    c.optim.eps = j.value("eps", c.optim.eps);
    c.optim.clip_norm = j.value("clip_norm", c.optim.clip_norm);
    c.sched.warmup_steps = j.value("warmup_steps", c.sched.warmup_steps);
    c.sched.total_steps = j.value("total_steps", c.sched.total_steps);
    c.loss.lambda = j.value("lambda", c.loss.lambda);
    c.loss.weather_weights = j.value("weather_weights", c.loss.weather_weights);
    c.train_frac = j.value("train_frac", c.train_frac);
    c.val_frac = j.value("val_frac", c.val_frac);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nn::ScheduleConfig resolve_schedule(const TrainConfig& cfg, std::size_t n_train) {
    nn::ScheduleConfig s = cfg.sched;
    if (s.total_steps <= 0) {
        const auto per_epoch = (n_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
                               static_cast<std::size_t>(cfg.batch_size);
        s.total_steps = static_cast<int>(per_epoch) * cfg.epochs;
    }
    s.total_steps = std::max(s.total_steps, 2);
    if (s.warmup_steps >= s.total_steps || s.warmup_steps <= 0) {
        s.warmup_steps = std::max(1, s.total_steps / 10);
    }
    s.validate();
    return s;
}

namespace {

struct LossBatch {
    int batch = 0;
    int classes = 0;
    std::vector<std::uint8_t> mask;
    std::vector<int> targets;
    std::vector<double> severity;
};

LossBatch loss_batch(Batch batch, int classes, bool with_severity) {
    LossBatch lb;
    lb.batch = static_cast<int>(batch.size());
    lb.classes = classes;
    lb.mask.assign(batch.size() * static_cast<std::size_t>(classes), 0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Sample& s = *batch[b];
        if (s.label_index < 0) throw std::invalid_argument("training sample without a label");
        std::fill_n(lb.mask.begin() + static_cast<std::ptrdiff_t>(b * classes), s.candidate_count(), 1);
        lb.targets.push_back(s.label_index);
    }
    if (with_severity) {
        lb.severity.assign(batch.size() * static_cast<std::size_t>(classes) * kSeverityChannels, 0.0);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Sample& s = *batch[b];
            if (s.severity.empty()) throw std::invalid_argument("weather penalty needs weather-encoded samples");
            std::copy(s.severity.begin(), s.severity.end(),
                      lb.severity.begin() + static_cast<std::ptrdiff_t>(b * classes * kSeverityChannels));
        }
    }
    return lb;
}

Tensor batch_loss(const Tensor& logits, Batch batch, const nn::LossConfig& cfg) {
    const auto lb = loss_batch(batch, logits.cols(), cfg.lambda > 0.0);
    nn::LossInputs in{lb.batch, lb.classes, lb.mask, lb.targets, lb.severity};
    return nn::weather_penalized_cross_entropy(logits, in, cfg);
}

long count_correct(const Tensor& logits, Batch batch) {
    const int cols = logits.cols();
    long correct = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto row = logits.data().subspan(b * cols, static_cast<std::size_t>(batch[b]->candidate_count()));
        if (argmax(row) == batch[b]->label_index) ++correct;
    }
    return correct;
}

}  // namespace

std::pair<double, double> loss_and_accuracy(const Model& model, std::span<const Sample> samples,
                                            const nn::LossConfig& cfg, int batch_size) {
    if (samples.empty()) return {0.0, 0.0};
    nn::NoGradGuard ng;
    const auto ptrs = sample_ptrs(samples);
    double loss = 0.0;
    long correct = 0;
    for (std::size_t i = 0; i < ptrs.size(); i += static_cast<std::size_t>(batch_size)) {
        const auto n = std::min(ptrs.size() - i, static_cast<std::size_t>(batch_size));
        const Batch batch(ptrs.data() + i, n);
        const Tensor logits = model.logits(batch, false, nullptr);
        loss += batch_loss(logits, batch, cfg).item() * static_cast<double>(n);
        correct += count_correct(logits, batch);
    }
    const auto total = static_cast<double>(samples.size());
    return {loss / total, static_cast<double>(correct) / total};
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, int node_count,
                  std::span<const Sample> train_set, std::span<const Sample> val_set) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    std::set<int> classes;
    for (const auto& s : train_set) classes.insert(s.label);
    if (classes.size() < 2) throw std::invalid_argument("training needs at least two distinct labels");

    TrainResult res;
    res.model = make_model(model_cfg, node_count, cfg.seed);
    auto& model = *res.model;

    if (!model.trainable()) {
        model.fit(train_set);
    } else {
        std::vector<Tensor> params;
        for (auto& p : model.parameters()) params.push_back(p.tensor);
        nn::AdamW opt(params, cfg.optim);
        const auto sched = resolve_schedule(cfg, train_set.size());
        Rng shuffle(derive_seed(cfg.seed, stream::kShuffle));
        Rng drop(derive_seed(cfg.seed, stream::kDropout));

        auto order = sample_ptrs(train_set);
        long step = 0;
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
            double epoch_loss = 0.0;
            for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
                const auto n = std::min(order.size() - i, static_cast<std::size_t>(cfg.batch_size));
                const Batch batch(order.data() + i, n);
                opt.zero_grad();
                Tensor loss = batch_loss(model.logits(batch, true, &drop), batch, cfg.loss);
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    throw Diverged("non-finite training loss at epoch " + std::to_string(epoch));
                }
                loss.backward();
                nn::clip_grad_norm(params, cfg.optim.clip_norm);
                const int s = static_cast<int>(std::min<long>(step, sched.total_steps));
                try {
                    opt.step(nn::lr_factor(s, sched));
                } catch (const nn::NonFiniteGradient& e) {
                    throw Diverged(std::string("non-finite gradient: ") + e.what());
                }
                ++step;
                epoch_loss += value * static_cast<double>(n);
            }
            EpochStats st;
            st.epoch = epoch;
            st.train_loss = epoch_loss / static_cast<double>(train_set.size());
            std::tie(st.val_loss, st.val_accuracy) = loss_and_accuracy(model, val_set, cfg.loss);
            res.curves.push_back(st);
        }
        res.steps = step;
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

LatencyStats latency_stats(std::vector<double> ns) {
    LatencyStats st;
    st.count = ns.size();
    if (ns.empty()) return st;
    std::sort(ns.begin(), ns.end());
    st.mean_ns = std::accumulate(ns.begin(), ns.end(), 0.0) / static_cast<double>(ns.size());
    auto pct = [&](double q) {
        const double pos = q * static_cast<double>(ns.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, ns.size() - 1);
        return ns[lo] + (pos - static_cast<double>(lo)) * (ns[hi] - ns[lo]);
    };
    st.p50_ns = pct(0.5);
    st.p95_ns = pct(0.95);
    return st;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json conf = nlohmann::json::array();
    for (const auto& c : r.top_confusions) conf.push_back({{"label", c.label}, {"predicted", c.predicted}, {"count", c.count}});
    return {{"model", r.model},
            {"samples", r.samples},
            {"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"correct", r.correct},
            {"top_confusions", conf},
            {"latency_ns", {{"mean", r.latency.mean_ns}, {"p50", r.latency.p50_ns}, {"p95", r.latency.p95_ns},
                            {"count", r.latency.count}}}};
}

EvalReport evaluate(const Model& model, std::span<const Sample> samples, std::size_t latency_samples) {
    EvalReport rep;
    rep.model = model.name();
    rep.samples = samples.size();
    if (samples.empty()) return rep;

    const auto ptrs = sample_ptrs(samples);
    std::vector<int> predicted;
    predicted.reserve(samples.size());
    for (std::size_t i = 0; i < ptrs.size(); i += 256) {
        const auto n = std::min<std::size_t>(ptrs.size() - i, 256);
        const auto probs = model.predict_batch(Batch(ptrs.data() + i, n));
        for (std::size_t b = 0; b < n; ++b) {
            predicted.push_back(ptrs[i + b]->candidates()[static_cast<std::size_t>(argmax(probs[b]))]);
        }
    }

    std::map<int, std::array<long, 3>> per_class;  // tp, fp, fn
    std::map<std::pair<int, int>, long> confusions;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int y = samples[i].label;
        const int p = predicted[i];
        if (y == p) {
            ++rep.correct;
            ++per_class[y][0];
        } else {
            ++per_class[p][1];
            ++per_class[y][2];
            ++confusions[{y, p}];
        }
    }
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(samples.size());
    double ps = 0.0, rs = 0.0, fs = 0.0;
    for (const auto& [cls, c] : per_class) {
        const double prec = c[0] + c[1] > 0 ? static_cast<double>(c[0]) / static_cast<double>(c[0] + c[1]) : 0.0;
        const double rec = c[0] + c[2] > 0 ? static_cast<double>(c[0]) / static_cast<double>(c[0] + c[2]) : 0.0;
        ps += prec;
        rs += rec;
        fs += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    const auto k = static_cast<double>(per_class.size());
    rep.precision = ps / k;
    rep.recall = rs / k;
    rep.f1 = fs / k;

    for (const auto& [key, count] : confusions) rep.top_confusions.push_back({key.first, key.second, count});
    std::stable_sort(rep.top_confusions.begin(), rep.top_confusions.end(),
                     [](const Confusion& a, const Confusion& b) { return a.count > b.count; });
    if (rep.top_confusions.size() > 10) rep.top_confusions.resize(10);

    const std::size_t m = std::min(latency_samples, samples.size());
    if (m > 0) {
        for (std::size_t i = 0; i < std::min<std::size_t>(m, 10); ++i) (void)model.predict_next(samples[i]);
        std::vector<double> ns;
        ns.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto p = model.predict_next(samples[i]);
            const auto t1 = std::chrono::steady_clock::now();
            (void)p;
            ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
        }
        rep.latency = latency_stats(std::move(ns));
    }
    return rep;
}

}  // namespace skyroute::models
