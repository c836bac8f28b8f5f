#include "skyroute/harness/bench.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "skyroute/planner.hpp"

namespace skyroute::harness {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point a, Clock::time_point b) {
    return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

nlohmann::json stats_json(const models::LatencyStats& s) {
    return {{"mean_ns", s.mean_ns}, {"p50_ns", s.p50_ns}, {"p95_ns", s.p95_ns}, {"count", s.count}};
}

// Keeps the optimizer from discarding results.
volatile double g_sink = 0.0;

}  // namespace

models::LatencyStats time_calls(const std::function<void(int)>& f, int repetitions, int warmup) {
    for (int i = 0; i < warmup; ++i) f(i);
    std::vector<double> ns;
    ns.reserve(static_cast<std::size_t>(repetitions));
    for (int i = 0; i < repetitions; ++i) {
        const auto a = Clock::now();
        f(i);
        ns.push_back(elapsed_ns(a, Clock::now()));
    }
    return models::latency_stats(std::move(ns));
}

InstanceSet make_instance_set(const skynet::Network& net, const weather::WeatherSeries& wx,
                              const flight::DroneSpec& drone, int count, std::uint64_t seed) {
    InstanceSet set;
    set.net = &net;
    set.wx = &wx;
    set.drone = drone;
    set.ctx = std::make_shared<const models::NetworkContext>(net);
    const fleet::PayloadRange payload{std::min(0.1, drone.max_payload), drone.max_payload};
    // Draw extra requests so infeasible pairs can be dropped.
    const auto reqs = fleet::generate_requests(net, 2 * count, wx.horizon_s(), payload, drone.max_payload, seed);
    for (const auto& r : reqs) {
        if (static_cast<int>(set.queries.size()) == count) break;
        try {
            planner::plan_route(net, wx, drone, r.payload_kg, r.request_time, r.origin, r.destination);
        } catch (const planner::NoRoute&) {
            continue;
        }
        set.queries.push_back({r.origin, r.destination, r.request_time, r.payload_kg, 0});
    }
    if (set.queries.empty()) throw std::runtime_error("no plannable instances on the bench network");
    return set;
}

nlohmann::json to_json(const BenchReport& r) {
    return {{"model", r.model},
            {"n", r.n},
            {"w", r.w},
            {"model_bytes", r.model_bytes},
            {"repetitions", r.repetitions},
            {"warmup", r.warmup},
            {"latency",
             {{"encode_per_decision", stats_json(r.encode)},
              {"model_per_decision", stats_json(r.decision)},
              {"astar_per_path", stats_json(r.astar)},
              {"model_per_rollout", stats_json(r.rollout)}}},
            {"mean_path_hops", r.mean_path_hops},
            {"mean_rollout_decisions", r.mean_rollout_decisions},
            {"rollout_success_rate", r.rollout_success_rate},
            {"speedup_per_decision", r.speedup_decision},
            {"speedup_per_rollout", r.speedup_rollout},
            {"note",
             "A* returns a whole path while the model makes one decision; both the per-decision and the "
             "per-rollout ratios are reported. Absolute times depend on this machine."}};
}

BenchReport bench_inference(const models::Model& model, std::size_t model_bytes, const InstanceSet& set,
                            int repetitions, int warmup) {
    if (repetitions < 30) throw std::invalid_argument("bench_inference needs repetitions >= 30");
    if (warmup < 10) throw std::invalid_argument("bench_inference needs warmup >= 10");
    if (set.queries.empty()) throw std::invalid_argument("bench_inference needs instances");
    const auto& net = *set.net;
    const auto& wx = *set.wx;
    const auto& ctx = *set.ctx;
    const auto nq = set.queries.size();
    auto query = [&](int i) -> const models::RolloutQuery& { return set.queries[static_cast<std::size_t>(i) % nq]; };

    // One decision per instance, taken at its origin.
    std::vector<models::Sample> samples;
    samples.reserve(nq);
    for (const auto& q : set.queries) {
        models::SampleQuery sq;
        sq.start = q.origin;
        sq.end = q.dest;
        sq.current = q.origin;
        sq.payload = q.payload;
        sq.total_distance = ctx.shortest(q.origin, q.dest);
        sq.t = q.t0;
        samples.push_back(models::make_sample(ctx, wx, set.drone, sq));
    }

    BenchReport r;
    r.model = model.name();
    r.n = net.node_count();
    r.w = models::kWeatherFeatures;
    r.model_bytes = model_bytes;
    r.repetitions = repetitions;
    r.warmup = warmup;

    r.encode = time_calls(
        [&](int i) {
            const auto& q = query(i);
            models::SampleQuery sq{-1, q.origin, q.dest, q.origin, q.payload, ctx.shortest(q.origin, q.dest), q.t0, -1};
            g_sink = g_sink + models::make_sample(ctx, wx, set.drone, sq).node_features[0];
        },
        repetitions, warmup);
    r.decision = time_calls(
        [&](int i) { g_sink = g_sink + model.predict_next(samples[static_cast<std::size_t>(i) % nq])[0]; },
        repetitions, warmup);

    double hops = 0.0;
    r.astar = time_calls(
        [&](int i) {
            const auto& q = query(i);
            const auto route = planner::plan_route(net, wx, set.drone, q.payload, q.t0, q.origin, q.dest);
            g_sink = g_sink + route.total_duration;
            hops += route.hops();
        },
        repetitions, warmup);

    double decisions = 0.0;
    int successes = 0;
    int timed = 0;
    r.rollout = time_calls(
        [&](int i) {
            const auto res = models::rollout(model, ctx, wx, set.drone, query(i));
            g_sink = g_sink + res.total_duration;
            decisions += res.decisions;
            successes += res.success ? 1 : 0;
            ++timed;
        },
        repetitions, warmup);

    // The accumulators above also saw the warm-up calls.
    r.mean_path_hops = hops / static_cast<double>(repetitions + warmup);
    r.mean_rollout_decisions = decisions / static_cast<double>(timed);
    r.rollout_success_rate = static_cast<double>(successes) / static_cast<double>(timed);
    r.speedup_decision = r.astar.mean_ns / r.decision.mean_ns;
    r.speedup_rollout = r.astar.mean_ns / r.rollout.mean_ns;
    return r;
}

// --- scaling ------------------------------------------------------------------

namespace {

class StubSubject final : public ScalingSubject {
public:
    std::string name() const override { return "stub"; }
    std::function<void()> prepare(int, int) override {
        return [] {
            double s = 0.0;
            for (int i = 0; i < 64; ++i) s += std::sqrt(static_cast<double>(i));
            g_sink = g_sink + s;
        };
    }
};

class FfnnSubject final : public ScalingSubject {
public:
    FfnnSubject(const models::ModelConfig& cfg, int max_n, std::uint64_t seed)
        : model_(models::make_model(cfg, max_n + 2, seed)), rng_(seed) {}
    std::string name() const override { return "ffnn"; }

    std::function<void()> prepare(int n, int) override {
        auto s = std::make_shared<models::Sample>();
        s->start_node = 0;
        s->end_node = 1;
        s->current_node = 0;
        for (int t = 0; t < n + 2; ++t) s->tokens.push_back(t);
        s->node_features.resize(static_cast<std::size_t>(n + 2) * models::kNodeFeatures);
        for (auto& v : s->node_features) v = rng_.uniform();
        s->context.resize(models::kContextFeatures);
        for (auto& v : s->context) v = rng_.uniform();
        const auto* m = model_.get();
        return [m, s] { g_sink = g_sink + m->predict_next(*s)[0]; };
    }

private:
    std::unique_ptr<models::StoredModel> model_;
    Rng rng_;
};

class TransformerSubject final : public ScalingSubject {
public:
    TransformerSubject(const models::ModelConfig& cfg, InferenceMode mode, int max_n, std::uint64_t seed)
        : model_(models::make_model(cfg, max_n + 2, seed)), vocab_(max_n + 2), rng_(seed) {
        auto& t = dynamic_cast<models::TransformerModel&>(*model_);
        if (mode == InferenceMode::f64) t.freeze(models::Precision::f64);
        if (mode == InferenceMode::f32) t.freeze(models::Precision::f32);
    }
    std::string name() const override { return "transformer"; }

    std::function<void()> prepare(int n, int w) override {
        auto tb = std::make_shared<models::TokenBatch>();
        tb->batch = 1;
        tb->query_len = n;
        tb->key_len = w;
        auto id = [&] { return static_cast<int>(rng_.below(static_cast<std::uint64_t>(vocab_))); };
        auto fill = [&](std::vector<double>& v, std::size_t size) {
            v.resize(size);
            for (auto& x : v) x = rng_.uniform();
        };
        for (int i = 0; i < n; ++i) tb->query_ids.push_back(id());
        for (int i = 0; i < w; ++i) tb->memory_ids.push_back(id());
        fill(tb->query_features, static_cast<std::size_t>(n) * models::kNodeFeatures);
        fill(tb->memory_features, static_cast<std::size_t>(w) * models::kNodeFeatures);
        if (model_->config().weather_aware) {
            fill(tb->memory_weather, static_cast<std::size_t>(w) * models::kWeatherFeatures);
        }
        tb->key_mask.assign(static_cast<std::size_t>(w), 1);
        const auto* t = dynamic_cast<const models::TransformerModel*>(model_.get());
        return [t, tb] { g_sink = g_sink + t->score_tokens(*tb)[0]; };
    }

private:
    std::unique_ptr<models::StoredModel> model_;
    int vocab_;
    Rng rng_;
};

}  // namespace

std::unique_ptr<ScalingSubject> make_scaling_subject(const models::ModelConfig& cfg, InferenceMode mode, int max_n,
                                                     std::uint64_t seed) {
    switch (cfg.kind) {
        case models::ModelKind::ffnn: return std::make_unique<FfnnSubject>(cfg, max_n, seed);
        case models::ModelKind::transformer: return std::make_unique<TransformerSubject>(cfg, mode, max_n, seed);
        default: throw std::invalid_argument("no scaling sweep for " + models::to_string(cfg.kind));
    }
}

std::unique_ptr<ScalingSubject> make_stub_subject() { return std::make_unique<StubSubject>(); }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("loglog_slope needs distinct x values");
    return sxy / sxx;
}

nlohmann::json to_json(const ScalingTable& t) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : t.points) {
        pts.push_back({{"axis", p.axis}, {"n", p.n}, {"w", p.w}, {"latency", stats_json(p.latency)}});
    }
    return {{"family", t.family},
            {"points", pts},
            {"slope_n", t.slope_n},
            {"slope_w", t.slope_w},
            {"monotone_n", t.monotone_n},
            {"monotone_w", t.monotone_w}};
}

ScalingTable bench_scaling(ScalingSubject& subject, const std::vector<int>& n_values,
                           const std::vector<int>& w_values, int hold_n, int hold_w, int repetitions, int warmup) {
    if (n_values.size() < 3 || w_values.size() < 3) throw std::invalid_argument("bench_scaling needs >= 3 values per axis");
    ScalingTable table;
    table.family = subject.name();

    auto sweep = [&](const std::string& axis, const std::vector<int>& values, double& slope, bool& monotone) {
        std::vector<double> xs, ys;
        for (int v : values) {
            const int n = axis == "n" ? v : hold_n;
            const int w = axis == "w" ? v : hold_w;
            auto call = subject.prepare(n, w);
            const auto stats = time_calls([&](int) { call(); }, repetitions, warmup);
            table.points.push_back({axis, n, w, stats});
            xs.push_back(v);
            ys.push_back(stats.p50_ns);
        }
        slope = loglog_slope(xs, ys);
        monotone = true;
        for (std::size_t i = 1; i < ys.size(); ++i) {
            if ((xs[i] > xs[i - 1]) != (ys[i] > ys[i - 1])) monotone = false;
        }
    };
    sweep("n", n_values, table.slope_n, table.monotone_n);
    sweep("w", w_values, table.slope_w, table.monotone_w);
    return table;
}

}  // namespace skyroute::harness
