// Acceptance run: one PASS/FAIL line per criterion. Criteria 4-8 share one
// desk-scale pipeline run plus its replay. Usage: acceptance [work_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "skyroute/harness/pipeline.hpp"
#include "skyroute/nn/layers.hpp"
#include "skyroute/nn/loss.hpp"
#include "skyroute/nn/optim.hpp"
#include "support.hpp"

using namespace skyroute;
using namespace skyroute::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& title, double budget_s, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_s) {
        o.pass = false;
        o.detail += " [over time budget " + std::to_string(budget_s) + " s]";
    }
    if (!o.pass) ++g_failures;
    std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- 1 -------------------------------------------------------------------------

Outcome planner_optimality() {
    const flight::DroneSpec drone;
    int astar_mismatch = 0, brute_mismatch = 0, brute_checked = 0, unreachable = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int nodes = 15 + i % 16;
        const auto in = testing::random_instance(nodes, static_cast<std::uint64_t>(1000 + i));
        const planner::SnapshotCost cost(in.net, in.wx, drone, in.payload, in.t);
        std::optional<planner::Route> dj, as;
        try {
            dj = planner::dijkstra(in.net, std::cref(cost), in.origin, in.dest);
        } catch (const planner::NoRoute&) {
        }
        try {
            as = planner::plan_route(in.net, in.wx, drone, in.payload, in.t, in.origin, in.dest);
        } catch (const planner::NoRoute&) {
        }
        if (dj.has_value() != as.has_value()) {
            ++astar_mismatch;
            continue;
        }
        if (!dj) {
            ++unreachable;
            continue;
        }
        const double rel = std::abs(as->total_duration - dj->total_duration) / dj->total_duration;
        worst = std::max(worst, rel);
        if (rel > 1e-9) ++astar_mismatch;
        if (nodes == 15) {
            ++brute_checked;
            const double best = testing::brute_force_min_cost(in.net, std::cref(cost), in.origin, in.dest);
            if (!testing::rel_close(best, dj->total_duration, 1e-9)) ++brute_mismatch;
        }
    }
    return {astar_mismatch == 0 && brute_mismatch == 0 && brute_checked > 0,
            fmt("1000 instances, A* vs Dijkstra mismatches %d (worst rel %.2e), exhaustive mismatches %d of %d "
                "15-node instances, %d unreachable in both",
                astar_mismatch, worst, brute_mismatch, brute_checked, unreachable)};
}

// --- 2 -------------------------------------------------------------------------

Outcome gradient_correctness() {
    using namespace skyroute::nn;
    using testing::grad_check;
    using testing::probe_sum;
    using testing::random_tensor;
    Rng rng(2024);
    std::vector<std::pair<std::string, double>> errs;

    Tensor x = random_tensor({6, 5}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({4}, rng);
    errs.emplace_back("linear", grad_check([&] { return probe_sum(linear(x, w, b), 1); }, {x, w, b}, 100, 11));

    const int batch = 2, lq = 3, lk = 4, d = 8;
    Tensor q = random_tensor({batch * lq, d}, rng), k = random_tensor({batch * lk, d}, rng),
           v = random_tensor({batch * lk, d}, rng);
    const std::vector<std::uint8_t> kmask{1, 1, 0, 1, 1, 1, 1, 0};
    errs.emplace_back("attention", grad_check(
                                       [&] {
                                           AttentionOptions opt{batch, lq, lk, 2, kmask};
                                           return probe_sum(attention(q, k, v, opt), 2);
                                       },
                                       {q, k, v}, 100, 12));

    Tensor logits = random_tensor({5, 4}, rng);
    const std::vector<std::uint8_t> lmask{1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1};
    const std::vector<int> targets{2, 1, 3, 0, 2};
    std::vector<double> severity(5 * 4 * 4);
    for (auto& s : severity) s = rng.uniform();
    for (double lambda : {0.0, 0.7}) {
        LossConfig cfg;
        cfg.lambda = lambda;
        const LossInputs in{5, 4, lmask, targets, severity};
        errs.emplace_back(fmt("loss(lambda=%.1f)", lambda),
                          grad_check([&] { return weather_penalized_cross_entropy(logits, in, cfg); }, {logits}, 100,
                                     13 + static_cast<int>(lambda * 10)));
    }

    // The real model: two blocks, dropout on (mask fixed by reseeding), the
    // weather-penalized loss on encoded routing decisions.
    const auto inst = testing::random_instance(20, 77);
    const flight::DroneSpec drone;
    const auto reqs = fleet::generate_requests(inst.net, 6, inst.wx.horizon_s(), {}, drone.max_payload, 5);
    fleet::FleetConfig fc;
    fc.drone_count = 3;
    const auto sim = fleet::run_simulation(inst.net, inst.wx, drone, fleet::make_fleet(inst.net, drone, fc), reqs, fc);
    const models::NetworkContext ctx(inst.net);
    auto samples = models::encode_dataset(sim.records, ctx, inst.wx, drone);
    samples.resize(std::min<std::size_t>(samples.size(), 6));
    models::ModelConfig mc;
    mc.kind = models::ModelKind::transformer;
    mc.attention = {8, 2, 0.1};
    mc.ff_dim = 16;
    mc.n_layers = 2;
    const auto model = models::make_model(mc, inst.net.node_count(), 9);
    const auto ptrs = models::sample_ptrs(samples);
    const int B = static_cast<int>(samples.size());
    int cmax = 0;
    for (const auto& s : samples) cmax = std::max(cmax, s.candidate_count());
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(B * cmax), 0);
    std::vector<int> tgt;
    std::vector<double> sev(static_cast<std::size_t>(B * cmax * models::kSeverityChannels), 0.0);
    for (int i = 0; i < B; ++i) {
        const auto& s = samples[i];
        std::fill_n(mask.begin() + i * cmax, s.candidate_count(), 1);
        tgt.push_back(s.label_index);
        std::copy(s.severity.begin(), s.severity.end(), sev.begin() + i * cmax * models::kSeverityChannels);
    }
    LossConfig lcfg;
    lcfg.lambda = 0.5;
    const LossInputs lin{B, cmax, mask, tgt, sev};
    std::vector<Tensor> params;
    for (const auto& p : model->parameters()) params.push_back(p.tensor);
    errs.emplace_back("transformer", grad_check(
                                         [&] {
                                             Rng drop(3);
                                             return weather_penalized_cross_entropy(model->logits(ptrs, true, &drop),
                                                                                    lin, lcfg);
                                         },
                                         params, 100, 17));

    bool ok = true;
    std::ostringstream detail;
    detail << "worst relative error over 100 probes:";
    for (const auto& [name, e] : errs) {
        detail << ' ' << name << ' ' << fmt("%.1e", e);
        if (!(e < 1e-4)) ok = false;
    }
    return {ok, detail.str()};
}

// --- 3 -------------------------------------------------------------------------

Outcome closed_forms() {
    using namespace skyroute::nn;
    const ScheduleConfig s{100, 1000};
    const std::vector<std::pair<int, double>> expect{{0, 0.0}, {50, 0.5}, {100, 1.0}, {550, 0.5}, {1000, 0.0}};
    double worst = 0.0;
    for (const auto& [step, value] : expect) worst = std::max(worst, std::abs(lr_factor(step, s) - value));

    OptimConfig cfg;
    std::vector<double> wv{0.8};
    const std::vector<double> g{0.0};
    AdamWState st;
    adamw_step(wv, g, st, 1, cfg.lr, cfg);
    const bool decay_exact = wv[0] == 0.8 * (1.0 - cfg.lr * cfg.weight_decay);

    std::vector<double> grad{3.0, 4.0};
    std::vector<std::span<double>> spans{grad};
    clip_grad_norm(spans, 1.0);
    const bool clip_ok = std::abs(grad[0] - 0.6) < 1e-15 && std::abs(grad[1] - 0.8) < 1e-15;

    return {worst < 1e-12 && decay_exact && clip_ok,
            fmt("lr_factor worst error %.1e at steps {0,50,100,550,1000}; decay-only step exact: %s; clip(3,4) -> "
                "(%.17g, %.17g)",
                worst, decay_exact ? "yes" : "no", grad[0], grad[1])};
}

// --- 4-8 share one run ----------------------------------------------------------

struct Runs {
    std::optional<PipelineResult> first;
    std::string error;
    fs::path dir_a, dir_b;
};

const TrainedModel& need(const PipelineResult& r, const std::string& name) {
    const auto* m = r.find(name);
    if (!m) throw std::runtime_error("pipeline produced no " + name + " model");
    return *m;
}

Outcome imitation_accuracy(const Runs& runs) {
    if (!runs.first) return {false, "pipeline failed: " + runs.error};
    const auto& r = *runs.first;
    const auto& tr = need(r, "transformer");
    const auto& ff = need(r, "ffnn");
    const auto& knn = need(r, "knn");
    const auto& gr = need(r, "greedy");
    const bool ranking = tr.eval.accuracy >= ff.eval.accuracy && ff.eval.accuracy >= knn.eval.accuracy &&
                         knn.eval.accuracy >= gr.eval.accuracy;
    const bool ok = tr.eval.accuracy >= 0.90 && ff.eval.accuracy >= 0.90 && ranking &&
                    static_cast<int>(tr.curves.size()) <= 30 && tr.train_seconds < 300.0;
    return {ok, fmt("held-out accuracy transformer %.4f, ffnn %.4f, knn %.4f, greedy %.4f on %zu decisions; "
                    "transformer %zu epochs in %.0f s",
                    tr.eval.accuracy, ff.eval.accuracy, knn.eval.accuracy, gr.eval.accuracy, tr.eval.samples,
                    tr.curves.size(), tr.train_seconds)};
}

Outcome rollout_quality(const Runs& runs) {
    if (!runs.first) return {false, "pipeline failed: " + runs.error};
    const auto& ro = need(*runs.first, "transformer").rollouts;
    const bool ok = ro.episodes == 100 && ro.success_rate >= 0.95 && ro.mean_cost_ratio <= 1.05;
    return {ok, fmt("transformer: %d/%d episodes reach the destination, mean cost ratio %.4f (max %.4f, %d optimal)",
                    ro.successes, ro.episodes, ro.mean_cost_ratio, ro.max_cost_ratio, ro.optimal)};
}

Outcome latency_properties(const Runs& runs) {
    if (!runs.first) return {false, "pipeline failed: " + runs.error};
    const auto& r = *runs.first;
    const BenchReport* tb = nullptr;
    const BenchReport* fb = nullptr;
    for (const auto& b : r.bench) {
        if (b.model == "transformer") tb = &b;
        if (b.model == "ffnn") fb = &b;
    }
    const ScalingTable* ts = nullptr;
    const ScalingTable* fs_ = nullptr;
    for (const auto& t : r.scaling) {
        if (t.family == "transformer") ts = &t;
        if (t.family == "ffnn") fs_ = &t;
    }
    if (!tb || !fb || !ts || !fs_) return {false, "bench output missing"};
    bool ffnn_faster = true;
    for (const auto& p : ts->points) {
        if (p.axis != "n") continue;
        for (const auto& q : fs_->points) {
            if (q.axis == "n" && q.n == p.n && !(q.latency.p50_ns < p.latency.p50_ns)) ffnn_faster = false;
        }
    }
    const bool ok = tb->speedup_decision > 1.0 && ts->monotone_n && ts->monotone_w && ffnn_faster;
    return {ok, fmt("n=%d: transformer %.1f us/decision vs A* %.1f us/path (speedup %.2f; ffnn %.1f us, speedup "
                    "%.1f); transformer monotone in n: %s (slope %.2f), in w: %s (slope %.2f); ffnn < transformer at "
                    "every n: %s",
                    tb->n, tb->decision.mean_ns / 1e3, tb->astar.mean_ns / 1e3, tb->speedup_decision,
                    fb->decision.mean_ns / 1e3, fb->speedup_decision, ts->monotone_n ? "yes" : "no", ts->slope_n,
                    ts->monotone_w ? "yes" : "no", ts->slope_w, ffnn_faster ? "yes" : "no")};
}

Outcome simulation_integrity(const Runs& runs) {
    if (!runs.first) return {false, "pipeline failed: " + runs.error};
    const auto& r = *runs.first;
    const auto path = runs.dir_a / "dataset.jsonl";
    const auto from_disk = fleet::read_dataset(path);
    const bool same_records = from_disk == r.simulation.records;
    const auto violations = check_simulation(r.simulation, r.network.network, r.weather, r.config.drone);

    std::ifstream in(path, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    std::ostringstream rewritten;
    fleet::write_dataset(from_disk, rewritten);
    const bool bit_identical = rewritten.str() == bytes.str();

    const std::set<std::string> top{"request_id", "route_segments"};
    const std::set<std::string> seg{"from_node",   "to_node",  "wind_speed",      "wind_direction",
                                    "temperature", "distance", "flight_duration", "battery_consumed"};
    int bad_fields = 0;
    std::istringstream lines(bytes.str());
    std::string line;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const auto& k : top) bad_fields += j.contains(k) ? 0 : 1;
        for (const auto& s : j.at("route_segments")) {
            for (const auto& k : seg) bad_fields += s.contains(k) ? 0 : 1;
        }
    }
    const bool ok = violations.empty() && same_records && bit_identical && bad_fields == 0;
    return {ok, fmt("%zu records: %zu invariant violations, disk copy equal: %s, JSONL round trip bit-identical: %s, "
                    "missing listing fields: %d",
                    r.simulation.records.size(), violations.size(), same_records ? "yes" : "no",
                    bit_identical ? "yes" : "no", bad_fields)};
}

Outcome determinism(const Runs& runs) {
    if (!runs.first) return {false, "pipeline failed: " + runs.error};
    auto replay = load_run_config(runs.dir_a / "run_config.json");
    replay.paths.out_dir = runs.dir_b;
    fs::remove_all(runs.dir_b);
    const auto second = run_pipeline(replay);
    const auto diffs = compare_manifests(load_manifest(runs.dir_a / "manifest.json"), second.manifest);
    std::size_t data = second.manifest.data_hashes().size();
    return {diffs.empty(), diffs.empty() ? fmt("replay reproduced all %zu data artifact hashes", data)
                                         : fmt("%zu differences, first: %s", diffs.size(), diffs.front().c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_runs";
    set_log_stream(nullptr);

    report(1, "planner optimality", 60, planner_optimality);
    report(2, "gradient correctness", 60, gradient_correctness);
    report(3, "schedule and optimizer closed forms", 1, closed_forms);

    Runs runs;
    runs.dir_a = work / "run_a";
    runs.dir_b = work / "run_b";
    const auto start = std::chrono::steady_clock::now();
    try {
        fs::remove_all(runs.dir_a);
        RunConfig cfg;  // desk scale: 50 nodes, 500 requests, 24 h
        cfg.paths.out_dir = runs.dir_a;
        runs.first = run_pipeline(cfg);
    } catch (const std::exception& e) {
        runs.error = e.what();
    }
    std::printf("     desk-scale pipeline run: %.1f s\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

    report(4, "imitation accuracy", 300, [&] { return imitation_accuracy(runs); });
    report(5, "rollout quality", 60, [&] { return rollout_quality(runs); });
    report(6, "latency properties", 120, [&] { return latency_properties(runs); });
    report(7, "simulation integrity", 60, [&] { return simulation_integrity(runs); });
    report(8, "determinism", 300, [&] { return determinism(runs); });

    std::printf("%d of 8 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
