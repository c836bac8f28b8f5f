#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "skyroute/harness/pipeline.hpp"
#include "skyroute/models/checkpoint.hpp"
#include "support.hpp"

using namespace skyroute;
using namespace skyroute::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("skyroute_test_harness_" + name);
    fs::remove_all(p);
    return p;
}

models::ModelConfig small(models::ModelKind kind) {
    models::ModelConfig m;
    m.kind = kind;
    m.attention = {16, 2, 0.1};
    m.ff_dim = 32;
    m.ffnn_hidden = {32, 16};
    return m;
}

RunConfig tiny_config(const fs::path& out) {
    RunConfig c;
    c.network = testing::instance_config(20, 5);
    c.weather.horizon_s = 6 * 3600.0;
    c.requests.count = 60;
    c.fleet.drone_count = 10;
    c.train.epochs = 2;
    c.train.batch_size = 32;
    c.models = {small(models::ModelKind::greedy), small(models::ModelKind::knn), small(models::ModelKind::ffnn),
                small(models::ModelKind::transformer)};
    c.eval.rollout_episodes = 10;
    c.eval.latency_samples = 5;
    c.bench.enabled = false;
    c.paths.out_dir = out;
    return c;
}

}  // namespace

TEST_CASE("sha256: standard test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("run config: JSON round trip and validation") {
    RunConfig c = tiny_config("somewhere");
    c.inference = InferenceMode::f64;
    c.bench.enabled = true;
    c.bench.n_values = {10, 20, 40};
    const auto j = to_json(c);
    const auto back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.models.size() == 4);
    CHECK(back.inference == InferenceMode::f64);

    // Missing sections keep their defaults.
    const auto d = run_config_from_json(nlohmann::json::object());
    CHECK(to_json(d) == to_json(RunConfig{}));

    auto bad = j;
    bad["bench"]["repetitions"] = 0;
    CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
    bad = j;
    bad["bench"]["w_values"] = {1, 2};
    CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
    bad = j;
    bad["inference"] = "f16";
    CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
    bad = j;
    bad["requests"]["count"] = 0;
    CHECK_THROWS_AS(run_config_from_json(bad), std::invalid_argument);
}

TEST_CASE("loglog_slope: power laws") {
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}) == doctest::Approx(2.0));
    CHECK(loglog_slope({50, 100, 200}, {7, 7, 7}) == doctest::Approx(0.0));
    CHECK(loglog_slope({10, 20, 40}, {5, 10, 20}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(loglog_slope({1}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(loglog_slope({2, 2}, {1, 3}), std::invalid_argument);
}

TEST_CASE("time_calls: warm-up calls are not timed") {
    int calls = 0;
    const auto s = time_calls([&](int) { ++calls; }, 30, 10);
    CHECK(calls == 40);
    CHECK(s.count == 30);
    CHECK(s.p50_ns <= s.p95_ns);
}

TEST_CASE("bench_inference: preconditions and report contents") {
    const auto in = testing::random_instance(25, 3);
    flight::DroneSpec drone;
    const auto set = make_instance_set(in.net, in.wx, drone, 30, 4);
    CHECK(set.queries.size() == 30);
    auto m = models::make_model(small(models::ModelKind::ffnn), in.net.node_count(), 1);

    CHECK_THROWS_AS(bench_inference(*m, 0, set, 0), std::invalid_argument);
    CHECK_THROWS_AS(bench_inference(*m, 0, set, 30, 5), std::invalid_argument);

    const auto r = bench_inference(*m, 1234, set, 30, 10);
    CHECK(r.n == 25);
    CHECK(r.model_bytes == 1234);
    for (const auto* s : {&r.encode, &r.decision, &r.astar, &r.rollout}) {
        CHECK(s->count == 30);
        CHECK(s->mean_ns > 0.0);
        CHECK(s->p50_ns > 0.0);
    }
    CHECK(r.speedup_decision == doctest::Approx(r.astar.mean_ns / r.decision.mean_ns));
    CHECK(r.mean_path_hops >= 1.0);
    const auto j = to_json(r);
    CHECK(j.contains("note"));
    CHECK(j["latency"].contains("model_per_rollout"));
}

TEST_CASE("bench_scaling: stub calibration and preconditions") {
    auto stub = make_stub_subject();
    CHECK_THROWS_AS(bench_scaling(*stub, {1, 2}, {1, 2, 3}, 1, 1, 30, 10), std::invalid_argument);
    const auto t = bench_scaling(*stub, {50, 100, 200, 400}, {50, 100, 200, 400}, 100, 100, 30, 10);
    CHECK(t.points.size() == 8);
    CHECK(std::abs(t.slope_n) < 0.5);
    CHECK(std::abs(t.slope_w) < 0.5);

    // Small sizes only: this checks wiring, the full sweep runs in the
    // acceptance binary.
    auto ff = make_scaling_subject(small(models::ModelKind::ffnn), InferenceMode::f32, 40, 1);
    const auto f = bench_scaling(*ff, {10, 20, 40}, {10, 20, 40}, 10, 10, 30, 10);
    CHECK(f.family == "ffnn");
    auto tr = make_scaling_subject(small(models::ModelKind::transformer), InferenceMode::f32, 40, 1);
    CHECK(bench_scaling(*tr, {10, 20, 40}, {10, 20, 40}, 10, 10, 30, 10).family == "transformer");
    CHECK_THROWS_AS(make_scaling_subject(small(models::ModelKind::knn), InferenceMode::f32, 40, 1),
                    std::invalid_argument);
}

TEST_CASE("pipeline: tiny run, replay reproduces every data artifact") {
    set_log_stream(nullptr);
    const auto a = scratch_dir("a");
    const auto b = scratch_dir("b");
    const auto ra = run_pipeline(tiny_config(a));
    for (const char* f : {"run_config.json", "network.json", "weather.jsonl", "requests.jsonl", "dataset.jsonl",
                          "simulation.json", "split.json", "eval.json", "model_sizes.json", "timing.json",
                          "manifest.json", "models/transformer.skym", "curves/ffnn.csv"}) {
        CHECK_MESSAGE(fs::exists(a / f), f);
    }
    CHECK(ra.models.size() == 4);
    CHECK(ra.find("transformer") != nullptr);
    CHECK(ra.find("transformer")->rollouts.episodes == 10);

    bool timing_marked = false;
    for (const auto& art : ra.manifest.artifacts) {
        if (art.path == "timing.json") timing_marked = art.kind == ArtifactKind::timing;
    }
    CHECK(timing_marked);

    // The saved config alone reproduces the run.
    auto replay = load_run_config(a / "run_config.json");
    replay.paths.out_dir = b;
    run_pipeline(replay);
    const auto ma = load_manifest(a / "manifest.json");
    const auto mb = load_manifest(b / "manifest.json");
    const auto diffs = compare_manifests(ma, mb);
    CHECK_MESSAGE(diffs.empty(), (diffs.empty() ? "" : diffs.front()));

    // A changed data artifact is noticed.
    { std::ofstream(b / "split.json", std::ios::app) << " "; }
    CHECK(!compare_manifests(ma, build_manifest(b, replay)).empty());

    // A checkpoint from the run loads and predicts like the trained model.
    const auto loaded = models::load_model(a / "models" / "ffnn.skym");
    CHECK(models::serialize_model(*loaded) == models::serialize_model(*ra.find("ffnn")->model));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("pipeline: a missing weather file fails at simulate and names the path") {
    set_log_stream(nullptr);
    const auto dir = scratch_dir("missing");
    auto cfg = tiny_config(dir);
    cfg.weather.generate = false;
    cfg.paths.weather = dir / "nowhere" / "weather.jsonl";
    try {
        run_pipeline(cfg);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "simulate");
        CHECK(std::string(e.what()).find(cfg.paths.weather.string()) != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("check_simulation: tampered records are reported") {
    const auto in = testing::random_instance(20, 9);
    flight::DroneSpec drone;
    fleet::FleetConfig fc;
    fc.drone_count = 5;
    const auto reqs = fleet::generate_requests(in.net, 20, in.wx.horizon_s(), {}, drone.max_payload, 2);
    auto sim = fleet::run_simulation(in.net, in.wx, drone, fleet::make_fleet(in.net, drone, fc), reqs, fc);
    REQUIRE(!sim.records.empty());
    CHECK(check_simulation(sim, in.net, in.wx, drone).empty());
    sim.records.front().route_segments.front().flight_duration *= 1.5;
    CHECK(!check_simulation(sim, in.net, in.wx, drone).empty());
}
