#include "skyroute/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include "skyroute/models/checkpoint.hpp"
#include "skyroute/planner.hpp"

namespace skyroute::harness {

namespace fs = std::filesystem;

namespace {

std::ostream* g_log = &std::cerr;

void log_line(const std::string& stage, const std::string& msg) {
    if (g_log) *g_log << "[" << stage << "] " << msg << std::endl;
}

std::string to_string(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::data: return "data";
        case ArtifactKind::timing: return "timing";
        case ArtifactKind::config: return "config";
    }
    return "?";
}

ArtifactKind artifact_kind_from_string(const std::string& s) {
    if (s == "data") return ArtifactKind::data;
    if (s == "timing") return ArtifactKind::timing;
    if (s == "config") return ArtifactKind::config;
    throw std::invalid_argument("unknown artifact kind '" + s + "'");
}

// Files whose content includes wall-clock measurements.
bool is_timing_file(const std::string& rel) {
    return rel == "timing.json" || rel == "bench_inference.json" || rel == "bench_scaling.json";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json config_identity(const RunConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("paths");
    return j;
}

std::string model_name(const models::ModelConfig& mc, const std::vector<TrainedModel>& existing) {
    std::string base = models::to_string(mc.kind);
    if (mc.kind == models::ModelKind::transformer && !mc.weather_aware) base += "-blind";
    std::string name = base;
    for (int i = 2; std::any_of(existing.begin(), existing.end(), [&](const TrainedModel& t) { return t.name == name; });
         ++i) {
        name = base + "-" + std::to_string(i);
    }
    return name;
}

void apply_inference_mode(models::StoredModel& m, InferenceMode mode) {
    auto* t = dynamic_cast<models::TransformerModel*>(&m);
    if (!t) return;
    if (mode == InferenceMode::f64) t->freeze(models::Precision::f64);
    if (mode == InferenceMode::f32) t->freeze(models::Precision::f32);
}

std::string curves_csv(const std::vector<models::EpochStats>& curves) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "epoch,train_loss,val_loss,val_accuracy\n";
    for (const auto& c : curves) out << c.epoch << ',' << c.train_loss << ',' << c.val_loss << ',' << c.val_accuracy << '\n';
    return out.str();
}

std::vector<int> request_ids(const std::vector<fleet::RouteRecord>& records) {
    std::vector<int> ids;
    for (const auto& r : records) ids.push_back(r.request_id);
    return ids;
}

template <class F>
auto run_stage(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

void set_log_stream(std::ostream* out) { g_log = out; }

// --- hashing and manifests -----------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

std::map<std::string, std::string> Manifest::data_hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& a : artifacts) {
        if (a.kind == ArtifactKind::data) out[a.path] = a.sha256;
    }
    return out;
}

nlohmann::json to_json(const Manifest& m) {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : m.artifacts) {
        arts.push_back({{"path", a.path}, {"kind", to_string(a.kind)}, {"bytes", a.bytes}, {"sha256", a.sha256}});
    }
    return {{"config_sha256", m.config_sha256}, {"artifacts", arts}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    for (const auto& a : j.at("artifacts")) {
        m.artifacts.push_back({a.at("path").get<std::string>(), artifact_kind_from_string(a.at("kind").get<std::string>()),
                               a.at("bytes").get<std::uintmax_t>(), a.at("sha256").get<std::string>()});
    }
    return m;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest " + path.string());
    return manifest_from_json(nlohmann::json::parse(in));
}

Manifest build_manifest(const fs::path& dir, const RunConfig& cfg) {
    Manifest m;
    m.config_sha256 = sha256_hex(config_identity(cfg).dump());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string rel = fs::relative(f, dir).generic_string();
        if (rel == "manifest.json") continue;
        Artifact a;
        a.path = rel;
        a.kind = rel == "run_config.json" ? ArtifactKind::config
                 : is_timing_file(rel)    ? ArtifactKind::timing
                                          : ArtifactKind::data;
        a.bytes = fs::file_size(f);
        a.sha256 = sha256_file(f);
        m.artifacts.push_back(std::move(a));
    }
    return m;
}

std::vector<std::string> compare_manifests(const Manifest& a, const Manifest& b) {
    std::vector<std::string> diffs;
    if (a.config_sha256 != b.config_sha256) diffs.push_back("run config differs");
    const auto ha = a.data_hashes();
    const auto hb = b.data_hashes();
    for (const auto& [path, hash] : ha) {
        const auto it = hb.find(path);
        if (it == hb.end()) {
            diffs.push_back(path + ": missing from the second run");
        } else if (it->second != hash) {
            diffs.push_back(path + ": content differs");
        }
    }
    for (const auto& [path, hash] : hb) {
        if (!ha.count(path)) diffs.push_back(path + ": missing from the first run");
    }
    return diffs;
}

// --- rollouts --------------------------------------------------------------------

nlohmann::json to_json(const RolloutSummary& s) {
    return {{"model", s.model},
            {"episodes", s.episodes},
            {"successes", s.successes},
            {"success_rate", s.success_rate},
            {"mean_cost_ratio", s.mean_cost_ratio},
            {"max_cost_ratio", s.max_cost_ratio},
            {"optimal", s.optimal},
            {"failures", s.failures}};
}

RolloutSummary evaluate_rollouts(const models::Model& model, const InstanceSet& episodes) {
    RolloutSummary s;
    s.model = model.name();
    double ratio_sum = 0.0;
    for (const auto& q : episodes.queries) {
        ++s.episodes;
        const auto res = models::rollout(model, *episodes.ctx, *episodes.wx, episodes.drone, q);
        if (!res.success) {
            ++s.failures[res.reason];
            continue;
        }
        ++s.successes;
        const auto best =
            planner::plan_route(*episodes.net, *episodes.wx, episodes.drone, q.payload, q.t0, q.origin, q.dest);
        const double ratio = best.total_duration > 0.0 ? res.total_duration / best.total_duration : 1.0;
        ratio_sum += ratio;
        s.max_cost_ratio = std::max(s.max_cost_ratio, ratio);
        if (ratio <= 1.0 + 1e-9) ++s.optimal;
    }
    if (s.episodes > 0) s.success_rate = static_cast<double>(s.successes) / s.episodes;
    if (s.successes > 0) s.mean_cost_ratio = ratio_sum / s.successes;
    return s;
}

// --- pipeline ---------------------------------------------------------------------

const TrainedModel* PipelineResult::find(const std::string& name) const {
    for (const auto& m : models) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

std::vector<std::string> check_simulation(const fleet::SimulationResult& sim, const skynet::Network& net,
                                          const weather::WeatherSeries& wx, const flight::DroneSpec& drone) {
    std::vector<std::string> out;
    for (const auto& r : sim.records) {
        for (const auto& v : fleet::check_record(r, net, wx, drone)) {
            out.push_back("request " + std::to_string(r.request_id) + ": " + v);
        }
    }
    for (const auto& v : fleet::check_battery_log(sim.events, drone)) out.push_back("battery: " + v);

    std::ostringstream first;
    fleet::write_dataset(sim.records, first);
    std::istringstream in(first.str());
    const auto back = fleet::read_dataset(in);
    std::ostringstream second;
    fleet::write_dataset(back, second);
    if (back != sim.records) out.push_back("dataset: records differ after a JSONL round trip");
    if (second.str() != first.str()) out.push_back("dataset: JSONL bytes differ after a round trip");
    return out;
}

PipelineResult run_pipeline(const RunConfig& cfg_in) {
    PipelineResult res;
    res.config = cfg_in;
    const RunConfig& cfg = res.config;
    run_stage("config", [&] {
        cfg.validate();
        return 0;
    });
    const fs::path dir = cfg.paths.out_dir;
    run_stage("config", [&] {
        fs::create_directories(dir / "models");
        fs::create_directories(dir / "curves");
        save_run_config(cfg, dir / "run_config.json");
        return 0;
    });

    // gen-net
    run_stage("gen-net", [&] {
        res.network = skynet::generate_network(cfg.network);
        if (!res.network.network.connected()) throw std::runtime_error("generated network is disconnected");
        skynet::save_network(res.network.network, dir / "network.json");
        write_json(dir / "network_report.json", {{"nodes", res.network.network.node_count()},
                                                  {"edges", res.network.network.edge_count()},
                                                  {"mst_max_degree", res.network.mst.max_degree_used},
                                                  {"extra_edges_added", res.network.extra_added},
                                                  {"warnings", res.network.mst.warnings}});
        log_line("gen-net", std::to_string(res.network.network.node_count()) + " nodes, " +
                                std::to_string(res.network.network.edge_count()) + " edges");
        return 0;
    });
    const auto& net = res.network.network;
    const fs::path weather_path = cfg.paths.weather_file();

    // gen-weather
    if (cfg.weather.generate) {
        run_stage("gen-weather", [&] {
            const auto wx = weather::synth_weather(net, cfg.weather.horizon_s, cfg.weather.interval_s, cfg.weather.seed);
            if (weather_path.has_parent_path()) fs::create_directories(weather_path.parent_path());
            weather::write_weather(wx, weather_path);
            log_line("gen-weather", std::to_string(wx.steps()) + " steps x " + std::to_string(wx.node_count()) +
                                        " nodes -> " + weather_path.string());
            return 0;
        });
    }

    // simulate
    run_stage("simulate", [&] {
        if (!fs::exists(weather_path)) throw std::runtime_error("weather file not found: " + weather_path.string());
        res.weather = weather::load_weather(weather_path);
        if (res.weather.node_count() != net.node_count()) {
            throw std::runtime_error("weather file " + weather_path.string() + " covers " +
                                     std::to_string(res.weather.node_count()) + " nodes, network has " +
                                     std::to_string(net.node_count()));
        }
        res.requests = fleet::generate_requests(net, cfg.requests.count, res.weather.horizon_s(), cfg.requests.payload,
                                                cfg.drone.max_payload, cfg.requests.seed);
        res.simulation = fleet::run_simulation(net, res.weather, cfg.drone, fleet::make_fleet(net, cfg.drone, cfg.fleet),
                                               res.requests, cfg.fleet);
        if (res.simulation.records.empty()) throw std::runtime_error("no request was delivered");
        const auto violations = check_simulation(res.simulation, net, res.weather, cfg.drone);
        if (!violations.empty()) {
            throw std::runtime_error(std::to_string(violations.size()) + " record invariant violations, first: " +
                                     violations.front());
        }
        std::ostringstream reqs;
        for (const auto& r : res.requests) {
            reqs << nlohmann::json{{"request_id", r.request_id},
                                   {"origin", r.origin},
                                   {"destination", r.destination},
                                   {"payload_kg", r.payload_kg},
                                   {"request_time", r.request_time}}
                        .dump()
                 << '\n';
        }
        write_text(dir / "requests.jsonl", reqs.str());
        fleet::write_dataset(res.simulation.records, dir / "dataset.jsonl");
        auto summary = fleet::to_json(fleet::summarize(res.simulation, res.requests.size()), cfg.fleet);
        nlohmann::json failures = nlohmann::json::array();
        for (const auto& f : res.simulation.failures) failures.push_back({{"request_id", f.request_id}, {"reason", f.reason}});
        summary["failures"] = failures;
        write_json(dir / "simulation.json", summary);
        log_line("simulate", std::to_string(res.simulation.records.size()) + "/" + std::to_string(res.requests.size()) +
                                 " requests delivered");
        return 0;
    });
    const auto& wx = res.weather;

    // train
    const models::NetworkContext ctx(net);
    std::vector<models::Sample> train_set, val_set, test_set;
    nlohmann::json timing = {{"train", nlohmann::json::object()}, {"eval_latency", nlohmann::json::object()}};
    run_stage("train", [&] {
        res.split = models::split_records(res.simulation.records, cfg.train.train_frac, cfg.train.val_frac, cfg.train.seed);
        write_json(dir / "split.json", {{"train", request_ids(res.split.train)},
                                        {"val", request_ids(res.split.val)},
                                        {"test", request_ids(res.split.test)}});
        train_set = models::encode_dataset(res.split.train, ctx, wx, cfg.drone);
        val_set = models::encode_dataset(res.split.val, ctx, wx, cfg.drone);
        test_set = models::encode_dataset(res.split.test, ctx, wx, cfg.drone);
        for (const auto& mc : cfg.models) {
            TrainedModel tm;
            tm.name = model_name(mc, res.models);
            auto tr = models::train(mc, cfg.train, net.node_count(), train_set, val_set);
            tm.model = std::move(tr.model);
            tm.curves = std::move(tr.curves);
            tm.train_seconds = tr.seconds;
            const auto ckpt = dir / "models" / (tm.name + ".skym");
            models::save_model(*tm.model, ckpt);
            tm.checkpoint_bytes = static_cast<std::size_t>(fs::file_size(ckpt));
            if (!tm.curves.empty()) write_text(dir / "curves" / (tm.name + ".csv"), curves_csv(tm.curves));
            timing["train"][tm.name] = {{"seconds", tr.seconds}, {"steps", tr.steps}};
            log_line("train", tm.name + ": " + std::to_string(tr.steps) + " steps");
            apply_inference_mode(*tm.model, cfg.inference);
            res.models.push_back(std::move(tm));
        }
        return 0;
    });

    // eval
    run_stage("eval", [&] {
        nlohmann::json out = {{"test_samples", test_set.size()},
                              {"inference", to_string(cfg.inference)},
                              {"models", nlohmann::json::array()}};
        std::optional<InstanceSet> episodes;
        if (cfg.eval.rollout_episodes > 0) {
            episodes = make_instance_set(net, wx, cfg.drone, cfg.eval.rollout_episodes,
                                         derive_seed(cfg.eval.episode_seed, stream::kEpisodes));
        }
        for (auto& tm : res.models) {
            tm.eval = models::evaluate(*tm.model, test_set, cfg.eval.latency_samples);
            tm.eval.model = tm.name;
            auto ej = models::to_json(tm.eval);
            timing["eval_latency"][tm.name] = ej["latency_ns"];
            ej.erase("latency_ns");
            nlohmann::json entry = {{"name", tm.name}, {"eval", ej}};
            if (episodes) {
                tm.rollouts = evaluate_rollouts(*tm.model, *episodes);
                tm.rollouts.model = tm.name;
                entry["rollouts"] = to_json(tm.rollouts);
            }
            out["models"].push_back(entry);
            std::ostringstream msg;
            msg << tm.name << ": accuracy " << tm.eval.accuracy;
            if (episodes) msg << ", rollout success " << tm.rollouts.success_rate << ", cost ratio " << tm.rollouts.mean_cost_ratio;
            log_line("eval", msg.str());
        }
        write_json(dir / "eval.json", out);

        // Memory attributable to the weather pathway: checkpoint size with and
        // without it, other settings equal.
        nlohmann::json sizes = {{"checkpoints", nlohmann::json::object()}};
        for (const auto& tm : res.models) sizes["checkpoints"][tm.name] = tm.checkpoint_bytes;
        for (const auto& mc : cfg.models) {
            if (mc.kind != models::ModelKind::transformer) continue;
            auto aware = mc;
            aware.weather_aware = true;
            auto blind = mc;
            blind.weather_aware = false;
            const auto a = models::serialize_model(*models::make_model(aware, net.node_count(), 0)).size();
            const auto b = models::serialize_model(*models::make_model(blind, net.node_count(), 0)).size();
            sizes["weather_overhead_bytes"] = static_cast<long long>(a) - static_cast<long long>(b);
            break;
        }
        write_json(dir / "model_sizes.json", sizes);
        return 0;
    });

    // bench
    if (cfg.bench.enabled) {
        run_stage("bench", [&] {
            const auto bnet = skynet::generate_network(cfg.bench.network).network;
            const auto bwx = weather::synth_weather(bnet, cfg.weather.horizon_s, cfg.weather.interval_s, cfg.bench.seed);
            const auto set = make_instance_set(bnet, bwx, cfg.drone, cfg.bench.repetitions, cfg.bench.seed);
            nlohmann::json inference = nlohmann::json::array();
            nlohmann::json scaling = nlohmann::json::array();
            int max_n = *std::max_element(cfg.bench.n_values.begin(), cfg.bench.n_values.end());
            for (const auto& mc : cfg.models) {
                if (mc.kind != models::ModelKind::ffnn && mc.kind != models::ModelKind::transformer) continue;
                // Fresh weights sized to the bench network; latency does not
                // depend on the weight values.
                auto m = models::make_model(mc, bnet.node_count(), cfg.bench.seed);
                const auto bytes = models::serialize_model(*m).size();
                apply_inference_mode(*m, cfg.inference);
                auto rep = bench_inference(*m, bytes, set, cfg.bench.repetitions, cfg.bench.warmup);
                inference.push_back(to_json(rep));
                log_line("bench", rep.model + ": " + std::to_string(rep.decision.mean_ns / 1e3) + " us/decision, A* " +
                                      std::to_string(rep.astar.mean_ns / 1e3) + " us/path, speedup " +
                                      std::to_string(rep.speedup_decision));
                res.bench.push_back(std::move(rep));

                auto subject = make_scaling_subject(mc, cfg.inference, max_n, cfg.bench.seed);
                auto table = bench_scaling(*subject, cfg.bench.n_values, cfg.bench.w_values, cfg.bench.hold_n,
                                           cfg.bench.hold_w, cfg.bench.repetitions, cfg.bench.warmup);
                scaling.push_back(to_json(table));
                res.scaling.push_back(std::move(table));
            }
            auto stub = make_stub_subject();
            auto table = bench_scaling(*stub, cfg.bench.n_values, cfg.bench.w_values, cfg.bench.hold_n, cfg.bench.hold_w,
                                       cfg.bench.repetitions, cfg.bench.warmup);
            scaling.push_back(to_json(table));
            res.scaling.push_back(std::move(table));
            write_json(dir / "bench_inference.json",
                       {{"network", skynet::to_json(cfg.bench.network)}, {"reports", inference}});
            write_json(dir / "bench_scaling.json", {{"tables", scaling}});
            return 0;
        });
    }

    run_stage("manifest", [&] {
        write_json(dir / "timing.json", timing);
        res.manifest = build_manifest(dir, cfg);
        write_json(dir / "manifest.json", to_json(res.manifest));
        return 0;
    });
    return res;
}

}  // namespace skyroute::harness
