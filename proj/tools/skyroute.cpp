// Command-line entry point: one subcommand per pipeline stage, plus
// `pipeline` for the whole run. Outputs are JSON on stdout unless --out says
// otherwise; the exit code is non-zero when any stage contract fails.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "skyroute/harness/pipeline.hpp"
#include "skyroute/models/checkpoint.hpp"
#include "skyroute/models/rollout.hpp"

using namespace skyroute;
using namespace skyroute::harness;
namespace fs = std::filesystem;

namespace {

RunConfig base_config(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

struct Inputs {
    std::string network, weather, dataset;
};

void add_inputs(CLI::App* cmd, Inputs& in, bool dataset) {
    cmd->add_option("--network", in.network, "network JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--weather", in.weather, "weather JSONL")->required();
    if (dataset) cmd->add_option("--dataset", in.dataset, "route records JSONL")->required()->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weather-aware drone routing workbench"};
    app.require_subcommand(1);
    std::string config;

    // gen-net
    auto* gen_net = app.add_subcommand("gen-net", "generate a skyway network");
    std::string net_out = "network.json";
    std::optional<int> nodes, extra, max_degree;
    std::optional<std::uint64_t> net_seed;
    gen_net->add_option("--config", config, "run config JSON (network section)");
    gen_net->add_option("--nodes", nodes);
    gen_net->add_option("--extra-edges", extra);
    gen_net->add_option("--max-degree", max_degree);
    gen_net->add_option("--seed", net_seed);
    gen_net->add_option("--out", net_out);

    // gen-weather
    auto* gen_wx = app.add_subcommand("gen-weather", "synthesize a weather series for a network");
    std::string wx_net, wx_out = "weather.jsonl";
    std::optional<double> horizon_h, interval_min;
    std::optional<std::uint64_t> wx_seed;
    gen_wx->add_option("--config", config, "run config JSON (weather section)");
    gen_wx->add_option("--network", wx_net)->required()->check(CLI::ExistingFile);
    gen_wx->add_option("--horizon-h", horizon_h);
    gen_wx->add_option("--interval-min", interval_min);
    gen_wx->add_option("--seed", wx_seed);
    gen_wx->add_option("--out", wx_out);

    // plan
    auto* plan = app.add_subcommand("plan", "plan one route with A* (or Dijkstra)");
    Inputs plan_in;
    int from = 0, to = 0;
    double t = 0.0, payload = 1.0;
    std::string algo = "astar";
    plan->add_option("--config", config, "run config JSON (drone section)");
    add_inputs(plan, plan_in, false);
    plan->add_option("--from", from)->required();
    plan->add_option("--to", to)->required();
    plan->add_option("--t", t, "departure time, s");
    plan->add_option("--payload", payload, "kg");
    plan->add_option("--algo", algo)->check(CLI::IsMember({"astar", "dijkstra"}));

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the fleet simulation and write the dataset");
    Inputs sim_in;
    std::string sim_out = "dataset.jsonl";
    std::optional<int> n_requests, drones;
    sim->add_option("--config", config, "run config JSON (drone, requests, fleet sections)");
    add_inputs(sim, sim_in, false);
    sim->add_option("--requests", n_requests);
    sim->add_option("--drones", drones);
    sim->add_option("--out", sim_out);

    // train
    auto* train = app.add_subcommand("train", "train one model on a dataset");
    Inputs train_in;
    std::string kind = "transformer", model_out = "model.skym";
    std::optional<int> epochs;
    train->add_option("--config", config, "run config JSON (train section, model of the same kind)");
    add_inputs(train, train_in, true);
    train->add_option("--model", kind)->check(CLI::IsMember({"greedy", "knn", "ffnn", "transformer"}));
    train->add_option("--epochs", epochs);
    train->add_option("--out", model_out);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
    Inputs eval_in;
    std::string model_path;
    int episodes = 100;
    eval->add_option("--config", config, "run config JSON (split, drone, inference)");
    add_inputs(eval, eval_in, true);
    eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--episodes", episodes, "rollout episodes");

    // bench
    auto* bench = app.add_subcommand("bench", "latency and scaling benchmarks");
    bench->add_option("--config", config, "run config JSON (bench section, models)");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "gen-net -> gen-weather -> simulate -> train -> eval -> bench");
    std::string pipe_out, verify;
    pipe->add_option("--config", config, "run config JSON");
    pipe->add_option("--out", pipe_out, "output directory (overrides paths.out_dir)");
    pipe->add_option("--verify-against", verify, "manifest of an earlier run; fail unless data hashes match")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = base_config(config);
        auto load_inputs = [](const Inputs& in) {
            auto net = skynet::load_network(in.network);
            auto wx = weather::load_weather(in.weather);
            return std::pair{std::move(net), std::move(wx)};
        };

        if (*gen_net) {
            if (nodes) cfg.network.node_count = *nodes;
            if (extra) cfg.network.extra_edges = *extra;
            if (max_degree) cfg.network.max_degree = *max_degree;
            if (net_seed) cfg.network.seed = *net_seed;
            cfg.network.validate();
            const auto g = skynet::generate_network(cfg.network);
            skynet::save_network(g.network, net_out);
            print({{"nodes", g.network.node_count()},
                   {"edges", g.network.edge_count()},
                   {"mst_max_degree", g.mst.max_degree_used},
                   {"extra_edges_added", g.extra_added},
                   {"warnings", g.mst.warnings},
                   {"out", net_out}});
        } else if (*gen_wx) {
            if (horizon_h) cfg.weather.horizon_s = *horizon_h * 3600.0;
            if (interval_min) cfg.weather.interval_s = *interval_min * 60.0;
            if (wx_seed) cfg.weather.seed = *wx_seed;
            const auto net = skynet::load_network(wx_net);
            const auto wx = weather::synth_weather(net, cfg.weather.horizon_s, cfg.weather.interval_s, cfg.weather.seed);
            weather::write_weather(wx, wx_out);
            print({{"nodes", wx.node_count()}, {"steps", wx.steps()}, {"interval_s", wx.interval_s()}, {"out", wx_out}});
        } else if (*plan) {
            const auto [net, wx] = load_inputs(plan_in);
            if (!net.contains(from) || !net.contains(to)) throw std::invalid_argument("unknown node id");
            planner::Route route;
            if (algo == "astar") {
                route = planner::plan_route(net, wx, cfg.drone, payload, t, from, to);
            } else {
                const planner::SnapshotCost cost(net, wx, cfg.drone, payload, t);
                route = planner::dijkstra(net, std::cref(cost), from, to);
            }
            print(planner::to_json(route));
        } else if (*sim) {
            if (n_requests) cfg.requests.count = *n_requests;
            if (drones) cfg.fleet.drone_count = *drones;
            const auto [net, wx] = load_inputs(sim_in);
            const auto reqs = fleet::generate_requests(net, cfg.requests.count, wx.horizon_s(), cfg.requests.payload,
                                                       cfg.drone.max_payload, cfg.requests.seed);
            const auto res = fleet::run_simulation(net, wx, cfg.drone, fleet::make_fleet(net, cfg.drone, cfg.fleet),
                                                   reqs, cfg.fleet);
            fleet::write_dataset(res.records, sim_out);
            const auto violations = check_simulation(res, net, wx, cfg.drone);
            auto out = fleet::to_json(fleet::summarize(res, reqs.size()), cfg.fleet);
            out["invariant_violations"] = violations;
            out["out"] = sim_out;
            print(out);
            if (!violations.empty()) return 1;
        } else if (*train) {
            if (epochs) cfg.train.epochs = *epochs;
            const auto [net, wx] = load_inputs(train_in);
            const auto k = models::model_kind_from_string(kind);
            models::ModelConfig mc;
            mc.kind = k;
            for (const auto& m : cfg.models) {
                if (m.kind == k) mc = m;
            }
            const models::NetworkContext ctx(net);
            const auto split = models::split_records(fleet::read_dataset(fs::path(train_in.dataset)), cfg.train.train_frac,
                                                     cfg.train.val_frac, cfg.train.seed);
            const auto tr = models::encode_dataset(split.train, ctx, wx, cfg.drone);
            const auto va = models::encode_dataset(split.val, ctx, wx, cfg.drone);
            const auto res = models::train(mc, cfg.train, net.node_count(), tr, va);
            models::save_model(*res.model, model_out);
            nlohmann::json curves = nlohmann::json::array();
            for (const auto& c : res.curves) {
                curves.push_back({{"epoch", c.epoch},
                                  {"train_loss", c.train_loss},
                                  {"val_loss", c.val_loss},
                                  {"val_accuracy", c.val_accuracy}});
            }
            print({{"model", kind}, {"steps", res.steps}, {"seconds", res.seconds}, {"curves", curves}, {"out", model_out}});
        } else if (*eval) {
            const auto [net, wx] = load_inputs(eval_in);
            auto model = models::load_model(model_path);
            if (model->node_count() != net.node_count()) throw std::invalid_argument("model and network sizes differ");
            if (auto* tm = dynamic_cast<models::TransformerModel*>(model.get())) {
                if (cfg.inference == InferenceMode::f32) tm->freeze(models::Precision::f32);
                if (cfg.inference == InferenceMode::f64) tm->freeze(models::Precision::f64);
            }
            const models::NetworkContext ctx(net);
            const auto split = models::split_records(fleet::read_dataset(fs::path(eval_in.dataset)), cfg.train.train_frac,
                                                     cfg.train.val_frac, cfg.train.seed);
            const auto test = models::encode_dataset(split.test, ctx, wx, cfg.drone);
            nlohmann::json out = {{"eval", models::to_json(models::evaluate(*model, test, cfg.eval.latency_samples))}};
            if (episodes > 0) {
                const auto set = make_instance_set(net, wx, cfg.drone, episodes,
                                                   derive_seed(cfg.eval.episode_seed, stream::kEpisodes));
                out["rollouts"] = to_json(evaluate_rollouts(*model, set));
            }
            print(out);
        } else if (*bench) {
            cfg.bench.validate();
            const auto bnet = skynet::generate_network(cfg.bench.network).network;
            const auto bwx = weather::synth_weather(bnet, cfg.weather.horizon_s, cfg.weather.interval_s, cfg.bench.seed);
            const auto set = make_instance_set(bnet, bwx, cfg.drone, cfg.bench.repetitions, cfg.bench.seed);
            const int max_n = *std::max_element(cfg.bench.n_values.begin(), cfg.bench.n_values.end());
            nlohmann::json reports = nlohmann::json::array(), tables = nlohmann::json::array();
            for (const auto& mc : cfg.models) {
                if (mc.kind != models::ModelKind::ffnn && mc.kind != models::ModelKind::transformer) continue;
                auto m = models::make_model(mc, bnet.node_count(), cfg.bench.seed);
                const auto bytes = models::serialize_model(*m).size();
                if (auto* tm = dynamic_cast<models::TransformerModel*>(m.get())) {
                    if (cfg.inference == InferenceMode::f32) tm->freeze(models::Precision::f32);
                    if (cfg.inference == InferenceMode::f64) tm->freeze(models::Precision::f64);
                }
                reports.push_back(to_json(bench_inference(*m, bytes, set, cfg.bench.repetitions, cfg.bench.warmup)));
                auto subject = make_scaling_subject(mc, cfg.inference, max_n, cfg.bench.seed);
                tables.push_back(to_json(bench_scaling(*subject, cfg.bench.n_values, cfg.bench.w_values, cfg.bench.hold_n,
                                                       cfg.bench.hold_w, cfg.bench.repetitions, cfg.bench.warmup)));
            }
            print({{"inference", reports}, {"scaling", tables}});
        } else if (*pipe) {
            if (!pipe_out.empty()) cfg.paths.out_dir = pipe_out;
            const auto res = run_pipeline(cfg);
            nlohmann::json summary = {{"out_dir", cfg.paths.out_dir.string()}, {"models", nlohmann::json::array()}};
            for (const auto& m : res.models) {
                summary["models"].push_back({{"name", m.name},
                                             {"accuracy", m.eval.accuracy},
                                             {"rollout_success", m.rollouts.success_rate},
                                             {"mean_cost_ratio", m.rollouts.mean_cost_ratio}});
            }
            if (!verify.empty()) {
                const auto diffs = compare_manifests(load_manifest(verify), res.manifest);
                summary["replay_differences"] = diffs;
                print(summary);
                return diffs.empty() ? 0 : 1;
            }
            print(summary);
        }
    } catch (const StageError& e) {
        std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
