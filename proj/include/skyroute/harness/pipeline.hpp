#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "skyroute/harness/bench.hpp"
#include "skyroute/harness/config.hpp"

namespace skyroute::harness {

/// A pipeline failure, tagged with the stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

enum class ArtifactKind { data, timing, config };

struct Artifact {
    std::string path;  // relative to the run directory, '/' separated
    ArtifactKind kind = ArtifactKind::data;
    std::uintmax_t bytes = 0;
    std::string sha256;
};

struct Manifest {
    std::vector<Artifact> artifacts;
    /// Hash of the run config without its paths section.
    std::string config_sha256;

    /// path -> hash for every data artifact.
    std::map<std::string, std::string> data_hashes() const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);

/// Hashes every file under dir except manifest.json.
Manifest build_manifest(const std::filesystem::path& dir, const RunConfig& cfg);

/// Data artifacts that differ or exist on one side only; empty when equal.
std::vector<std::string> compare_manifests(const Manifest& a, const Manifest& b);

struct RolloutSummary {
    std::string model;
    int episodes = 0;
    int successes = 0;
    double success_rate = 0.0;
    double mean_cost_ratio = 0.0;  // successful episodes, duration vs A*
    double max_cost_ratio = 0.0;
    int optimal = 0;  // ratio within 1e-9 of 1
    std::map<std::string, int> failures;
};

nlohmann::json to_json(const RolloutSummary& s);

/// Rolls the model out on every query and compares duration with A* under the
/// same weather snapshot.
RolloutSummary evaluate_rollouts(const models::Model& model, const InstanceSet& episodes);

struct TrainedModel {
    std::string name;
    std::unique_ptr<models::StoredModel> model;
    std::vector<models::EpochStats> curves;
    double train_seconds = 0.0;
    std::size_t checkpoint_bytes = 0;
    models::EvalReport eval;
    RolloutSummary rollouts;
};

struct PipelineResult {
    RunConfig config;
    skynet::GeneratedNetwork network;
    weather::WeatherSeries weather;
    std::vector<fleet::Request> requests;
    fleet::SimulationResult simulation;
    models::Split split;
    std::vector<TrainedModel> models;
    std::vector<BenchReport> bench;
    std::vector<ScalingTable> scaling;
    Manifest manifest;

    const TrainedModel* find(const std::string& name) const;
};

/// Record invariants of a simulation: per-record checks, the battery log and a
/// byte-exact JSONL round trip. Returns the violations.
std::vector<std::string> check_simulation(const fleet::SimulationResult& sim, const skynet::Network& net,
                                          const weather::WeatherSeries& wx, const flight::DroneSpec& drone);

/// gen-net -> gen-weather -> simulate -> train -> eval -> bench, writing every
/// artifact and a manifest under cfg.paths.out_dir. Throws StageError.
PipelineResult run_pipeline(const RunConfig& cfg);

/// Stage log lines go here (default: stderr). Pass nullptr to silence.
void set_log_stream(std::ostream* out);

}  // namespace skyroute::harness
