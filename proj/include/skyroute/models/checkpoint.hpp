#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "skyroute/models/model.hpp"

namespace skyroute::models {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Layout: "SKYM", u32 version, u64 header length, JSON header
// {config, node_count, tensors: [{name, shape}]}, then every tensor's values
// as little-endian float64 in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_model(const StoredModel& model);
std::unique_ptr<StoredModel> deserialize_model(const std::string& bytes);

void save_model(const StoredModel& model, const std::filesystem::path& path);
std::unique_ptr<StoredModel> load_model(const std::filesystem::path& path);

}  // namespace skyroute::models
