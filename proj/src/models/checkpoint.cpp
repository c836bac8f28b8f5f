#include "skyroute/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace skyroute::models {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'K', 'Y', 'M'};

std::vector<nn::NamedTensor> stored_tensors(const StoredModel& model) {
    if (const auto* knn = dynamic_cast<const KnnModel*>(&model)) return knn->memory();
    return model.parameters();
}

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string serialize_model(const StoredModel& model) {
    const auto tensors = stored_tensors(model);
    nlohmann::json header;
    header["config"] = to_json(model.config());
    header["node_count"] = model.node_count();
    header["tensors"] = nlohmann::json::array();
    for (const auto& t : tensors) header["tensors"].push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
    const std::string h = header.dump();

    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, h.size());
    out += h;
    for (const auto& t : tensors) {
        const auto d = t.tensor.data();
        out.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    }
    return out;
}

std::unique_ptr<StoredModel> deserialize_model(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0) throw CheckpointError("not a model checkpoint");
    std::size_t pos = 4;
    const auto version = get<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto hlen = get<std::uint64_t>(bytes, pos);
    if (pos + hlen > bytes.size()) throw CheckpointError("checkpoint truncated");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(pos, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
    }
    pos += hlen;

    const auto cfg = model_config_from_json(header.at("config"));
    const int node_count = header.at("node_count").get<int>();
    auto model = make_model(cfg, node_count, 0);

    std::vector<nn::NamedTensor> loaded;
    for (const auto& t : header.at("tensors")) {
        const auto shape = t.at("shape").get<nn::Shape>();
        const auto n = nn::shape_numel(shape);
        if (pos + n * sizeof(double) > bytes.size()) throw CheckpointError("checkpoint truncated");
        std::vector<double> data(n);
        std::memcpy(data.data(), bytes.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        loaded.push_back({t.at("name").get<std::string>(), nn::Tensor(shape, std::move(data))});
    }
    if (pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint tensors");

    if (auto* knn = dynamic_cast<KnnModel*>(model.get())) {
        knn->restore(loaded);
        return model;
    }
    auto params = model->parameters();
    if (params.size() != loaded.size()) throw CheckpointError("checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& dst = params[i];
        const auto& src = loaded[i];
        if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape()) {
            throw CheckpointError("checkpoint tensor " + src.name + " does not match " + dst.name);
        }
        std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.tensor.data().begin());
    }
    return model;
}

void save_model(const StoredModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path.string());
    const auto bytes = serialize_model(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed: " + path.string());
}

std::unique_ptr<StoredModel> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace skyroute::models
