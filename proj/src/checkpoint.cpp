#include "sthsep/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sthsep/errors.hpp"

namespace sthsep {

using nlohmann::json;

void save_checkpoint(const Model& model, const std::string& path) {
    json params = json::array();
    for (const auto& [name, e] : model.params().entries()) {
        auto values = e.value.data();
        params.push_back({{"name", name},
                          {"shape", e.value.shape()},
                          {"data", std::vector<double>(values.begin(), values.end())}});
    }
    json j = {{"magic", checkpoint_magic}, {"config", model.config().to_json()}, {"params", params}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("checkpoint: cannot write " + path);
    out << j.dump() << '\n';
    if (!out) throw CheckpointError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find(std::string("\"") + checkpoint_magic + "\"") == std::string::npos)
        throw CheckpointError("checkpoint: " + path + " lacks the " + checkpoint_magic + " magic");
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CheckpointError("checkpoint: " + path + " is truncated or malformed (" + e.what() + ")");
    }
    if (!j.is_object() || j.value("magic", "") != checkpoint_magic)
        throw CheckpointError("checkpoint: " + path + " has a bad magic field");
    if (!j.contains("config") || !j.contains("params") || !j["params"].is_array())
        throw CheckpointError("checkpoint: " + path + " is missing config or params");

    Checkpoint ck;
    try {
        ck.config = ModelConfig::from_json(j["config"]);
        for (const auto& p : j["params"]) {
            Checkpoint::Param param;
            param.name = p.at("name").get<std::string>();
            param.shape = p.at("shape").get<Shape>();
            param.data = p.at("data").get<std::vector<double>>();
            std::size_t expect = 1;
            for (auto d : param.shape) expect *= d;
            if (expect != param.data.size())
                throw CheckpointError("checkpoint: parameter '" + param.name + "' holds " +
                                      std::to_string(param.data.size()) + " values for shape " +
                                      shape_str(param.shape));
            ck.params.push_back(std::move(param));
        }
    } catch (const json::exception& e) {
        throw CheckpointError("checkpoint: " + path + ": " + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError("checkpoint: " + path + ": config: " + e.what());
    }
    return ck;
}

void apply_checkpoint(const Checkpoint& ckpt, Model& model) {
    ParamStore& store = model.params();
    std::set<std::string> seen;
    for (const auto& p : ckpt.params) {
        if (!store.contains(p.name)) throw CheckpointError("checkpoint: unexpected parameter '" + p.name + "'");
        Tensor& dst = store.value(p.name);
        if (dst.shape() != p.shape)
            throw CheckpointError("checkpoint: parameter '" + p.name + "' has shape " + shape_str(p.shape) +
                                  ", model expects " + shape_str(dst.shape()));
        seen.insert(p.name);
    }
    for (const auto& [name, e] : store.entries())
        if (!seen.count(name)) throw CheckpointError("checkpoint: parameter '" + name + "' is missing");
    for (const auto& p : ckpt.params) {
        auto d = store.value(p.name).data();
        std::copy(p.data.begin(), p.data.end(), d.begin());
    }
    model.rebuild_graphs();
}

}  // namespace sthsep
