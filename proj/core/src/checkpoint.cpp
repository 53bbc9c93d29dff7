#include "attnshort/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace attnshort {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'S', 'H'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t get_u32(std::istream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!f) throw TruncatedFileError("checkpoint: truncated file");
    return v;
}

std::string get_bytes(std::istream& f, size_t n) {
    std::string s(n, '\0');
    f.read(s.data(), static_cast<std::streamsize>(n));
    if (!f) throw TruncatedFileError("checkpoint: truncated file");
    return s;
}

nlohmann::json config_json(const Transformer<float>& model) {
    const EncoderConfig& c = model.config();
    nlohmann::json j;
    j["kind"] = model.kind() == ModelKind::kEncoder ? "encoder" : "causal_lm";
    j["num_layers"] = c.num_layers;
    j["num_heads"] = c.num_heads;
    j["model_dim"] = c.model_dim;
    j["ff_dim"] = c.ff_dim;
    j["vocab_size"] = c.vocab_size;
    j["max_len"] = c.max_len;
    j["num_classes"] = c.num_classes;
    j["dropout"] = c.dropout;
    j["seed"] = c.seed;
    return j;
}

}  // namespace

void save_checkpoint(const Transformer<float>& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open " + path + " for writing");

    f.write(kMagic, 4);
    put_u32(f, kVersion);
    const std::string cfg = config_json(model).dump();
    put_u32(f, static_cast<uint32_t>(cfg.size()));
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    const auto& params = model.named_params();
    put_u32(f, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(f, static_cast<uint32_t>(p.name.size()));
        f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(f, static_cast<uint32_t>(p.value.rows));
        put_u32(f, static_cast<uint32_t>(p.value.cols));
        f.write(reinterpret_cast<const char*>(p.value.a.data()),
                static_cast<std::streamsize>(p.value.count() * sizeof(float)));
    }
    f.flush();
    if (!f) throw CheckpointError("checkpoint: write failed for " + path);
}

Transformer<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("checkpoint: cannot open " + path);

    char magic[4] = {};
    f.read(magic, 4);
    if (!f) throw TruncatedFileError("checkpoint: truncated file");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("checkpoint: not a checkpoint file");

    const uint32_t version = get_u32(f);
    if (version != kVersion)
        throw VersionMismatchError("checkpoint: version mismatch (file has " +
                                   std::to_string(version) + ", expected " +
                                   std::to_string(kVersion) + ")");

    const uint32_t cfg_len = get_u32(f);
    const std::string cfg_text = get_bytes(f, cfg_len);
    const nlohmann::json j = nlohmann::json::parse(cfg_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw CheckpointError("checkpoint: bad embedded config");

    EncoderConfig cfg;
    ModelKind kind;
    try {
        const std::string kind_s = j.at("kind").get<std::string>();
        if (kind_s == "encoder")
            kind = ModelKind::kEncoder;
        else if (kind_s == "causal_lm")
            kind = ModelKind::kCausalLm;
        else
            throw CheckpointError("checkpoint: unknown model kind " + kind_s);
        cfg.num_layers = j.at("num_layers").get<int>();
        cfg.num_heads = j.at("num_heads").get<int>();
        cfg.model_dim = j.at("model_dim").get<int>();
        cfg.ff_dim = j.at("ff_dim").get<int>();
        cfg.vocab_size = j.at("vocab_size").get<int>();
        cfg.max_len = j.at("max_len").get<int>();
        cfg.num_classes = j.at("num_classes").get<int>();
        cfg.dropout = j.at("dropout").get<double>();
        cfg.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception&) {
        throw CheckpointError("checkpoint: bad embedded config");
    }

    Transformer<float> model(cfg, kind);
    auto& params = model.named_params();
    const uint32_t count = get_u32(f);
    if (count != params.size())
        throw ShapeMismatchError("checkpoint: shape mismatch (tensor count " +
                                 std::to_string(count) + ", expected " +
                                 std::to_string(params.size()) + ")");
    for (auto& p : params) {
        const uint32_t name_len = get_u32(f);
        const std::string name = get_bytes(f, name_len);
        if (name != p.name)
            throw ShapeMismatchError("checkpoint: shape mismatch (tensor " + name + ", expected " +
                                     p.name + ")");
        const uint32_t rows = get_u32(f);
        const uint32_t cols = get_u32(f);
        if (rows != static_cast<uint32_t>(p.value.rows) ||
            cols != static_cast<uint32_t>(p.value.cols))
            throw ShapeMismatchError("checkpoint: shape mismatch for " + name + " (" +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     ", expected " + std::to_string(p.value.rows) + "x" +
                                     std::to_string(p.value.cols) + ")");
        f.read(reinterpret_cast<char*>(p.value.a.data()),
               static_cast<std::streamsize>(p.value.count() * sizeof(float)));
        if (!f) throw TruncatedFileError("checkpoint: truncated file");
    }
    return model;
}

}  // namespace attnshort
