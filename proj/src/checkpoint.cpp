#include "scop/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scop/io.hpp"

namespace scop {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
   public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    const unsigned char* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw CheckpointError(CheckpointErrorKind::Truncated, std::string("checkpoint truncated while reading ") + what);
        const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
        pos_ += n;
        return p;
    }

    std::uint64_t uint(std::size_t width, const char* what) {
        const auto* p = take(width, what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    std::string string(const char* what) {
        auto n = uint(4, what);
        const auto* p = take(n, what);
        return std::string(reinterpret_cast<const char*>(p), n);
    }

    bool done() const { return pos_ == bytes_.size(); }

   private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const std::string& Checkpoint::get(const std::string& key) const {
    auto it = config.find(key);
    if (it == config.end()) throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint config lacks key " + key);
    return it->second;
}

template <class T>
std::string encode_checkpoint(std::map<std::string, std::string> config, const ParameterSet<T>& params) {
    config["parameters"] = std::to_string(params.size());
    std::string out = "SCOP";
    put_u16(out, kCheckpointVersion);
    auto text = format_key_values(config);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& name : params.sorted_names()) {
        const auto& t = params.get(name);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.rank()));
        for (auto e : t.shape()) put_u64(out, e);
        for (auto v : t.values()) put_f32(out, static_cast<float>(v));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader in(bytes);
    const auto* magic = in.take(4, "magic");
    if (std::memcmp(magic, "SCOP", 4) != 0) throw CheckpointError(CheckpointErrorKind::BadMagic, "not a SCOP checkpoint");
    auto version = in.uint(2, "version");
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                              "checkpoint version " + std::to_string(version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
    Checkpoint ckpt;
    try {
        ckpt.config = parse_key_values(in.string("config"));
    } catch (const ParseError& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed, std::string("checkpoint config: ") + e.what());
    }
    std::size_t expected = 0;
    try {
        expected = std::stoul(ckpt.get("parameters"));
    } catch (const std::logic_error&) {
        throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint parameter count is not a number");
    }
    for (std::size_t k = 0; k < expected; ++k) {
        StoredArray a;
        a.name = in.string("parameter name");
        auto rank = in.uint(1, "rank");
        for (std::uint64_t i = 0; i < rank; ++i) a.shape.push_back(in.uint(8, "extent"));
        auto n = shape_size(a.shape);
        if (n > bytes.size()) throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint truncated in " + a.name);
        a.values.resize(n);
        for (auto& v : a.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4, "payload")));
        ckpt.arrays.push_back(std::move(a));
    }
    if (!in.done()) throw CheckpointError(CheckpointErrorKind::Malformed, "trailing bytes after last parameter");
    return ckpt;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string> config,
                     const ParameterSet<T>& params) {
    write_file_atomic(path, encode_checkpoint(std::move(config), params));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const std::runtime_error& e) {
        throw CheckpointError(CheckpointErrorKind::Io, e.what());
    }
    return decode_checkpoint(bytes);
}

template <class T>
void load_parameters(const Checkpoint& ckpt, ParameterSet<T>& params) {
    if (ckpt.arrays.size() != params.size())
        throw CheckpointError(CheckpointErrorKind::MissingParameter,
                              "checkpoint holds " + std::to_string(ckpt.arrays.size()) + " parameters, model has " +
                                  std::to_string(params.size()));
    for (const auto& a : ckpt.arrays) {
        if (!params.contains(a.name))
            throw CheckpointError(CheckpointErrorKind::MissingParameter, "model has no parameter named " + a.name);
        auto& t = params.get(a.name);
        if (t.shape() != a.shape)
            throw CheckpointError(CheckpointErrorKind::ShapeMismatch, "shape mismatch for parameter " + a.name + ": stored " +
                                                                          shape_string(a.shape) + ", expected " +
                                                                          shape_string(t.shape()));
    }
    for (const auto& a : ckpt.arrays) {
        auto dst = params.get(a.name).mutable_values();
        for (std::size_t i = 0; i < a.values.size(); ++i) dst[i] = static_cast<T>(a.values[i]);
    }
}

std::map<std::string, std::string> scop_config_block(const ScopModel<float>& model) {
    auto kv = model.config().to_key_values();
    kv["model"] = "scop";
    kv["entities"] = std::to_string(model.entity_count());
    kv["relations"] = std::to_string(model.relation_count());
    return kv;
}

void save_model(const std::filesystem::path& path, const ScopModel<float>& model,
                const std::map<std::string, std::string>& extra) {
    auto kv = scop_config_block(model);
    for (const auto& [k, v] : extra) kv[k] = v;
    save_checkpoint(path, std::move(kv), model.parameters());
}

ScopModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.get("model") != "scop")
        throw CheckpointError(CheckpointErrorKind::Malformed, "checkpoint holds a " + ckpt.get("model") + " model, not scop");
    ModelConfig config;
    std::size_t entities = 0, relations = 0;
    try {
        config = ModelConfig::from_key_values(ckpt.config);
        entities = std::stoul(ckpt.get("entities"));
        relations = std::stoul(ckpt.get("relations"));
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed, std::string("checkpoint config: ") + e.what());
    }
    ScopModel<float> model(config, entities, relations);
    load_parameters(ckpt, model.parameters());
    return model;
}

template std::string encode_checkpoint(std::map<std::string, std::string>, const ParameterSet<float>&);
template std::string encode_checkpoint(std::map<std::string, std::string>, const ParameterSet<double>&);
template void save_checkpoint(const std::filesystem::path&, std::map<std::string, std::string>, const ParameterSet<float>&);
template void save_checkpoint(const std::filesystem::path&, std::map<std::string, std::string>, const ParameterSet<double>&);
template void load_parameters(const Checkpoint&, ParameterSet<float>&);
template void load_parameters(const Checkpoint&, ParameterSet<double>&);

}  // namespace scop
