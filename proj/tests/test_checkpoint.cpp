#include <doctest.h>

#include <filesystem>

#include "scop/checkpoint.hpp"
#include "scop/context.hpp"
#include "scop/io.hpp"
#include "scop/kg.hpp"

using namespace scop;
namespace fs = std::filesystem;

namespace {

ScopModel<float> make_model(const KnowledgeGraph& kg, std::size_t d, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.d = d;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.caps = ContextCaps::with_cap(4);
    ScopModel<float> m(cfg, kg.entity_count(), kg.relation_count());
    Rng rng(seed);
    m.initialize(rng, 0.1);
    return m;
}

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "scop_test_ckpt";
    fs::create_directories(dir);
    return dir / name;
}

CheckpointErrorKind decode_error(const std::string& bytes) {
    try {
        decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("decode unexpectedly succeeded");
    return CheckpointErrorKind::Io;
}

}  // namespace

TEST_CASE("save and load reproduce parameters and forward outputs bit-exactly") {
    auto kg = generate_toy_graph({}, 3);
    auto m = make_model(kg, 8, 1);
    auto path = temp_file("roundtrip.ckpt");
    save_model(path, m, {{"head", "pretrain"}});
    auto ckpt = read_checkpoint(path);
    CHECK(ckpt.get("model") == "scop");
    CHECK(ckpt.get("head") == "pretrain");
    CHECK(ckpt.get("parameters") == std::to_string(m.parameters().size()));
    auto back = model_from_checkpoint(ckpt);
    CHECK(back.parameters().checksum() == m.parameters().checksum());
    CHECK(back.config().caps.total_length == 16);

    Rng rng(2);
    for (std::size_t i = 0; i < 5; ++i) {
        auto seq = assemble_sequence(kg, kg.triple(i), m.config().caps, true, rng, Mode::Eval);
        auto a = m.score(seq, Head::Pretrain, nullptr), b = back.score(seq, Head::Pretrain, nullptr);
        CHECK(a[0] == b[0]);
        CHECK(a[1] == b[1]);
    }
    // encoding is a pure function of config and values
    CHECK(encode_checkpoint(scop_config_block(m), m.parameters()) ==
          encode_checkpoint(scop_config_block(back), back.parameters()));
}

TEST_CASE("layout starts with magic, version and config length") {
    auto kg = generate_toy_graph({}, 3);
    auto bytes = encode_checkpoint(scop_config_block(make_model(kg, 8, 1)), make_model(kg, 8, 1).parameters());
    CHECK(bytes.substr(0, 4) == "SCOP");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6 + i])) << (8 * i);
    auto cfg = parse_key_values(bytes.substr(10, len));
    CHECK(cfg.at("d") == "8");
    // first parameter follows in lexicographic order
    auto name_len = static_cast<unsigned char>(bytes[10 + len]);
    CHECK(bytes.substr(14 + len, name_len) == "cmod.bias");
}

TEST_CASE("faults map to distinct errors") {
    auto kg = generate_toy_graph({}, 3);
    auto m = make_model(kg, 8, 1);
    auto bytes = encode_checkpoint(scop_config_block(m), m.parameters());

    CHECK(decode_error(bytes.substr(0, bytes.size() - 1)) == CheckpointErrorKind::Truncated);
    CHECK(decode_error(bytes.substr(0, 20)) == CheckpointErrorKind::Truncated);
    CHECK(decode_error(bytes.substr(0, 3)) == CheckpointErrorKind::Truncated);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(decode_error(bad_magic) == CheckpointErrorKind::BadMagic);

    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK(decode_error(bad_version) == CheckpointErrorKind::VersionMismatch);

    CHECK(decode_error(bytes + "x") == CheckpointErrorKind::Malformed);

    try {
        read_checkpoint(temp_file("does_not_exist.ckpt"));
        FAIL("expected an I/O error");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointErrorKind::Io);
    }
}

TEST_CASE("a d=8 checkpoint against a d=16 model is a shape mismatch naming the parameter") {
    auto kg = generate_toy_graph({}, 3);
    auto small = make_model(kg, 8, 1);
    auto big = make_model(kg, 16, 1);
    auto ckpt = decode_checkpoint(encode_checkpoint(scop_config_block(small), small.parameters()));
    try {
        load_parameters(ckpt, big.parameters());
        FAIL("expected a shape mismatch");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointErrorKind::ShapeMismatch);
        CHECK(std::string(e.what()).find("cmod.bias") != std::string::npos);
    }
    // a failed load leaves the target untouched
    CHECK(big.parameters().checksum() == make_model(kg, 16, 1).parameters().checksum());
}

TEST_CASE("missing parameters are reported") {
    ParameterSet<float> a, b;
    a.add("x", Tensor::zeros({2}));
    b.add("y", Tensor::zeros({2}));
    auto ckpt = decode_checkpoint(encode_checkpoint<float>({{"model", "test"}}, a));
    try {
        load_parameters(ckpt, b);
        FAIL("expected a missing parameter");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointErrorKind::MissingParameter);
    }
}

TEST_CASE("atomic writes leave no temporary file behind") {
    auto path = temp_file("atomic.txt");
    write_file_atomic(path, "hello");
    CHECK(read_file(path) == "hello");
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}
