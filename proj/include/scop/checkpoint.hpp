#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "SCOP"                     4 bytes magic
//   version                    u16
//   config length, config      u32, UTF-8 `key = value` lines
//   per parameter, sorted by name:
//     name length, name        u32, UTF-8
//     rank                     u8
//     extents                  rank x u64
//     payload                  product(extents) x f32
//
// The config block carries `parameters = N` so a file cut at a parameter
// boundary is still detected as truncated.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scop/model.hpp"
#include "scop/optim.hpp"

namespace scop {

inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class CheckpointErrorKind { Io, BadMagic, VersionMismatch, Truncated, Malformed, ShapeMismatch, MissingParameter };

class CheckpointError : public std::runtime_error {
   public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

   private:
    CheckpointErrorKind kind_;
};

struct StoredArray {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::map<std::string, std::string> config;
    std::vector<StoredArray> arrays;

    const std::string& get(const std::string& key) const;
};

template <class T>
std::string encode_checkpoint(std::map<std::string, std::string> config, const ParameterSet<T>& params);
Checkpoint decode_checkpoint(const std::string& bytes);

template <class T>
void save_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string> config,
                     const ParameterSet<T>& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies stored arrays into `params`, which must have identical names and shapes.
template <class T>
void load_parameters(const Checkpoint& ckpt, ParameterSet<T>& params);

/// Config block for a SCoP model: model kind, architecture and vocabulary sizes.
std::map<std::string, std::string> scop_config_block(const ScopModel<float>& model);
void save_model(const std::filesystem::path& path, const ScopModel<float>& model,
                const std::map<std::string, std::string>& extra = {});
ScopModel<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace scop
