#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ludor/mlp.hpp"

namespace ludor {

/// Named parameter sets plus the run seed and step they were taken at.
///
/// File layout (all text lines end in '\n'):
///   LUDOR-CKPT 1
///   seed <u64>
///   step <i64>
///   nets <k>
///   net <name> dims <d0> ... <dL> acts <a1> ... <aL> scale <%.17g> count <n>   (k lines)
///   data
/// followed by, for each net in order, <n> little-endian IEEE-754 binary64
/// values in MlpParams::flatten order.
struct Checkpoint {
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::vector<std::pair<std::string, MlpParams>> nets;

    const MlpParams& get(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace ludor
