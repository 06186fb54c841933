// Checkpoint container: magic "CTVS", u32 format version, then a
// count-prefixed list of named tensor records (u32 name length, UTF-8 name,
// u32 rank, u32 extents, raw little-endian f32 data). Model weights, the
// architecture description, and optionally the optimizer state all travel as
// records, so save -> load -> save is byte-identical.
#pragma once

#include <optional>
#include <string>

#include "ctvos/adam.hpp"
#include "ctvos/model.hpp"

namespace ctvos {

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const AdamState<float>* opt = nullptr);

struct LoadedCheckpoint {
    ModelParams<float> params;
    std::optional<AdamState<float>> opt;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ctvos
