#pragma once

#include <string>

#include "can/optim.hpp"

namespace can {

/// Model snapshot container: magic bytes `CANCKPT1`, a little-endian u64
/// manifest length, a JSON manifest (tensor directory plus caller-supplied
/// extras), then raw little-endian 64-bit float blobs. Every parameter's
/// value and optimizer moments are stored, so save/load round-trips are
/// bitwise exact and training can resume mid-run. No timestamps: the bytes
/// are a pure function of the contents.
void write_checkpoint(const std::string& path, const std::string& extras_json,
                      const ParameterStore& store);

struct CheckpointData {
    std::string extras_json;
    ParameterStore store;
};

CheckpointData read_checkpoint(const std::string& path);

}  // namespace can
