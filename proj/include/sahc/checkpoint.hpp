#pragma once

// Parameter checkpoints: a little-endian uint64 header length, a JSON header
// with the model configuration and tensor names/shapes/byte offsets, then
// the payload of little-endian 64-bit floats in row-major order.

#include "sahc/model.hpp"

#include <string>

namespace sahc {

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace sahc
