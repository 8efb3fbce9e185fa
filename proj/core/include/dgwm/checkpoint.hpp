#pragma once

#include <string>

#include "dgwm/model.hpp"

namespace dgwm {

// Flat binary checkpoint: a magic tag, the model config as key=value text,
// then every named parameter tensor with shape and raw 64-bit values.
// Load restores an identical bundle; round-trips are bit-exact.
void save_checkpoint(const std::string& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace dgwm
