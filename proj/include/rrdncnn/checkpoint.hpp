#pragma once

#include <string>

#include "rrdncnn/network.hpp"

namespace rrdncnn {

// Binary checkpoint: magic "RRDN", u32 format version, u32 architecture tag,
// u32 entry count; per entry a length-prefixed UTF-8 name, four u32 extents
// (out_ch, in_ch, kh, kw) and the raw little-endian float32 weights followed
// by the bias; trailing CRC-32 of all preceding bytes. Round-trips are
// bitwise lossless.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

// Load and verify the file matches `expect` (same architecture and shapes).
NetworkParams load_checkpoint(const std::string& path, const NetworkConfig& expect);

}  // namespace rrdncnn
