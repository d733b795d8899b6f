#pragma once

#include <filesystem>

#include "vhd/gradcheck.hpp"

namespace vhd {

// Binary checkpoint: magic "CHKP", version u32, tensor count u32, then per
// tensor (name length u16, UTF-8 name, rank u8, dims u32 each, row-major
// float64 payload). Everything little-endian.
void save_checkpoint(const ParamMap& params, const std::filesystem::path& path);
ParamMap load_checkpoint(const std::filesystem::path& path);

}  // namespace vhd
