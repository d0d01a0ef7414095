#pragma once

#include "mg/model.hpp"

#include <string>

namespace mg {

// Checkpoint layout (all integers little-endian):
//   "MGCK" | u32 version | u32 flags (bit0 = trained) | u32 width_mult |
//   u32 entry count | entries | float32 payload
// entry: u32 name length | name bytes | u32 ndims | u32 dims... | u64 offset
// Offsets are float indices into the payload. Round-trip is bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_model(const InpaintModel& model, const std::string& path);
InpaintModel load_model(const std::string& path);

}  // namespace mg
