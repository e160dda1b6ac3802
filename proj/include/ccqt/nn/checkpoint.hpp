#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccqt/nn/model.hpp"

namespace ccqt::nn {

// Container layout: 8-byte magic `CCQT0001`, u32 little-endian manifest
// length, UTF-8 manifest (`key = value` lines: model and feature config plus
// one `tensor.<name> = <shape> @ <byte offset>` row per tensor), then each
// tensor's real plane and imaginary plane as little-endian binary32.
inline constexpr char kCheckpointMagic[] = "CCQT0001";

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
// Throws MalformedFileError on a bad magic or manifest/payload mismatch and
// UnsupportedFormatError on a version mismatch.
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ccqt::nn
