// Named-tensor checkpoint container, shared by every trainable module.
//
// Layout: magic "CLMC", u32 format version, u32 entry count, then per entry
// u32 name length + UTF-8 name, u32 rank, u64 dims, and the values as
// little-endian 8-byte floats. Writes go through a temp file and a rename so
// an interrupted run never leaves a half-written checkpoint behind.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zcap/tensor.hpp"

namespace zcap {

inline constexpr char kCheckpointMagic[4] = {'C', 'L', 'M', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries);

// Throws std::runtime_error on bad magic, unknown version, or truncation.
std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path);

// Write a whole file atomically (temp + rename); used for every artifact the
// CLI produces so reruns can be compared by hash.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);
void atomic_write_bytes(const std::filesystem::path& path, const void* data, size_t size);

}  // namespace zcap
