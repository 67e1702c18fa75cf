#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2kd/models.hpp"
#include "s2kd/tensor.hpp"

// Checkpoint container. Layout: magic "S2KC", version byte 0x01, 32-bit
// little-endian entry count, then per entry a 16-bit little-endian name
// length, the UTF-8 name, and the tensor in its binary container encoding;
// the file ends with a 32-bit little-endian CRC-32 of all preceding bytes.
// Entry names are unique and round trips are bit-exact. Model checkpoints
// store a leading "__model__" entry describing the architecture, so a file
// is self-contained: loading needs no separate configuration.

namespace s2kd {

inline constexpr unsigned char kCheckpointMagic[4] = {0x53, 0x32, 0x4B, 0x43};  // "S2KC"
inline constexpr unsigned char kCheckpointFormatVersion = 0x01;

// CRC-32 (reflected, polynomial 0xEDB88320), the common zlib/PNG variant.
std::uint32_t crc32(const std::string& bytes);

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

// ContractError on duplicate names or names longer than 16 bits allow.
std::string checkpoint_to_bytes(const std::vector<CheckpointEntry>& entries);
// FormatError (with byte offset) on bad magic/version, truncation, duplicate
// names, trailing bytes, or checksum mismatch.
std::vector<CheckpointEntry> checkpoint_from_bytes(const std::string& bytes);

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Which model kind a checkpoint's "__model__" entry describes.
// InputError if the entry is missing or malformed.
enum class CheckpointKind { teacher, student };
CheckpointKind checkpoint_kind(const std::vector<CheckpointEntry>& entries);

// Model checkpoints: the "__model__" entry plus every named parameter in its
// registry order. Loaders rebuild the architecture from the descriptor and
// then overwrite each parameter, verifying names and shapes one to one;
// InputError if the file describes the other model kind.
void save_teacher(const std::string& path, TeacherModel& model);
TeacherModel load_teacher(const std::string& path);

void save_student(const std::string& path, StudentModel& model);
StudentModel load_student(const std::string& path);

}  // namespace s2kd
