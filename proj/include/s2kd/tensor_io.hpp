#pragma once

#include <string>

#include "s2kd/tensor.hpp"

// Binary tensor container. Layout: magic "S2KD", version byte 0x01, dtype
// byte (0x01 = 32-bit float, 0x02 = 64-bit float), rank byte, rank 32-bit
// little-endian unsigned dims, then the row-major little-endian payload.
// Round trips are bit-exact; malformed input raises FormatError carrying the
// byte offset of the first bad byte.

namespace s2kd {

inline constexpr unsigned char kTensorMagic[4] = {0x53, 0x32, 0x4B, 0x44};  // "S2KD"
inline constexpr unsigned char kTensorFormatVersion = 0x01;

// In-memory encoding, reused by the checkpoint format.
std::string tensor_to_bytes(const Tensor& t);
// Decodes one container starting at `pos` within `bytes`; advances `pos` past
// it. `base_offset` shifts reported error offsets when the container is
// embedded in a larger file.
Tensor tensor_from_bytes(const std::string& bytes, std::size_t& pos,
                         std::size_t base_offset = 0);

void save_tensor(const std::string& path, const Tensor& t);
// Rejects trailing bytes: a container file holds exactly one tensor.
Tensor load_tensor(const std::string& path);

std::string read_file_bytes(const std::string& path);   // InputError if unreadable
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace s2kd
