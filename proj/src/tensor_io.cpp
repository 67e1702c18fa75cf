#include "s2kd/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace s2kd {

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t read_u32(const std::string& bytes, std::size_t pos) {
  const auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i]));
  };
  return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

void require_bytes(const std::string& bytes, std::size_t pos, std::size_t n,
                   const char* what, std::size_t base) {
  if (bytes.size() - pos < n)
    throw FormatError(std::string("truncated container: ") + what, base + bytes.size());
}

}  // namespace

std::string tensor_to_bytes(const Tensor& t) {
  std::string out;
  out.reserve(7 + 4 * t.rank() + t.byte_size());
  for (unsigned char m : kTensorMagic) out.push_back(static_cast<char>(m));
  out.push_back(static_cast<char>(kTensorFormatVersion));
  out.push_back(static_cast<char>(t.dtype()));
  if (t.rank() > 255) throw ContractError("tensor_to_bytes: rank exceeds format limit");
  out.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw ContractError("tensor_to_bytes: dimension exceeds 32 bits");
    append_u32(out, static_cast<std::uint32_t>(d));
  }
  // Payload bytes are already little-endian on every supported target.
  out.append(reinterpret_cast<const char*>(t.raw()), t.byte_size());
  return out;
}

Tensor tensor_from_bytes(const std::string& bytes, std::size_t& pos, std::size_t base_offset) {
  const std::size_t base = base_offset;
  require_bytes(bytes, pos, 4, "magic", base);
  for (std::size_t i = 0; i < 4; ++i)
    if (static_cast<unsigned char>(bytes[pos + i]) != kTensorMagic[i])
      throw FormatError("bad magic, not a tensor container", base + pos);
  if (bytes.size() - pos < 7)
    throw FormatError("truncated container: header", base + bytes.size());
  const auto version = static_cast<unsigned char>(bytes[pos + 4]);
  if (version != kTensorFormatVersion)
    throw FormatError("unsupported container version " + std::to_string(version),
                      base + pos + 4);
  const auto dtype_byte = static_cast<unsigned char>(bytes[pos + 5]);
  if (dtype_byte != 0x01 && dtype_byte != 0x02)
    throw FormatError("unknown dtype byte " + std::to_string(dtype_byte), base + pos + 5);
  const Dtype dtype = static_cast<Dtype>(dtype_byte);
  const std::size_t rank = static_cast<unsigned char>(bytes[pos + 6]);

  std::size_t cur = pos + 7;
  require_bytes(bytes, cur, 4 * rank, "dims", base);
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = read_u32(bytes, cur);
    count *= shape[i];
    cur += 4;
  }
  const std::size_t payload = count * dtype_size(dtype);
  if (bytes.size() - cur < payload) {
    const std::size_t have = (bytes.size() - cur) / dtype_size(dtype);
    throw FormatError("payload holds " + std::to_string(have) + " values, expected " +
                          std::to_string(count) + " for shape " + shape_str(shape),
                      base + cur);
  }
  Tensor out = Tensor::zeros(shape, dtype);
  std::memcpy(out.raw(), bytes.data() + cur, payload);
  pos = cur + payload;
  return out;
}

void save_tensor(const std::string& path, const Tensor& t) {
  write_file_bytes(path, tensor_to_bytes(t));
}

Tensor load_tensor(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  std::size_t pos = 0;
  Tensor t = tensor_from_bytes(bytes, pos);
  if (pos != bytes.size())
    throw FormatError("trailing bytes after tensor payload", pos);
  return t;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open for reading: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw InputError("read failed: " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw InputError("write failed: " + path);
}

}  // namespace s2kd
