#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2kd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Element width of every tensor created while the mode is active.
// Training runs in f32; gradient checking forces f64.
enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

inline std::size_t dtype_size(Dtype dt) { return dt == Dtype::f32 ? 4 : 8; }
const char* dtype_name(Dtype dt);

Dtype default_dtype();
void set_default_dtype(Dtype dt);

class DtypeGuard {
 public:
  explicit DtypeGuard(Dtype dt) : saved_(default_dtype()) { set_default_dtype(dt); }
  ~DtypeGuard() { set_default_dtype(saved_); }
  DtypeGuard(const DtypeGuard&) = delete;
  DtypeGuard& operator=(const DtypeGuard&) = delete;

 private:
  Dtype saved_;
};

// Error taxonomy. The CLI maps ConfigError/UsageError to exit code 2,
// everything else to exit code 1.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-format violations carry the byte offset of the first bad byte.
struct FormatError : std::runtime_error {
  FormatError(const std::string& msg, std::size_t byte_offset);
  std::size_t offset;
};

}  // namespace s2kd
