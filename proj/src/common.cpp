#include "s2kd/common.hpp"

#include <sstream>

namespace s2kd {

namespace {
Dtype g_default_dtype = Dtype::f32;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

const char* dtype_name(Dtype dt) { return dt == Dtype::f32 ? "f32" : "f64"; }

Dtype default_dtype() { return g_default_dtype; }
void set_default_dtype(Dtype dt) { g_default_dtype = dt; }

FormatError::FormatError(const std::string& msg, std::size_t byte_offset)
    : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
      offset(byte_offset) {}

}  // namespace s2kd
