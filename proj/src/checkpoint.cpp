#include "s2kd/checkpoint.hpp"

#include <array>
#include <cstring>
#include <set>

#include "s2kd/rng.hpp"
#include "s2kd/tensor_io.hpp"

namespace s2kd {

std::uint32_t crc32(const std::string& bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8)
    out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

std::uint32_t read_u16(const std::string& bytes, std::size_t pos) {
  return static_cast<unsigned char>(bytes[pos]) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 1])) << 8);
}

std::uint32_t read_u32(const std::string& bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(bytes[pos + std::size_t(i)]);
  return v;
}

}  // namespace

std::string checkpoint_to_bytes(const std::vector<CheckpointEntry>& entries) {
  std::set<std::string> seen;
  std::string out;
  out.append(reinterpret_cast<const char*>(kCheckpointMagic), 4);
  out.push_back(static_cast<char>(kCheckpointFormatVersion));
  append_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const CheckpointEntry& e : entries) {
    if (!seen.insert(e.name).second)
      throw ContractError("checkpoint: duplicate parameter name '" + e.name + "'");
    if (e.name.size() > 0xFFFF)
      throw ContractError("checkpoint: parameter name '" + e.name.substr(0, 32) +
                          "...' exceeds the 16-bit length field");
    append_u16(out, static_cast<std::uint16_t>(e.name.size()));
    out += e.name;
    out += tensor_to_bytes(e.tensor);
  }
  append_u32(out, crc32(out));
  return out;
}

std::vector<CheckpointEntry> checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 13) throw FormatError("checkpoint truncated", bytes.size());
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint magic mismatch", 0);
  if (static_cast<unsigned char>(bytes[4]) != kCheckpointFormatVersion)
    throw FormatError("unsupported checkpoint version", 4);

  // Validate the trailing checksum before trusting any entry bytes.
  const std::size_t body_size = bytes.size() - 4;
  const std::uint32_t stored = read_u32(bytes, body_size);
  const std::uint32_t actual = crc32(bytes.substr(0, body_size));
  if (stored != actual) throw FormatError("checkpoint checksum mismatch", body_size);

  std::size_t pos = 5;
  const std::uint32_t count = read_u32(bytes, pos);
  pos += 4;
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (pos + 2 > body_size) throw FormatError("checkpoint truncated", body_size);
    const std::size_t name_pos = pos;
    const std::size_t name_len = read_u16(bytes, pos);
    pos += 2;
    if (pos + name_len > body_size) throw FormatError("checkpoint truncated", body_size);
    std::string name = bytes.substr(pos, name_len);
    pos += name_len;
    if (!seen.insert(name).second)
      throw FormatError("duplicate parameter name '" + name + "'", name_pos);
    Tensor t = tensor_from_bytes(bytes, pos);
    entries.push_back({std::move(name), std::move(t)});
  }
  if (pos != body_size)
    throw FormatError("trailing bytes after the last checkpoint entry", pos);
  return entries;
}

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  write_file_bytes(path, checkpoint_to_bytes(entries));
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  return checkpoint_from_bytes(read_file_bytes(path));
}

namespace {

constexpr char kMetaName[] = "__model__";
constexpr std::size_t kMetaValues = 15;

enum class ModelKind { teacher = 0, student = 1 };

Tensor make_meta(ModelKind kind, const ModelConfig& c, bool frozen) {
  const double variant = c.student_variant == "mixer" ? 1.0 : 0.0;
  return Tensor::from_values(
      {kMetaValues},
      {static_cast<double>(kind == ModelKind::teacher ? 0 : 1), double(c.t_in),
       double(c.t_out), double(c.height), double(c.width), double(c.channels),
       double(c.patch), double(c.d), double(c.d_g), double(c.n_align), double(c.n_enc),
       double(c.heads), double(c.e_max), variant, frozen ? 1.0 : 0.0},
      Dtype::f64);
}

struct MetaInfo {
  ModelKind kind;
  ModelConfig cfg;
  bool frozen;
};

const Tensor& meta_tensor(const std::vector<CheckpointEntry>& entries) {
  if (entries.empty() || entries[0].name != kMetaName)
    throw InputError("checkpoint does not start with a model descriptor entry");
  const Tensor& meta = entries[0].tensor;
  if (meta.shape() != Shape{kMetaValues})
    throw InputError("checkpoint model descriptor has shape " + shape_str(meta.shape()) +
                     ", expected [" + std::to_string(kMetaValues) + "]");
  return meta;
}

MetaInfo parse_meta(const std::vector<CheckpointEntry>& entries, ModelKind want) {
  const std::vector<double> v = meta_tensor(entries).to_values();
  MetaInfo info;
  info.kind = v[0] == 0.0 ? ModelKind::teacher : ModelKind::student;
  if (info.kind != want)
    throw InputError(std::string("checkpoint holds a ") +
                     (info.kind == ModelKind::teacher ? "teacher" : "student") +
                     " model, expected a " +
                     (want == ModelKind::teacher ? "teacher" : "student"));
  ModelConfig& c = info.cfg;
  c.t_in = std::size_t(v[1]);
  c.t_out = std::size_t(v[2]);
  c.height = std::size_t(v[3]);
  c.width = std::size_t(v[4]);
  c.channels = std::size_t(v[5]);
  c.patch = std::size_t(v[6]);
  c.d = std::size_t(v[7]);
  c.d_g = std::size_t(v[8]);
  c.n_align = std::size_t(v[9]);
  c.n_enc = std::size_t(v[10]);
  c.heads = std::size_t(v[11]);
  c.e_max = std::size_t(v[12]);
  c.student_variant = v[13] == 1.0 ? "mixer" : "attention";
  c.validate();
  info.frozen = v[14] == 1.0;
  return info;
}

std::vector<CheckpointEntry> pack_model(ModelKind kind, const ModelConfig& cfg, bool frozen,
                                        ParamList params) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.size() + 1);
  entries.push_back({kMetaName, make_meta(kind, cfg, frozen)});
  for (NamedParam& p : params) entries.push_back({p.name, p.tensor});
  return entries;
}

// Overwrites the freshly created model's parameters from the checkpoint,
// insisting on the exact registry order so round trips stay bit-exact.
void unpack_params(const std::vector<CheckpointEntry>& entries, ParamList params) {
  if (entries.size() != params.size() + 1)
    throw InputError("checkpoint holds " + std::to_string(entries.size() - 1) +
                     " parameters, expected " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const CheckpointEntry& e = entries[i + 1];
    NamedParam& p = params[i];
    if (e.name != p.name)
      throw InputError("checkpoint entry '" + e.name + "' does not match parameter '" +
                       p.name + "'");
    if (e.tensor.shape() != p.tensor.shape() || e.tensor.dtype() != p.tensor.dtype())
      throw InputError("checkpoint entry '" + e.name + "' is " +
                       shape_str(e.tensor.shape()) + " " + dtype_name(e.tensor.dtype()) +
                       ", expected " + shape_str(p.tensor.shape()) + " " +
                       dtype_name(p.tensor.dtype()));
    std::memcpy(p.tensor.raw(), e.tensor.raw(), e.tensor.byte_size());
  }
}

Dtype entries_dtype(const std::vector<CheckpointEntry>& entries) {
  return entries.size() > 1 ? entries[1].tensor.dtype() : default_dtype();
}

}  // namespace

CheckpointKind checkpoint_kind(const std::vector<CheckpointEntry>& entries) {
  return meta_tensor(entries).value_at(0) == 0.0 ? CheckpointKind::teacher
                                                 : CheckpointKind::student;
}

void save_teacher(const std::string& path, TeacherModel& model) {
  save_checkpoint(path,
                  pack_model(ModelKind::teacher, model.cfg, model.frozen, model.params()));
}

TeacherModel load_teacher(const std::string& path) {
  const std::vector<CheckpointEntry> entries = load_checkpoint(path);
  const MetaInfo info = parse_meta(entries, ModelKind::teacher);
  Rng rng(0);  // initialization is overwritten below
  TeacherModel model = TeacherModel::create(info.cfg, rng, entries_dtype(entries));
  unpack_params(entries, model.params());
  if (info.frozen) model.freeze();
  return model;
}

void save_student(const std::string& path, StudentModel& model) {
  save_checkpoint(path, pack_model(ModelKind::student, model.cfg, false, model.params()));
}

StudentModel load_student(const std::string& path) {
  const std::vector<CheckpointEntry> entries = load_checkpoint(path);
  const MetaInfo info = parse_meta(entries, ModelKind::student);
  Rng rng(0);
  StudentModel model = StudentModel::create(info.cfg, rng, entries_dtype(entries));
  unpack_params(entries, model.params());
  return model;
}

}  // namespace s2kd
