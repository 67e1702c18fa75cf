#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "s2kd/checkpoint.hpp"
#include "s2kd/models.hpp"
#include "s2kd/rng.hpp"
#include "s2kd/tensor_io.hpp"

using namespace s2kd;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  set_default_dtype(Dtype::f64);
  return doctest::Context(argc, argv).run();
}

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.t_in = 2;
  m.t_out = 2;
  m.height = 4;
  m.width = 4;
  m.channels = 1;
  m.patch = 2;
  m.d = 8;
  m.d_g = 4;
  m.n_align = 1;
  m.n_enc = 1;
  m.heads = 2;
  m.e_max = 1;
  return m;
}

template <typename Model>
std::string model_bytes(Model& m) {
  std::string bytes;
  for (const NamedParam& p : m.params()) bytes += p.name + tensor_to_bytes(p.tensor);
  return bytes;
}

std::vector<CheckpointEntry> sample_entries(Rng& rng) {
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({7}, Dtype::f32);
  Tensor c = Tensor::zeros({2, 2, 2});
  fill_uniform(a, rng, -2.0, 2.0);
  fill_uniform(b, rng, -2.0, 2.0);
  fill_uniform(c, rng, -2.0, 2.0);
  return {{"alpha", a}, {"beta", b}, {"gamma", c}};
}

// Straight-line little-endian writers mirroring the container layout, so the
// hand-crafted corruption tests do not depend on the code under test.
void put_u16(std::string& out, unsigned v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, unsigned long v) {
  for (int shift = 0; shift < 32; shift += 8)
    out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

// Replaces the trailing checksum after the body has been tampered with, so a
// test reaches the parser stage it is aiming at instead of the checksum gate.
std::string refresh_crc(std::string bytes) {
  bytes.resize(bytes.size() - 4);
  put_u32(bytes, crc32(bytes));
  return bytes;
}

}  // namespace

TEST_CASE("crc32 matches the published check values") {
  // The standard check value for the reflected 0xEDB88320 polynomial.
  CHECK(crc32("123456789") == 0xCBF43926u);
  CHECK(crc32("") == 0x00000000u);
  CHECK(crc32("a") == 0xE8B7BE43u);
  CHECK(crc32(std::string(1, '\0')) == 0xD202EF8Du);
}

TEST_CASE("checkpoint container round trips bit-exactly") {
  Rng rng(31);
  const std::vector<CheckpointEntry> entries = sample_entries(rng);
  const std::string bytes = checkpoint_to_bytes(entries);

  const std::vector<CheckpointEntry> back = checkpoint_from_bytes(bytes);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(tensor_to_bytes(back[i].tensor) == tensor_to_bytes(entries[i].tensor));
  }
  // Serializing the parsed entries reproduces the original file exactly.
  CHECK(checkpoint_to_bytes(back) == bytes);

  CHECK(checkpoint_from_bytes(checkpoint_to_bytes({})).empty());
}

TEST_CASE("checkpoint layout is stable byte for byte") {
  // One f64 scalar named "x": the writer must produce exactly this layout,
  // assembled here independently of the implementation.
  Tensor x = Tensor::from_values({1}, {2.5});
  std::string want;
  want += "S2KC";
  want.push_back(0x01);
  put_u32(want, 1);        // entry count
  put_u16(want, 1);        // name length
  want += "x";
  want += tensor_to_bytes(x);
  put_u32(want, crc32(want));
  CHECK(checkpoint_to_bytes({{"x", x}}) == want);
}

TEST_CASE("checkpoint writer rejects duplicate names") {
  Tensor t = Tensor::zeros({2});
  CHECK_THROWS_AS(checkpoint_to_bytes({{"p", t}, {"p", t}}), ContractError);
}

TEST_CASE("checkpoint reader rejects corrupted bytes") {
  Rng rng(32);
  const std::string bytes = checkpoint_to_bytes(sample_entries(rng));

  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bytes.substr(0, 8)),
                       doctest::Contains("checkpoint truncated"), FormatError);
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 1)),
                       doctest::Contains("checkpoint checksum mismatch"), FormatError);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x40);
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(flipped),
                       doctest::Contains("checkpoint checksum mismatch"), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bad_magic),
                       doctest::Contains("checkpoint magic mismatch"), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 0x02;
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bad_version),
                       doctest::Contains("unsupported checkpoint version"), FormatError);

  // A consistent checksum over extra payload still leaves the entry walk
  // pointing short of the end.
  std::string trailing = bytes;
  trailing.insert(trailing.size() - 4, "junk");
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(refresh_crc(trailing)),
                       doctest::Contains("trailing bytes"), FormatError);

  // Entry count larger than the entries actually present.
  std::string short_count = bytes;
  short_count[5] = static_cast<char>(sample_entries(rng).size() + 1);
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(refresh_crc(short_count)),
                       doctest::Contains("checkpoint truncated"), FormatError);

  // Two entries sharing one name, assembled by hand since the writer refuses
  // to produce such a file.
  Tensor t = Tensor::zeros({2});
  std::string two;
  two += "S2KC";
  two.push_back(0x01);
  put_u32(two, 2);
  for (int i = 0; i < 2; ++i) {
    put_u16(two, 4);
    two += "same";
    two += tensor_to_bytes(t);
  }
  put_u32(two, crc32(two));
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(two),
                       doctest::Contains("duplicate parameter name 'same'"), FormatError);
}

TEST_CASE("teacher checkpoints round trip through disk") {
  const std::string dir = "tmp_checkpoint_teacher";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(5);
  TeacherModel model = TeacherModel::create(tiny_model(), rng);
  save_teacher(dir + "/t.s2kc", model);

  TeacherModel back = load_teacher(dir + "/t.s2kc");
  CHECK(model_bytes(back) == model_bytes(model));
  CHECK(back.cfg.d == model.cfg.d);
  CHECK(back.cfg.patch == model.cfg.patch);
  CHECK_FALSE(back.frozen);
  CHECK(back.params()[0].tensor.requires_grad());

  // Saving the loaded model reproduces the file byte for byte.
  save_teacher(dir + "/t2.s2kc", back);
  CHECK(read_file_bytes(dir + "/t2.s2kc") == read_file_bytes(dir + "/t.s2kc"));

  // A frozen teacher stays frozen across the round trip.
  model.freeze();
  save_teacher(dir + "/frozen.s2kc", model);
  TeacherModel frozen = load_teacher(dir + "/frozen.s2kc");
  CHECK(frozen.frozen);
  for (const NamedParam& p : frozen.params()) CHECK_FALSE(p.tensor.requires_grad());

  fs::remove_all(dir);
}

TEST_CASE("student checkpoints round trip for both variants") {
  const std::string dir = "tmp_checkpoint_student";
  fs::remove_all(dir);
  fs::create_directories(dir);

  for (const char* variant : {"attention", "mixer"}) {
    ModelConfig cfg = tiny_model();
    cfg.student_variant = variant;
    Rng rng(6);
    StudentModel model = StudentModel::create(cfg, rng);
    const std::string path = dir + "/s_" + variant + ".s2kc";
    save_student(path, model);

    StudentModel back = load_student(path);
    CHECK(back.cfg.student_variant == variant);
    CHECK(model_bytes(back) == model_bytes(model));

    save_student(dir + "/again.s2kc", back);
    CHECK(read_file_bytes(dir + "/again.s2kc") == read_file_bytes(path));
  }

  fs::remove_all(dir);
}

TEST_CASE("float32 parameters keep their width across a round trip") {
  const std::string dir = "tmp_checkpoint_f32";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(7);
  TeacherModel model = TeacherModel::create(tiny_model(), rng, Dtype::f32);
  save_teacher(dir + "/t.s2kc", model);
  TeacherModel back = load_teacher(dir + "/t.s2kc");
  CHECK(back.params()[0].tensor.dtype() == Dtype::f32);
  CHECK(model_bytes(back) == model_bytes(model));

  fs::remove_all(dir);
}

TEST_CASE("model loaders verify kind, names and shapes") {
  const std::string dir = "tmp_checkpoint_verify";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(8);
  TeacherModel teacher = TeacherModel::create(tiny_model(), rng);
  save_teacher(dir + "/t.s2kc", teacher);
  StudentModel student = StudentModel::create(tiny_model(), rng);
  save_student(dir + "/s.s2kc", student);

  CHECK(checkpoint_kind(load_checkpoint(dir + "/t.s2kc")) == CheckpointKind::teacher);
  CHECK(checkpoint_kind(load_checkpoint(dir + "/s.s2kc")) == CheckpointKind::student);

  CHECK_THROWS_WITH_AS(load_student(dir + "/t.s2kc"),
                       doctest::Contains("holds a teacher model, expected a student"),
                       InputError);
  CHECK_THROWS_WITH_AS(load_teacher(dir + "/s.s2kc"),
                       doctest::Contains("holds a student model, expected a teacher"),
                       InputError);

  // A plain container without the descriptor entry is not a model checkpoint.
  Tensor t = Tensor::zeros({2});
  save_checkpoint(dir + "/plain.s2kc", {{"p", t}});
  CHECK_THROWS_WITH_AS(load_teacher(dir + "/plain.s2kc"),
                       doctest::Contains("model descriptor"), InputError);
  CHECK_THROWS_AS(checkpoint_kind(load_checkpoint(dir + "/plain.s2kc")), InputError);

  // Dropped parameter: count mismatch.
  std::vector<CheckpointEntry> entries = load_checkpoint(dir + "/t.s2kc");
  std::vector<CheckpointEntry> missing(entries.begin(), entries.end() - 1);
  save_checkpoint(dir + "/missing.s2kc", missing);
  CHECK_THROWS_WITH_AS(load_teacher(dir + "/missing.s2kc"),
                       doctest::Contains("parameters, expected"), InputError);

  // Renamed parameter.
  std::vector<CheckpointEntry> renamed = entries;
  renamed[1].name += "_x";
  save_checkpoint(dir + "/renamed.s2kc", renamed);
  CHECK_THROWS_WITH_AS(load_teacher(dir + "/renamed.s2kc"),
                       doctest::Contains("does not match parameter"), InputError);

  // Reshaped parameter.
  std::vector<CheckpointEntry> reshaped = entries;
  reshaped[1].tensor = Tensor::zeros({1, 1});
  save_checkpoint(dir + "/reshaped.s2kc", reshaped);
  CHECK_THROWS_WITH_AS(load_teacher(dir + "/reshaped.s2kc"), doctest::Contains("expected"),
                       InputError);

  fs::remove_all(dir);
}
