#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "s2kd/data.hpp"
#include "s2kd/gradcheck.hpp"
#include "s2kd/rng.hpp"
#include "s2kd/tensor_io.hpp"

using namespace s2kd;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  set_default_dtype(Dtype::f64);
  return doctest::Context(argc, argv).run();
}

namespace {

GeneratorConfig tiny_config() {
  GeneratorConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.t_in = 3;
  cfg.t_out = 2;
  cfg.train_count = 3;
  cfg.val_count = 2;
  cfg.test_count = 2;
  cfg.e_max = 2;
  cfg.seed = 77;
  return cfg;
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = "tmp_" + name;
  fs::remove_all(dir);
  return dir;
}

double field_sum(const Tensor& frames, std::size_t t, std::size_t cells) {
  double acc = 0.0;
  for (std::size_t i = 0; i < cells; ++i) acc += frames.value_at(t * cells + i);
  return acc;
}

}  // namespace

TEST_CASE("tensor container round trip is bit-exact") {
  Rng rng(5);
  for (Dtype dt : {Dtype::f32, Dtype::f64}) {
    Tensor t = Tensor::zeros({3, 4, 2}, dt);
    fill_uniform(t, rng, -5.0, 5.0);
    const std::string path = "tmp_container.s2kd";
    save_tensor(path, t);
    Tensor back = load_tensor(path);
    CHECK(back.shape() == t.shape());
    CHECK(back.dtype() == dt);
    REQUIRE(back.byte_size() == t.byte_size());
    CHECK(std::memcmp(back.raw(), t.raw(), t.byte_size()) == 0);
    // Re-encoding the loaded tensor reproduces the file bytes exactly.
    CHECK(tensor_to_bytes(back) == read_file_bytes(path));
  }
  fs::remove("tmp_container.s2kd");
}

TEST_CASE("tensor container rejects malformed input") {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, Dtype::f32);
  const std::string good = tensor_to_bytes(t);

  auto load_bytes = [](std::string bytes) {
    std::size_t pos = 0;
    Tensor out = tensor_from_bytes(bytes, pos, 0);
    if (pos != bytes.size()) throw FormatError("trailing bytes after tensor payload", pos);
    return out;
  };

  SUBCASE("wrong magic reports offset 0") {
    std::string bad = good;
    bad[0] = 'X';
    try {
      load_bytes(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset == 0);
    }
  }
  SUBCASE("unsupported version reports offset 4") {
    std::string bad = good;
    bad[4] = 0x02;
    try {
      load_bytes(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset == 4);
    }
  }
  SUBCASE("unknown dtype byte reports offset 5") {
    std::string bad = good;
    bad[5] = 0x07;
    try {
      load_bytes(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset == 5);
    }
  }
  SUBCASE("short payload cites the expected element count") {
    // Header says 2x3 but only 5 values follow.
    std::string bad = good.substr(0, good.size() - 4);
    try {
      load_bytes(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("expected 6") != std::string::npos);
      CHECK(std::string(e.what()).find("5 values") != std::string::npos);
    }
  }
  SUBCASE("truncated header") {
    CHECK_THROWS_AS(load_bytes(good.substr(0, 6)), FormatError);
    CHECK_THROWS_AS(load_bytes(good.substr(0, 9)), FormatError);
    CHECK_THROWS_AS(load_bytes(std::string()), FormatError);
  }
  SUBCASE("trailing bytes rejected") {
    CHECK_THROWS_AS(load_bytes(good + "zz"), FormatError);
  }
}

TEST_CASE("key-value text parsing") {
  const std::string text =
      "# comment line\n"
      "data.height = 16\n"
      "\n"
      "physics.v_max = 0.25  # trailing comment\n"
      "train.modes = 0.5, 1.5, -2\n"
      "train.verbose = true\n";
  KvFile kv = KvFile::parse_text(text);
  CHECK(kv.get_int("data.height") == 16);
  CHECK(kv.get_double("physics.v_max") == 0.25);
  CHECK(kv.get_bool("train.verbose"));
  CHECK(kv.get_double_list("train.modes") == std::vector<double>{0.5, 1.5, -2.0});
  CHECK(kv.get_int_or("absent", 9) == 9);

  CHECK_THROWS_AS(kv.get_int("physics.v_max"), ConfigError);
  CHECK_THROWS_AS(kv.get_string("absent"), ConfigError);

  try {
    KvFile::parse_text("a = 1\nbroken line\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(KvFile::parse_text("a = 1\na = 2\n"), ConfigError);

  const auto unknown = kv.unknown_keys({"data.height", "physics.v_max", "train.modes"});
  REQUIRE(unknown.size() == 1);
  CHECK(unknown[0].key == "train.verbose");

  KvFile out;
  out.set_int("x.count", 42);
  out.set_double("x.rate", 0.1);
  out.set_bool("x.flag", false);
  KvFile back = KvFile::parse_text(out.to_text());
  CHECK(back.get_int("x.count") == 42);
  CHECK(back.get_double("x.rate") == 0.1);
  CHECK(!back.get_bool("x.flag"));
}

TEST_CASE("frozen dynamics: no velocity, no diffusion, no events") {
  GeneratorConfig cfg = tiny_config();
  PrivilegedDescriptor s;
  s.events.resize(cfg.e_max);
  std::vector<double> init(cfg.height * cfg.width);
  Rng rng(3);
  for (auto& v : init) v = rng.uniform();
  Tensor frames = simulate_sequence(cfg, s, init);
  const std::size_t cells = cfg.height * cfg.width;
  for (std::size_t t = 0; t < cfg.t_total(); ++t)
    for (std::size_t i = 0; i < cells; ++i)
      CHECK(frames.value_at(t * cells + i) == init[i]);
}

TEST_CASE("pure diffusion conserves the field total") {
  GeneratorConfig cfg = tiny_config();
  PrivilegedDescriptor s;
  s.kappa = 0.1;
  s.events.resize(cfg.e_max);
  std::vector<double> init(cfg.height * cfg.width);
  Rng rng(4);
  for (auto& v : init) v = rng.uniform();
  Tensor frames = simulate_sequence(cfg, s, init);
  const std::size_t cells = cfg.height * cfg.width;
  const double first = field_sum(frames, 0, cells);
  for (std::size_t t = 1; t < cfg.t_total(); ++t)
    CHECK(field_sum(frames, t, cells) == doctest::Approx(first).epsilon(1e-5));
}

TEST_CASE("events inside the horizon never touch the input frames") {
  GeneratorConfig cfg = tiny_config();
  std::vector<double> init(cfg.height * cfg.width, 0.5);
  PrivilegedDescriptor s;
  s.v_x = 0.2;
  s.kappa = 0.05;
  s.events.resize(cfg.e_max);
  s.events[0] = {static_cast<double>(cfg.t_in), 3.0, 4.0, 1.0, 2.0, false};

  PrivilegedDescriptor doubled = s;
  doubled.events[0].amplitude = 2.0;

  Tensor a = simulate_sequence(cfg, s, init);
  Tensor b = simulate_sequence(cfg, doubled, init);
  const std::size_t cells = cfg.height * cfg.width;
  for (std::size_t t = 0; t < cfg.t_in; ++t)
    for (std::size_t i = 0; i < cells; ++i)
      CHECK(a.value_at(t * cells + i) == b.value_at(t * cells + i));
  double diff = 0.0;
  for (std::size_t t = cfg.t_in; t < cfg.t_total(); ++t)
    for (std::size_t i = 0; i < cells; ++i)
      diff += std::fabs(a.value_at(t * cells + i) - b.value_at(t * cells + i));
  CHECK(diff > 0.1);
}

TEST_CASE("CFL-violating ranges are rejected") {
  GeneratorConfig cfg = tiny_config();
  cfg.v_max = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.kappa_max = 0.3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.v_max = 0.45;  // per-axis fine, combined bound violated with kappa 0.1
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.channels = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("generated values stay finite and bounded") {
  GeneratorConfig cfg = tiny_config();
  for (std::size_t i = 0; i < 5; ++i) {
    GeneratedSample sample = generate_sample(cfg, i);
    for (std::size_t j = 0; j < sample.frames.numel(); ++j) {
      const double v = sample.frames.value_at(j);
      CHECK(std::isfinite(v));
      CHECK(std::fabs(v) <= 10.0);
    }
    // Initial frame is normalized field plus at most onset-0 bumps.
    CHECK(sample.descriptor.events.size() == cfg.e_max);
  }
}

TEST_CASE("dataset generation is byte-deterministic") {
  GeneratorConfig cfg = tiny_config();
  const std::string dir_a = fresh_dir("gen_a");
  const std::string dir_b = fresh_dir("gen_b");
  generate_dataset(cfg, dir_a);
  generate_dataset(cfg, dir_b);
  for (const char* split : {"train", "val", "test"}) {
    for (const char* kind : {"frames_", "descriptors_"}) {
      const std::string name = std::string(kind) + split + ".s2kd";
      CHECK(read_file_bytes(dir_a + "/" + name) == read_file_bytes(dir_b + "/" + name));
    }
  }
  CHECK(read_file_bytes(dir_a + "/manifest") == read_file_bytes(dir_b + "/manifest"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("dataset loading validates against the manifest") {
  GeneratorConfig cfg = tiny_config();
  const std::string dir = fresh_dir("load");
  generate_dataset(cfg, dir);

  Dataset ds = load_dataset(dir);
  CHECK(ds.manifest.cfg.height == cfg.height);
  CHECK(ds.manifest.cfg.seed == cfg.seed);
  CHECK(ds.train.size() == 3);
  CHECK(ds.val.size() == 2);
  CHECK(ds.test.size() == 2);
  CHECK(ds.train.frames.dtype() == Dtype::f32);
  CHECK(ds.train.descriptors.dtype() == Dtype::f64);

  Tensor x = ds.input_frames(ds.train, 0);
  Tensor y = ds.target_frames(ds.train, 0);
  CHECK(x.shape() == Shape{cfg.t_in, cfg.height, cfg.width, 1});
  CHECK(y.shape() == Shape{cfg.t_out, cfg.height, cfg.width, 1});
  // Input and target come from one stored sequence, split at t_in.
  Tensor whole = slice_outer(ds.train.frames, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.value_at(i) == whole.value_at(i));
  for (std::size_t i = 0; i < y.numel(); ++i)
    CHECK(y.value_at(i) == whole.value_at(x.numel() + i));

  PrivilegedDescriptor d0 = ds.descriptor(ds.train, 0);
  CHECK(d0.events.size() == cfg.e_max);
  GeneratedSample regenerated = generate_sample(cfg, 0);
  CHECK(d0.v_x == regenerated.descriptor.v_x);
  CHECK(d0.kappa == regenerated.descriptor.kappa);

  CHECK_THROWS_AS(ds.split("bogus"), InputError);

  // A frames file whose leading dimension disagrees with the manifest.
  save_tensor(dir + "/frames_val.s2kd",
              Tensor::zeros({1, cfg.t_total(), cfg.height, cfg.width, 1}, Dtype::f32));
  CHECK_THROWS_AS(load_dataset(dir), InputError);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), InputError);
}

TEST_CASE("manifest text round trip and unknown keys") {
  GeneratorConfig cfg = tiny_config();
  DatasetManifest m;
  m.cfg = cfg;
  DatasetManifest back = DatasetManifest::from_kv(KvFile::parse_text(m.to_kv().to_text()));
  CHECK(back.cfg.height == cfg.height);
  CHECK(back.cfg.kappa_max == cfg.kappa_max);
  CHECK(back.cfg.amp_max == cfg.amp_max);
  CHECK(back.cfg.seed == cfg.seed);

  std::string text = m.to_kv().to_text() + "surprise.key = 1\n";
  try {
    DatasetManifest::from_kv(KvFile::parse_text(text));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("surprise.key") != std::string::npos);
  }
}

TEST_CASE("descriptor flattening") {
  PrivilegedDescriptor s;
  s.v_x = 0.1;
  s.v_y = -0.2;
  s.kappa = 0.05;
  s.events.resize(2);
  s.events[0] = {4.0, 3.0, 2.0, 1.0, 1.5, false};
  // Garbage in a padded slot never reaches the flat row.
  s.events[1] = {9.0, 9.0, 9.0, 9.0, 9.0, true};

  const std::vector<double> row = flatten_descriptor(s);
  REQUIRE(row.size() == descriptor_width(2));
  CHECK(row[3] == 4.0);
  for (std::size_t j = 9; j < 14; ++j) CHECK(row[j] == 0.0);
  CHECK(row[14] == 1.0);

  PrivilegedDescriptor back = unflatten_descriptor(row, 2);
  CHECK(back.v_y == -0.2);
  CHECK(back.events[0].radius == 1.5);
  CHECK(back.events[1].padded);
  CHECK(back.events[1].amplitude == 0.0);

  std::vector<double> bad_flag = row;
  bad_flag[14] = 0.5;
  CHECK_THROWS_AS(unflatten_descriptor(bad_flag, 2), InputError);
  std::vector<double> dirty_pad = row;
  dirty_pad[9] = 1.0;
  CHECK_THROWS_AS(unflatten_descriptor(dirty_pad, 2), InputError);
  CHECK_THROWS_AS(unflatten_descriptor(row, 1), InputError);
}

TEST_CASE("descriptor encoder shapes and pad behaviour") {
  Rng rng(21);
  DescriptorEncoder enc0 = DescriptorEncoder::create(0, 4, 1, 5.0, 8.0, 8.0, rng);
  PrivilegedDescriptor bare;
  CHECK(enc0.apply(bare).shape() == Shape{1, 4});

  DescriptorEncoder enc = DescriptorEncoder::create(2, 4, 1, 5.0, 8.0, 8.0, rng);
  PrivilegedDescriptor a;
  a.v_x = 0.1;
  a.events.resize(2);
  a.events[0] = {2.0, 3.0, 3.0, 1.0, 2.0, false};
  PrivilegedDescriptor b = a;
  b.events[1] = {7.0, 7.0, 7.0, 7.0, 7.0, true};  // padded: fields ignored

  Tensor za = enc.apply(a);
  Tensor zb = enc.apply(b);
  CHECK(za.shape() == Shape{3, 4});
  for (std::size_t i = 0; i < za.numel(); ++i) CHECK(za.value_at(i) == zb.value_at(i));

  PrivilegedDescriptor c = a;
  c.events[0].amplitude = 2.0;
  Tensor zc = enc.apply(c);
  double diff = 0.0;
  for (std::size_t i = 0; i < za.numel(); ++i)
    diff += std::fabs(za.value_at(i) - zc.value_at(i));
  CHECK(diff > 1e-6);

  PrivilegedDescriptor wrong;
  wrong.events.resize(1);
  CHECK_THROWS_AS(enc.apply(wrong), InputError);
}

TEST_CASE("descriptor encoder matches a straight-line oracle") {
  Rng rng(23);
  const std::size_t d = 4;
  DescriptorEncoder enc = DescriptorEncoder::create(1, d, 1, 6.0, 8.0, 8.0, rng);
  PrivilegedDescriptor s;
  s.v_x = 0.25;
  s.v_y = -0.1;
  s.kappa = 0.04;
  s.events.resize(1);
  s.events[0] = {4.0, 2.5, 5.0, 1.2, 1.8, false};

  Tensor got = enc.apply(s);

  // Independent recomputation with elementary loops.
  auto mat = [&](const Tensor& t) {
    std::vector<std::vector<double>> m(t.shape()[0], std::vector<double>(t.shape()[1]));
    for (std::size_t i = 0; i < t.shape()[0]; ++i)
      for (std::size_t j = 0; j < t.shape()[1]; ++j) m[i][j] = t.value_at(i * t.shape()[1] + j);
    return m;
  };
  auto linear_row = [&](const std::vector<double>& in, const LinearLayer& lin) {
    std::vector<double> out(lin.out_features());
    const auto w = mat(lin.weight);
    const auto bias = lin.bias.to_values();
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = bias[j];
      for (std::size_t k = 0; k < in.size(); ++k) out[j] += in[k] * w[k][j];
    }
    return out;
  };

  std::vector<std::vector<double>> tokens;
  tokens.push_back(linear_row({s.v_x, s.v_y, s.kappa}, enc.global_embed));
  tokens.push_back(linear_row(
      {s.events[0].onset / 6.0, s.events[0].center_x / 8.0, s.events[0].center_y / 8.0,
       s.events[0].amplitude, s.events[0].radius},
      enc.event_embed));

  // Single-head attention block over the two tokens.
  const auto& p = enc.mixer;
  std::vector<std::vector<double>> q, k, v;
  for (const auto& row : tokens) {
    q.push_back(linear_row(row, p.q_proj));
    k.push_back(linear_row(row, p.k_proj));
    v.push_back(linear_row(row, p.v_proj));
  }
  const auto gain = p.ln_gain.to_values(), lbias = p.ln_bias.to_values();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<double> logits(tokens.size(), 0.0);
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      for (std::size_t f = 0; f < d; ++f) logits[j] += q[i][f] * k[j][f];
      logits[j] /= std::sqrt(static_cast<double>(d));
    }
    const double mx = std::max(logits[0], logits[1]);
    double total = 0.0;
    std::vector<double> wgt(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      wgt[j] = std::exp(logits[j] - mx);
      total += wgt[j];
    }
    std::vector<double> attended(d, 0.0);
    for (std::size_t j = 0; j < tokens.size(); ++j)
      for (std::size_t f = 0; f < d; ++f) attended[f] += (wgt[j] / total) * v[j][f];
    std::vector<double> proj = linear_row(attended, p.out_proj);
    for (std::size_t f = 0; f < d; ++f) proj[f] += tokens[i][f];
    double mu = 0.0;
    for (double x : proj) mu += x;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double x : proj) var += (x - mu) * (x - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t f = 0; f < d; ++f) {
      const double want = gain[f] * (proj[f] - mu) * inv + lbias[f];
      CHECK(got.value_at(i * d + f) == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("descriptor encoder gradients") {
  Rng rng(29);
  DescriptorEncoder enc = DescriptorEncoder::create(2, 4, 2, 5.0, 8.0, 8.0, rng);
  PrivilegedDescriptor s;
  s.v_x = 0.2;
  s.events.resize(2);
  s.events[0] = {1.0, 2.0, 3.0, 0.8, 2.0, false};
  Tensor w = Tensor::zeros({3, 4});
  fill_uniform(w, rng, -1.0, 1.0);

  auto wrt_pad = [&](const Tensor& v) {
    DescriptorEncoder e2 = enc;
    e2.pad_embed = v;
    return sum(mul(e2.apply(s), w));
  };
  CHECK(grad_check(wrt_pad, enc.pad_embed, 1e-4, 1e-6).passed);

  auto wrt_event = [&](const Tensor& v) {
    DescriptorEncoder e2 = enc;
    e2.event_embed.weight = v;
    return sum(mul(e2.apply(s), w));
  };
  CHECK(grad_check(wrt_event, enc.event_embed.weight, 1e-4, 1e-6).passed);
}
