#include "s2kd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "s2kd/rng.hpp"
#include "s2kd/tensor_io.hpp"

namespace s2kd {

namespace {

constexpr std::size_t kEventFields = 6;  // 5 numeric fields + pad flag
constexpr std::size_t kInitialBlobs = 3;
constexpr double kObservedOnsetProb = 0.75;

}  // namespace

std::size_t descriptor_width(std::size_t e_max) { return 3 + e_max * kEventFields; }

std::vector<double> flatten_descriptor(const PrivilegedDescriptor& s) {
  std::vector<double> row;
  row.reserve(descriptor_width(s.events.size()));
  row.push_back(s.v_x);
  row.push_back(s.v_y);
  row.push_back(s.kappa);
  for (const EventSpec& e : s.events) {
    if (e.padded) {
      row.insert(row.end(), {0.0, 0.0, 0.0, 0.0, 0.0, 1.0});
    } else {
      row.insert(row.end(), {e.onset, e.center_x, e.center_y, e.amplitude, e.radius, 0.0});
    }
  }
  return row;
}

PrivilegedDescriptor unflatten_descriptor(const std::vector<double>& row, std::size_t e_max) {
  if (row.size() != descriptor_width(e_max))
    throw InputError("descriptor row has " + std::to_string(row.size()) +
                     " values, expected " + std::to_string(descriptor_width(e_max)));
  PrivilegedDescriptor s;
  s.v_x = row[0];
  s.v_y = row[1];
  s.kappa = row[2];
  s.events.resize(e_max);
  for (std::size_t i = 0; i < e_max; ++i) {
    const double* f = row.data() + 3 + i * kEventFields;
    const double flag = f[5];
    if (flag != 0.0 && flag != 1.0)
      throw InputError("descriptor slot " + std::to_string(i) + ": pad flag must be 0 or 1");
    EventSpec& e = s.events[i];
    e.padded = flag == 1.0;
    if (e.padded) {
      for (std::size_t j = 0; j < 5; ++j)
        if (f[j] != 0.0)
          throw InputError("descriptor slot " + std::to_string(i) +
                           ": padded slot has nonzero fields");
    } else {
      e.onset = f[0];
      e.center_x = f[1];
      e.center_y = f[2];
      e.amplitude = f[3];
      e.radius = f[4];
      if (e.amplitude < 0.0)
        throw InputError("descriptor slot " + std::to_string(i) + ": negative amplitude");
      if (e.radius <= 0.0)
        throw InputError("descriptor slot " + std::to_string(i) + ": non-positive radius");
    }
  }
  return s;
}

void GeneratorConfig::validate() const {
  if (channels != 1)
    throw ConfigError("generator: only single-channel fields are supported");
  if (height < 2 || width < 2)
    throw ConfigError("generator: grid must be at least 2x2");
  if (t_in < 1 || t_out < 1)
    throw ConfigError("generator: t_in and t_out must be at least 1");
  if (dt <= 0.0) throw ConfigError("generator: dt must be positive");
  if (v_max < 0.0 || kappa_max < 0.0)
    throw ConfigError("generator: parameter ranges must be non-negative");
  if (v_max * dt > 1.0)
    throw ConfigError("CFL violation: |v| * dt must not exceed 1 cell per step");
  if (kappa_max * dt > 0.25)
    throw ConfigError("CFL violation: kappa * dt must not exceed 0.25");
  if ((2.0 * v_max + 4.0 * kappa_max) * dt > 1.0)
    throw ConfigError("CFL violation: combined advection-diffusion step exceeds the "
                      "monotone stability bound");
  if (event_prob < 0.0 || event_prob > 1.0)
    throw ConfigError("generator: event_prob must lie in [0, 1]");
  if (amp_min < 0.0 || amp_max < amp_min)
    throw ConfigError("generator: amplitude range must satisfy 0 <= min <= max");
  if (radius_min <= 0.0 || radius_max < radius_min)
    throw ConfigError("generator: radius range must satisfy 0 < min <= max");
}

namespace {

void add_bump(std::vector<double>& field, std::size_t h, std::size_t w, const EventSpec& e) {
  const double inv = 1.0 / (2.0 * e.radius * e.radius);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - e.center_x;
      const double dy = static_cast<double>(y) - e.center_y;
      field[y * w + x] += e.amplitude * std::exp(-(dx * dx + dy * dy) * inv);
    }
}

// One explicit step: upwind advection plus flux-form diffusion. Out-of-range
// neighbours mirror the cell itself (zero flux), so pure diffusion conserves
// the field total exactly.
void physics_step(const std::vector<double>& u, std::vector<double>& out, std::size_t h,
                  std::size_t w, double vx, double vy, double kappa, double dt) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double c = u[y * w + x];
      double adv = 0.0;
      if (vx > 0.0)
        adv += vx * (c - (x > 0 ? u[y * w + x - 1] : c));
      else
        adv += vx * ((x + 1 < w ? u[y * w + x + 1] : c) - c);
      if (vy > 0.0)
        adv += vy * (c - (y > 0 ? u[(y - 1) * w + x] : c));
      else
        adv += vy * ((y + 1 < h ? u[(y + 1) * w + x] : c) - c);
      double lap = 0.0;
      if (x > 0) lap += u[y * w + x - 1] - c;
      if (x + 1 < w) lap += u[y * w + x + 1] - c;
      if (y > 0) lap += u[(y - 1) * w + x] - c;
      if (y + 1 < h) lap += u[(y + 1) * w + x] - c;
      out[y * w + x] = c + dt * (kappa * lap - adv);
    }
}

}  // namespace

Tensor simulate_sequence(const GeneratorConfig& cfg, const PrivilegedDescriptor& s,
                         const std::vector<double>& initial_field) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width, steps = cfg.t_total();
  if (initial_field.size() != h * w)
    throw InputError("initial field has " + std::to_string(initial_field.size()) +
                     " cells, expected " + std::to_string(h * w));
  if (s.events.size() != cfg.e_max)
    throw InputError("descriptor has " + std::to_string(s.events.size()) +
                     " event slots, expected " + std::to_string(cfg.e_max));

  Tensor frames = Tensor::zeros({steps, h, w, 1}, Dtype::f64);
  auto* dst = frames.impl()->data_as<double>();
  std::vector<double> u = initial_field;
  std::vector<double> next(h * w);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      physics_step(u, next, h, w, s.v_x, s.v_y, s.kappa, cfg.dt);
      u.swap(next);
    }
    for (const EventSpec& e : s.events)
      if (!e.padded && static_cast<std::size_t>(e.onset) == t) add_bump(u, h, w, e);
    std::memcpy(dst + t * h * w, u.data(), h * w * sizeof(double));
  }
  return frames;
}

GeneratedSample generate_sample(const GeneratorConfig& cfg, std::size_t sequence_index) {
  cfg.validate();
  Rng rng = Rng::split(cfg.seed, kStreamData + sequence_index);

  PrivilegedDescriptor s;
  s.v_x = rng.uniform(-cfg.v_max, cfg.v_max);
  s.v_y = rng.uniform(-cfg.v_max, cfg.v_max);
  s.kappa = rng.uniform(0.0, cfg.kappa_max);
  s.events.resize(cfg.e_max);
  for (EventSpec& e : s.events) {
    // Every slot consumes the same number of draws whether or not it is
    // active, which keeps later draws aligned across configurations.
    const bool active = rng.uniform() < cfg.event_prob;
    // Most events begin inside the observed window, where tracking their
    // evolution is learnable from pixels; a fixed minority start inside the
    // horizon, which keeps descriptors genuinely privileged wrt the input.
    const bool observed = rng.uniform() < kObservedOnsetProb;
    const std::size_t onset_lo = observed ? 0 : cfg.t_in;
    const std::size_t onset_hi = observed ? cfg.t_in : cfg.t_total();
    const double onset = std::min(
        static_cast<double>(onset_hi - 1),
        static_cast<double>(onset_lo) +
            std::floor(rng.uniform() * static_cast<double>(onset_hi - onset_lo)));
    const double cx = rng.uniform(0.0, static_cast<double>(cfg.width - 1));
    const double cy = rng.uniform(0.0, static_cast<double>(cfg.height - 1));
    const double amp = rng.uniform(cfg.amp_min, cfg.amp_max);
    const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
    if (active) {
      e = {onset, cx, cy, amp, radius, false};
    } else {
      e = EventSpec{};
    }
  }

  std::vector<double> field(cfg.height * cfg.width, 0.0);
  for (std::size_t b = 0; b < kInitialBlobs; ++b) {
    EventSpec blob;
    blob.center_x = rng.uniform(0.0, static_cast<double>(cfg.width - 1));
    blob.center_y = rng.uniform(0.0, static_cast<double>(cfg.height - 1));
    blob.radius = rng.uniform(1.5, 4.0);
    blob.amplitude = rng.uniform(0.3, 1.0);
    blob.padded = false;
    add_bump(field, cfg.height, cfg.width, blob);
  }
  const double top = *std::max_element(field.begin(), field.end());
  if (top > 1.0)
    for (double& v : field) v /= top;

  return {simulate_sequence(cfg, s, field), s};
}

namespace {

const char* kSplitNames[3] = {"train", "val", "test"};

std::string frames_path(const std::string& dir, const std::string& split) {
  return dir + "/frames_" + split + ".s2kd";
}

std::string descriptors_path(const std::string& dir, const std::string& split) {
  return dir + "/descriptors_" + split + ".s2kd";
}

}  // namespace

void generate_dataset(const GeneratorConfig& cfg, const std::string& dir) {
  cfg.validate();
  std::filesystem::create_directories(dir);

  const std::size_t counts[3] = {cfg.train_count, cfg.val_count, cfg.test_count};
  const std::size_t cells = cfg.t_total() * cfg.height * cfg.width * cfg.channels;
  const std::size_t k = descriptor_width(cfg.e_max);

  std::size_t base = 0;
  for (std::size_t split = 0; split < 3; ++split) {
    const std::size_t n = counts[split];
    Tensor frames = Tensor::zeros({n, cfg.t_total(), cfg.height, cfg.width, cfg.channels},
                                  Dtype::f32);
    Tensor descriptors = Tensor::zeros({n, k}, Dtype::f64);
    auto* fp = frames.impl()->data_as<float>();
    auto* dp = descriptors.impl()->data_as<double>();
    for (std::size_t i = 0; i < n; ++i) {
      GeneratedSample sample = generate_sample(cfg, base + i);
      const auto* src = sample.frames.impl()->data_as<double>();
      for (std::size_t j = 0; j < cells; ++j)
        fp[i * cells + j] = static_cast<float>(src[j]);
      const std::vector<double> row = flatten_descriptor(sample.descriptor);
      std::memcpy(dp + i * k, row.data(), k * sizeof(double));
    }
    save_tensor(frames_path(dir, kSplitNames[split]), frames);
    save_tensor(descriptors_path(dir, kSplitNames[split]), descriptors);
    base += n;
  }

  DatasetManifest manifest;
  manifest.cfg = cfg;
  manifest.to_kv().write_file(dir + "/manifest");
}

KvFile DatasetManifest::to_kv() const {
  KvFile kv;
  kv.set_int("format.version", format_version);
  kv.set_int("data.seed", static_cast<std::int64_t>(cfg.seed));
  kv.set_int("data.height", static_cast<std::int64_t>(cfg.height));
  kv.set_int("data.width", static_cast<std::int64_t>(cfg.width));
  kv.set_int("data.channels", static_cast<std::int64_t>(cfg.channels));
  kv.set_int("data.t_in", static_cast<std::int64_t>(cfg.t_in));
  kv.set_int("data.t_out", static_cast<std::int64_t>(cfg.t_out));
  kv.set_int("data.e_max", static_cast<std::int64_t>(cfg.e_max));
  kv.set_int("data.counts.train", static_cast<std::int64_t>(cfg.train_count));
  kv.set_int("data.counts.val", static_cast<std::int64_t>(cfg.val_count));
  kv.set_int("data.counts.test", static_cast<std::int64_t>(cfg.test_count));
  kv.set_double("physics.dt", cfg.dt);
  kv.set_double("physics.v_max", cfg.v_max);
  kv.set_double("physics.kappa_max", cfg.kappa_max);
  kv.set_double("physics.event_prob", cfg.event_prob);
  kv.set_double("physics.amp.min", cfg.amp_min);
  kv.set_double("physics.amp.max", cfg.amp_max);
  kv.set_double("physics.radius.min", cfg.radius_min);
  kv.set_double("physics.radius.max", cfg.radius_max);
  return kv;
}

DatasetManifest DatasetManifest::from_kv(const KvFile& kv) {
  static const std::vector<std::string> known = {
      "format.version",    "data.seed",         "data.height",
      "data.width",        "data.channels",     "data.t_in",
      "data.t_out",        "data.e_max",        "data.counts.train",
      "data.counts.val",   "data.counts.test",  "physics.dt",
      "physics.v_max",     "physics.kappa_max", "physics.event_prob",
      "physics.amp.min",   "physics.amp.max",   "physics.radius.min",
      "physics.radius.max"};
  const auto unknown = kv.unknown_keys(known);
  if (!unknown.empty())
    throw ConfigError("manifest line " + std::to_string(unknown.front().line) +
                      ": unknown key '" + unknown.front().key + "'");

  DatasetManifest m;
  m.format_version = static_cast<int>(kv.get_int("format.version"));
  if (m.format_version != 1)
    throw ConfigError("manifest: unsupported format.version " +
                      std::to_string(m.format_version));
  auto get_size = [&](const char* key) {
    const std::int64_t v = kv.get_int(key);
    if (v < 0) throw ConfigError(std::string("manifest: key '") + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  m.cfg.seed = static_cast<std::uint64_t>(kv.get_int("data.seed"));
  m.cfg.height = get_size("data.height");
  m.cfg.width = get_size("data.width");
  m.cfg.channels = get_size("data.channels");
  m.cfg.t_in = get_size("data.t_in");
  m.cfg.t_out = get_size("data.t_out");
  m.cfg.e_max = get_size("data.e_max");
  m.cfg.train_count = get_size("data.counts.train");
  m.cfg.val_count = get_size("data.counts.val");
  m.cfg.test_count = get_size("data.counts.test");
  m.cfg.dt = kv.get_double("physics.dt");
  m.cfg.v_max = kv.get_double("physics.v_max");
  m.cfg.kappa_max = kv.get_double("physics.kappa_max");
  m.cfg.event_prob = kv.get_double("physics.event_prob");
  m.cfg.amp_min = kv.get_double("physics.amp.min");
  m.cfg.amp_max = kv.get_double("physics.amp.max");
  m.cfg.radius_min = kv.get_double("physics.radius.min");
  m.cfg.radius_max = kv.get_double("physics.radius.max");
  return m;
}

const DatasetSplit& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw InputError("unknown split '" + name + "' (expected train, val or test)");
}

Tensor Dataset::input_frames(const DatasetSplit& sp, std::size_t i) const {
  return slice_outer_range(slice_outer(sp.frames, i), 0, manifest.cfg.t_in);
}

Tensor Dataset::target_frames(const DatasetSplit& sp, std::size_t i) const {
  return slice_outer_range(slice_outer(sp.frames, i), manifest.cfg.t_in, manifest.cfg.t_out);
}

PrivilegedDescriptor Dataset::descriptor(const DatasetSplit& sp, std::size_t i) const {
  const std::size_t k = sp.descriptors.shape()[1];
  std::vector<double> row(k);
  for (std::size_t j = 0; j < k; ++j) row[j] = sp.descriptors.value_at(i * k + j);
  return unflatten_descriptor(row, manifest.cfg.e_max);
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.manifest = DatasetManifest::from_kv(KvFile::parse_file(dir + "/manifest"));
  const GeneratorConfig& cfg = ds.manifest.cfg;

  const std::size_t counts[3] = {cfg.train_count, cfg.val_count, cfg.test_count};
  DatasetSplit* splits[3] = {&ds.train, &ds.val, &ds.test};
  const Shape frame_shape = {0, cfg.t_total(), cfg.height, cfg.width, cfg.channels};
  for (std::size_t i = 0; i < 3; ++i) {
    DatasetSplit& sp = *splits[i];
    sp.frames = load_tensor(frames_path(dir, kSplitNames[i]));
    sp.descriptors = load_tensor(descriptors_path(dir, kSplitNames[i]));
    Shape want = frame_shape;
    want[0] = counts[i];
    if (sp.frames.shape() != want)
      throw InputError(std::string("dataset ") + kSplitNames[i] + " frames are " +
                       shape_str(sp.frames.shape()) + ", manifest expects " + shape_str(want));
    const Shape want_desc = {counts[i], descriptor_width(cfg.e_max)};
    if (sp.descriptors.shape() != want_desc)
      throw InputError(std::string("dataset ") + kSplitNames[i] + " descriptors are " +
                       shape_str(sp.descriptors.shape()) + ", manifest expects " +
                       shape_str(want_desc));
  }
  return ds;
}

DescriptorEncoder DescriptorEncoder::create(std::size_t e_max, std::size_t d,
                                            std::size_t n_heads, double t_total, double grid_w,
                                            double grid_h, Rng& rng, Dtype dtype) {
  DescriptorEncoder enc;
  enc.global_embed = LinearLayer::create(3, d, rng, dtype);
  enc.event_embed = LinearLayer::create(5, d, rng, dtype);
  enc.pad_embed = Tensor::zeros({1, d}, dtype);
  fill_uniform(enc.pad_embed, rng, -1.0 / std::sqrt(static_cast<double>(d)),
               1.0 / std::sqrt(static_cast<double>(d)));
  enc.pad_embed.set_requires_grad(true);
  enc.mixer = AttentionBlockParams::create(d, n_heads, rng, dtype);
  enc.e_max = e_max;
  enc.norm_t = t_total > 0.0 ? t_total : 1.0;
  enc.norm_x = grid_w > 0.0 ? grid_w : 1.0;
  enc.norm_y = grid_h > 0.0 ? grid_h : 1.0;
  return enc;
}

Tensor DescriptorEncoder::apply(const PrivilegedDescriptor& s) const {
  if (s.events.size() != e_max)
    throw InputError("descriptor has " + std::to_string(s.events.size()) +
                     " event slots, encoder expects " + std::to_string(e_max));
  const Dtype dtype = global_embed.weight.dtype();
  std::vector<Tensor> rows;
  rows.reserve(1 + e_max);
  rows.push_back(global_embed.apply(
      Tensor::from_values({1, 3}, {s.v_x, s.v_y, s.kappa}, dtype)));
  for (const EventSpec& e : s.events) {
    if (e.padded) {
      rows.push_back(pad_embed);
    } else {
      rows.push_back(event_embed.apply(Tensor::from_values(
          {1, 5},
          {e.onset / norm_t, e.center_x / norm_x, e.center_y / norm_y, e.amplitude, e.radius},
          dtype)));
    }
  }
  Tensor tokens = rows.size() == 1 ? rows[0] : concat_rows(rows);
  return attention_block(tokens, tokens, mixer);
}

void DescriptorEncoder::append_params(ParamList& out, const std::string& prefix) {
  global_embed.append_params(out, prefix + ".global");
  event_embed.append_params(out, prefix + ".event");
  out.push_back({prefix + ".pad", pad_embed});
  mixer.append_params(out, prefix + ".mixer");
}

}  // namespace s2kd
