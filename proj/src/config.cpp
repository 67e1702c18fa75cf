#include "s2kd/config.hpp"

namespace s2kd {

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "data.height",          "data.width",           "data.channels",
      "data.t_in",            "data.t_out",           "data.e_max",
      "data.seed",            "data.counts.train",    "data.counts.val",
      "data.counts.test",     "physics.dt",           "physics.v_max",
      "physics.kappa_max",    "physics.event_prob",   "physics.amp.min",
      "physics.amp.max",      "physics.radius.min",   "physics.radius.max",
      "model.d",              "model.d_g",            "model.n_align",
      "model.n_enc",          "model.heads",          "model.patch",
      "model.student_variant", "train.lr",            "train.batch",
      "train.max_epochs",     "train.plateau_factor", "train.plateau_patience",
      "train.early_stop",     "train.lambda",         "train.beta",
      "train.seed",           "train.float64",        "paths.data",
      "paths.teacher",        "paths.out",
  };
  return keys;
}

std::size_t get_size(const KvFile& kv, const std::string& key, std::size_t fallback) {
  const std::int64_t v = kv.get_int_or(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config: " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_kv(KvFile::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_kv(const KvFile& kv) {
  for (const KvEntry& e : kv.unknown_keys(known_keys()))
    throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" + e.key +
                      "'");

  ExperimentConfig cfg;
  GeneratorConfig& d = cfg.data;
  d.height = get_size(kv, "data.height", d.height);
  d.width = get_size(kv, "data.width", d.width);
  d.channels = get_size(kv, "data.channels", d.channels);
  d.t_in = get_size(kv, "data.t_in", d.t_in);
  d.t_out = get_size(kv, "data.t_out", d.t_out);
  d.e_max = get_size(kv, "data.e_max", d.e_max);
  d.seed = static_cast<std::uint64_t>(kv.get_int_or("data.seed", std::int64_t(d.seed)));
  d.train_count = get_size(kv, "data.counts.train", d.train_count);
  d.val_count = get_size(kv, "data.counts.val", d.val_count);
  d.test_count = get_size(kv, "data.counts.test", d.test_count);
  d.dt = kv.get_double_or("physics.dt", d.dt);
  d.v_max = kv.get_double_or("physics.v_max", d.v_max);
  d.kappa_max = kv.get_double_or("physics.kappa_max", d.kappa_max);
  d.event_prob = kv.get_double_or("physics.event_prob", d.event_prob);
  d.amp_min = kv.get_double_or("physics.amp.min", d.amp_min);
  d.amp_max = kv.get_double_or("physics.amp.max", d.amp_max);
  d.radius_min = kv.get_double_or("physics.radius.min", d.radius_min);
  d.radius_max = kv.get_double_or("physics.radius.max", d.radius_max);

  ModelConfig& m = cfg.model;
  m.d = get_size(kv, "model.d", m.d);
  m.d_g = get_size(kv, "model.d_g", m.d_g);
  m.n_align = get_size(kv, "model.n_align", m.n_align);
  m.n_enc = get_size(kv, "model.n_enc", m.n_enc);
  m.heads = get_size(kv, "model.heads", m.heads);
  m.patch = get_size(kv, "model.patch", m.patch);
  m.student_variant = kv.get_string_or("model.student_variant", m.student_variant);
  m.t_in = d.t_in;
  m.t_out = d.t_out;
  m.height = d.height;
  m.width = d.width;
  m.channels = d.channels;
  m.e_max = d.e_max;

  TrainConfig& t = cfg.train;
  t.lr = kv.get_double_or("train.lr", t.lr);
  t.batch_size = get_size(kv, "train.batch", t.batch_size);
  t.max_epochs = get_size(kv, "train.max_epochs", t.max_epochs);
  t.plateau_factor = kv.get_double_or("train.plateau_factor", t.plateau_factor);
  t.plateau_patience =
      static_cast<int>(kv.get_int_or("train.plateau_patience", t.plateau_patience));
  t.early_stop_patience =
      static_cast<int>(kv.get_int_or("train.early_stop", t.early_stop_patience));
  t.distill.lambda = kv.get_double_or("train.lambda", t.distill.lambda);
  t.distill.beta = kv.get_double_or("train.beta", t.distill.beta);
  t.seed = static_cast<std::uint64_t>(kv.get_int_or("train.seed", std::int64_t(t.seed)));
  cfg.float64 = kv.get_bool_or("train.float64", false);

  cfg.data_dir = kv.get_string_or("paths.data", "");
  cfg.teacher_path = kv.get_string_or("paths.teacher", "");
  cfg.out_dir = kv.get_string_or("paths.out", "");

  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (train.lr < 0.0) throw ConfigError("config: train.lr must be >= 0");
  if (train.batch_size < 1) throw ConfigError("config: train.batch must be >= 1");
  if (train.max_epochs < 1) throw ConfigError("config: train.max_epochs must be >= 1");
  if (train.plateau_factor <= 0.0 || train.plateau_factor >= 1.0)
    throw ConfigError("config: train.plateau_factor must lie in (0, 1)");
  if (train.plateau_patience < 1)
    throw ConfigError("config: train.plateau_patience must be >= 1");
  if (train.early_stop_patience < 1)
    throw ConfigError("config: train.early_stop must be >= 1");
  train.distill.validate();
}

ModelConfig model_for(const DatasetManifest& manifest, const ExperimentConfig& cfg) {
  ModelConfig m = cfg.model;
  m.t_in = manifest.cfg.t_in;
  m.t_out = manifest.cfg.t_out;
  m.height = manifest.cfg.height;
  m.width = manifest.cfg.width;
  m.channels = manifest.cfg.channels;
  m.e_max = manifest.cfg.e_max;
  m.validate();
  return m;
}

}  // namespace s2kd
