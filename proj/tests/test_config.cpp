#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <filesystem>
#include <string>

#include "s2kd/config.hpp"

using namespace s2kd;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  set_default_dtype(Dtype::f64);
  return doctest::Context(argc, argv).run();
}

namespace {

ExperimentConfig parse(const std::string& text) {
  return ExperimentConfig::from_kv(KvFile::parse_text(text));
}

}  // namespace

TEST_CASE("an empty config yields the documented defaults") {
  const ExperimentConfig cfg = parse("");

  CHECK(cfg.data.height == 16);
  CHECK(cfg.data.width == 16);
  CHECK(cfg.data.t_in == 5);
  CHECK(cfg.data.t_out == 5);
  CHECK(cfg.data.train_count == 2000);
  CHECK(cfg.data.val_count == 200);
  CHECK(cfg.data.test_count == 200);
  CHECK(cfg.data.e_max == 2);
  CHECK(cfg.data.seed == 42);

  CHECK(cfg.model.d == 64);
  CHECK(cfg.model.d_g == 32);
  CHECK(cfg.model.patch == 4);
  CHECK(cfg.model.heads == 4);
  CHECK(cfg.model.student_variant == "attention");

  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.train.batch_size == 16);
  CHECK(cfg.train.max_epochs == 100);
  CHECK(cfg.train.plateau_factor == 0.1);
  CHECK(cfg.train.plateau_patience == 5);
  CHECK(cfg.train.early_stop_patience == 10);
  CHECK(cfg.train.distill.lambda == 1.0);
  CHECK(cfg.train.distill.beta == 0.5);
  CHECK(cfg.train.seed == 42);
  CHECK_FALSE(cfg.float64);

  CHECK(cfg.data_dir.empty());
  CHECK(cfg.teacher_path.empty());
  CHECK(cfg.out_dir.empty());
}

TEST_CASE("every key is parsed into its field") {
  const ExperimentConfig cfg = parse(
      "data.height = 8\n"
      "data.width = 12\n"
      "data.channels = 1\n"
      "data.t_in = 3\n"
      "data.t_out = 2\n"
      "data.e_max = 1\n"
      "data.seed = 9\n"
      "data.counts.train = 30\n"
      "data.counts.val = 10\n"
      "data.counts.test = 5\n"
      "physics.dt = 0.5\n"
      "physics.v_max = 0.2\n"
      "physics.kappa_max = 0.05\n"
      "physics.event_prob = 0.9\n"
      "physics.amp.min = 0.4\n"
      "physics.amp.max = 1.1\n"
      "physics.radius.min = 1.0\n"
      "physics.radius.max = 2.0\n"
      "model.d = 16\n"
      "model.d_g = 8\n"
      "model.n_align = 1\n"
      "model.n_enc = 3\n"
      "model.heads = 2\n"
      "model.patch = 2\n"
      "model.student_variant = mixer\n"
      "train.lr = 0.01\n"
      "train.batch = 4\n"
      "train.max_epochs = 7\n"
      "train.plateau_factor = 0.5\n"
      "train.plateau_patience = 2\n"
      "train.early_stop = 3\n"
      "train.lambda = 0.25\n"
      "train.beta = 2.0\n"
      "train.seed = 123\n"
      "train.float64 = true\n"
      "paths.data = d/\n"
      "paths.teacher = t.s2kc\n"
      "paths.out = o/\n");

  CHECK(cfg.data.height == 8);
  CHECK(cfg.data.width == 12);
  CHECK(cfg.data.t_in == 3);
  CHECK(cfg.data.t_out == 2);
  CHECK(cfg.data.e_max == 1);
  CHECK(cfg.data.seed == 9);
  CHECK(cfg.data.train_count == 30);
  CHECK(cfg.data.val_count == 10);
  CHECK(cfg.data.test_count == 5);
  CHECK(cfg.data.dt == 0.5);
  CHECK(cfg.data.v_max == 0.2);
  CHECK(cfg.data.kappa_max == 0.05);
  CHECK(cfg.data.event_prob == 0.9);
  CHECK(cfg.data.amp_min == 0.4);
  CHECK(cfg.data.amp_max == 1.1);
  CHECK(cfg.data.radius_min == 1.0);
  CHECK(cfg.data.radius_max == 2.0);

  CHECK(cfg.model.d == 16);
  CHECK(cfg.model.d_g == 8);
  CHECK(cfg.model.n_align == 1);
  CHECK(cfg.model.n_enc == 3);
  CHECK(cfg.model.heads == 2);
  CHECK(cfg.model.patch == 2);
  CHECK(cfg.model.student_variant == "mixer");
  // Model geometry mirrors the data block so validation sees the real grid.
  CHECK(cfg.model.height == 8);
  CHECK(cfg.model.width == 12);
  CHECK(cfg.model.t_in == 3);
  CHECK(cfg.model.t_out == 2);
  CHECK(cfg.model.e_max == 1);

  CHECK(cfg.train.lr == 0.01);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.max_epochs == 7);
  CHECK(cfg.train.plateau_factor == 0.5);
  CHECK(cfg.train.plateau_patience == 2);
  CHECK(cfg.train.early_stop_patience == 3);
  CHECK(cfg.train.distill.lambda == 0.25);
  CHECK(cfg.train.distill.beta == 2.0);
  CHECK(cfg.train.seed == 123);
  CHECK(cfg.float64);

  CHECK(cfg.data_dir == "d/");
  CHECK(cfg.teacher_path == "t.s2kc");
  CHECK(cfg.out_dir == "o/");
}

TEST_CASE("unknown keys are rejected with their line number") {
  CHECK_THROWS_WITH_AS(parse("data.hieght = 8\n"),
                       doctest::Contains("config line 1: unknown key 'data.hieght'"),
                       ConfigError);
  // Comments and blank lines keep their place in the count.
  CHECK_THROWS_WITH_AS(parse("# header\n\ndata.height = 8\ntrain.l_r = 0.1\n"),
                       doctest::Contains("config line 4: unknown key 'train.l_r'"),
                       ConfigError);
}

TEST_CASE("out-of-range values are rejected") {
  CHECK_THROWS_AS(parse("data.counts.train = -5\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.lr = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.batch = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.max_epochs = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.plateau_factor = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.plateau_factor = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.plateau_patience = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.early_stop = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.lambda = -0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("train.beta = -1\n"), ConfigError);
}

TEST_CASE("configs load from disk") {
  const std::string dir = "tmp_config";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = dir + "/exp.cfg";
  {
    KvFile kv;
    kv.set_int("data.height", 8);
    kv.set_int("data.width", 8);
    kv.set_double("train.lr", 0.02);
    kv.write_file(path);
  }
  const ExperimentConfig cfg = ExperimentConfig::from_file(path);
  CHECK(cfg.data.height == 8);
  CHECK(cfg.train.lr == 0.02);
  CHECK_THROWS_AS(ExperimentConfig::from_file(dir + "/absent.cfg"), InputError);
  fs::remove_all(dir);
}

TEST_CASE("model_for takes geometry from the manifest, hyperparameters from the config") {
  const ExperimentConfig cfg = parse("model.d = 16\nmodel.d_g = 8\nmodel.patch = 2\n");
  DatasetManifest manifest;
  manifest.cfg.height = 8;
  manifest.cfg.width = 10;
  manifest.cfg.t_in = 3;
  manifest.cfg.t_out = 2;
  manifest.cfg.e_max = 1;

  const ModelConfig m = model_for(manifest, cfg);
  CHECK(m.height == 8);
  CHECK(m.width == 10);
  CHECK(m.t_in == 3);
  CHECK(m.t_out == 2);
  CHECK(m.e_max == 1);
  CHECK(m.d == 16);
  CHECK(m.d_g == 8);
  CHECK(m.patch == 2);

  // The dataset's grid must still divide by the configured patch size.
  DatasetManifest odd = manifest;
  odd.cfg.height = 9;
  CHECK_THROWS_AS(model_for(odd, cfg), ConfigError);
}
