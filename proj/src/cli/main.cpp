#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "s2kd/checkpoint.hpp"
#include "s2kd/config.hpp"
#include "s2kd/data.hpp"
#include "s2kd/distill.hpp"
#include "s2kd/experiment.hpp"
#include "s2kd/gradcheck.hpp"
#include "s2kd/kvfile.hpp"
#include "s2kd/tensor_io.hpp"

// Command-line entry point. Exit codes: 0 success, 1 validation or runtime
// failure (bad inputs, corrupt files, failed checks), 2 usage or
// configuration errors.

namespace fs = std::filesystem;
using namespace s2kd;

namespace {

ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(path);
}

std::string resolve(const std::string& flag_value, const std::string& config_value,
                    const char* what) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw UsageError(std::string("missing ") + what +
                   " (pass the flag or set it in the config's paths block)");
}

void apply_float_width(const ExperimentConfig& cfg, bool flag) {
  if (flag || cfg.float64) set_default_dtype(Dtype::f64);
}

// Per-epoch progress line on stderr; stdout stays reserved for results.
TrainConfig with_progress(TrainConfig tcfg, std::string label) {
  tcfg.on_epoch = [label = std::move(label)](const EpochStats& e) {
    std::fprintf(stderr, "[%s] epoch %zu  train %.6g  val %.6g  lr %.3g  (%.1fs)\n",
                 label.c_str(), e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds);
  };
  return tcfg;
}

struct GenArgs {
  std::string config, out;
  std::int64_t seed = 0;
  bool seed_set = false;
};

void cmd_gen(const GenArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.seed_set) cfg.data.seed = static_cast<std::uint64_t>(a.seed);
  const std::string out = resolve(a.out, cfg.out_dir, "output directory (--out)");
  cfg.data.validate();
  cfg.model.validate();  // catches grid/patch mismatches before the long write
  generate_dataset(cfg.data, out);
  std::printf("wrote %zu/%zu/%zu sequences (%zux%zu grid, %zu+%zu frames) to %s\n",
              cfg.data.train_count, cfg.data.val_count, cfg.data.test_count,
              cfg.data.height, cfg.data.width, cfg.data.t_in, cfg.data.t_out, out.c_str());
}

struct TrainArgs {
  std::string config, data, teacher, mode = "full", out;
  std::int64_t seed = 0;
  bool seed_set = false;
  bool float64 = false;
};

TrainConfig train_config(const ExperimentConfig& cfg, const TrainArgs& a) {
  TrainConfig t = cfg.train;
  if (a.seed_set) t.seed = static_cast<std::uint64_t>(a.seed);
  return t;
}

void cmd_train_teacher(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  apply_float_width(cfg, a.float64);
  const std::string data_dir = resolve(a.data, cfg.data_dir, "dataset directory (--data)");
  const std::string out = resolve(a.out, cfg.out_dir, "output directory (--out)");

  Dataset ds = load_dataset(data_dir);
  const ModelConfig mcfg = model_for(ds.manifest, cfg);
  TeacherTrainResult r =
      train_teacher(ds, mcfg, with_progress(train_config(cfg, a), "teacher"));

  fs::create_directories(out);
  save_teacher(out + "/teacher.s2kc", r.model);
  write_file_bytes(out + "/teacher_train.csv", r.report.to_csv());
  const MetricsRow row = evaluate_teacher(ds, r.model);
  write_file_bytes(out + "/teacher_metrics.csv", metrics_to_csv({row}));
  std::printf("teacher: %zu epochs, best val %.6g (epoch %zu)\n", r.report.epochs.size(),
              r.report.best_val_loss, r.report.best_epoch);
  std::fputs(metrics_to_csv({row}).c_str(), stdout);
}

void cmd_train_student(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  apply_float_width(cfg, a.float64);
  const std::string data_dir = resolve(a.data, cfg.data_dir, "dataset directory (--data)");
  const std::string out = resolve(a.out, cfg.out_dir, "output directory (--out)");
  TrainConfig tcfg = train_config(cfg, a);
  tcfg.distill.mode = parse_mode(a.mode);

  const bool needs_teacher =
      tcfg.distill.mode != DistillMode::baseline && tcfg.distill.lambda != 0.0;
  std::string teacher_path = !a.teacher.empty() ? a.teacher : cfg.teacher_path;
  if (needs_teacher && teacher_path.empty())
    throw UsageError("mode '" + a.mode + "' distills from a teacher; pass --teacher");
  TeacherModel teacher;
  if (needs_teacher) teacher = load_teacher(teacher_path);

  Dataset ds = load_dataset(data_dir);
  const ModelConfig mcfg = model_for(ds.manifest, cfg);
  StudentTrainResult r = train_student(
      ds, teacher, mcfg, with_progress(tcfg, std::string("student/") + a.mode));

  fs::create_directories(out);
  const std::string stem = out + "/student_" + a.mode;
  save_student(stem + ".s2kc", r.model);
  write_file_bytes(stem + "_train.csv", r.report.to_csv());
  const MetricsRow row = evaluate_student(ds, r.model, a.mode);
  write_file_bytes(stem + "_metrics.csv", metrics_to_csv({row}));
  std::printf("student (%s): %zu epochs, best val %.6g (epoch %zu)\n", a.mode.c_str(),
              r.report.epochs.size(), r.report.best_val_loss, r.report.best_epoch);
  std::fputs(metrics_to_csv({row}).c_str(), stdout);
}

struct EvalArgs {
  std::string checkpoint, config, data, out;
};

void cmd_eval(const EvalArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  const std::string data_dir = resolve(a.data, cfg.data_dir, "dataset directory (--data)");
  Dataset ds = load_dataset(data_dir);

  const std::vector<CheckpointEntry> entries = load_checkpoint(a.checkpoint);
  MetricsRow row;
  if (checkpoint_kind(entries) == CheckpointKind::teacher) {
    row = evaluate_teacher(ds, load_teacher(a.checkpoint));
  } else {
    row = evaluate_student(ds, load_student(a.checkpoint), "-");
  }
  const std::string csv = metrics_to_csv({row});
  std::fputs(csv.c_str(), stdout);
  if (!a.out.empty()) write_file_bytes(a.out, csv);
}

void cmd_ablate(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  apply_float_width(cfg, a.float64);
  const std::string data_dir = resolve(a.data, cfg.data_dir, "dataset directory (--data)");
  const std::string out = resolve(a.out, cfg.out_dir, "output directory (--out)");
  const std::string teacher_path =
      resolve(a.teacher, cfg.teacher_path, "teacher checkpoint (--teacher)");

  Dataset ds = load_dataset(data_dir);
  const ModelConfig mcfg = model_for(ds.manifest, cfg);
  TeacherModel teacher = load_teacher(teacher_path);

  std::string current_mode = "?";
  TrainConfig tcfg = train_config(cfg, a);
  tcfg.on_epoch = [&current_mode](const EpochStats& e) {
    std::fprintf(stderr, "[ablate/%s] epoch %zu  train %.6g  val %.6g  lr %.3g  (%.1fs)\n",
                 current_mode.c_str(), e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds);
  };
  const AblationResult result = run_ablation(
      ds, teacher, mcfg, tcfg,
      [&current_mode](const std::string& m) { current_mode = m; });

  fs::create_directories(out);
  write_file_bytes(out + "/ablation.csv", metrics_to_csv(result.rows));
  static const char* kModeNames[] = {"baseline", "spectral", "semantic", "full"};
  for (std::size_t i = 0; i < result.reports.size(); ++i)
    write_file_bytes(out + "/ablate_" + kModeNames[i] + "_train.csv",
                     result.reports[i].to_csv());
  std::fputs(metrics_to_csv(result.rows).c_str(), stdout);
}

struct GradcheckArgs {
  std::string op;
  double tol = 1e-5;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  const std::vector<SuiteResult> results = run_gradcheck_suite(a.op, a.tol);
  bool all_passed = true;
  for (const SuiteResult& r : results) {
    std::printf("[%s] %s wrt %s (max rel err %.3g at index %zu, tol %.3g)\n",
                r.report.passed ? "PASS" : "FAIL", r.op.c_str(), r.input.c_str(),
                r.report.max_rel_err, r.report.worst_index, r.report.tol);
    all_passed = all_passed && r.report.passed;
  }
  std::printf("%zu checks, %s\n", results.size(), all_passed ? "all passed" : "FAILED");
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic-spectral distillation workbench"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "experiment config file");
  gen_cmd->add_option("--out", gen.out, "output dataset directory");
  gen_cmd->add_option("--seed", gen.seed, "override the data seed");

  TrainArgs teacher_args;
  CLI::App* teacher_cmd =
      app.add_subcommand("train-teacher", "stage 1: train and freeze the teacher");
  teacher_cmd->add_option("--config", teacher_args.config, "experiment config file");
  teacher_cmd->add_option("--data", teacher_args.data, "dataset directory");
  teacher_cmd->add_option("--out", teacher_args.out, "output directory");
  teacher_cmd->add_option("--seed", teacher_args.seed, "override the training seed");
  teacher_cmd->add_flag("--float64", teacher_args.float64, "train in 64-bit floats");

  TrainArgs student_args;
  CLI::App* student_cmd =
      app.add_subcommand("train-student", "stage 2: train the vision-only student");
  student_cmd->add_option("--config", student_args.config, "experiment config file");
  student_cmd->add_option("--data", student_args.data, "dataset directory");
  student_cmd->add_option("--teacher", student_args.teacher, "frozen teacher checkpoint");
  student_cmd->add_option("--mode", student_args.mode,
                          "distillation mode: baseline|spectral|semantic|full");
  student_cmd->add_option("--out", student_args.out, "output directory");
  student_cmd->add_option("--seed", student_args.seed, "override the training seed");
  student_cmd->add_flag("--float64", student_args.float64, "train in 64-bit floats");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the test split");
  eval_cmd->add_option("checkpoint", eval_args.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--config", eval_args.config, "experiment config file");
  eval_cmd->add_option("--data", eval_args.data, "dataset directory");
  eval_cmd->add_option("--out", eval_args.out, "also write the metrics CSV here");

  TrainArgs ablate_args;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "train all four distillation modes and compare");
  ablate_cmd->add_option("--config", ablate_args.config, "experiment config file");
  ablate_cmd->add_option("--data", ablate_args.data, "dataset directory");
  ablate_cmd->add_option("--teacher", ablate_args.teacher, "frozen teacher checkpoint");
  ablate_cmd->add_option("--out", ablate_args.out, "output directory");
  ablate_cmd->add_option("--seed", ablate_args.seed, "override the training seed");
  ablate_cmd->add_flag("--float64", ablate_args.float64, "train in 64-bit floats");

  GradcheckArgs gc_args;
  CLI::App* gc_cmd =
      app.add_subcommand("gradcheck", "finite-difference checks for every op");
  gc_cmd->add_option("--op", gc_args.op, "run only this registered op");
  gc_cmd->add_option("--tol", gc_args.tol, "max relative error tolerance");

  try {
    app.parse(argc, argv);
    gen.seed_set = gen_cmd->count("--seed") > 0;
    teacher_args.seed_set = teacher_cmd->count("--seed") > 0;
    student_args.seed_set = student_cmd->count("--seed") > 0;
    ablate_args.seed_set = ablate_cmd->count("--seed") > 0;

    if (*gen_cmd) cmd_gen(gen);
    if (*teacher_cmd) cmd_train_teacher(teacher_args);
    if (*student_cmd) cmd_train_student(student_args);
    if (*eval_cmd) cmd_eval(eval_args);
    if (*ablate_cmd) cmd_ablate(ablate_args);
    if (*gc_cmd) return cmd_gradcheck(gc_args);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
