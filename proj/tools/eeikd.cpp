// eeikd: desk-scale experiment driver.
//
//   eeikd gen-data      --out DIR
//   eeikd train-teacher --out DIR
//   eeikd select        --out DIR
//   eeikd distill       --out DIR
//   eeikd sweep         --axis gamma|alpha [--values 0.05,0.1] --out DIR
//   eeikd ablate        [--checkpoints 20,50] --out DIR
//
// All commands accept --config FILE and --seed N. Stage commands read the
// files earlier stages left in DIR.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eeikd/config.hpp"
#include "eeikd/datagen.hpp"
#include "eeikd/distill.hpp"
#include "eeikd/errors.hpp"
#include "eeikd/harness.hpp"
#include "eeikd/io.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/selection.hpp"

namespace fs = std::filesystem;
using namespace eeikd;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kWeakTeacher = 2;
constexpr int kNoCandidates = 3;

namespace files {
constexpr const char* config = "config.ini";
constexpr const char* train = "source_train.dat";
constexpr const char* test = "source_test.dat";
constexpr const char* pool = "pool.dat";
constexpr const char* provenance = "pool_provenance.dat";
constexpr const char* teacher = "teacher.ckpt";
constexpr const char* teacher_metrics = "teacher_metrics.jsonl";
constexpr const char* teacher_timing = "teacher_timing.jsonl";
constexpr const char* candidates = "candidates.txt";
constexpr const char* training_set = "training_set.txt";
constexpr const char* student = "student.ckpt";
constexpr const char* distill_metrics = "distill_metrics.jsonl";
constexpr const char* distill_timing = "distill_timing.jsonl";
}  // namespace files

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 1;
};

harness::ExperimentConfig load(const Common& c) {
  auto cfg = c.config_path.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config_path);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const harness::ExperimentConfig& cfg) { return fs::path(cfg.output_dir); }

std::uint64_t run_seed(const harness::ExperimentConfig& cfg) { return cfg.seeds.front(); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::map<std::string, std::string> meta_for(const harness::ExperimentConfig& cfg) {
  return {{"seed", std::to_string(run_seed(cfg))},
          {"classes", std::to_string(cfg.data.classes)},
          {"dim", std::to_string(cfg.data.dim)}};
}

void write_source(const harness::ExperimentConfig& cfg, const datagen::SourceSplits& source) {
  const auto dir = out_dir(cfg);
  datagen::save_source(source.train, dir / files::train, meta_for(cfg));
  datagen::save_source(source.test, dir / files::test, meta_for(cfg));
}

int cmd_gen_data(const harness::ExperimentConfig& cfg) {
  const auto dir = out_dir(cfg);
  harness::save_config(cfg, dir / files::config);
  const auto data = harness::generate_data(cfg, run_seed(cfg));
  write_source(cfg, data.source);
  datagen::save_pool(data.pool.pool, dir / files::pool, meta_for(cfg));
  datagen::save_provenance(data.pool.provenance, dir / files::provenance);
  std::cout << "source: " << data.source.train.size() << " train, " << data.source.test.size() << " test, "
            << cfg.data.classes << " classes\n"
            << "pool: " << data.pool.pool.size() << " samples\n";
  return kOk;
}

int cmd_train_teacher(const harness::ExperimentConfig& cfg) {
  const auto dir = out_dir(cfg);
  harness::save_config(cfg, dir / files::config);
  datagen::SourceSplits source;
  if (fs::exists(dir / files::train) && fs::exists(dir / files::test)) {
    source = {datagen::load_source(dir / files::train), datagen::load_source(dir / files::test)};
  } else {
    source = datagen::make_source(harness::source_spec(cfg, run_seed(cfg)));
    write_source(cfg, source);
  }
  const auto run = harness::train_teacher(cfg, source, run_seed(cfg));
  nets::save_checkpoint(run.teacher, dir / files::teacher);
  io::write_file_atomic(dir / files::teacher_metrics, harness::teacher_metrics_jsonl(run));
  std::string timing;
  for (const auto& m : run.metrics)
    timing += "{\"epoch\":" + std::to_string(m.epoch) + ",\"wall_time_s\":" + io::format_double(m.wall_seconds) + "}\n";
  io::write_file_atomic(dir / files::teacher_timing, timing);
  std::cout << "teacher test accuracy: " << percent(run.test_accuracy) << "\n";
  if (run.test_accuracy < cfg.teacher.accuracy_floor) {
    std::cerr << "warning: teacher accuracy " << percent(run.test_accuracy) << " is below the floor "
              << percent(cfg.teacher.accuracy_floor) << "\n";
    return kWeakTeacher;
  }
  return kOk;
}

int cmd_select(const harness::ExperimentConfig& cfg) {
  const auto dir = out_dir(cfg);
  harness::save_config(cfg, dir / files::config);
  const auto teacher = nets::load_checkpoint(dir / files::teacher);
  const auto pool = datagen::load_pool(dir / files::pool);
  const auto run = harness::run_selection(cfg, teacher, pool, run_seed(cfg));
  const auto hash = selection::pool_fingerprint(pool);
  selection::save_candidates(run.candidates, hash, dir / files::candidates);
  selection::save_candidates(run.training_set, hash, dir / files::training_set);
  std::cout << "delta: " << io::format_double(run.candidates.delta) << "\n"
            << "candidates: " << run.candidates.size() << " of " << pool.size() << "\n"
            << "selected: " << run.training_set.size() << "\n";
  return kOk;
}

int cmd_distill(const harness::ExperimentConfig& cfg) {
  const auto dir = out_dir(cfg);
  harness::save_config(cfg, dir / files::config);
  const auto teacher = nets::load_checkpoint(dir / files::teacher);
  const auto pool = datagen::load_pool(dir / files::pool);
  const auto test = datagen::load_source(dir / files::test);
  const auto chosen = selection::load_candidates(dir / files::training_set);
  if (chosen.pool_hash != selection::pool_fingerprint(pool))
    throw ConfigError("training set was selected from a different pool; re-run select");
  auto run = harness::run_distill(cfg, teacher, pool, chosen.set.indices, test, run_seed(cfg));
  nets::save_checkpoint(run.student, dir / files::student);
  io::write_file_atomic(dir / files::distill_metrics, distill::metrics_jsonl(run.metrics));
  io::write_file_atomic(dir / files::distill_timing, distill::timing_jsonl(run.metrics));
  std::cout << "student test accuracy: " << percent(distill::accuracy(run.student, test)) << "\n"
            << "teacher test accuracy: " << percent(distill::accuracy(teacher, test)) << "\n";
  return kOk;
}

int report(const harness::ExperimentConfig& cfg, const harness::SweepReport& rep, const std::string& stem) {
  const auto dir = out_dir(cfg);
  const auto table = harness::render_table(rep);
  io::write_file_atomic(dir / (stem + ".csv"), harness::render_csv(rep));
  io::write_file_atomic(dir / (stem + ".txt"), table);
  std::cout << table;
  for (const auto& cell : rep.cells)
    for (const auto& s : cell.seeds)
      if (!s.ok) return kError;
  return kOk;
}

harness::RunOptions options(const harness::ExperimentConfig& cfg, const Common& c) {
  if (c.workers == 0) throw ConfigError("--workers must be at least 1");
  return {c.workers, out_dir(cfg)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-free knowledge distillation desk lab"};
  app.require_subcommand(1);
  Common common;
  std::string axis_name;
  std::vector<double> values;
  std::vector<std::size_t> checkpoints;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Config file (key = value with sections)")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Run seed; replaces the config's seed list");
    sub->add_option("--out", common.out, "Output directory; overrides run.output_dir");
    sub->add_option("--workers", common.workers, "Parallel sweep slots (1 = serial)");
    return sub;
  };
  auto* gen = add_common(app.add_subcommand("gen-data", "Generate the source dataset and substitute pool"));
  auto* teacher = add_common(app.add_subcommand("train-teacher", "Train the teacher on the source split"));
  auto* select = add_common(app.add_subcommand("select", "Score the pool and write the training set"));
  auto* distill_cmd = add_common(app.add_subcommand("distill", "Distill a student from the selected set"));
  auto* sweep = add_common(app.add_subcommand("sweep", "Sweep gamma or alpha over seeds"));
  sweep->add_option("--axis", axis_name, "gamma or alpha")->required();
  sweep->add_option("--values", values, "Comma-separated grid (default: the standard grid for the axis)")->delimiter(',');
  auto* ablate = add_common(app.add_subcommand("ablate", "Run the four loss-combination rows"));
  ablate->add_option("--checkpoints", checkpoints, "Comma-separated epochs (default 20,50,100,200)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(common);
    if (*gen) return cmd_gen_data(cfg);
    if (*teacher) return cmd_train_teacher(cfg);
    if (*select) return cmd_select(cfg);
    if (*distill_cmd) return cmd_distill(cfg);
    if (*sweep) {
      const auto axis = harness::parse_axis(axis_name);
      if (values.empty()) values = harness::default_axis_values(axis);
      harness::save_config(cfg, out_dir(cfg) / files::config);
      return report(cfg, harness::run_sweep(cfg, axis, values, options(cfg, common)), "sweep_" + axis_name);
    }
    if (*ablate) {
      if (checkpoints.empty()) checkpoints = harness::default_checkpoints();
      harness::save_config(cfg, out_dir(cfg) / files::config);
      return report(cfg, harness::run_ablation(cfg, checkpoints, options(cfg, common)), "ablation");
    }
  } catch (const EmptyCandidateSetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoCandidates;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
