#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "eeikd/config.hpp"
#include "eeikd/errors.hpp"
#include "eeikd/harness.hpp"
#include "eeikd/io.hpp"
#include "eeikd/rng.hpp"

using namespace eeikd;
namespace fs = std::filesystem;

namespace {

harness::ExperimentConfig small_config() {
  harness::ExperimentConfig c;
  c.data.per_class = 100;
  c.data.pool_size = 2000;
  c.teacher.epochs = 5;
  c.selection.budget = 500;
  c.distill.epochs = 3;
  c.seeds = {1, 2};
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "eeikd_harness_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EEIKD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("seed streams are distinct, stable and independent of each other") {
  const auto a = harness::SeedPlan::from(1), b = harness::SeedPlan::from(1), c = harness::SeedPlan::from(2);
  const std::set<std::uint64_t> streams{a.source, a.pool, a.teacher_init, a.teacher_order,
                                        a.subset, a.student_init, a.distill_order};
  CHECK(streams.size() == 7);
  CHECK(a.source == b.source);
  CHECK(a.source != c.source);
  CHECK(a.source == splitmix64(1 ^ fnv1a64("data.source")));
  // FNV-1a 64 of the empty string is its offset basis.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
}

TEST_CASE("config serialization round trips byte for byte") {
  auto c = small_config();
  c.selection.policy = selection::SubsetPolicy::top_confidence;
  c.distill.mask_student = false;
  c.distill.optimizer.milestones = {0.3};
  c.distill.huber_delta = 0.1 + 0.2;  // not exactly representable in a short decimal
  c.output_dir = "some/dir";
  const auto text = harness::serialize_config(c);
  const auto back = harness::parse_config(text);
  CHECK(back == c);
  CHECK(harness::serialize_config(back) == text);
  CHECK(harness::serialize_config(harness::parse_config(harness::serialize_config({}))) ==
        harness::serialize_config({}));
}

TEST_CASE("config parsing keeps defaults and rejects nonsense") {
  const auto c = harness::parse_config("# comment\n[distill]\nalpha = 0.5\n\n[run]\nseeds = 4,5\n");
  CHECK(c.distill.alpha == 0.5);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.teacher.epochs == harness::ExperimentConfig{}.teacher.epochs);
  CHECK_THROWS_AS(harness::parse_config("[distill]\nalpha_typo = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("alpha = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("[distill]\nalpha = lots\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("[distill]\nmask_student = maybe\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("[nowhere]\nx = 1\n"), ConfigError);
}

TEST_CASE("config validation covers the pairing and grids") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.student.hidden = {32, 64};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("table grids and rows") {
  CHECK(harness::default_axis_values(harness::Axis::gamma) == std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.5});
  CHECK(harness::default_axis_values(harness::Axis::alpha) == std::vector<double>{0.0, 0.3, 0.5, 0.7, 0.9});
  CHECK(harness::default_checkpoints() == std::vector<std::size_t>{20, 50, 100, 200});
  CHECK(harness::ablation_rows() == std::vector<std::string>{"L_KD", "L_KD+L_AT", "L_KD+L_D", "Full"});
  CHECK(harness::parse_axis("gamma") == harness::Axis::gamma);
  CHECK_THROWS_AS(harness::parse_axis("tau"), ConfigError);
}

TEST_CASE("teacher training is reproducible; zero epochs is near chance") {
  auto c = small_config();
  const auto data = harness::generate_data(c, 3);
  const auto a = harness::train_teacher(c, data.source, 3), b = harness::train_teacher(c, data.source, 3);
  CHECK(nets::serialize_checkpoint(a.teacher) == nets::serialize_checkpoint(b.teacher));
  CHECK(harness::teacher_metrics_jsonl(a) == harness::teacher_metrics_jsonl(b));
  CHECK(a.teacher.mode() == nets::Mode::eval);
  CHECK(a.metrics.size() == 5);

  c.teacher.epochs = 0;
  const auto untrained = harness::train_teacher(c, data.source, 3);
  // 600 test rows, chance is 1/6; allow a wide band since a random net is not uniform.
  CHECK(untrained.test_accuracy < 0.45);
  CHECK(untrained.metrics.empty());
}

TEST_CASE("sweeps are deterministic and record failures per cell") {
  auto c = small_config();
  const std::vector<double> alphas{0.0, 0.3, 0.9};
  const auto a = harness::run_sweep(c, harness::Axis::alpha, alphas);
  const auto b = harness::run_sweep(c, harness::Axis::alpha, alphas);
  CHECK(harness::render_csv(a) == harness::render_csv(b));
  REQUIRE(a.cells.size() == 3);
  CHECK(a.cells[0].completed() == 2);
  CHECK(a.cells[1].completed() == 2);
  // alpha = 0.9 keeps no class when n = 6.
  CHECK(a.cells[2].completed() == 0);
  CHECK(a.cells[2].seeds[0].error.find("keeps no class") != std::string::npos);
  const auto table = harness::render_table(a);
  CHECK(table.find("FAILED") != std::string::npos);
  CHECK(harness::render_csv(a).find("alpha,0.9,failed,0,2") != std::string::npos);

  // Parallel slots give the same report.
  const auto p = harness::run_sweep(c, harness::Axis::alpha, alphas, {2, std::nullopt});
  CHECK(harness::render_csv(p) == harness::render_csv(a));
}

TEST_CASE("sweep arms change only the swept value") {
  auto c = small_config();
  c.seeds = {4};
  const auto r = harness::run_sweep(c, harness::Axis::gamma, {0.1, 0.5});
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].label == "0.1");
  CHECK(r.cells[0].seeds[0].teacher_accuracy == r.cells[1].seeds[0].teacher_accuracy);
  CHECK(r.cells[0].seeds[0].candidates <= r.cells[1].seeds[0].candidates);
}

TEST_CASE("ablation rows and checkpoints") {
  auto c = small_config();
  c.seeds = {1};
  const auto dir = scratch("ablate");
  const auto r = harness::run_ablation(c, {1, 4}, {1, dir});
  REQUIRE(r.cells.size() == 4);
  CHECK(r.cells[0].label == "L_KD");
  CHECK(r.cells[3].label == "Full");
  for (const auto& cell : r.cells) {
    REQUIRE(cell.completed() == 1);
    CHECK(cell.seeds[0].metrics.size() == 4);
    CHECK(cell.seeds[0].checkpoint_accuracy.size() == 2);
    CHECK(cell.seeds[0].checkpoint_accuracy[1] == cell.seeds[0].final_accuracy);
  }
  // The L_KD row logs zero-weighted extra terms but its total is KD alone.
  for (const auto& m : r.cells[0].seeds[0].metrics) CHECK(m.loss_total == m.loss_kd);
  CHECK(fs::exists(dir / "cells" / "loss_Full_seed1.jsonl"));
  CHECK(harness::render_csv(r).find("acc_epoch_4") != std::string::npos);
  CHECK_THROWS_AS(harness::run_ablation(c, {0}, {}), ConfigError);
  CHECK_THROWS_AS(harness::run_ablation(c, {2}, {"Bogus"}, {}), ConfigError);

  // Same loss weights and seed: the L_KD row is exactly a plain KD run.
  c.distill.lambda_feature = 0.0;
  c.distill.lambda_relation = 0.0;
  c.distill.epochs = 4;
  const auto data = harness::generate_data(c, 1);
  const auto teacher = harness::train_teacher(c, data.source, 1);
  const auto sel = harness::run_selection(c, teacher.teacher, data.pool.pool, 1);
  const auto run = harness::run_distill(c, teacher.teacher, data.pool.pool, sel.training_set.indices,
                                        data.source.test, 1);
  CHECK(distill::metrics_jsonl(run.metrics) == distill::metrics_jsonl(r.cells[0].seeds[0].metrics));
}

TEST_CASE("command line pipeline and exit codes") {
  const auto dir = scratch("cli");
  auto c = small_config();
  c.seeds = {1};
  harness::save_config(c, dir / "small.ini");
  const std::string common = "--config " + (dir / "small.ini").string() + " --out " + (dir / "run").string();
  CHECK(run_cli("gen-data " + common) == 0);
  CHECK(fs::exists(dir / "run" / "pool.dat"));
  CHECK(run_cli("train-teacher " + common) == 0);
  CHECK(run_cli("select " + common) == 0);
  CHECK(run_cli("distill " + common) == 0);
  CHECK(fs::exists(dir / "run" / "distill_metrics.jsonl"));
  CHECK(fs::exists(dir / "run" / "student.ckpt"));
  CHECK(harness::load_config(dir / "run" / "config.ini").data.pool_size == 2000);

  // An unreachable floor is a warning exit; a tiny gamma empties the candidate set.
  auto hard = c;
  hard.teacher.accuracy_floor = 1.01;
  harness::save_config(hard, dir / "hard.ini");
  CHECK(run_cli("train-teacher --config " + (dir / "hard.ini").string() + " --out " + (dir / "run").string()) == 2);
  CHECK(run_cli("select " + common) == 0);
  auto strict = c;
  strict.selection.gamma = 1e-9;
  harness::save_config(strict, dir / "strict.ini");
  CHECK(run_cli("select --config " + (dir / "strict.ini").string() + " --out " + (dir / "run").string()) == 3);

  CHECK(run_cli("distill --out " + (dir / "empty").string()) == 1);
  CHECK(run_cli("sweep " + common + " --axis tau") == 1);
  CHECK(run_cli("frobnicate") != 0);

  // Failed cells still flush the report, then exit non-zero.
  CHECK(run_cli("sweep " + common + " --axis alpha --values 0.3,0.9") == 1);
  CHECK(fs::exists(dir / "run" / "sweep_alpha.csv"));
  CHECK(io::read_file(dir / "run" / "sweep_alpha.csv").find("failed") != std::string::npos);
}
