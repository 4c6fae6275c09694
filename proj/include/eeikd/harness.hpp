#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eeikd/config.hpp"
#include "eeikd/datagen.hpp"
#include "eeikd/distill.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/selection.hpp"

// End-to-end experiment driver: data generation, teacher training, selection,
// distillation, and the sweep / ablation protocols built from them.
namespace eeikd::harness {

// Named per-run randomness streams derived from one run seed.
struct SeedPlan {
  std::uint64_t source;
  std::uint64_t pool;
  std::uint64_t teacher_init;
  std::uint64_t teacher_order;
  std::uint64_t subset;
  std::uint64_t student_init;
  std::uint64_t distill_order;

  static SeedPlan from(std::uint64_t run_seed);
};

datagen::SourceSpec source_spec(const ExperimentConfig& config, std::uint64_t run_seed);
datagen::PoolSpec pool_spec(const ExperimentConfig& config, std::uint64_t run_seed);

struct DataBundle {
  datagen::SourceSplits source;
  datagen::GeneratedPool pool;
};

DataBundle generate_data(const ExperimentConfig& config, std::uint64_t run_seed);

struct TeacherEpoch {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_ce = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct TeacherRun {
  nets::Network teacher;
  std::vector<TeacherEpoch> metrics;
  double test_accuracy = 0.0;
};

// Supervised cross-entropy training on the source train split; the returned
// teacher is in eval mode.
TeacherRun train_teacher(const ExperimentConfig& config, const datagen::SourceSplits& source,
                         std::uint64_t run_seed);
std::string teacher_metrics_jsonl(const TeacherRun& run);

struct SelectionRun {
  selection::CandidateSet candidates;    // all samples above the threshold
  selection::CandidateSet training_set;  // the budgeted subset
};

SelectionRun run_selection(const ExperimentConfig& config, const nets::Network& teacher,
                           const datagen::SubstitutePool& pool, std::uint64_t run_seed);

distill::DistillRun run_distill(const ExperimentConfig& config, const nets::Network& teacher,
                                const datagen::SubstitutePool& pool,
                                const std::vector<std::size_t>& training_indices,
                                const datagen::SourceDataset& test, std::uint64_t run_seed);

enum class Axis { gamma, alpha };
std::string to_string(Axis axis);
Axis parse_axis(std::string_view text);

// Default sweep grids.
std::vector<double> default_axis_values(Axis axis);
// Default ablation checkpoint epochs.
std::vector<std::size_t> default_checkpoints();

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double teacher_accuracy = 0.0;
  std::size_t candidates = 0;
  std::size_t selected = 0;
  double final_accuracy = 0.0;
  std::size_t epochs_to_threshold = 0;
  std::vector<double> checkpoint_accuracy;
  std::vector<distill::EpochMetrics> metrics;
};

struct SweepCell {
  std::string label;
  std::vector<SeedResult> seeds;

  std::size_t completed() const;
  double mean_final() const;
  double stddev_final() const;
  double mean_epochs_to_threshold() const;
  double mean_checkpoint(std::size_t i) const;
};

struct SweepReport {
  std::string title;
  std::string axis;                     // "gamma", "alpha" or "loss"
  std::vector<std::size_t> checkpoints; // epochs reported per cell (may be empty)
  std::vector<SweepCell> cells;
};

struct RunOptions {
  std::size_t workers = 1;
  std::optional<std::filesystem::path> out_dir;  // per-cell metrics are written here when set
};

SweepReport run_sweep(const ExperimentConfig& config, Axis axis, const std::vector<double>& values,
                      const RunOptions& options = {});

// Ablation rows: L_KD, L_KD+L_AT, L_KD+L_D, Full. Runs max(checkpoints) epochs.
std::vector<std::string> ablation_rows();
SweepReport run_ablation(const ExperimentConfig& config, const std::vector<std::size_t>& checkpoints,
                         const RunOptions& options = {});
// Same rows but only those named; used when a protocol needs a subset.
SweepReport run_ablation(const ExperimentConfig& config, const std::vector<std::size_t>& checkpoints,
                         const std::vector<std::string>& rows, const RunOptions& options);

std::string render_table(const SweepReport& report);
std::string render_csv(const SweepReport& report);

}  // namespace eeikd::harness
