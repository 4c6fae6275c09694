#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eeikd/datagen.hpp"
#include "eeikd/distill.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/selection.hpp"

namespace eeikd::harness {

struct DataConfig {
  std::size_t classes = 6;
  std::size_t dim = 16;
  std::size_t per_class = 750;  // 600 train + 150 test per class
  double radius = 4.0;
  std::size_t pool_size = 20000;
  double overlap = 0.5;
  double shift = 1.5;
  std::size_t ood_components = 0;  // 0: one out-of-domain component per class

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct TeacherConfig {
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  distill::OptimizerConfig optimizer;
  double accuracy_floor = 0.9;

  friend bool operator==(const TeacherConfig&, const TeacherConfig&) = default;
};

struct StudentConfig {
  std::vector<std::size_t> hidden{64, 32, 64};

  friend bool operator==(const StudentConfig&, const StudentConfig&) = default;
};

struct ExperimentConfig {
  DataConfig data;
  TeacherConfig teacher;
  StudentConfig student;
  selection::SelectionConfig selection;
  distill::DistillConfig distill;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "runs";

  void validate() const;
  nets::NetworkSpec teacher_spec() const;
  nets::NetworkSpec student_spec() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Flat "key = value" text grouped in [sections]; '#' starts a comment.
// Lists are comma separated. Keys left out keep their defaults; unknown
// keys are errors. serialize_config always writes every key in a fixed order.
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace eeikd::harness
