#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eeikd/autodiff.hpp"
#include "eeikd/datagen.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/tensor.hpp"

namespace eeikd::distill {

struct OptimizerConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> milestones{0.5, 0.75};  // fractions of the epoch budget
  double decay = 0.1;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.3;            // class-dropping rate
  double lambda_feature = 0.1;   // weight of the two-tap L1 feature loss
  double lambda_relation = 1.0;  // weight of the relation loss
  double huber_delta = 1.0;
  double xi_epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 40;
  OptimizerConfig optimizer;
  bool mask_student = true;    // apply the teacher's class mask to student logits too
  bool class_dropping = true;  // false skips every masking step

  void validate(std::size_t classes) const;

  friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

/// K = floor((1 - alpha) * n); throws ConfigError when K < 1 or alpha is outside [0, 1).
std::size_t kept_classes(std::size_t classes, double alpha);

/// Per-row 0/1 mask keeping the K most probable classes. Ties at the K-th
/// value go to the lower class index, so exactly K entries survive.
Tensor class_drop_mask(const Tensor& probabilities, double alpha);

struct MaskedPrediction {
  Tensor mask;           // 0/1, same shape as the logits
  Tensor masked_logits;  // dropped entries hold ad::kMasked
  Tensor distribution;   // softmax(masked_logits / temperature)
};

MaskedPrediction apply_mask(const Tensor& logits, const Tensor& mask, double temperature);

/// tau^2 * mean over rows of KL(teacher || student) on softened distributions.
ad::Var kd_loss(const MaskedPrediction& teacher, ad::Var student_logits, double temperature,
                bool mask_student = true);

/// Student distribution that kd_loss and the relation term compare against.
ad::Var student_distribution(const MaskedPrediction& teacher, ad::Var student_logits, double temperature,
                             bool mask_student);

struct FeatureLoss {
  ad::Var front;  // mean over batch of L1 / width at the front tap
  ad::Var back;   // same at the back tap
  ad::Var total;  // front + back
};

FeatureLoss feature_loss(const Tensor& teacher_front, const Tensor& teacher_back, ad::Var student_front,
                         ad::Var student_back);

struct RelationStats {
  ad::Var psi;  // [N] mean L2 distance from each row to the others
  ad::Var xi;   // mean of psi
};

RelationStats relation_stats(ad::Var predictions);

/// Mean over rows of Huber(psi_t / xi_t, psi_s / xi_s), with xi floored at xi_epsilon.
ad::Var relation_loss(ad::Var teacher_predictions, ad::Var student_predictions, double huber_delta,
                      double xi_epsilon = 1e-8);

struct LossParts {
  ad::Var kd;
  ad::Var feature;
  ad::Var relation;
};

ad::Var total_loss(const LossParts& parts, double lambda_feature, double lambda_relation);

// Eval-mode teacher outputs for a set of inputs, computed once per run.
struct TeacherTargets {
  Tensor logits;
  Tensor front;
  Tensor back;
};

TeacherTargets teacher_targets(const nets::Network& teacher, const Tensor& inputs);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double loss_kd = 0.0;
  double loss_at_front = 0.0;
  double loss_at_back = 0.0;
  double loss_at = 0.0;
  double loss_d = 0.0;
  double loss_total = 0.0;
  double train_agreement = 0.0;  // student top-1 == teacher top-1 on the training set
  double test_accuracy = 0.0;    // source test split
  double wall_seconds = 0.0;     // kept out of the metrics file
};

struct DistillRun {
  nets::Network student;
  std::vector<EpochMetrics> metrics;
};

DistillRun distill_student(const nets::Network& teacher, nets::Network student, const Tensor& train_inputs,
                           const datagen::SourceDataset& test, const DistillConfig& config,
                           std::uint64_t seed);

double accuracy(const nets::Network& net, const datagen::SourceDataset& data);

/// First 1-based epoch whose accuracy reaches fraction * final accuracy; 0 when empty.
std::size_t epochs_to_threshold(const std::vector<double>& accuracies, double fraction = 0.9);

std::string metrics_jsonl(const std::vector<EpochMetrics>& metrics);
std::string timing_jsonl(const std::vector<EpochMetrics>& metrics);

}  // namespace eeikd::distill
