#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eeikd/datagen.hpp"
#include "eeikd/nets.hpp"
#include "eeikd/tensor.hpp"

// Adaptive threshold selection of substitute samples. A pool sample becomes a
// candidate when the teacher's top softmax probability (temperature 1) is
// strictly above delta = 1 / n^gamma; a budget of them forms the training set.
namespace eeikd::selection {

enum class SubsetPolicy { top_confidence, uniform_random };
enum class TiePolicy { lower_index, higher_index };

std::string to_string(SubsetPolicy policy);
SubsetPolicy parse_subset_policy(std::string_view text);
std::string to_string(TiePolicy policy);
TiePolicy parse_tie_policy(std::string_view text);

struct SelectionConfig {
  double gamma = 0.1;
  std::size_t budget = 4000;
  TiePolicy tie = TiePolicy::lower_index;
  SubsetPolicy policy = SubsetPolicy::uniform_random;

  void validate() const;

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

double adaptive_threshold(std::size_t classes, double gamma);

struct CandidateSet {
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t classes = 0;
  std::size_t pool_size = 0;
  std::vector<std::size_t> indices;  // ascending pool indices, unique
  std::vector<double> confidence;    // teacher max-softmax of each member
  Tensor predictions;                // [members x classes] teacher softmax; absent after loading a file
  bool has_predictions = false;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

// Teacher softmax at temperature 1 for every row, scored in chunks across
// OpenMP threads and stitched back in row order.
Tensor score_pool(const nets::Network& teacher, const Tensor& samples, std::size_t chunk_rows = 512);

namespace reference {
// Same scores, one chunk at a time on the calling thread.
Tensor score_pool(const nets::Network& teacher, const Tensor& samples, std::size_t chunk_rows = 512);
}  // namespace reference

// Thresholds precomputed scores; may return an empty set.
CandidateSet candidates_from_scores(const Tensor& probabilities, double gamma);

// Throws EmptyCandidateSetError when nothing clears the threshold.
CandidateSet build_candidates(const nets::Network& teacher, const datagen::SubstitutePool& pool,
                              const SelectionConfig& config);

CandidateSet select_training_set(const CandidateSet& candidates, std::size_t budget, SubsetPolicy policy,
                                 std::uint64_t seed, TiePolicy tie = TiePolicy::lower_index);

// Content hash of the pool samples, stored in candidate files.
std::uint64_t pool_fingerprint(const datagen::SubstitutePool& pool);

struct CandidateFile {
  CandidateSet set;
  std::uint64_t pool_hash = 0;
};

std::string serialize_candidates(const CandidateSet& set, std::uint64_t pool_hash);
CandidateFile parse_candidates(std::string_view text);
void save_candidates(const CandidateSet& set, std::uint64_t pool_hash, const std::filesystem::path& path);
CandidateFile load_candidates(const std::filesystem::path& path);

}  // namespace eeikd::selection
