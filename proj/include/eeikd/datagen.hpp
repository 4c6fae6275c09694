#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eeikd/tensor.hpp"

// Synthetic stand-ins for the two datasets of data-free distillation: a
// labelled Gaussian-mixture "source" set, only used to train the teacher and
// to score students, and an unlabelled, domain-shifted substitute pool.
namespace eeikd::datagen {

enum class Split { train, test };

struct SourceSpec {
  std::uint64_t seed = 1;
  std::size_t classes = 6;
  std::size_t dim = 16;
  std::size_t per_class = 750;  // split 80/20 into train/test
  double radius = 4.0;

  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct SourceDataset {
  Tensor samples;           // [count x dim]
  std::vector<int> labels;  // in [0, classes)
  std::size_t classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
};

struct SourceSplits {
  SourceDataset train;
  SourceDataset test;
};

// Training-facing view of the substitute pool: samples only.
struct SubstitutePool {
  Tensor samples;  // [pool x dim]

  std::size_t size() const noexcept { return samples.rows(); }
};

// Generating component of every pool sample: tags [0, classes) are shifted
// source classes, tags >= classes are out-of-domain components. Analysis only.
struct PoolProvenance {
  std::vector<int> component;
  std::size_t classes = 0;
  std::size_t ood_components = 0;
};

struct PoolSpec {
  std::uint64_t seed = 1;
  std::size_t pool_size = 20000;
  double overlap = 0.5;
  double shift = 1.5;
  std::size_t ood_components = 0;  // 0 means "same as the class count"

  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct GeneratedPool {
  SubstitutePool pool;
  PoolProvenance provenance;
};

// Class means: radius * u_c with u_c uniform on the unit sphere of R^dim.
Tensor class_means(const SourceSpec& spec);

SourceSplits make_source(const SourceSpec& spec);
GeneratedPool make_substitute(const PoolSpec& pool, const SourceSpec& source);

// Number of pool samples drawn from shifted source components.
std::size_t in_domain_count(const PoolSpec& pool);

// Binary dataset files: magic "EEIKDDAT", u32 version, u32 kind (1 source,
// 2 pool), u64 count, u64 dim, u64 classes, count*dim doubles, then for source
// files count int32 labels. A sidecar "<file>.meta" holds key = value lines.
// Provenance lives in its own file (magic "EEIKDPRV") so pool readers never
// see it.
void save_source(const SourceDataset& data, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& meta = {});
SourceDataset load_source(const std::filesystem::path& path);

void save_pool(const SubstitutePool& pool, const std::filesystem::path& path,
               const std::map<std::string, std::string>& meta = {});
SubstitutePool load_pool(const std::filesystem::path& path);

void save_provenance(const PoolProvenance& provenance, const std::filesystem::path& path);
PoolProvenance load_provenance(const std::filesystem::path& path);

}  // namespace eeikd::datagen
