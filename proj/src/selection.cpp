#include "eeikd/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "eeikd/autodiff.hpp"
#include "eeikd/errors.hpp"
#include "eeikd/io.hpp"
#include "eeikd/rng.hpp"

namespace eeikd::selection {

std::string to_string(SubsetPolicy policy) {
  return policy == SubsetPolicy::top_confidence ? "top-confidence" : "uniform-random";
}

SubsetPolicy parse_subset_policy(std::string_view text) {
  if (text == "top-confidence") return SubsetPolicy::top_confidence;
  if (text == "uniform-random") return SubsetPolicy::uniform_random;
  throw ConfigError("unknown subset policy '" + std::string(text) + "'");
}

std::string to_string(TiePolicy policy) {
  return policy == TiePolicy::lower_index ? "lower-index" : "higher-index";
}

TiePolicy parse_tie_policy(std::string_view text) {
  if (text == "lower-index") return TiePolicy::lower_index;
  if (text == "higher-index") return TiePolicy::higher_index;
  throw ConfigError("unknown tie policy '" + std::string(text) + "'");
}

void SelectionConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must satisfy 0 < gamma < 1");
  if (budget == 0) throw ConfigError("selection budget must be positive");
}

double adaptive_threshold(std::size_t classes, double gamma) {
  if (classes < 2) throw ConfigError("adaptive threshold needs at least 2 classes");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must satisfy 0 < gamma < 1");
  return 1.0 / std::pow(static_cast<double>(classes), gamma);
}

namespace {

void score_chunk(const nets::Network& teacher, const Tensor& samples, std::size_t begin, std::size_t end,
                 Tensor& out) {
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  const Tensor probs = ad::softmax_values(teacher.infer(samples.gather_rows(rows)).logits, 1.0);
  std::copy(probs.values().begin(), probs.values().end(), out.row(begin).begin());
}

void check_scoring_inputs(const nets::Network& teacher, const Tensor& samples, std::size_t chunk_rows) {
  if (teacher.mode() != nets::Mode::eval) throw ConfigError("pool scoring needs the teacher in eval mode");
  if (chunk_rows == 0) throw ConfigError("chunk size must be positive");
  if (samples.rank() != 2) throw DimensionError("pool samples must be a matrix");
}

}  // namespace

Tensor score_pool(const nets::Network& teacher, const Tensor& samples, std::size_t chunk_rows) {
  check_scoring_inputs(teacher, samples, chunk_rows);
  const std::size_t n = samples.rows();
  Tensor out(Shape{n, teacher.spec().classes});
  const auto chunks = static_cast<std::int64_t>((n + chunk_rows - 1) / chunk_rows);
  // Eval-mode rows are independent, so chunking never changes a score.
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk_rows;
    score_chunk(teacher, samples, begin, std::min(n, begin + chunk_rows), out);
  }
  return out;
}

namespace reference {

Tensor score_pool(const nets::Network& teacher, const Tensor& samples, std::size_t chunk_rows) {
  check_scoring_inputs(teacher, samples, chunk_rows);
  const std::size_t n = samples.rows();
  Tensor out(Shape{n, teacher.spec().classes});
  for (std::size_t begin = 0; begin < n; begin += chunk_rows)
    score_chunk(teacher, samples, begin, std::min(n, begin + chunk_rows), out);
  return out;
}

}  // namespace reference

CandidateSet candidates_from_scores(const Tensor& probabilities, double gamma) {
  CandidateSet set;
  set.classes = probabilities.cols();
  set.pool_size = probabilities.rows();
  set.gamma = gamma;
  set.delta = adaptive_threshold(set.classes, gamma);
  const auto top = ad::max_rows(probabilities);
  for (std::size_t i = 0; i < top.size(); ++i)
    if (top[i] > set.delta) {
      set.indices.push_back(i);
      set.confidence.push_back(top[i]);
    }
  set.predictions = set.indices.empty() ? Tensor() : probabilities.gather_rows(set.indices);
  set.has_predictions = !set.indices.empty();
  return set;
}

CandidateSet build_candidates(const nets::Network& teacher, const datagen::SubstitutePool& pool,
                              const SelectionConfig& config) {
  config.validate();
  if (pool.size() == 0) throw ConfigError("substitute pool is empty");
  CandidateSet set = candidates_from_scores(score_pool(teacher, pool.samples), config.gamma);
  if (set.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "no pool sample exceeds delta = %.6f (gamma = %g); try a larger gamma", set.delta,
                  config.gamma);
    throw EmptyCandidateSetError(buf);
  }
  return set;
}

CandidateSet select_training_set(const CandidateSet& candidates, std::size_t budget, SubsetPolicy policy,
                                 std::uint64_t seed, TiePolicy tie) {
  if (candidates.size() <= budget) return candidates;
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  if (policy == SubsetPolicy::top_confidence) {
    // Positions follow pool-index order, so position order is index order.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (candidates.confidence[a] != candidates.confidence[b])
        return candidates.confidence[a] > candidates.confidence[b];
      return tie == TiePolicy::lower_index ? a < b : a > b;
    });
  } else {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  order.resize(budget);
  std::sort(order.begin(), order.end());

  CandidateSet out;
  out.gamma = candidates.gamma;
  out.delta = candidates.delta;
  out.classes = candidates.classes;
  out.pool_size = candidates.pool_size;
  for (auto pos : order) {
    out.indices.push_back(candidates.indices[pos]);
    out.confidence.push_back(candidates.confidence[pos]);
  }
  if (candidates.has_predictions) {
    out.predictions = candidates.predictions.gather_rows(order);
    out.has_predictions = true;
  }
  return out;
}

std::uint64_t pool_fingerprint(const datagen::SubstitutePool& pool) {
  const auto values = pool.samples.values();
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()), values.size_bytes()));
}

namespace {

constexpr std::string_view kCandidateHeader = "eeikd-candidates 1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_candidates(const CandidateSet& set, std::uint64_t pool_hash) {
  std::string out;
  out += std::string(kCandidateHeader) + "\n";
  out += "pool_hash " + hex64(pool_hash) + "\n";
  out += "pool_size " + std::to_string(set.pool_size) + "\n";
  out += "classes " + std::to_string(set.classes) + "\n";
  out += "gamma " + io::format_double(set.gamma) + "\n";
  out += "delta " + io::format_double(set.delta) + "\n";
  out += "count " + std::to_string(set.size()) + "\n";
  for (std::size_t i = 0; i < set.size(); ++i)
    out += std::to_string(set.indices[i]) + " " + io::format_double(set.confidence[i]) + "\n";
  return out;
}

CandidateFile parse_candidates(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCandidateHeader) throw FormatError("not a candidate file");
  auto field = [&](std::string_view key) {
    if (!std::getline(in, line)) throw FormatError("candidate file truncated");
    const auto space = line.find(' ');
    if (space == std::string::npos || std::string_view(line).substr(0, space) != key)
      throw FormatError("expected '" + std::string(key) + "' in candidate file");
    return line.substr(space + 1);
  };
  CandidateFile file;
  file.pool_hash = std::stoull(field("pool_hash"), nullptr, 16);
  file.set.pool_size = std::stoull(field("pool_size"));
  file.set.classes = std::stoull(field("classes"));
  file.set.gamma = io::parse_double(field("gamma"));
  file.set.delta = io::parse_double(field("delta"));
  const std::size_t count = std::stoull(field("count"));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError("candidate file truncated");
    const auto space = line.find(' ');
    if (space == std::string::npos) throw FormatError("malformed candidate row");
    const std::size_t index = std::stoull(line.substr(0, space));
    if (index >= file.set.pool_size || (!file.set.indices.empty() && index <= file.set.indices.back()))
      throw FormatError("candidate indices must be ascending and inside the pool");
    file.set.indices.push_back(index);
    file.set.confidence.push_back(io::parse_double(std::string_view(line).substr(space + 1)));
  }
  if (std::getline(in, line) && !line.empty()) throw FormatError("trailing data in candidate file");
  return file;
}

void save_candidates(const CandidateSet& set, std::uint64_t pool_hash, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_candidates(set, pool_hash));
}

CandidateFile load_candidates(const std::filesystem::path& path) {
  return parse_candidates(io::read_file(path));
}

}  // namespace eeikd::selection
