#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "eeikd/errors.hpp"
#include "eeikd/harness.hpp"
#include "eeikd/selection.hpp"
#include "oracles/naive.hpp"

using namespace eeikd;
using doctest::Approx;

namespace {

Tensor random_probs(std::size_t rows, std::size_t classes, std::uint64_t seed, double sd = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  Tensor z({rows, classes});
  for (double& v : z.values()) v = normal(rng);
  return ad::softmax_values(z);
}

struct Trained {
  harness::DataBundle data;
  harness::TeacherRun teacher;
};

const Trained& trained() {
  static const Trained t = [] {
    harness::ExperimentConfig cfg;
    auto data = harness::generate_data(cfg, 1);
    auto teacher = harness::train_teacher(cfg, data.source, 1);
    return Trained{std::move(data), std::move(teacher)};
  }();
  return t;
}

}  // namespace

TEST_CASE("adaptive threshold examples") {
  CHECK(selection::adaptive_threshold(10, 0.1) == Approx(0.7943282347242815).epsilon(1e-12));
  CHECK(selection::adaptive_threshold(100, 0.1) == Approx(0.6309573444801932).epsilon(1e-12));
  CHECK(selection::adaptive_threshold(10, 1e-9) == Approx(1.0).epsilon(1e-8));
  for (double g : {0.0, 1.0, -0.2, 1.5}) CHECK_THROWS_AS(selection::adaptive_threshold(10, g), ConfigError);
  CHECK_THROWS_AS(selection::adaptive_threshold(1, 0.5), ConfigError);
}

TEST_CASE("threshold is decreasing in gamma and n and stays in (1/n, 1)") {
  for (std::size_t n : {2u, 3u, 6u, 10u, 100u}) {
    double last = 1.0;
    for (double g = 0.05; g < 1.0; g += 0.05) {
      const double d = selection::adaptive_threshold(n, g);
      CHECK(d < last);
      CHECK(d > 1.0 / static_cast<double>(n));
      CHECK(d < 1.0);
      CHECK(selection::adaptive_threshold(n + 1, g) < d);
      last = d;
    }
  }
}

TEST_CASE("policy names round trip") {
  for (auto p : {selection::SubsetPolicy::top_confidence, selection::SubsetPolicy::uniform_random})
    CHECK(selection::parse_subset_policy(selection::to_string(p)) == p);
  for (auto p : {selection::TiePolicy::lower_index, selection::TiePolicy::higher_index})
    CHECK(selection::parse_tie_policy(selection::to_string(p)) == p);
  CHECK_THROWS_AS(selection::parse_subset_policy("entropy"), ConfigError);
}

TEST_CASE("a uniform teacher yields no candidates") {
  auto teacher = nets::Network::zeros(nets::NetworkSpec::mlp(16, {8, 8}, 6));
  teacher.set_mode(nets::Mode::eval);
  datagen::PoolSpec spec;
  spec.pool_size = 200;
  const auto pool = datagen::make_substitute(spec, {});
  CHECK(selection::candidates_from_scores(selection::score_pool(teacher, pool.pool.samples), 0.9).empty());
  CHECK_THROWS_AS(selection::build_candidates(teacher, pool.pool, {}), EmptyCandidateSetError);
  teacher.set_mode(nets::Mode::train);
  CHECK_THROWS_AS(selection::build_candidates(teacher, pool.pool, {}), ConfigError);
}

TEST_CASE("samples exactly at the threshold are excluded") {
  const double delta = selection::adaptive_threshold(4, 0.5);
  const double rest = (1.0 - delta) / 3.0;
  const Tensor probs = Tensor::matrix({{delta, rest, rest, rest}, {0.9, 0.05, 0.03, 0.02}});
  const auto c = selection::candidates_from_scores(probs, 0.5);
  CHECK(c.indices == std::vector<std::size_t>{1});
  CHECK(c.confidence == std::vector<double>{0.9});
  CHECK(c.delta == delta);
}

TEST_CASE("candidate sets are nested in gamma") {
  const auto probs = random_probs(3000, 6, 1);
  std::vector<std::size_t> last;
  for (double g : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    const auto c = selection::candidates_from_scores(probs, g);
    CHECK(std::includes(c.indices.begin(), c.indices.end(), last.begin(), last.end()));
    CHECK(std::is_sorted(c.indices.begin(), c.indices.end()));
    for (double conf : c.confidence) CHECK(conf > c.delta);
    last = c.indices;
  }
}

TEST_CASE("candidate set equals a brute-force per-sample rescan on the desk teacher") {
  const auto& t = trained();
  const auto& samples = t.data.pool.pool.samples;
  for (double gamma : {0.1, 0.3}) {
    selection::SelectionConfig cfg;
    cfg.gamma = gamma;
    const auto c = selection::build_candidates(t.teacher.teacher, t.data.pool.pool, cfg);
    const double delta = 1.0 / std::pow(6.0, gamma);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      const std::vector<std::size_t> one{i};
      const auto logits = t.teacher.teacher.infer(samples.gather_rows(one)).logits;
      const auto p = oracle::softmax({logits.values().begin(), logits.values().end()});
      if (*std::max_element(p.begin(), p.end()) > delta) expect.push_back(i);
    }
    CHECK(c.indices == expect);
    CHECK(c.has_predictions);
    REQUIRE(c.predictions.rows() == c.size());
    for (std::size_t m = 0; m < c.size(); m += 97) {
      const auto p = c.predictions.row(m);
      CHECK(*std::max_element(p.begin(), p.end()) == c.confidence[m]);
    }
  }
}

TEST_CASE("select_training_set policies") {
  const auto all = selection::candidates_from_scores(random_probs(5000, 6, 2), 0.2);
  REQUIRE(all.size() > 500);
  using selection::SubsetPolicy;

  const auto same = selection::select_training_set(all, all.size(), SubsetPolicy::uniform_random, 1);
  CHECK(same.indices == all.indices);
  CHECK(same.confidence == all.confidence);

  const auto r1 = selection::select_training_set(all, 400, SubsetPolicy::uniform_random, 7);
  const auto r2 = selection::select_training_set(all, 400, SubsetPolicy::uniform_random, 7);
  const auto r3 = selection::select_training_set(all, 400, SubsetPolicy::uniform_random, 8);
  CHECK(r1.indices == r2.indices);
  CHECK(r1.indices != r3.indices);
  CHECK(r1.size() == 400);
  CHECK(std::is_sorted(r1.indices.begin(), r1.indices.end()));
  CHECK(std::includes(all.indices.begin(), all.indices.end(), r1.indices.begin(), r1.indices.end()));
  REQUIRE(r1.has_predictions);
  for (std::size_t m = 0; m < r1.size(); ++m) {
    const auto pos = std::lower_bound(all.indices.begin(), all.indices.end(), r1.indices[m]) - all.indices.begin();
    CHECK(r1.confidence[m] == all.confidence[pos]);
  }

  const auto top = selection::select_training_set(all, 300, SubsetPolicy::top_confidence, 1);
  CHECK(top.indices == selection::select_training_set(all, 300, SubsetPolicy::top_confidence, 99).indices);
  auto sorted = all.confidence;
  std::sort(sorted.rbegin(), sorted.rend());
  for (double c : top.confidence) CHECK(c >= sorted[299]);
}

TEST_CASE("top-confidence ties follow the tie policy") {
  const Tensor probs = Tensor::matrix({{0.9, 0.1}, {0.95, 0.05}, {0.9, 0.1}, {0.9, 0.1}});
  const auto all = selection::candidates_from_scores(probs, 0.5);
  using selection::SubsetPolicy, selection::TiePolicy;
  CHECK(selection::select_training_set(all, 2, SubsetPolicy::top_confidence, 0, TiePolicy::lower_index).indices ==
        std::vector<std::size_t>{0, 1});
  CHECK(selection::select_training_set(all, 2, SubsetPolicy::top_confidence, 0, TiePolicy::higher_index).indices ==
        std::vector<std::size_t>{1, 3});
}

TEST_CASE("candidate files round trip") {
  const auto all = selection::candidates_from_scores(random_probs(400, 5, 3), 0.3);
  const auto text = selection::serialize_candidates(all, 0xabcdef0123456789ULL);
  const auto back = selection::parse_candidates(text);
  CHECK(back.pool_hash == 0xabcdef0123456789ULL);
  CHECK(back.set.indices == all.indices);
  CHECK(back.set.confidence == all.confidence);
  CHECK(back.set.delta == all.delta);
  CHECK(back.set.gamma == all.gamma);
  CHECK(back.set.classes == 5);
  CHECK(back.set.pool_size == 400);
  CHECK_FALSE(back.set.has_predictions);
  CHECK(selection::serialize_candidates(back.set, back.pool_hash) == text);

  const auto path = std::filesystem::temp_directory_path() / "eeikd_candidates_test.txt";
  selection::save_candidates(all, 5, path);
  CHECK(selection::load_candidates(path).set.indices == all.indices);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(selection::parse_candidates("hello\n"), FormatError);
  auto cut = text.substr(0, text.size() - 20);
  CHECK_THROWS_AS(selection::parse_candidates(cut), FormatError);
  auto unsorted = text;
  const auto first_row = unsorted.find('\n', unsorted.find("count"));
  unsorted.insert(first_row + 1, "399 0.99\n");
  CHECK_THROWS_AS(selection::parse_candidates(unsorted), FormatError);
}

TEST_CASE("pool fingerprint follows content") {
  datagen::PoolSpec spec;
  spec.pool_size = 100;
  auto a = datagen::make_substitute(spec, {}).pool;
  const auto h = selection::pool_fingerprint(a);
  CHECK(h == selection::pool_fingerprint(datagen::make_substitute(spec, {}).pool));
  a.samples[5] += 1e-12;
  CHECK(h != selection::pool_fingerprint(a));
}

TEST_CASE("selection config validation") {
  selection::SelectionConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.gamma = 0.1;
  c.budget = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
