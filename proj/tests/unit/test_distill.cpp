#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "eeikd/distill.hpp"
#include "eeikd/errors.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/naive.hpp"
#include "support/loss_gradcheck.hpp"

using namespace eeikd;
using doctest::Approx;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Tensor t({r, c});
  for (double& v : t.values()) v = normal(rng);
  return t;
}

oracle::Matrix to_rows(const Tensor& t) {
  oracle::Matrix m(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) m[i].assign(t.row(i).begin(), t.row(i).end());
  return m;
}

double relation_value(const Tensor& t, const Tensor& s, double delta = 1.0, double eps = 1e-8) {
  ad::Tape tape;
  return distill::relation_loss(tape.constant(t), tape.constant(s), delta, eps).value().item();
}

struct Tiny {
  nets::Network teacher;
  nets::Network student;
  Tensor inputs;
  datagen::SourceDataset test;
};

Tiny tiny_problem() {
  auto teacher = nets::Network::initialize(nets::NetworkSpec::mlp(4, {8, 8, 6}, 5), 1);
  teacher.set_mode(nets::Mode::eval);
  auto student = nets::Network::initialize(nets::NetworkSpec::mlp(4, {8, 4, 6}, 5), 2);
  std::mt19937_64 rng(3);
  Tiny t{teacher, student, random_matrix(150, 4, rng, 2.0), {}};
  t.test.samples = random_matrix(40, 4, rng, 2.0);
  t.test.labels = std::vector<int>(40);
  const auto top = ad::argmax_rows(teacher.infer(t.test.samples).logits);
  for (std::size_t i = 0; i < 40; ++i) t.test.labels[i] = static_cast<int>(top[i]);
  t.test.classes = 5;
  return t;
}

distill::DistillConfig tiny_config() {
  distill::DistillConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("kept class count") {
  CHECK(distill::kept_classes(3, 0.3) == 2);
  CHECK(distill::kept_classes(10, 0.5) == 5);
  CHECK(distill::kept_classes(10, 0.9) == 1);
  CHECK(distill::kept_classes(6, 0.0) == 6);
  CHECK_THROWS_AS(distill::kept_classes(6, 0.9), ConfigError);
  CHECK_THROWS_AS(distill::kept_classes(6, 1.0), ConfigError);
  CHECK_THROWS_AS(distill::kept_classes(6, -0.1), ConfigError);
}

TEST_CASE("class drop mask examples") {
  const auto p = Tensor::matrix({{0.5, 0.3, 0.2}});
  CHECK(distill::class_drop_mask(p, 0.0) == Tensor::matrix({{1, 1, 1}}));
  CHECK(distill::class_drop_mask(p, 0.3) == Tensor::matrix({{1, 1, 0}}));
  const Tensor uniform({1, 10}, 0.1);
  CHECK(distill::class_drop_mask(uniform, 0.5) == Tensor::matrix({{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}}));
  CHECK(distill::class_drop_mask(Tensor::matrix({{0.2, 0.4, 0.4}}), 0.5) == Tensor::matrix({{0, 1, 0}}));
  CHECK_THROWS_AS(distill::class_drop_mask(p, 0.7), ConfigError);
}

TEST_CASE("apply_mask examples") {
  const auto logits = Tensor::matrix({{2, 1, 0}});
  const auto full = distill::apply_mask(logits, Tensor({1, 3}, 1.0), 1.0);
  CHECK(full.masked_logits == logits);
  CHECK(full.distribution == ad::softmax_values(logits));
  const auto m = distill::apply_mask(logits, Tensor::matrix({{1, 1, 0}}), 1.0);
  CHECK(m.distribution.at(0, 0) == Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(m.distribution.at(0, 1) == Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(m.distribution.at(0, 2) == 0.0);
  CHECK(m.masked_logits.at(0, 2) == ad::kMasked);
  CHECK_THROWS_AS(distill::apply_mask(logits, Tensor({1, 2}, 1.0), 1.0), DimensionError);
}

TEST_CASE("kd loss examples") {
  const double tau = 4.0;
  ad::Tape tape;
  const auto t = Tensor::matrix({{1.0, -2.0, 0.5}, {0.0, 3.0, 1.0}});
  const auto pred = distill::apply_mask(t, Tensor(t.shape(), 1.0), tau);
  CHECK(distill::kd_loss(pred, tape.constant(t), tau).value().item() == 0.0);

  const auto one_hot = distill::apply_mask(Tensor::matrix({{5.0, 0.0}}), Tensor::matrix({{1, 0}}), tau);
  REQUIRE(one_hot.distribution == Tensor::matrix({{1.0, 0.0}}));
  const double v = distill::kd_loss(one_hot, tape.constant(Tensor::matrix({{0.0, 0.0}})), tau, false).value().item();
  CHECK(v == Approx(tau * tau * std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(distill::kd_loss(one_hot, tape.constant(Tensor::matrix({{0.0, 0.0, 0.0}})), tau),
                  DimensionError);
}

TEST_CASE("kd loss vanishes exactly when masked distributions agree") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const double tau = 1.0 + trial % 4;
    const auto t = random_matrix(5, 6, rng, 2.0);
    const auto mask = distill::class_drop_mask(ad::softmax_values(t), 0.5);
    const auto pred = distill::apply_mask(t, mask, tau);
    // Per-row shifts of kept logits, arbitrary values on dropped ones.
    Tensor shifted = t;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) shifted.at(i, j) = mask.at(i, j) ? t.at(i, j) + i - 2.0 : 40.0 * j;
    ad::Tape tape;
    CHECK(distill::kd_loss(pred, tape.constant(shifted), tau).value().item() == Approx(0.0).scale(1.0).epsilon(1e-12));
    const auto other = random_matrix(5, 6, rng, 2.0);
    CHECK(distill::kd_loss(pred, tape.constant(other), tau).value().item() > 1e-6);
  }
}

TEST_CASE("kd loss equals the naive batch-mean KL") {
  std::mt19937_64 rng(5);
  const double tau = 3.0;
  const auto t = random_matrix(4, 5, rng, 2.0), s = random_matrix(4, 5, rng, 2.0);
  const auto mask = distill::class_drop_mask(ad::softmax_values(t), 0.3);
  const auto pred = distill::apply_mask(t, mask, tau);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> zt(5), zs(5);
    for (std::size_t j = 0; j < 5; ++j) {
      zt[j] = mask.at(i, j) ? t.at(i, j) : -INFINITY;
      zs[j] = mask.at(i, j) ? s.at(i, j) : -INFINITY;
    }
    expect += oracle::kl(oracle::softmax(zt, tau), oracle::softmax(zs, tau));
  }
  ad::Tape tape;
  CHECK(distill::kd_loss(pred, tape.constant(s), tau).value().item() == Approx(tau * tau * expect / 4).epsilon(1e-12));
}

TEST_CASE("kd loss gradient w.r.t. student logits matches finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const double tau = 1.0 + 0.5 * trial;
    const auto t = random_matrix(3, 4, rng, 2.0), s = random_matrix(3, 4, rng, 2.0);
    const auto pred = distill::apply_mask(t, distill::class_drop_mask(ad::softmax_values(t), 0.25), tau);
    ad::Tape tape;
    auto v = tape.parameter(s);
    tape.backward(distill::kd_loss(pred, v, tau));
    const std::vector<double> analytic(tape.grad(v).values().begin(), tape.grad(v).values().end());
    const auto numeric = oracle::central_differences(
        [&](const std::vector<double>& p) {
          ad::Tape t2;
          return distill::kd_loss(pred, t2.constant(Tensor(s.shape(), p)), tau).value().item();
        },
        {s.values().begin(), s.values().end()});
    CHECK(oracle::relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("feature loss examples") {
  ad::Tape tape;
  const auto front = Tensor::matrix({{0.5, 2.0}}), back = Tensor::matrix({{1.0, 0.0, 3.0}});
  const auto same = distill::feature_loss(front, back, tape.constant(front), tape.constant(back));
  CHECK(same.total.value().item() == 0.0);
  const auto diff = distill::feature_loss(front, back, tape.constant(Tensor::matrix({{-0.5, 3.0}})),
                                          tape.constant(back));
  CHECK(diff.front.value().item() == 1.0);
  CHECK(diff.back.value().item() == 0.0);
  CHECK(diff.total.value().item() == 1.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = distill::feature_loss(random_matrix(3, 4, rng), random_matrix(3, 5, rng),
                                         tape.constant(random_matrix(3, 4, rng)), tape.constant(random_matrix(3, 5, rng)));
    CHECK(f.front.value().item() >= 0.0);
    CHECK(f.back.value().item() >= 0.0);
    CHECK(f.total.value().item() >= std::max(f.front.value().item(), f.back.value().item()));
  }
  CHECK_THROWS_AS(distill::feature_loss(front, back, tape.constant(back), tape.constant(back)), DimensionError);
}

TEST_CASE("relation stats examples") {
  ad::Tape tape;
  const auto same = distill::relation_stats(tape.constant(Tensor({4, 3}, 0.25)));
  for (double v : same.psi.value().values()) CHECK(v == 0.0);
  CHECK(same.xi.value().item() == 0.0);

  const auto r = distill::relation_stats(tape.constant(Tensor::matrix({{1, 0}, {0, 1}, {0, 0}})));
  const double a = (std::sqrt(2.0) + 1.0) / 2.0;
  CHECK(r.psi.value()[0] == Approx(a).epsilon(1e-14));
  CHECK(r.psi.value()[1] == Approx(a).epsilon(1e-14));
  CHECK(r.psi.value()[2] == Approx(1.0).epsilon(1e-14));
  CHECK(r.xi.value().item() == Approx((2 * a + 1) / 3).epsilon(1e-14));
  CHECK(r.xi.value().item() == Approx(1.1381).epsilon(1e-4));
  CHECK_THROWS_AS(distill::relation_stats(tape.constant(Tensor::matrix({{1, 2}}))), BatchSizeError);
}

TEST_CASE("relation stats equal the naive double loop") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 15, c = 2 + trial % 19;
    const auto x = random_matrix(n, c, rng);
    ad::Tape tape;
    const auto r = distill::relation_stats(tape.constant(x));
    const auto e = oracle::relation(to_rows(x));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r.psi.value()[i] - e.psi[i]) <= 1e-10);
    CHECK(std::abs(r.xi.value().item() - e.xi) <= 1e-10);
  }
}

TEST_CASE("relation loss examples") {
  std::mt19937_64 rng(9);
  const auto t = ad::softmax_values(random_matrix(6, 4, rng, 2.0));
  CHECK(relation_value(t, t) == 0.0);
  Tensor twice = t;
  for (double& v : twice.values()) v *= 2.0;
  CHECK(relation_value(t, twice) == Approx(0.0).epsilon(1e-12).scale(1.0));

  // Teacher rows (1,0), (0,1), (0,0) against an all-equal student batch: the
  // guard turns the student's 0/0 into 0, leaving Huber(psi_t / xi_t, 0).
  const auto teacher = Tensor::matrix({{1, 0}, {0, 1}, {0, 0}});
  const double a = (std::sqrt(2.0) + 1.0) / 2.0, xi = (2 * a + 1) / 3;
  const double n0 = a / xi, n2 = 1.0 / xi;
  CHECK(n0 == Approx(1.0607).epsilon(1e-4));
  CHECK(n2 == Approx(0.8787).epsilon(1e-4));
  const double expect = ((n0 - 0.5) + (n0 - 0.5) + 0.5 * n2 * n2) / 3.0;
  const double got = relation_value(teacher, Tensor({3, 2}, 0.5));
  CHECK(std::isfinite(got));
  CHECK(got == Approx(expect).epsilon(1e-12));
  CHECK(got == Approx(oracle::relation_loss(to_rows(teacher), to_rows(Tensor({3, 2}, 0.5)), 1.0, 1e-8)).epsilon(1e-12));
}

TEST_CASE("relation loss matches the naive oracle and is scale invariant") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 10;
    const auto t = random_matrix(n, 5, rng), s = random_matrix(n, 5, rng);
    const double delta = 0.2 + 0.1 * (trial % 8);
    CHECK(relation_value(t, s, delta) ==
          Approx(oracle::relation_loss(to_rows(t), to_rows(s), delta, 1e-8)).epsilon(1e-12));
    for (double c : {0.5, 2.0, 10.0}) {
      Tensor cs = s;
      for (double& v : cs.values()) v *= c;
      CHECK(std::abs(relation_value(t, cs, delta) - relation_value(t, s, delta)) <= 1e-10);
    }
  }
}

TEST_CASE("total loss accounting") {
  ad::Tape tape;
  auto s = [&](double v) { return tape.constant(Tensor::scalar(v)); };
  CHECK(distill::total_loss({s(0.7), s(3.0), s(5.0)}, 0.0, 0.0).value().item() == 0.7);
  CHECK(distill::total_loss({s(0), s(0), s(0)}, 0.1, 1.0).value().item() == 0.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double kd = u(rng), at = u(rng), d = u(rng), l1 = u(rng) / 10, l2 = u(rng) / 5;
    CHECK(std::abs(distill::total_loss({s(kd), s(at), s(d)}, l1, l2).value().item() - (kd + l1 * at + l2 * d)) <= 1e-12);
  }
}

TEST_CASE("every loss gradient w.r.t. student parameters matches finite differences") {
  for (auto loss : support::all_losses()) {
    std::uint64_t seed = 1000;
    for (int trial = 0; trial < 4; ++trial) {
      const auto f = support::kink_free_fixture(seed);
      const auto r = support::check_loss(loss, f);
      INFO(support::loss_name(loss), " seed ", seed - 1);
      CHECK(r.relative_error < 1e-4);
      CHECK(r.gradient_norm > 0.0);
    }
  }
}

TEST_CASE("total loss gradient is the weighted sum of part gradients") {
  std::uint64_t seed = 2000;
  const auto f = support::kink_free_fixture(seed);
  const auto kd = support::analytic_gradient(support::Loss::kd, f);
  const auto at = support::analytic_gradient(support::Loss::feature, f);
  const auto d = support::analytic_gradient(support::Loss::relation, f);
  const auto total = support::analytic_gradient(support::Loss::total, f);
  std::vector<double> combined(total.size());
  for (std::size_t i = 0; i < total.size(); ++i)
    combined[i] = kd[i] + f.config.lambda_feature * at[i] + f.config.lambda_relation * d[i];
  CHECK(oracle::relative_error(combined, total) < 1e-12);
}

TEST_CASE("distillation config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate(6));
  c.alpha = 0.9;
  CHECK_THROWS_AS(c.validate(6), ConfigError);
  CHECK_NOTHROW(c.validate(10));
  c = tiny_config();
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(6), BatchSizeError);
  c = tiny_config();
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(6), ConfigError);
  c = tiny_config();
  c.lambda_relation = -1.0;
  CHECK_THROWS_AS(c.validate(6), ConfigError);
}

TEST_CASE("zero epochs leaves the student untouched") {
  auto t = tiny_problem();
  auto c = tiny_config();
  c.epochs = 0;
  const auto run = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 1);
  CHECK(run.metrics.empty());
  CHECK(run.student == t.student);
}

TEST_CASE("distillation is deterministic and logs every component") {
  auto t = tiny_problem();
  const auto c = tiny_config();
  const auto a = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 5);
  const auto b = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 5);
  CHECK(a.student == b.student);
  CHECK(distill::metrics_jsonl(a.metrics) == distill::metrics_jsonl(b.metrics));
  REQUIRE(a.metrics.size() == 3);
  for (const auto& m : a.metrics) {
    CHECK(m.loss_kd > 0.0);
    CHECK(m.loss_at_front > 0.0);
    CHECK(m.loss_at_back > 0.0);
    CHECK(m.loss_d > 0.0);
    CHECK(m.loss_at == Approx(m.loss_at_front + m.loss_at_back).epsilon(1e-12));
    CHECK(m.loss_total == Approx(m.loss_kd + 0.1 * m.loss_at + m.loss_d).epsilon(1e-12));
  }
  CHECK(a.student.mode() == nets::Mode::eval);
  const auto other = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 6);
  CHECK_FALSE(other.student == a.student);
  CHECK(distill::metrics_jsonl(a.metrics).find("wall") == std::string::npos);
  CHECK(distill::timing_jsonl(a.metrics).find("wall_time_s") != std::string::npos);
}

TEST_CASE("alpha zero is identical to running without any masking") {
  auto t = tiny_problem();
  auto c = tiny_config();
  c.alpha = 0.0;
  const auto masked = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 9);
  c.class_dropping = false;
  const auto plain = distill::distill_student(t.teacher, t.student, t.inputs, t.test, c, 9);
  CHECK(masked.student == plain.student);
  CHECK(distill::metrics_jsonl(masked.metrics) == distill::metrics_jsonl(plain.metrics));
}

TEST_CASE("distillation input errors") {
  auto t = tiny_problem();
  auto teacher_train = t.teacher;
  teacher_train.set_mode(nets::Mode::train);
  CHECK_THROWS_AS(distill::distill_student(teacher_train, t.student, t.inputs, t.test, tiny_config(), 1), ConfigError);
  auto wrong = nets::Network::initialize(nets::NetworkSpec::mlp(4, {5, 4, 6}, 5), 2);
  CHECK_THROWS_AS(distill::distill_student(t.teacher, wrong, t.inputs, t.test, tiny_config(), 1), ConfigError);
}

TEST_CASE("epochs to threshold") {
  CHECK(distill::epochs_to_threshold({}) == 0);
  CHECK(distill::epochs_to_threshold({0.1, 0.5, 0.85, 0.9, 0.95}) == 4);
  CHECK(distill::epochs_to_threshold({0.9, 0.5, 0.95}) == 1);
  CHECK(distill::epochs_to_threshold({0.2}) == 1);
}
