#include "eeikd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "eeikd/errors.hpp"
#include "eeikd/io.hpp"
#include "eeikd/rng.hpp"

namespace eeikd::harness {

SeedPlan SeedPlan::from(std::uint64_t run_seed) {
  return {derive_seed(run_seed, "data.source"),    derive_seed(run_seed, "data.pool"),
          derive_seed(run_seed, "teacher.init"),   derive_seed(run_seed, "teacher.order"),
          derive_seed(run_seed, "selection.subset"), derive_seed(run_seed, "student.init"),
          derive_seed(run_seed, "distill.order")};
}

datagen::SourceSpec source_spec(const ExperimentConfig& config, std::uint64_t run_seed) {
  return {SeedPlan::from(run_seed).source, config.data.classes, config.data.dim, config.data.per_class,
          config.data.radius};
}

datagen::PoolSpec pool_spec(const ExperimentConfig& config, std::uint64_t run_seed) {
  return {SeedPlan::from(run_seed).pool, config.data.pool_size, config.data.overlap, config.data.shift,
          config.data.ood_components};
}

DataBundle generate_data(const ExperimentConfig& config, std::uint64_t run_seed) {
  const auto source = source_spec(config, run_seed);
  return {datagen::make_source(source), datagen::make_substitute(pool_spec(config, run_seed), source)};
}

TeacherRun train_teacher(const ExperimentConfig& config, const datagen::SourceSplits& source,
                         std::uint64_t run_seed) {
  const SeedPlan plan = SeedPlan::from(run_seed);
  const auto& opt = config.teacher.optimizer;
  if (config.teacher.batch_size < 2) throw BatchSizeError("teacher batch size must be at least 2");
  TeacherRun run{nets::Network::initialize(config.teacher_spec(), plan.teacher_init), {}, 0.0};
  nets::Network& net = run.teacher;
  nets::SgdOptimizer optimizer(opt.momentum, opt.weight_decay);
  Rng rng(plan.teacher_order);
  const auto& train = source.train;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  net.set_mode(nets::Mode::train);
  for (std::size_t epoch = 0; epoch < config.teacher.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    TeacherEpoch m;
    m.epoch = epoch + 1;
    m.lr = nets::scheduled_lr(opt.lr, epoch, config.teacher.epochs, opt.milestones, opt.decay);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t seen = 0, correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.teacher.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.teacher.batch_size);
      if (end - begin < 2) break;
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      std::vector<int> labels;
      for (auto r : rows) labels.push_back(train.labels[r]);
      ad::Tape tape;
      auto fr = net.forward(tape, train.samples.gather_rows(rows));
      ad::Var loss = ad::cross_entropy(fr.logits, labels);
      tape.backward(loss);
      net.collect_gradients(tape, fr);
      optimizer.step(net, m.lr);
      m.loss_ce += loss.value().item() * static_cast<double>(rows.size());
      const auto predicted = ad::argmax_rows(fr.logits.value());
      for (std::size_t i = 0; i < rows.size(); ++i) correct += predicted[i] == static_cast<std::size_t>(labels[i]);
      seen += rows.size();
    }
    if (seen) {
      m.loss_ce /= static_cast<double>(seen);
      m.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    }
    m.test_accuracy = distill::accuracy(net, source.test);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run.metrics.push_back(m);
  }
  net.set_mode(nets::Mode::eval);
  run.test_accuracy = distill::accuracy(net, source.test);
  return run;
}

std::string teacher_metrics_jsonl(const TeacherRun& run) {
  std::string out;
  for (const auto& m : run.metrics) {
    nlohmann::ordered_json row;
    row["epoch"] = m.epoch;
    row["lr"] = m.lr;
    row["loss_ce"] = m.loss_ce;
    row["train_acc"] = m.train_accuracy;
    row["test_acc"] = m.test_accuracy;
    out += row.dump() + "\n";
  }
  nlohmann::ordered_json summary;
  summary["summary"] = true;
  summary["epochs"] = run.metrics.size();
  summary["final_test_acc"] = run.test_accuracy;
  out += summary.dump() + "\n";
  return out;
}

SelectionRun run_selection(const ExperimentConfig& config, const nets::Network& teacher,
                           const datagen::SubstitutePool& pool, std::uint64_t run_seed) {
  SelectionRun run;
  run.candidates = selection::build_candidates(teacher, pool, config.selection);
  run.training_set = selection::select_training_set(run.candidates, config.selection.budget,
                                                    config.selection.policy, SeedPlan::from(run_seed).subset,
                                                    config.selection.tie);
  return run;
}

distill::DistillRun run_distill(const ExperimentConfig& config, const nets::Network& teacher,
                                const datagen::SubstitutePool& pool,
                                const std::vector<std::size_t>& training_indices,
                                const datagen::SourceDataset& test, std::uint64_t run_seed) {
  const SeedPlan plan = SeedPlan::from(run_seed);
  auto student = nets::Network::initialize(config.student_spec(), plan.student_init);
  return distill::distill_student(teacher, std::move(student), pool.samples.gather_rows(training_indices), test,
                                  config.distill, plan.distill_order);
}

std::string to_string(Axis axis) { return axis == Axis::gamma ? "gamma" : "alpha"; }

Axis parse_axis(std::string_view text) {
  if (text == "gamma") return Axis::gamma;
  if (text == "alpha") return Axis::alpha;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected gamma or alpha)");
}

std::vector<double> default_axis_values(Axis axis) {
  if (axis == Axis::gamma) return {0.05, 0.1, 0.2, 0.3, 0.5};
  return {0.0, 0.3, 0.5, 0.7, 0.9};
}

std::vector<std::size_t> default_checkpoints() { return {20, 50, 100, 200}; }

std::vector<std::string> ablation_rows() { return {"L_KD", "L_KD+L_AT", "L_KD+L_D", "Full"}; }

std::size_t SweepCell::completed() const {
  return static_cast<std::size_t>(std::count_if(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok; }));
}

namespace {

template <typename F>
double mean_over_ok(const std::vector<SeedResult>& seeds, F value) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : seeds)
    if (s.ok) {
      total += value(s);
      ++n;
    }
  return n ? total / static_cast<double>(n) : std::nan("");
}

}  // namespace

double SweepCell::mean_final() const {
  return mean_over_ok(seeds, [](const SeedResult& s) { return s.final_accuracy; });
}

double SweepCell::stddev_final() const {
  const double mu = mean_final();
  const std::size_t n = completed();
  if (n < 2) return 0.0;
  double ss = 0.0;
  for (const auto& s : seeds)
    if (s.ok) ss += (s.final_accuracy - mu) * (s.final_accuracy - mu);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double SweepCell::mean_epochs_to_threshold() const {
  return mean_over_ok(seeds, [](const SeedResult& s) { return static_cast<double>(s.epochs_to_threshold); });
}

double SweepCell::mean_checkpoint(std::size_t i) const {
  return mean_over_ok(seeds, [i](const SeedResult& s) { return s.checkpoint_accuracy.at(i); });
}

namespace {

void run_parallel(std::size_t tasks, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, tasks));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks; i = next++) body(i);
    });
}

struct SeedContext {
  std::optional<DataBundle> data;
  std::optional<TeacherRun> teacher;
  std::string error;
};

std::string file_label(std::string label) {
  for (auto& c : label)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  return label;
}

struct CellPlan {
  std::string label;
  ExperimentConfig config;
};

SweepReport run_cells(const ExperimentConfig& base, std::string title, std::string axis,
                      const std::vector<CellPlan>& cells, const std::vector<std::size_t>& checkpoints,
                      const RunOptions& options) {
  const auto& seeds = base.seeds;
  if (seeds.empty()) throw ConfigError("at least one seed is required");

  // Data and teacher depend only on the seed, never on the swept value.
  std::vector<SeedContext> contexts(seeds.size());
  run_parallel(seeds.size(), options.workers, [&](std::size_t j) {
    try {
      contexts[j].data = generate_data(base, seeds[j]);
      contexts[j].teacher = train_teacher(base, contexts[j].data->source, seeds[j]);
    } catch (const std::exception& e) {
      contexts[j].error = std::string("teacher stage failed: ") + e.what();
    }
  });

  SweepReport report{std::move(title), std::move(axis), checkpoints, {}};
  for (const auto& cell : cells) report.cells.push_back({cell.label, std::vector<SeedResult>(seeds.size())});

  run_parallel(cells.size() * seeds.size(), options.workers, [&](std::size_t task) {
    const std::size_t i = task / seeds.size(), j = task % seeds.size();
    SeedResult& result = report.cells[i].seeds[j];
    result.seed = seeds[j];
    const SeedContext& ctx = contexts[j];
    if (!ctx.error.empty()) {
      result.error = ctx.error;
      return;
    }
    try {
      const ExperimentConfig& cfg = cells[i].config;
      cfg.validate();
      result.teacher_accuracy = ctx.teacher->test_accuracy;
      const auto selected = run_selection(cfg, ctx.teacher->teacher, ctx.data->pool.pool, seeds[j]);
      result.candidates = selected.candidates.size();
      result.selected = selected.training_set.size();
      auto run = run_distill(cfg, ctx.teacher->teacher, ctx.data->pool.pool, selected.training_set.indices,
                             ctx.data->source.test, seeds[j]);
      std::vector<double> accuracies;
      for (const auto& m : run.metrics) accuracies.push_back(m.test_accuracy);
      result.final_accuracy = accuracies.empty() ? distill::accuracy(run.student, ctx.data->source.test)
                                                 : accuracies.back();
      result.epochs_to_threshold = distill::epochs_to_threshold(accuracies);
      for (auto c : checkpoints) result.checkpoint_accuracy.push_back(accuracies.at(c - 1));
      if (options.out_dir)
        io::write_file_atomic(*options.out_dir / "cells" /
                                  (file_label(report.axis + "_" + cells[i].label) + "_seed" +
                                   std::to_string(seeds[j]) + ".jsonl"),
                              distill::metrics_jsonl(run.metrics));
      result.metrics = std::move(run.metrics);
      result.ok = true;
    } catch (const std::exception& e) {
      result.error = e.what();
    }
  });
  return report;
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& config, Axis axis, const std::vector<double>& values,
                      const RunOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<CellPlan> cells;
  for (double v : values) {
    ExperimentConfig cfg = config;
    (axis == Axis::gamma ? cfg.selection.gamma : cfg.distill.alpha) = v;
    cells.push_back({io::format_double(v), std::move(cfg)});
  }
  return run_cells(config, to_string(axis) + " sweep", to_string(axis), cells, {}, options);
}

SweepReport run_ablation(const ExperimentConfig& config, const std::vector<std::size_t>& checkpoints,
                         const RunOptions& options) {
  return run_ablation(config, checkpoints, ablation_rows(), options);
}

SweepReport run_ablation(const ExperimentConfig& config, const std::vector<std::size_t>& checkpoints,
                         const std::vector<std::string>& rows, const RunOptions& options) {
  if (checkpoints.empty()) throw ConfigError("ablation needs at least one checkpoint epoch");
  for (auto c : checkpoints)
    if (c == 0) throw ConfigError("checkpoint epochs are 1-based");
  std::vector<CellPlan> cells;
  for (const auto& row : rows) {
    ExperimentConfig cfg = config;
    cfg.distill.epochs = *std::max_element(checkpoints.begin(), checkpoints.end());
    if (row == "L_KD") {
      cfg.distill.lambda_feature = 0.0;
      cfg.distill.lambda_relation = 0.0;
    } else if (row == "L_KD+L_AT") {
      cfg.distill.lambda_relation = 0.0;
    } else if (row == "L_KD+L_D") {
      cfg.distill.lambda_feature = 0.0;
    } else if (row != "Full") {
      throw ConfigError("unknown ablation row '" + row + "'");
    }
    cells.push_back({row, std::move(cfg)});
  }
  return run_cells(config, "loss ablation", "loss", cells, checkpoints, options);
}

namespace {

std::string percent(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_table(const SweepReport& report) {
  std::vector<std::string> header{report.axis, "seeds", "acc %", "std %", "ep-to-90%"};
  for (auto c : report.checkpoints) header.push_back("ep" + std::to_string(c));
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& cell : report.cells) {
    const bool failed = cell.completed() == 0;
    std::vector<std::string> row{cell.label,
                                 std::to_string(cell.completed()) + "/" + std::to_string(cell.seeds.size()),
                                 failed ? "FAILED" : percent(cell.mean_final()),
                                 failed ? "-" : percent(cell.stddev_final()),
                                 failed ? "-" : fixed(cell.mean_epochs_to_threshold(), 1)};
    for (std::size_t i = 0; i < report.checkpoints.size(); ++i)
      row.push_back(failed ? "-" : percent(cell.mean_checkpoint(i)));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out = report.title + "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& s = rows[r][c];
      out += (c ? "  " : "") + (c ? std::string(width[c] - s.size(), ' ') + s : s + std::string(width[c] - s.size(), ' '));
    }
    out += "\n";
    if (r == 0) out += std::string(std::accumulate(width.begin(), width.end(), 2 * (width.size() - 1)), '-') + "\n";
  }
  for (const auto& cell : report.cells)
    for (const auto& s : cell.seeds)
      if (!s.ok) out += "failure: " + cell.label + " seed " + std::to_string(s.seed) + ": " + s.error + "\n";
  return out;
}

std::string render_csv(const SweepReport& report) {
  std::string out = "axis,value,status,completed,seeds,mean_final_acc,stddev_final_acc,mean_epochs_to_threshold";
  for (auto c : report.checkpoints) out += ",acc_epoch_" + std::to_string(c);
  out += "\n";
  for (const auto& cell : report.cells) {
    const bool failed = cell.completed() == 0;
    out += report.axis + "," + cell.label + "," + (failed ? "failed" : "ok") + "," +
           std::to_string(cell.completed()) + "," + std::to_string(cell.seeds.size()) + ",";
    out += failed ? ",," : io::format_double(cell.mean_final()) + "," + io::format_double(cell.stddev_final()) + "," +
                               io::format_double(cell.mean_epochs_to_threshold());
    for (std::size_t i = 0; i < report.checkpoints.size(); ++i)
      out += "," + (failed ? std::string() : io::format_double(cell.mean_checkpoint(i)));
    out += "\n";
  }
  return out;
}

}  // namespace eeikd::harness
