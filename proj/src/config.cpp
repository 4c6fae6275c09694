#include "eeikd/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "eeikd/errors.hpp"
#include "eeikd/io.hpp"

namespace eeikd::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t parse_uint(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  return std::stoull(s);
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
  return out;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
  return join<std::size_t>(v, [](const std::size_t& x) { return std::to_string(x); });
}

std::string fmt_doubles(const std::vector<double>& v) {
  return join<double>(v, [](const double& x) { return io::format_double(x); });
}

// One entry per key: how to print it and how to read it back.
struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename M>
Field size_field(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const std::string& v) { member(c) = parse_uint(v); }};
}

template <typename M>
Field double_field(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return io::format_double(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const std::string& v) { member(c) = io::parse_double(v); }};
}

template <typename M>
Field bool_field(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return member(const_cast<ExperimentConfig&>(c)) ? "true" : "false"; },
          [member](ExperimentConfig& c, const std::string& v) { member(c) = parse_bool(v); }};
}

template <typename M>
Field sizes_field(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return fmt_sizes(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& piece : split_list(v)) out.push_back(parse_uint(piece));
            member(c) = std::move(out);
          }};
}

template <typename M>
Field doubles_field(std::string section, std::string key, M member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return fmt_doubles(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const std::string& v) {
            std::vector<double> out;
            for (const auto& piece : split_list(v)) out.push_back(io::parse_double(piece));
            member(c) = std::move(out);
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> all = {
      size_field("data", "classes", [](C& c) -> auto& { return c.data.classes; }),
      size_field("data", "dim", [](C& c) -> auto& { return c.data.dim; }),
      size_field("data", "per_class", [](C& c) -> auto& { return c.data.per_class; }),
      double_field("data", "radius", [](C& c) -> auto& { return c.data.radius; }),
      size_field("data", "pool_size", [](C& c) -> auto& { return c.data.pool_size; }),
      double_field("data", "overlap", [](C& c) -> auto& { return c.data.overlap; }),
      double_field("data", "shift", [](C& c) -> auto& { return c.data.shift; }),
      size_field("data", "ood_components", [](C& c) -> auto& { return c.data.ood_components; }),

      sizes_field("teacher", "hidden", [](C& c) -> auto& { return c.teacher.hidden; }),
      size_field("teacher", "epochs", [](C& c) -> auto& { return c.teacher.epochs; }),
      size_field("teacher", "batch_size", [](C& c) -> auto& { return c.teacher.batch_size; }),
      double_field("teacher", "lr", [](C& c) -> auto& { return c.teacher.optimizer.lr; }),
      double_field("teacher", "momentum", [](C& c) -> auto& { return c.teacher.optimizer.momentum; }),
      double_field("teacher", "weight_decay", [](C& c) -> auto& { return c.teacher.optimizer.weight_decay; }),
      doubles_field("teacher", "lr_milestones", [](C& c) -> auto& { return c.teacher.optimizer.milestones; }),
      double_field("teacher", "lr_decay", [](C& c) -> auto& { return c.teacher.optimizer.decay; }),
      double_field("teacher", "accuracy_floor", [](C& c) -> auto& { return c.teacher.accuracy_floor; }),

      sizes_field("student", "hidden", [](C& c) -> auto& { return c.student.hidden; }),

      double_field("selection", "gamma", [](C& c) -> auto& { return c.selection.gamma; }),
      size_field("selection", "budget", [](C& c) -> auto& { return c.selection.budget; }),
      {"selection", "policy",
       [](const C& c) { return selection::to_string(c.selection.policy); },
       [](C& c, const std::string& v) { c.selection.policy = selection::parse_subset_policy(v); }},
      {"selection", "tie",
       [](const C& c) { return selection::to_string(c.selection.tie); },
       [](C& c, const std::string& v) { c.selection.tie = selection::parse_tie_policy(v); }},

      double_field("distill", "temperature", [](C& c) -> auto& { return c.distill.temperature; }),
      double_field("distill", "alpha", [](C& c) -> auto& { return c.distill.alpha; }),
      double_field("distill", "lambda_feature", [](C& c) -> auto& { return c.distill.lambda_feature; }),
      double_field("distill", "lambda_relation", [](C& c) -> auto& { return c.distill.lambda_relation; }),
      double_field("distill", "huber_delta", [](C& c) -> auto& { return c.distill.huber_delta; }),
      double_field("distill", "xi_epsilon", [](C& c) -> auto& { return c.distill.xi_epsilon; }),
      size_field("distill", "batch_size", [](C& c) -> auto& { return c.distill.batch_size; }),
      size_field("distill", "epochs", [](C& c) -> auto& { return c.distill.epochs; }),
      double_field("distill", "lr", [](C& c) -> auto& { return c.distill.optimizer.lr; }),
      double_field("distill", "momentum", [](C& c) -> auto& { return c.distill.optimizer.momentum; }),
      double_field("distill", "weight_decay", [](C& c) -> auto& { return c.distill.optimizer.weight_decay; }),
      doubles_field("distill", "lr_milestones", [](C& c) -> auto& { return c.distill.optimizer.milestones; }),
      double_field("distill", "lr_decay", [](C& c) -> auto& { return c.distill.optimizer.decay; }),
      bool_field("distill", "mask_student", [](C& c) -> auto& { return c.distill.mask_student; }),
      bool_field("distill", "class_dropping", [](C& c) -> auto& { return c.distill.class_dropping; }),

      {"run", "seeds",
       [](const C& c) {
         return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
       },
       [](C& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& piece : split_list(v)) c.seeds.push_back(parse_uint(piece));
       }},
      {"run", "output_dir", [](const C& c) { return c.output_dir; },
       [](C& c, const std::string& v) { c.output_dir = v; }},
  };
  return all;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (data.classes < 2 || data.dim < 2) throw ConfigError("data needs at least 2 classes and 2 dimensions");
  if (teacher.batch_size < 2) throw ConfigError("teacher batch size must be at least 2");
  nets::require_compatible(teacher_spec(), student_spec());
  selection.validate();
  distill.validate(data.classes);
}

nets::NetworkSpec ExperimentConfig::teacher_spec() const {
  return nets::NetworkSpec::mlp(data.dim, teacher.hidden, data.classes);
}

nets::NetworkSpec ExperimentConfig::student_spec() const {
  return nets::NetworkSpec::mlp(data.dim, student.hidden, data.classes);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out = "# eeikd experiment configuration\n";
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += "\n[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.section + "." + f.key] = &f;

  ExperimentConfig config;
  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto it = index.find(section + "." + key);
    if (it == index.end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "' in [" + section + "]");
    try {
      it->second->set(config, value);
    } catch (const FormatError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_file(path)); }

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_config(config));
}

}  // namespace eeikd::harness
