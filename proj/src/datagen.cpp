#include "eeikd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eeikd/errors.hpp"
#include "eeikd/io.hpp"
#include "eeikd/rng.hpp"

namespace eeikd::datagen {

namespace {

void random_unit(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : out) {
      v = normal(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : out) v /= norm;
}

void validate(const SourceSpec& spec) {
  if (spec.classes < 2) throw ConfigError("source needs at least 2 classes");
  if (spec.dim < 2) throw ConfigError("source needs at least 2 input dimensions");
  if (spec.per_class < 5)
    throw TooFewSamplesError("per-class count " + std::to_string(spec.per_class) +
                             " is below the minimum of 5");
  if (!(spec.radius >= 0.0)) throw ConfigError("ring radius must be non-negative");
}

void draw_around(Rng& rng, std::span<const double> mean, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = mean[c] + normal(rng);
}

SourceDataset shuffled(Tensor samples, std::vector<int> labels, std::size_t classes, Split split,
                       Rng rng) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  SourceDataset out;
  out.samples = samples.gather_rows(order);
  out.labels.reserve(labels.size());
  for (auto i : order) out.labels.push_back(labels[i]);
  out.classes = classes;
  out.split = split;
  return out;
}

}  // namespace

Tensor class_means(const SourceSpec& spec) {
  validate(spec);
  Tensor means(Shape{spec.classes, spec.dim});
  Rng rng = make_rng(spec.seed, "source.means");
  for (std::size_t c = 0; c < spec.classes; ++c) {
    random_unit(rng, means.row(c));
    for (auto& v : means.row(c)) v *= spec.radius;
  }
  return means;
}

SourceSplits make_source(const SourceSpec& spec) {
  const Tensor means = class_means(spec);
  const std::size_t train_per_class = spec.per_class * 4 / 5;
  const std::size_t test_per_class = spec.per_class - train_per_class;
  Tensor train(Shape{train_per_class * spec.classes, spec.dim});
  Tensor test(Shape{test_per_class * spec.classes, spec.dim});
  std::vector<int> train_labels, test_labels;
  Rng rng = make_rng(spec.seed, "source.samples");
  std::size_t train_row = 0, test_row = 0;
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      if (i < train_per_class) {
        draw_around(rng, means.row(c), train.row(train_row++));
        train_labels.push_back(static_cast<int>(c));
      } else {
        draw_around(rng, means.row(c), test.row(test_row++));
        test_labels.push_back(static_cast<int>(c));
      }
    }
  return {shuffled(std::move(train), std::move(train_labels), spec.classes, Split::train,
                   make_rng(spec.seed, "source.order.train")),
          shuffled(std::move(test), std::move(test_labels), spec.classes, Split::test,
                   make_rng(spec.seed, "source.order.test"))};
}

std::size_t in_domain_count(const PoolSpec& pool) {
  return static_cast<std::size_t>(std::llround(pool.overlap * static_cast<double>(pool.pool_size)));
}

GeneratedPool make_substitute(const PoolSpec& pool, const SourceSpec& source) {
  if (pool.pool_size < 1) throw ConfigError("pool size must be at least 1");
  if (!(pool.overlap >= 0.0 && pool.overlap <= 1.0)) throw ConfigError("overlap fraction must lie in [0, 1]");
  if (!(pool.shift >= 0.0)) throw ConfigError("shift magnitude must be non-negative");
  const Tensor means = class_means(source);
  const std::size_t n = source.classes, d = source.dim;
  const std::size_t ood = pool.ood_components ? pool.ood_components : n;

  // Shifted in-domain components followed by fresh out-of-domain ones.
  Tensor components(Shape{n + ood, d});
  Rng shift_rng = make_rng(pool.seed, "pool.shift");
  std::vector<double> direction(d);
  for (std::size_t c = 0; c < n; ++c) {
    random_unit(shift_rng, direction);
    for (std::size_t k = 0; k < d; ++k) components.at(c, k) = means.at(c, k) + pool.shift * direction[k];
  }
  Rng ood_rng = make_rng(pool.seed, "pool.ood");
  for (std::size_t c = 0; c < ood; ++c) {
    auto row = components.row(n + c);
    random_unit(ood_rng, row);
    for (auto& v : row) v *= source.radius;
  }

  const std::size_t inside = in_domain_count(pool);
  std::vector<int> tags(pool.pool_size);
  for (std::size_t i = 0; i < pool.pool_size; ++i)
    tags[i] = static_cast<int>(i < inside ? i % n : n + (i - inside) % ood);
  std::shuffle(tags.begin(), tags.end(), make_rng(pool.seed, "pool.order"));

  GeneratedPool out;
  out.pool.samples = Tensor(Shape{pool.pool_size, d});
  Rng sample_rng = make_rng(pool.seed, "pool.samples");
  for (std::size_t i = 0; i < pool.pool_size; ++i)
    draw_around(sample_rng, components.row(static_cast<std::size_t>(tags[i])), out.pool.samples.row(i));
  out.provenance = PoolProvenance{std::move(tags), n, ood};
  return out;
}

namespace {

constexpr std::string_view kDataMagic = "EEIKDDAT";
constexpr std::string_view kProvenanceMagic = "EEIKDPRV";
constexpr std::uint32_t kDataVersion = 1;
constexpr std::uint32_t kSourceKind = 1;
constexpr std::uint32_t kPoolKind = 2;

void write_meta(const std::filesystem::path& path, std::map<std::string, std::string> meta,
                const std::string& kind, std::size_t count, std::size_t dim, std::size_t classes) {
  meta["kind"] = kind;
  meta["count"] = std::to_string(count);
  meta["dim"] = std::to_string(dim);
  meta["classes"] = std::to_string(classes);
  meta["format_version"] = std::to_string(kDataVersion);
  std::string text;
  for (const auto& [k, v] : meta) text += k + " = " + v + "\n";
  auto meta_path = path;
  meta_path += ".meta";
  io::write_file_atomic(meta_path, text);
}

std::string encode(std::uint32_t kind, const Tensor& samples, std::size_t classes) {
  io::ByteWriter w;
  w.put_bytes(kDataMagic);
  w.put(kDataVersion);
  w.put(kind);
  w.put<std::uint64_t>(samples.rows());
  w.put<std::uint64_t>(samples.cols());
  w.put<std::uint64_t>(classes);
  w.put_doubles(samples.values());
  return w.take();
}

struct Header {
  std::uint32_t kind;
  std::uint64_t count, dim, classes;
};

Header decode_header(io::ByteReader& r, const std::filesystem::path& path) {
  if (r.get_bytes(kDataMagic.size()) != kDataMagic) throw FormatError(path.string() + " is not a dataset file");
  if (auto v = r.get<std::uint32_t>(); v != kDataVersion)
    throw FormatError("unsupported dataset version " + std::to_string(v));
  Header h{};
  h.kind = r.get<std::uint32_t>();
  h.count = r.get<std::uint64_t>();
  h.dim = r.get<std::uint64_t>();
  h.classes = r.get<std::uint64_t>();
  if (h.count == 0 || h.dim == 0) throw FormatError("empty dataset in " + path.string());
  return h;
}

}  // namespace

void save_source(const SourceDataset& data, const std::filesystem::path& path,
                 const std::map<std::string, std::string>& meta) {
  std::string bytes = encode(kSourceKind, data.samples, data.classes);
  io::ByteWriter tail;
  for (int label : data.labels) tail.put<std::int32_t>(label);
  bytes += tail.bytes();
  io::write_file_atomic(path, bytes);
  auto m = meta;
  m["split"] = data.split == Split::train ? "train" : "test";
  write_meta(path, std::move(m), "source", data.size(), data.samples.cols(), data.classes);
}

SourceDataset load_source(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes);
  const Header h = decode_header(r, path);
  if (h.kind != kSourceKind) throw FormatError(path.string() + " is not a source dataset");
  SourceDataset out;
  out.samples = Tensor(Shape{h.count, h.dim});
  r.get_doubles(out.samples.values());
  out.labels.resize(h.count);
  for (auto& label : out.labels) {
    label = r.get<std::int32_t>();
    if (label < 0 || static_cast<std::uint64_t>(label) >= h.classes)
      throw FormatError("label out of range in " + path.string());
  }
  if (!r.at_end()) throw FormatError("trailing bytes in " + path.string());
  out.classes = h.classes;
  auto meta_path = path;
  meta_path += ".meta";
  std::error_code ec;
  if (std::filesystem::exists(meta_path, ec)) {
    const std::string meta = io::read_file(meta_path);
    out.split = meta.find("split = test") != std::string::npos ? Split::test : Split::train;
  }
  return out;
}

void save_pool(const SubstitutePool& pool, const std::filesystem::path& path,
               const std::map<std::string, std::string>& meta) {
  io::write_file_atomic(path, encode(kPoolKind, pool.samples, 0));
  write_meta(path, meta, "pool", pool.size(), pool.samples.cols(), 0);
}

SubstitutePool load_pool(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes);
  const Header h = decode_header(r, path);
  if (h.kind != kPoolKind) throw FormatError(path.string() + " is not a substitute pool");
  SubstitutePool out{Tensor(Shape{h.count, h.dim})};
  r.get_doubles(out.samples.values());
  if (!r.at_end()) throw FormatError("trailing bytes in " + path.string());
  return out;
}

void save_provenance(const PoolProvenance& provenance, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.put_bytes(kProvenanceMagic);
  w.put(kDataVersion);
  w.put<std::uint64_t>(provenance.component.size());
  w.put<std::uint64_t>(provenance.classes);
  w.put<std::uint64_t>(provenance.ood_components);
  for (int c : provenance.component) w.put<std::int32_t>(c);
  io::write_file_atomic(path, w.bytes());
}

PoolProvenance load_provenance(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.get_bytes(kProvenanceMagic.size()) != kProvenanceMagic)
    throw FormatError(path.string() + " is not a provenance file");
  if (auto v = r.get<std::uint32_t>(); v != kDataVersion)
    throw FormatError("unsupported provenance version " + std::to_string(v));
  PoolProvenance out;
  out.component.resize(r.get<std::uint64_t>());
  out.classes = r.get<std::uint64_t>();
  out.ood_components = r.get<std::uint64_t>();
  for (auto& c : out.component) c = r.get<std::int32_t>();
  if (!r.at_end()) throw FormatError("trailing bytes in " + path.string());
  return out;
}

}  // namespace eeikd::datagen
