#include "advml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "advml/sha256.hpp"

namespace advml {

std::string row_flag_name(RowFlag flag) {
  switch (flag) {
    case RowFlag::Clean:
      return "clean";
    case RowFlag::Flipped:
      return "flipped";
    case RowFlag::NoisePoisoned:
      return "noise_poisoned";
    case RowFlag::Triggered:
      return "triggered";
  }
  return "clean";
}

RowFlag row_flag_from_name(const std::string& name) {
  if (name == "clean") return RowFlag::Clean;
  if (name == "flipped") return RowFlag::Flipped;
  if (name == "noise_poisoned") return RowFlag::NoisePoisoned;
  if (name == "triggered") return RowFlag::Triggered;
  throw std::invalid_argument("unknown row flag: " + name);
}

Dataset take(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.features = take_rows(data.features, indices);
  out.num_classes = data.num_classes;
  out.grid = data.grid;
  out.labels.reserve(indices.size());
  out.flags.reserve(indices.size());
  for (std::size_t i : indices) {
    out.labels.push_back(data.labels[i]);
    out.flags.push_back(data.flags[i]);
  }
  return out;
}

Dataset gen_two_gaussians(std::size_t n_per_class, double center_offset, double std, Prng& rng) {
  if (n_per_class == 0) throw std::invalid_argument("gen_two_gaussians: n_per_class must be >= 1");
  if (std < 0.0) throw std::invalid_argument("gen_two_gaussians: std must be >= 0");

  Dataset out;
  out.num_classes = 2;
  out.features = Matrix(2 * n_per_class, 2);
  for (int cls = 0; cls < 2; ++cls) {
    const double center = cls == 0 ? -center_offset : center_offset;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t r = static_cast<std::size_t>(cls) * n_per_class + i;
      out.features(r, 0) = rng.gaussian(center, std);
      out.features(r, 1) = rng.gaussian(center, std);
      out.labels.push_back(cls);
      out.flags.push_back(RowFlag::Clean);
    }
  }
  return out;
}

Matrix grid_class_template(int class_index, const GridSpec& grid) {
  if (class_index < 0) throw std::invalid_argument("grid_class_template: negative class");
  // Bits of (class+1) light up four horizontal stripe bands, so every class
  // has at least one lit stripe and no two classes share a pattern.
  const unsigned pattern = static_cast<unsigned>(class_index) + 1;
  if (pattern > 15) throw std::invalid_argument("grid_class_template: at most 15 classes");
  Matrix tmpl(1, grid.height * grid.width, 0.0);
  for (std::size_t r = 0; r < grid.height; ++r) {
    const std::size_t band = r * 4 / grid.height;
    if (pattern & (1u << band)) {
      for (std::size_t c = 0; c < grid.width; ++c) tmpl(0, r * grid.width + c) = 1.0;
    }
  }
  return tmpl;
}

Dataset gen_grid_classes(std::size_t n_per_class, int k_classes, const GridSpec& grid,
                         double noise_std, Prng& rng) {
  if (k_classes < 2) throw std::invalid_argument("gen_grid_classes: need k >= 2");
  if (noise_std < 0.0) throw std::invalid_argument("gen_grid_classes: noise_std must be >= 0");
  if (grid.height < 4 || grid.width < 4)
    throw std::invalid_argument("gen_grid_classes: grid must be at least 4x4");

  std::vector<Matrix> templates;
  for (int c = 0; c < k_classes; ++c) templates.push_back(grid_class_template(c, grid));

  const std::size_t d = grid.height * grid.width;
  const std::size_t min_diff = (d + 3) / 4;  // 25% of pixels, rounded up
  for (int a = 0; a < k_classes; ++a) {
    for (int b = a + 1; b < k_classes; ++b) {
      std::size_t diff = 0;
      for (std::size_t i = 0; i < d; ++i)
        if (templates[a].data()[i] != templates[b].data()[i]) ++diff;
      if (diff < min_diff)
        throw std::invalid_argument("gen_grid_classes: grid too small, templates for classes " +
                                    std::to_string(a) + " and " + std::to_string(b) +
                                    " differ in under 25% of pixels");
    }
  }

  Dataset out;
  out.num_classes = k_classes;
  out.grid = GridShape{grid.height, grid.width};
  out.features = Matrix(n_per_class * static_cast<std::size_t>(k_classes), d);
  std::size_t row = 0;
  for (int cls = 0; cls < k_classes; ++cls) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.8 * templates[cls].data()[j];
        if (noise_std > 0.0) v += rng.gaussian(0.0, noise_std);
        out.features(row, j) = std::clamp(v, 0.0, 1.0);
      }
      out.labels.push_back(cls);
      out.flags.push_back(RowFlag::Clean);
    }
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             Prng& rng) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("train_test_split: fraction must be in (0,1)");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < 2)
      throw std::invalid_argument("train_test_split: class " + std::to_string(c) +
                                  " has fewer than 2 samples");

  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    rng.shuffle(members);
    const std::size_t n_test =
        static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < n_test ? test_idx : train_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {take(data, train_idx), take(data, test_idx)};
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Prng& rng) {
  if (batch_size == 0) throw std::invalid_argument("minibatches: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Dataset normalize(const Dataset& data, double mean, double std) {
  if (std == 0.0) throw std::invalid_argument("normalize: std must be nonzero");
  Dataset out = data;
  for (double& v : out.features.data()) v = (v - mean) / std;
  return out;
}

Dataset denormalize(const Dataset& data, double mean, double std) {
  if (std == 0.0) throw std::invalid_argument("denormalize: std must be nonzero");
  Dataset out = data;
  for (double& v : out.features.data()) v = v * std + mean;
  return out;
}

namespace {

void hash_u64le(Sha256& h, std::uint64_t v) {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
  h.update(bytes, 8);
}

}  // namespace

std::string dataset_sha256(const Dataset& data) {
  static_assert(sizeof(double) == 8, "canonical layout needs 64-bit doubles");
  Sha256 h;
  const char tag[] = "advml-data-v1";
  h.update(tag, sizeof(tag) - 1);
  hash_u64le(h, data.size());
  hash_u64le(h, data.dim());
  hash_u64le(h, static_cast<std::uint64_t>(data.num_classes));
  hash_u64le(h, data.grid.has_value() ? 1 : 0);
  hash_u64le(h, data.grid ? data.grid->height : 0);
  hash_u64le(h, data.grid ? data.grid->width : 0);
  for (int label : data.labels) {
    const std::uint32_t v = static_cast<std::uint32_t>(label);
    std::uint8_t bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    h.update(bytes, 4);
  }
  for (double d : data.features.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    hash_u64le(h, bits);
  }
  return Sha256::to_hex(h.finish());
}

void verify_dataset(const Dataset& data, const std::string& expected_hex) {
  if (dataset_sha256(data) != expected_hex)
    throw std::runtime_error("data integrity compromised");
}

}  // namespace advml
