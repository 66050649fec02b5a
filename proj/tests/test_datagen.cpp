#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"

using namespace advml;

TEST_CASE("two gaussians: counts, flags, degenerate limit") {
  Prng rng(1);
  Dataset data = gen_two_gaussians(50, 1.0, 1.0, rng);
  CHECK(data.size() == 100);
  CHECK(data.dim() == 2);
  CHECK(data.num_classes == 2);
  for (RowFlag f : data.flags) CHECK(f == RowFlag::Clean);

  Prng rng0(2);
  Dataset degenerate = gen_two_gaussians(10, 1.0, 0.0, rng0);
  for (std::size_t r = 0; r < degenerate.size(); ++r) {
    const double expect = degenerate.labels[r] == 0 ? -1.0 : 1.0;
    CHECK(degenerate.features(r, 0) == expect);
    CHECK(degenerate.features(r, 1) == expect);
  }

  CHECK_THROWS_AS(gen_two_gaussians(0, 1.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(gen_two_gaussians(5, 1.0, -1.0, rng), std::invalid_argument);
}

TEST_CASE("two gaussians: empirical means concentrate around centers") {
  Prng rng(33);
  const std::size_t n = 400;
  const double std = 0.8;
  Dataset data = gen_two_gaussians(n, 1.0, std, rng);
  double mean0 = 0.0, mean1 = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.labels[r] == 0)
      mean0 += data.features(r, 0);
    else
      mean1 += data.features(r, 1);
  }
  mean0 /= static_cast<double>(n);
  mean1 /= static_cast<double>(n);
  const double bound = 3.0 * std / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean0 - (-1.0)) < bound);
  CHECK(std::abs(mean1 - 1.0) < bound);
}

TEST_CASE("grid classes: noiseless samples equal the scaled template") {
  Prng rng(4);
  GridSpec grid{8, 8};
  Dataset data = gen_grid_classes(3, 4, grid, 0.0, rng);
  CHECK(data.size() == 12);
  CHECK(data.grid.has_value());
  CHECK(data.grid->height == 8);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const Matrix tmpl = grid_class_template(data.labels[r], grid);
    for (std::size_t c = 0; c < data.dim(); ++c)
      CHECK(data.features(r, c) == 0.8 * tmpl(0, c));
  }
}

TEST_CASE("grid classes: values stay in [0,1] and templates differ enough") {
  Prng rng(5);
  GridSpec grid{8, 8};
  Dataset data = gen_grid_classes(50, 4, grid, 0.5, rng);
  for (double v : data.features.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // every template pair differs in at least 25% of pixels
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const Matrix ta = grid_class_template(a, grid);
      const Matrix tb = grid_class_template(b, grid);
      std::size_t diff = 0;
      for (std::size_t i = 0; i < ta.size(); ++i)
        if (ta.data()[i] != tb.data()[i]) ++diff;
      CHECK(diff * 4 >= ta.size());
    }

  CHECK_THROWS_AS(gen_grid_classes(5, 1, grid, 0.1, rng), std::invalid_argument);
  // a 5-row grid cannot give 25% separation for stripe-adjacent classes
  CHECK_THROWS_AS(gen_grid_classes(5, 4, GridSpec{5, 8}, 0.1, rng), std::invalid_argument);
}

TEST_CASE("grid classes: a small mlp separates the four classes") {
  Prng rng(6);
  Dataset data = gen_grid_classes(200, 4, GridSpec{8, 8}, 0.15, rng);
  Prng split_rng(7);
  auto [train_set, test_set] = train_test_split(data, 0.25, split_rng);

  Prng init_rng(8);
  MlpModel m = mlp_init({64, 32, 4}, ActivationKind::Relu, init_rng);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.optimizer = SgdConfig{0.2};
  cfg.seed = 9;
  train(m, train_set, cfg);
  CHECK(evaluate(m, test_set).accuracy >= 0.9);
}

TEST_CASE("train_test_split: stratified, disjoint, union-preserving") {
  Prng rng(10);
  Dataset data = gen_two_gaussians(50, 1.0, 1.0, rng);
  Prng split_rng(11);
  auto [train_set, test_set] = train_test_split(data, 0.5, split_rng);
  CHECK(train_set.size() == 50);
  CHECK(test_set.size() == 50);

  const auto count_class = [](const Dataset& d, int cls) {
    return std::count(d.labels.begin(), d.labels.end(), cls);
  };
  CHECK(count_class(train_set, 0) == 25);
  CHECK(count_class(train_set, 1) == 25);
  CHECK(count_class(test_set, 0) == 25);

  // union as a multiset of rows equals the input
  std::multiset<std::pair<double, double>> input_rows, output_rows;
  for (std::size_t r = 0; r < data.size(); ++r)
    input_rows.insert({data.features(r, 0), data.features(r, 1)});
  for (const Dataset* part : {&train_set, &test_set})
    for (std::size_t r = 0; r < part->size(); ++r)
      output_rows.insert({part->features(r, 0), part->features(r, 1)});
  CHECK(input_rows == output_rows);

  // same seed gives the identical split
  Prng split_a(42), split_b(42);
  auto [ta, sa] = train_test_split(data, 0.3, split_a);
  auto [tb, sb] = train_test_split(data, 0.3, split_b);
  CHECK(ta.features == tb.features);
  CHECK(sa.labels == sb.labels);

  CHECK_THROWS_AS(train_test_split(data, 0.0, rng), std::invalid_argument);
  Dataset thin;
  thin.features = Matrix(3, 1, 0.0);
  thin.labels = {0, 0, 1};
  thin.num_classes = 2;
  thin.flags.assign(3, RowFlag::Clean);
  CHECK_THROWS_AS(train_test_split(thin, 0.5, rng), std::invalid_argument);
}

TEST_CASE("train_test_split stratification is within one of exact proportion") {
  Prng rng(13);
  Dataset data = gen_grid_classes(37, 4, GridSpec{8, 8}, 0.1, rng);
  Prng split_rng(14);
  auto [train_set, test_set] = train_test_split(data, 0.3, split_rng);
  for (int cls = 0; cls < 4; ++cls) {
    const double exact = 0.3 * 37.0;
    const auto got = static_cast<double>(
        std::count(test_set.labels.begin(), test_set.labels.end(), cls));
    CHECK(std::abs(got - exact) <= 1.0);
  }
}

TEST_CASE("minibatches: sizes, order, reproducibility, partition") {
  Prng rng(15);
  auto batches = minibatches(10, 3, false, rng);
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].size() == 3);
  CHECK(batches[3].size() == 1);
  CHECK(batches[0] == std::vector<std::size_t>{0, 1, 2});

  Prng rng_a(16), rng_b(16);
  CHECK(minibatches(20, 7, true, rng_a) == minibatches(20, 7, true, rng_b));

  // shuffled batches still cover every row exactly once
  Prng rng_c(17);
  auto shuffled = minibatches(23, 5, true, rng_c);
  std::vector<bool> seen(23, false);
  for (const auto& batch : shuffled)
    for (std::size_t i : batch) {
      CHECK(!seen[i]);
      seen[i] = true;
    }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

  CHECK_THROWS_AS(minibatches(10, 0, false, rng), std::invalid_argument);
}

TEST_CASE("normalize: midpoint maps to zero, roundtrip identity") {
  Dataset data;
  data.features = Matrix::from_rows({{0.0, 0.5}, {1.0, 0.25}});
  data.labels = {0, 1};
  data.num_classes = 2;
  data.flags.assign(2, RowFlag::Clean);

  Dataset normalized = normalize(data, 0.5, 0.5);
  CHECK(normalized.features(0, 1) == 0.0);
  CHECK(normalized.features(0, 0) == -1.0);
  CHECK(normalized.features(1, 0) == 1.0);
  for (double v : normalized.features.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  Dataset roundtrip = denormalize(normalized, 0.5, 0.5);
  CHECK(max_abs_diff(roundtrip.features, data.features) < 1e-12);

  CHECK_THROWS_AS(normalize(data, 0.5, 0.0), std::invalid_argument);
}
