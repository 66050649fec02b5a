#include "doctest.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "advml/dataset.hpp"
#include "advml/matrix.hpp"
#include "advml/prng.hpp"
#include "advml/sha256.hpp"

using namespace advml;

TEST_CASE("matrix basics and matmul") {
  Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  Matrix b = Matrix::from_rows({{7, 8}, {9, 10}, {11, 12}});
  Matrix c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == doctest::Approx(58.0));
  CHECK(c(0, 1) == doctest::Approx(64.0));
  CHECK(c(1, 0) == doctest::Approx(139.0));
  CHECK(c(1, 1) == doctest::Approx(154.0));

  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);

  Matrix t = transpose(a);
  CHECK(t.rows() == 3);
  CHECK(t(0, 1) == doctest::Approx(4.0));

  Matrix row = Matrix::from_rows({{1, 1, 1}});
  Matrix sum = a;
  add_row_inplace(sum, row);
  CHECK(sum(1, 2) == doctest::Approx(7.0));

  clamp_inplace(sum, 0.0, 5.0);
  CHECK(max_abs(sum) == doctest::Approx(5.0));
}

TEST_CASE("take_rows selects in order") {
  Matrix m = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}});
  Matrix picked = take_rows(m, {2, 0});
  CHECK(picked(0, 0) == doctest::Approx(2.0));
  CHECK(picked(1, 0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(take_rows(m, {3}), std::invalid_argument);
}

TEST_CASE("prng determinism and child streams") {
  Prng a(42);
  Prng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // children are independent of parent draw position
  Prng c(42);
  c.next_u64();
  CHECK(Prng(42).child("x").next_u64() == c.child("x").next_u64());
  CHECK(Prng(42).child("x").next_u64() != Prng(42).child("y").next_u64());
  CHECK(Prng(42).child("x", 0).next_u64() != Prng(42).child("x", 1).next_u64());
}

TEST_CASE("prng uniform and gaussian ranges") {
  Prng rng(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < n; ++i) mean += rng.gaussian();
  mean /= n;
  CHECK(std::abs(mean) < 0.05);

  // uniform_index respects the bound
  for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
}

TEST_CASE("prng shuffle is a permutation") {
  Prng rng(3);
  auto p = rng.permutation(100);
  std::vector<bool> seen(100, false);
  for (std::size_t v : p) {
    CHECK(!seen[v]);
    seen[v] = true;
  }
}

TEST_CASE("sha256 standard vectors") {
  CHECK(Sha256::hex_digest("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256::hex_digest("abc", 3) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // streaming across block boundaries
  Sha256 h;
  std::string block(100, 'a');
  for (int i = 0; i < 10; ++i) h.update(block.data(), block.size());
  CHECK(Sha256::to_hex(h.finish()) ==
        Sha256::hex_digest(std::string(1000, 'a').data(), 1000));
}

TEST_CASE("dataset digest golden values") {
  // frozen from an independent sha256 over the documented canonical layout
  Dataset empty;
  CHECK(dataset_sha256(empty) ==
        "bcde26bb62eabb245f75f81ff6d0c453eb4d27e9186c2b9e643eb78fbc666dd3");

  Dataset tiny;
  tiny.features = Matrix::from_rows({{0.0, 0.5}, {1.0, 0.25}});
  tiny.labels = {0, 1};
  tiny.num_classes = 2;
  tiny.flags = {RowFlag::Clean, RowFlag::Clean};
  CHECK(dataset_sha256(tiny) ==
        "0c8f1ad99875a7c957158b017778de381b0550b774b66406c3091ad06d6702b5");

  CHECK(dataset_sha256(tiny) == dataset_sha256(tiny));

  Dataset flipped = tiny;
  flipped.labels[0] = 1;
  CHECK(dataset_sha256(flipped) != dataset_sha256(tiny));

  CHECK_NOTHROW(verify_dataset(tiny, dataset_sha256(tiny)));
  CHECK_THROWS_WITH_AS(verify_dataset(flipped, dataset_sha256(tiny)),
                       "data integrity compromised", std::runtime_error);
}

TEST_CASE("dataset digest avalanche on single-bit feature change") {
  Dataset d;
  d.features = Matrix(4, 3, 0.25);
  d.labels = {0, 1, 0, 1};
  d.num_classes = 2;
  d.flags.assign(4, RowFlag::Clean);
  const std::string base = dataset_sha256(d);

  Dataset tweaked = d;
  // flip the lowest mantissa bit of one entry
  double v = tweaked.features(2, 1);
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, 8);
  bits ^= 1;
  std::memcpy(&v, &bits, 8);
  tweaked.features(2, 1) = v;
  CHECK(dataset_sha256(tweaked) != base);
}
