#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "sam/io.hpp"
#include "testutil.hpp"

using namespace sam;
using namespace samtest;

namespace {

DenseTensor example_matrix() {
  // 4x4 with rows {0:(1)@1, 1:(2)@0 (3)@2, 3:(4)@1 (5)@3}
  DenseTensor d({4, 4});
  d.at({0, 1}) = 1;
  d.at({1, 0}) = 2;
  d.at({1, 2}) = 3;
  d.at({3, 1}) = 4;
  d.at({3, 3}) = 5;
  return d;
}

std::string write_temp(const std::string& body) {
  static int counter = 0;
  std::string path = "samkit_test_" + std::to_string(counter++) + ".tmp";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("dense to DCSR levels matches the worked example") {
  TensorStorage t = to_levels(example_matrix(), "ss", "B");
  const auto& li = std::get<CompressedLevel>(t.levels[0]);
  const auto& lj = std::get<CompressedLevel>(t.levels[1]);
  CHECK(li.seg == std::vector<int64_t>{0, 3});
  CHECK(li.crd == std::vector<int64_t>{0, 1, 3});
  CHECK(lj.seg == std::vector<int64_t>{0, 1, 3, 5});
  CHECK(lj.crd == std::vector<int64_t>{1, 0, 2, 1, 3});
  CHECK(t.vals == std::vector<double>{1, 2, 3, 4, 5});
  CHECK(from_levels(t) == example_matrix());
}

TEST_CASE("all-zero matrix compresses to an empty level") {
  TensorStorage t = to_levels(DenseTensor({3, 3}), "ss");
  CHECK(std::get<CompressedLevel>(t.levels[0]).seg == std::vector<int64_t>{0, 0});
  CHECK(t.vals.empty());
}

TEST_CASE("bitvector level packing") {
  DenseTensor v({4});
  v.at({1}) = 1;
  v.at({3}) = 2;
  TensorStorage t = to_levels(v, "b4");
  const auto& bl = std::get<BitvectorLevel>(t.levels[0]);
  CHECK(bl.words == std::vector<uint64_t>{0b1010});
  CHECK(t.vals == std::vector<double>{1, 2});
  CHECK(from_levels(t) == v);
}

TEST_CASE("level round trips across format combinations") {
  std::mt19937_64 rng(7);
  std::vector<std::string> fmts1 = {"d", "s", "b4"};
  std::vector<std::string> fmts2 = {"dd", "ds", "sd", "ss", "bs", "sb4", "b8b4"};
  std::vector<std::string> fmts3 = {"sss", "dsd", "sbd", "ddd", "bsb8"};
  auto random_dense = [&](std::vector<int64_t> shape) {
    DenseTensor d(shape);
    for (auto& x : d.data)
      if (rng() % 3 == 0) x = static_cast<double>(1 + rng() % 9);
    return d;
  };
  for (int rep = 0; rep < 10; ++rep) {
    DenseTensor d1 = random_dense({8});
    for (const auto& f : fmts1) CHECK(from_levels(to_levels(d1, f)) == d1);
    DenseTensor d2 = random_dense({5, 8});
    for (const auto& f : fmts2) CHECK(from_levels(to_levels(d2, f)) == d2);
    DenseTensor d3 = random_dense({4, 3, 8});
    for (const auto& f : fmts3) CHECK(from_levels(to_levels(d3, f)) == d3);
  }
}

TEST_CASE("reorder_modes produces column-major storage") {
  TensorStorage t = to_levels(example_matrix(), "ss", "B");
  TensorStorage csc = reorder_modes(t, {1, 0});
  CHECK(csc.mode_order == std::vector<int>{1, 0});
  const auto& lj = std::get<CompressedLevel>(csc.levels[0]);
  CHECK(lj.crd == std::vector<int64_t>{0, 1, 2, 3});  // nonempty columns
  CHECK(from_levels(csc) == example_matrix());

  TensorStorage same = reorder_modes(t, {0, 1});
  CHECK(storage_equal(t, same));
}

TEST_CASE("reorder_modes on an order-3 tensor matches the dense oracle") {
  std::mt19937_64 rng(21);
  DenseTensor d({4, 5, 3});
  for (auto& x : d.data)
    if (rng() % 4 == 0) x = static_cast<double>(1 + rng() % 9);
  TensorStorage t = to_levels(d, "sss");
  TensorStorage p = reorder_modes(t, {2, 0, 1});
  CHECK(from_levels(p) == d);
  CHECK(p.mode_order == std::vector<int>{2, 0, 1});
}

TEST_CASE("split_vector keeps nonzeros and pads the dimension") {
  DenseTensor v({8});
  v.at({1}) = 3;
  v.at({6}) = 7;
  TensorStorage t = to_levels(v, "s", "v");
  TensorStorage s2 = split_vector(t, 2);
  const auto& outer = std::get<CompressedLevel>(s2.levels[0]);
  const auto& inner = std::get<CompressedLevel>(s2.levels[1]);
  CHECK(outer.crd == std::vector<int64_t>{0, 1});
  CHECK(inner.crd == std::vector<int64_t>{1, 2});
  CHECK(s2.nnz() == t.nnz());
  CHECK(from_levels(unsplit_vector(s2, 8)) == v);

  TensorStorage s1 = split_vector(t, 1);
  CHECK(std::get<CompressedLevel>(s1.levels[0]).crd == std::vector<int64_t>{0});

  TensorStorage big = gen_urandom(2000, 100, 11);
  TensorStorage sb = split_vector(big, 64);
  CHECK(sb.shape == std::vector<int64_t>{64, 32});
  CHECK(sb.nnz() == 100);
  CHECK(from_levels(unsplit_vector(sb, 2000)) == from_levels(big));
}

TEST_CASE("matrix market reader builds DCSR with duplicates summed") {
  std::string path = write_temp(
      "%%MatrixMarket matrix coordinate real general\n"
      "% comment line\n"
      "4 4 5\n"
      "1 2 1\n2 1 2\n2 3 3\n4 2 4\n4 4 5\n");
  TensorStorage t = load_matrix_market(path);
  CHECK(from_levels(t) == example_matrix());
  std::remove(path.c_str());

  std::string dup = write_temp(
      "%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1\n1 1 2\n");
  TensorStorage d = load_matrix_market(dup);
  CHECK(d.vals == std::vector<double>{3});
  std::remove(dup.c_str());

  std::string empty = write_temp("%%MatrixMarket matrix coordinate real general\n3 3 0\n");
  TensorStorage e = load_matrix_market(empty);
  CHECK(std::get<CompressedLevel>(e.levels[0]).seg == std::vector<int64_t>{0, 0});
  CHECK(e.vals.empty());
  std::remove(empty.c_str());
}

TEST_CASE("matrix market rejects complex and round trips through write") {
  std::string path = write_temp(
      "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(path), doctest::Contains("UnsupportedField"), Error);
  std::remove(path.c_str());

  TensorStorage t = to_levels(example_matrix(), "ss", "B");
  write_matrix_market("samkit_rt.tmp", t);
  TensorStorage u = load_matrix_market("samkit_rt.tmp");
  CHECK(storage_equal(t, u));
  std::remove("samkit_rt.tmp");
}

TEST_CASE("frostt reader handles order-3 files") {
  std::string path = write_temp("1 1 2 1.5\n2 3 1 2\n2 3 4 3\n");
  TensorStorage t = load_frostt(path);
  CHECK(t.order() == 3);
  CHECK(t.nnz() == 3);
  CHECK(t.shape == std::vector<int64_t>{2, 3, 4});
  std::remove(path.c_str());

  std::string single = write_temp("1 1 1 7.0\n");
  TensorStorage s = load_frostt(single);
  CHECK(s.vals == std::vector<double>{7});
  for (const auto& l : s.levels)
    CHECK(std::get<CompressedLevel>(l).crd == std::vector<int64_t>{0});
  std::remove(single.c_str());

  std::string ragged = write_temp("1 1 1 7.0\n1 2 3\n");
  CHECK_THROWS_WITH_AS(load_frostt(ragged), doctest::Contains("line 2"), Error);
  std::remove(ragged.c_str());
}

TEST_CASE("generators are reproducible and hit their counts") {
  TensorStorage a = gen_urandom_sparsity(2000, 0.95, 7);
  CHECK(a.nnz() == 100);
  TensorStorage b = gen_urandom_sparsity(2000, 0.95, 7);
  CHECK(storage_equal(a, b));
  const auto& lvl = std::get<CompressedLevel>(a.levels[0]);
  for (size_t i = 1; i < lvl.crd.size(); ++i) CHECK(lvl.crd[i - 1] < lvl.crd[i]);

  auto [r1, r2] = gen_runs(2000, 400, 1, 3);
  CHECK(r1.nnz() == 400);
  CHECK(r2.nnz() == 400);

  auto [b1, b2] = gen_blocks(2000, 400, 400, 3);
  CHECK(b1.nnz() == 400);
  const auto& bl = std::get<CompressedLevel>(b1.levels[0]);
  for (size_t i = 1; i < bl.crd.size(); ++i) CHECK(bl.crd[i] == bl.crd[i - 1] + 1);  // one block

  // runs of a never overlap runs of b
  auto [x1, x2] = gen_runs(2000, 400, 8, 3);
  DenseTensor d1 = from_levels(x1), d2 = from_levels(x2);
  for (int64_t i = 0; i < 2000; ++i) CHECK(!(d1.at({i}) != 0 && d2.at({i}) != 0));
}

TEST_CASE("even matrix generator covers every row") {
  TensorStorage t = gen_even_matrix(630, 42, 1260);
  CHECK(t.nnz() == 1260);
  CHECK(std::get<CompressedLevel>(t.levels[0]).crd.size() == 630);
}
