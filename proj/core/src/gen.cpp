#include "sam/gen.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace sam {

namespace {

// mt19937_64 output is pinned by the standard; distributions are not, so all
// sampling below uses plain modulo to stay reproducible across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}
  uint64_t next() { return eng_(); }
  int64_t below(int64_t n) { return static_cast<int64_t>(next() % static_cast<uint64_t>(n)); }
  double small_value() { return static_cast<double>(1 + below(9)); }

 private:
  std::mt19937_64 eng_;
};

// Floyd's algorithm: nnz distinct values in [0, n).
std::set<int64_t> sample_distinct(Rng& rng, int64_t n, int64_t nnz) {
  std::set<int64_t> out;
  for (int64_t j = n - nnz; j < n; ++j) {
    int64_t t = rng.below(j + 1);
    if (!out.insert(t).second) out.insert(j);
  }
  return out;
}

TensorStorage vector_from_coords(const std::string& name, int64_t dim,
                                 const std::set<int64_t>& coords, Rng& rng) {
  Coo coo;
  coo.shape = {dim};
  coo.order = 1;
  for (int64_t c : coords) coo.add({c}, rng.small_value());
  return build_storage(name, std::move(coo), {0}, {LevelFormat{LevelKind::compressed, 64}});
}

}  // namespace

TensorStorage gen_urandom(int64_t dim, int64_t nnz, uint64_t seed, const std::string& name) {
  if (nnz > dim || nnz < 0) fail(errc::infeasible, "nnz must be in [0, dim]");
  Rng rng(seed);
  auto coords = sample_distinct(rng, dim, nnz);
  return vector_from_coords(name, dim, coords, rng);
}

TensorStorage gen_urandom_sparsity(int64_t dim, double sparsity, uint64_t seed,
                                   const std::string& name) {
  if (sparsity < 0.0 || sparsity > 1.0) fail(errc::infeasible, "sparsity must be in [0,1]");
  int64_t nnz = static_cast<int64_t>(static_cast<double>(dim) * (1.0 - sparsity) + 0.5);
  return gen_urandom(dim, nnz, seed, name);
}

TensorStorage gen_urandom_matrix(int64_t rows, int64_t cols, int64_t nnz, uint64_t seed,
                                 const std::string& name) {
  return gen_urandom_tensor({rows, cols}, nnz, seed, name);
}

TensorStorage gen_urandom_tensor(const std::vector<int64_t>& shape, int64_t nnz, uint64_t seed,
                                 const std::string& name) {
  int64_t space = 1;
  for (int64_t d : shape) space *= d;
  if (nnz > space || nnz < 0) fail(errc::infeasible, "nnz must be in [0, prod(dims)]");
  Rng rng(seed);
  auto cells = sample_distinct(rng, space, nnz);
  Coo coo;
  coo.shape = shape;
  coo.order = static_cast<int>(shape.size());
  std::vector<int64_t> point(shape.size());
  for (int64_t cell : cells) {
    int64_t rest = cell;
    for (int m = coo.order - 1; m >= 0; --m) {
      point[static_cast<size_t>(m)] = rest % shape[static_cast<size_t>(m)];
      rest /= shape[static_cast<size_t>(m)];
    }
    coo.add(point, rng.small_value());
  }
  std::vector<int> mo(shape.size());
  for (size_t i = 0; i < shape.size(); ++i) mo[i] = static_cast<int>(i);
  std::vector<LevelFormat> fmt(shape.size(), LevelFormat{LevelKind::compressed, 64});
  return build_storage(name, std::move(coo), mo, fmt);
}

// Shared layout for runs and blocks: nnz/len runs per vector, one region per
// run, vector a's run at the region start and vector b's at the region middle.
static std::pair<TensorStorage, TensorStorage> paired_runs(int64_t dim, int64_t nnz, int64_t len,
                                                           uint64_t seed) {
  if (len < 1 || nnz < 1) fail(errc::infeasible, "need len >= 1 and nnz >= 1");
  if (nnz % len != 0) fail(errc::infeasible, "run/block length must divide nnz");
  const int64_t runs = nnz / len;
  const int64_t region = dim / runs;
  if (region < 2 * len) fail(errc::infeasible, "pattern does not fit the dimension");
  Rng rng(seed);
  std::set<int64_t> a_coords, b_coords;
  for (int64_t r = 0; r < runs; ++r) {
    int64_t base = r * region;
    for (int64_t k = 0; k < len; ++k) {
      a_coords.insert(base + k);
      b_coords.insert(base + region / 2 + k);
    }
  }
  auto a = vector_from_coords("b", dim, a_coords, rng);
  auto c = vector_from_coords("c", dim, b_coords, rng);
  return {std::move(a), std::move(c)};
}

std::pair<TensorStorage, TensorStorage> gen_runs(int64_t dim, int64_t nnz, int64_t run_len,
                                                 uint64_t seed) {
  return paired_runs(dim, nnz, run_len, seed);
}

std::pair<TensorStorage, TensorStorage> gen_blocks(int64_t dim, int64_t nnz, int64_t block_size,
                                                   uint64_t seed) {
  return paired_runs(dim, nnz, block_size, seed);
}

TensorStorage gen_even_matrix(int64_t rows, int64_t cols, int64_t nnz, const std::string& name) {
  if (nnz > rows * cols) fail(errc::infeasible, "nnz exceeds the index space");
  Coo coo;
  coo.shape = {rows, cols};
  coo.order = 2;
  int64_t placed = 0;
  for (int64_t i = 0; i < rows; ++i) {
    int64_t want = (nnz * (i + 1)) / rows - (nnz * i) / rows;
    for (int64_t k = 0; k < want; ++k) {
      int64_t j = (want >= cols) ? k % cols : (k * cols) / want;
      coo.add({i, j}, static_cast<double>(1 + (i + k) % 9));
    }
    placed += want;
  }
  (void)placed;
  return build_storage(name, std::move(coo), {0, 1},
                       {LevelFormat{LevelKind::compressed, 64},
                        LevelFormat{LevelKind::compressed, 64}});
}

DenseTensor gen_dense(const std::vector<int64_t>& shape, uint64_t seed) {
  DenseTensor d(shape);
  Rng rng(seed);
  for (auto& v : d.data) v = rng.small_value();
  return d;
}

TensorStorage gen_dense_matrix(int64_t rows, int64_t cols, uint64_t seed,
                               const std::string& name) {
  return to_levels(gen_dense({rows, cols}, seed), "dd", name);
}

}  // namespace sam
