#pragma once

#include <cstdint>
#include <utility>

#include "sam/tensor.hpp"

namespace sam {

/// Uniformly random sparse vector with exactly nnz distinct coordinates.
/// Deterministic under seed; values are small positive integers.
TensorStorage gen_urandom(int64_t dim, int64_t nnz, uint64_t seed, const std::string& name = "v");
TensorStorage gen_urandom_sparsity(int64_t dim, double sparsity, uint64_t seed,
                                   const std::string& name = "v");

/// Uniformly random sparse matrix with exactly nnz distinct cells.
TensorStorage gen_urandom_matrix(int64_t rows, int64_t cols, int64_t nnz, uint64_t seed,
                                 const std::string& name = "B");

/// Uniformly random order-N tensor.
TensorStorage gen_urandom_tensor(const std::vector<int64_t>& shape, int64_t nnz, uint64_t seed,
                                 const std::string& name = "B");

/// Pair of vectors whose nonzeros come in runs of run_len, interleaved so the
/// two vectors' runs never overlap: one vector's runs sit in the other's gaps.
std::pair<TensorStorage, TensorStorage> gen_runs(int64_t dim, int64_t nnz, int64_t run_len,
                                                 uint64_t seed);

/// Pair of vectors with contiguous dense blocks of block_size at evenly spaced
/// offsets, the second vector's blocks offset into the first's gaps.
std::pair<TensorStorage, TensorStorage> gen_blocks(int64_t dim, int64_t nnz, int64_t block_size,
                                                   uint64_t seed);

/// Matrix with exactly nnz entries spread as evenly as possible over all rows
/// (every row nonempty when nnz >= rows). Deterministic, no seed.
TensorStorage gen_even_matrix(int64_t rows, int64_t cols, int64_t nnz,
                              const std::string& name = "B");

/// Fully dense matrix with deterministic small-integer values.
TensorStorage gen_dense_matrix(int64_t rows, int64_t cols, uint64_t seed,
                               const std::string& name = "C");
DenseTensor gen_dense(const std::vector<int64_t>& shape, uint64_t seed);

}  // namespace sam
