#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sam/compile.hpp"
#include "sam/sim.hpp"

namespace sam {

// Desk-scale studies: each returns rows ready to print as CSV. All runs are
// deterministic under the given seed.

struct StudyRow {
  std::string x;       // sweep parameter (order name, K, run length, ...)
  std::string config;  // variant name
  int64_t cycles = 0;
};

/// Sparse matrix multiply X(i,j) = sum_k B(i,k) C(k,j) across the six loop
/// orders, B of shape rows_b x inner, C inner x cols_c, both uniformly random.
std::vector<StudyRow> study_ordering(int64_t rows_b, int64_t inner, int64_t cols_c,
                                     double sparsity, uint64_t seed);

/// Fused vs unfused vs locate-enhanced SDDMM, X(i,j) = sum_k B(i,j) C(i,k) D(j,k)
/// with dense C and D and a sweep of the inner dimension K.
std::vector<StudyRow> study_fusion(int64_t dim, double sparsity_b,
                                   const std::vector<int64_t>& k_sweep, uint64_t seed);

/// Element-wise vector multiply under different level formats.
/// Variants: Dense, Crd, Crd-skip, Crd-split, BV, BV-split.
std::vector<StudyRow> study_accel_urandom(int64_t dim, const std::vector<double>& sparsities,
                                          int bv_bits, int64_t split, uint64_t seed);
std::vector<StudyRow> study_accel_runs(int64_t dim, int64_t nnz,
                                       const std::vector<int64_t>& run_lens, int bv_bits,
                                       int64_t split, uint64_t seed);
std::vector<StudyRow> study_accel_blocks(int64_t dim, int64_t nnz,
                                         const std::vector<int64_t>& block_sizes, int bv_bits,
                                         int64_t split, uint64_t seed);

struct StreamBreakdownRow {
  std::string matrix;
  std::string level;      // "outer" or "inner"
  int64_t coords = 0;
  int64_t stops = 0;
  int64_t done = 0;
  int64_t idle = 0;
  int64_t cycles = 0;
  double stop_fraction = 0.0;  // stops over non-idle tokens
  double idle_fraction = 0.0;  // idle over cycles
};

/// Matrix identity X(i,j) = B(i,j): per-level token breakdown of the scanner
/// coordinate streams.
std::vector<StreamBreakdownRow> study_stream_breakdown(const TensorStorage& matrix);

std::string rows_to_csv(const std::vector<StudyRow>& rows, const std::string& x_name);
std::string breakdown_to_csv(const std::vector<StreamBreakdownRow>& rows);

}  // namespace sam
