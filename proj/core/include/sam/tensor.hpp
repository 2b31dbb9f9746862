#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sam/error.hpp"

namespace sam {

// One coordinate-tree level. A dense level stores only the fiber size; a
// compressed level stores seg/crd arrays; a bitvector level stores seg over
// packed presence words. Fiber p of a compressed level owns
// crd[seg[p], seg[p+1]); for bitvector levels the same with words, where bit k
// of word w covers coordinate w*bits + k within the fiber.
struct DenseLevel {
  int64_t dim = 0;
  bool operator==(const DenseLevel&) const = default;
};

struct CompressedLevel {
  std::vector<int64_t> seg{0};
  std::vector<int64_t> crd;
  bool operator==(const CompressedLevel&) const = default;
};

struct BitvectorLevel {
  std::vector<int64_t> seg{0};
  std::vector<uint64_t> words;
  int bits = 64;
  // popcount of words[0, i): position base for the children of word i
  std::vector<int64_t> pop_base{0};
  bool operator==(const BitvectorLevel&) const = default;

  void rebuild_pop_base();
};

using Level = std::variant<DenseLevel, CompressedLevel, BitvectorLevel>;

enum class LevelKind : uint8_t { dense, compressed, bitvector };

struct LevelFormat {
  LevelKind kind = LevelKind::compressed;
  int bits = 64;  // bitvector word width
  bool operator==(const LevelFormat&) const = default;
};

/// Parses a per-level format string: one letter per mode from {d,s,b}, with an
/// optional width after b, e.g. "ss", "ds", "b64", "bb4".
std::vector<LevelFormat> parse_format(const std::string& s);
std::string format_to_string(const std::vector<LevelFormat>& f);

LevelKind level_kind(const Level& l);
int64_t level_fiber_count(const Level& l);  // number of fibers represented
int64_t level_coord_count(const Level& l);  // stored coordinates across fibers

/// Dense row-major tensor used as the oracle-side representation.
struct DenseTensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  DenseTensor() = default;
  explicit DenseTensor(std::vector<int64_t> shape_);
  int order() const { return static_cast<int>(shape.size()); }
  int64_t size() const;
  double& at(const std::vector<int64_t>& idx);
  double at(const std::vector<int64_t>& idx) const;
  bool operator==(const DenseTensor&) const = default;
};

/// Coordinate list with logical-order indices; the exchange format between
/// file loaders, generators, and level builders.
struct Coo {
  std::vector<int64_t> shape;
  int order = 0;
  std::vector<int64_t> idx;  // order * count entries, point-major
  std::vector<double> val;

  int64_t count() const { return static_cast<int64_t>(val.size()); }
  void add(const std::vector<int64_t>& point, double v);
  /// Sorts by the given storage order and sums duplicates.
  void normalize(const std::vector<int>& mode_order);
};

// An in-memory fibertree: ordered levels (outermost first) over a value array.
// mode_order maps storage level -> logical mode, so a CSC matrix is
// mode_order {1, 0}. Scalars have zero levels and one value.
struct TensorStorage {
  std::string name;
  std::vector<int64_t> shape;  // logical dims
  std::vector<int> mode_order;
  std::vector<Level> levels;
  std::vector<double> vals;

  int order() const { return static_cast<int>(shape.size()); }
  int64_t storage_dim(int level) const { return shape[mode_order[level]]; }
  int64_t nnz() const { return static_cast<int64_t>(vals.size()); }
  std::vector<LevelFormat> formats() const;

  /// Checks seg monotonicity, per-fiber coordinate order, and cross-level
  /// reference reachability.
  void check() const;
};

TensorStorage build_storage(const std::string& name, Coo coo, const std::vector<int>& mode_order,
                            const std::vector<LevelFormat>& formats);

TensorStorage to_levels(const DenseTensor& dense, const std::string& format,
                        const std::string& name = "t");
TensorStorage to_levels(const DenseTensor& dense, const std::vector<LevelFormat>& formats,
                        const std::vector<int>& mode_order, const std::string& name = "t");
DenseTensor from_levels(const TensorStorage& t);
Coo storage_to_coo(const TensorStorage& t);

TensorStorage reorder_modes(const TensorStorage& t, const std::vector<int>& perm);
TensorStorage reformat(const TensorStorage& t, const std::vector<LevelFormat>& formats);

/// Splits an order-1 tensor into `chunks` fibers of size ceil(dim/chunks),
/// padding the dimension; coordinate c maps to (c / size, c % size).
TensorStorage split_vector(const TensorStorage& t, int64_t chunks);
TensorStorage unsplit_vector(const TensorStorage& t, int64_t orig_dim);

bool storage_equal(const TensorStorage& a, const TensorStorage& b);

}  // namespace sam
