#pragma once

#include <vector>

#include "sam/tensor.hpp"
#include "sam/token.hpp"

namespace sam {

// Pure stream semantics of every dataflow block. The simulator wraps each of
// these in a one-token-per-tick transducer; timing never changes the tokens.

struct ScanOut {
  TokenStream crds;  // or bv words for the bitvector scanner
  TokenStream refs;
};

/// Expands each input reference into the coordinates of the addressed fiber
/// plus output references to the next level. Fiber boundaries: a following
/// Ref yields S0, a following Stop(n) coalesces into S(n+1), Done closes the
/// last open fiber with S0 before D. An Empty input makes an empty fiber.
ScanOut scan_compressed(const CompressedLevel& level, const TokenStream& refs_in);
ScanOut scan_dense(int64_t dim, const TokenStream& refs_in);
/// Bitvector scan: one BitWord per stored word of the fiber; the ref stream
/// carries each word's cumulative-popcount position base.
ScanOut scan_bitvector(const BitvectorLevel& level, const TokenStream& refs_in);

// A merge side: one coordinate stream plus the reference streams that ride
// along with it (usually one; more when a nested merge feeds this one).
struct MergeSide {
  TokenStream crd;
  std::vector<TokenStream> refs;
};

struct MergeOut {
  TokenStream crd;
  std::vector<std::vector<TokenStream>> refs;  // [side][bundle]
};

/// Ordered coiteration keeping coordinates present on every side.
MergeOut intersect_streams(const std::vector<MergeSide>& sides);
/// Ordered coiteration keeping coordinates present on any side; absent sides'
/// reference streams carry Empty at those positions.
MergeOut union_streams(const std::vector<MergeSide>& sides);

/// Replicates the t-th reference over the t-th repsig fiber. repsig is one
/// level deeper than ref_in; Stop(n>=1) in repsig coincides with Stop(n-1) in
/// ref_in.
TokenStream repeat_stream(const TokenStream& ref_in, const TokenStream& repsig);

TokenStream array_load(const std::vector<double>& vals, const TokenStream& refs);
void array_store(std::vector<double>& mem, const TokenStream& refs, const TokenStream& data);

enum class AluOp : uint8_t { add, sub, mul };
const char* alu_op_name(AluOp op);
TokenStream alu(AluOp op, const TokenStream& a, const TokenStream& b);

/// Collapses each innermost fiber to its sum. Empty fibers vanish when
/// drop_empty, otherwise produce an explicit 0.
TokenStream reduce_scalar(const TokenStream& vals, bool drop_empty = true);

struct VectorReduceOut {
  TokenStream crds;
  TokenStream vals;
};
/// Accumulates (coordinate, value) pairs within each Stop(>=1)-delimited group
/// and re-emits them deduplicated in ascending order.
VectorReduceOut reduce_vector(const TokenStream& crds, const TokenStream& vals);

struct MatrixReduceOut {
  TokenStream crds0;  // outer
  TokenStream crds1;  // inner
  TokenStream vals;
};
/// Two-dimensional accumulator for groups delimited by Stop(>=2) on the inner
/// streams; emits nested (outer, inner, value) streams with unique points.
MatrixReduceOut reduce_matrix(const TokenStream& crds_outer, const TokenStream& crds_inner,
                              const TokenStream& vals);

struct CrdDropOut {
  TokenStream outer;
  TokenStream inner;
};
/// Removes outer coordinates whose inner fiber is empty, together with that
/// fiber's boundary; inner is one level deeper than outer.
CrdDropOut crd_drop_crd(const TokenStream& outer, const TokenStream& inner);
/// Removes (coordinate, value) pairs with zero value; vals is element-aligned
/// with outer.
CrdDropOut crd_drop_val(const TokenStream& outer, const TokenStream& vals);

/// Rebuilds a compressed level from a coordinate stream: segments are cut at
/// every fiber boundary of the innermost level.
CompressedLevel level_write_crd(const TokenStream& crds);
std::vector<double> level_write_vals(const TokenStream& vals);

struct LocateOut {
  TokenStream crds;
  TokenStream refs_in;     // input references, filtered to hits
  TokenStream refs_found;  // located positions; Empty on a miss
};
/// Probes the level for each input coordinate instead of streaming the level.
/// Dense levels always hit at r*dim + c; compressed levels binary-search the
/// selected fiber.
LocateOut locate_level(const Level& level, const TokenStream& crds, const TokenStream& refs_in);

/// Packs coordinates into b-bit presence words, bit k of word w covering
/// coordinate w*b + k; words run densely from 0 through the last nonzero word
/// of each fiber.
TokenStream bv_convert(int bits, const TokenStream& crds);

struct BvMergeOut {
  TokenStream crd;  // expanded surviving coordinates
  TokenStream refs_a;
  TokenStream refs_b;
};
/// ANDs two position-aligned bitvector streams and expands surviving bits into
/// coordinates with per-side value positions.
BvMergeOut bv_intersect(const TokenStream& a_bv, const TokenStream& a_ref,
                        const TokenStream& b_bv, const TokenStream& b_ref, int bits);

}  // namespace sam
