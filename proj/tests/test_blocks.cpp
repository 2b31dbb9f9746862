#include <bit>
#include <set>

#include "doctest.h"
#include "sam/blocks.hpp"
#include "testutil.hpp"

using namespace sam;
using namespace samtest;

namespace {

TensorStorage example_dcsr() {
  DenseTensor d({4, 4});
  d.at({0, 1}) = 1;
  d.at({1, 0}) = 2;
  d.at({1, 2}) = 3;
  d.at({3, 1}) = 4;
  d.at({3, 3}) = 5;
  return to_levels(d, "ss", "B");
}

}  // namespace

TEST_CASE("compressed scan walks the example matrix level by level") {
  TensorStorage B = example_dcsr();
  ScanOut top = scan_compressed(std::get<CompressedLevel>(B.levels[0]), root_ref_stream());
  CHECK(to_text(top.crds) == "0,1,3,S0,D");
  CHECK(to_text(top.refs) == "0,1,2,S0,D");

  ScanOut inner = scan_compressed(std::get<CompressedLevel>(B.levels[1]), top.refs);
  CHECK(to_text(inner.crds) == "1,S0,0,2,S0,1,3,S1,D");
  CHECK(to_text(inner.refs) == "0,S0,1,2,S0,3,4,S1,D");

  ScanOut none = scan_compressed(std::get<CompressedLevel>(B.levels[0]), ref("D"));
  CHECK(to_text(none.crds) == "D");
  CHECK(to_text(none.refs) == "D");

  CHECK_THROWS_WITH_AS(scan_compressed(std::get<CompressedLevel>(B.levels[0]), ref("9,D")),
                       doctest::Contains("RefOutOfRange"), Error);
}

TEST_CASE("empty input fibers pass through scanners") {
  TensorStorage B = example_dcsr();
  ScanOut out = scan_compressed(std::get<CompressedLevel>(B.levels[0]), ref("N,D"));
  CHECK(to_text(out.crds) == "S0,D");
  ScanOut mid = scan_compressed(std::get<CompressedLevel>(B.levels[1]), ref("0,N,S0,D"));
  CHECK(to_text(mid.crds) == "1,S0,S1,D");
}

TEST_CASE("dense scan applies the affine reference rule") {
  ScanOut a = scan_dense(3, root_ref_stream());
  CHECK(to_text(a.crds) == "0,1,2,S0,D");
  CHECK(to_text(a.refs) == "0,1,2,S0,D");

  ScanOut b = scan_dense(2, ref("0,1,S0,D"));
  CHECK(to_text(b.crds) == "0,1,S0,0,1,S1,D");
  CHECK(to_text(b.refs) == "0,1,S0,2,3,S1,D");

  ScanOut c = scan_dense(0, root_ref_stream());
  CHECK(to_text(c.crds) == "S0,D");
}

TEST_CASE("bitvector scan emits words with popcount bases") {
  DenseTensor v({10});
  for (int64_t c : {0, 2, 6, 8, 9}) v.at({c}) = 1;
  TensorStorage t = to_levels(v, "b4");
  ScanOut out = scan_bitvector(std::get<BitvectorLevel>(t.levels[0]), root_ref_stream());
  CHECK(to_text(out.crds) == "B:0101,B:0100,B:0011,S0,D");
  CHECK(to_text(out.refs) == "0,2,3,S0,D");
}

TEST_CASE("intersection is a per-fiber ordered merge") {
  MergeOut out = intersect_streams({{crd("0,2,3,S0,D"), {ref("0,1,2,S0,D")}},
                                    {crd("2,3,4,S0,D"), {ref("0,1,2,S0,D")}}});
  CHECK(to_text(out.crd) == "2,3,S0,D");
  CHECK(to_text(out.refs[0][0]) == "1,2,S0,D");
  CHECK(to_text(out.refs[1][0]) == "0,1,S0,D");

  MergeOut disjoint = intersect_streams({{crd("0,2,S0,D"), {ref("0,1,S0,D")}},
                                         {crd("1,3,S0,D"), {ref("0,1,S0,D")}}});
  CHECK(to_text(disjoint.crd) == "S0,D");

  TokenStream a = crd("1,4,S0,2,S1,D");
  TokenStream r = ref("0,1,S0,2,S1,D");
  MergeOut same = intersect_streams({{a, {r}}, {a, {r}}});
  CHECK(same.crd == a);
  CHECK(same.refs[0][0] == r);
  CHECK(same.refs[1][0] == r);
}

TEST_CASE("union keeps every coordinate and pads misses with N") {
  MergeOut out = union_streams({{crd("0,2,S0,D"), {ref("0,1,S0,D")}},
                                {crd("1,2,S0,D"), {ref("0,1,S0,D")}}});
  CHECK(to_text(out.crd) == "0,1,2,S0,D");
  CHECK(to_text(out.refs[0][0]) == "0,N,1,S0,D");
  CHECK(to_text(out.refs[1][0]) == "N,0,1,S0,D");

  MergeOut with_empty = union_streams({{crd("0,1,S0,D"), {ref("0,1,S0,D")}},
                                       {crd("S0,D"), {ref("S0,D")}}});
  CHECK(to_text(with_empty.crd) == "0,1,S0,D");
  CHECK(to_text(with_empty.refs[1][0]) == "N,N,S0,D");

  TokenStream a = crd("0,2,S0,D");
  TokenStream r = ref("0,1,S0,D");
  MergeOut same = union_streams({{a, {r}}, {a, {r}}});
  CHECK(token_stats(same.refs[0][0]).empty == 0);
  CHECK(token_stats(same.refs[1][0]).empty == 0);
}

TEST_CASE("repeat broadcasts references over repsig fibers") {
  CHECK(to_text(repeat_stream(root_ref_stream(), crd("0,2,6,8,9,S0,D"))) == "0,0,0,0,0,S0,D");
  CHECK(to_text(repeat_stream(ref("5,7,S0,D"), crd("0,S0,1,2,S1,D"))) == "5,S0,7,7,S1,D");
  CHECK(to_text(repeat_stream(ref("D"), crd("D"))) == "D");
  CHECK(to_text(repeat_stream(ref("5,7,S0,D"), crd("S0,1,S1,D"))) == "S0,7,S1,D");
  CHECK_THROWS_WITH_AS(repeat_stream(ref("0,D"), crd("1,S0,1,S1,D")),
                       doctest::Contains("LockstepViolation"), Error);
}

TEST_CASE("array load maps references to values") {
  TensorStorage B = example_dcsr();
  CHECK(to_text(array_load(B.vals, ref("0,S0,1,2,S0,3,4,S1,D"))) == "1,S0,2,3,S0,4,5,S1,D");
  CHECK(to_text(array_load(B.vals, ref("N,0,S0,D"))) == "N,1,S0,D");
  CHECK(to_text(array_load(B.vals, ref("D"))) == "D");
  CHECK_THROWS_WITH_AS(array_load(B.vals, ref("5,D")), doctest::Contains("RefOutOfRange"), Error);
}

TEST_CASE("array store scatters aligned pairs") {
  std::vector<double> mem(4, 0.0);
  array_store(mem, ref("0,1,S0,D"), val("7,8,S0,D"));
  CHECK(mem == std::vector<double>{7, 8, 0, 0});
  array_store(mem, ref("2,0,S0,D"), val("9,1,S0,D"));
  CHECK(mem == std::vector<double>{1, 8, 9, 0});
  std::vector<double> untouched(2, 0.0);
  array_store(untouched, ref("D"), val("D"));
  CHECK(untouched == std::vector<double>{0, 0});
}

TEST_CASE("alu treats Empty as zero") {
  CHECK(to_text(alu(AluOp::mul, val("2,3,S0,D"), val("4,5,S0,D"))) == "8,15,S0,D");
  CHECK(to_text(alu(AluOp::add, val("N,3,S0,D"), val("2,N,S0,D"))) == "2,3,S0,D");
  CHECK(to_text(alu(AluOp::sub, val("5,S0,D"), val("N,S0,D"))) == "5,S0,D");
  CHECK(to_text(alu(AluOp::mul, val("N,S0,D"), val("7,S0,D"))) == "0,S0,D");
  CHECK_THROWS_WITH_AS(alu(AluOp::add, val("1,S0,D"), val("1,S1,D")),
                       doctest::Contains("ShapeMisaligned"), Error);
}

TEST_CASE("scalar reduction collapses innermost fibers") {
  CHECK(to_text(reduce_scalar(val("1,S0,2,3,S0,4,5,S1,D"))) == "1,5,9,S0,D");
  CHECK(to_text(reduce_scalar(val("S0,D"), false)) == "0,D");
  CHECK(to_text(reduce_scalar(val("S0,D"), true)) == "D");
  CHECK(to_text(reduce_scalar(val("D"))) == "D");
  CHECK(to_text(reduce_scalar(val("1,S0,S0,2,S1,D"), true)) == "1,2,S0,D");
}

TEST_CASE("vector reduction deduplicates coordinates per group") {
  VectorReduceOut out = reduce_vector(crd("1,S0,0,2,S0,1,3,S1,D"), val("1,S0,2,3,S0,4,5,S1,D"));
  CHECK(to_text(out.crds) == "0,1,2,3,S0,D");
  CHECK(to_text(out.vals) == "2,5,3,5,S0,D");

  VectorReduceOut one = reduce_vector(crd("0,2,S1,D"), val("5,6,S1,D"));
  CHECK(to_text(one.crds) == "0,2,S0,D");
  CHECK(to_text(one.vals) == "5,6,S0,D");

  // two independent groups separated inside a deeper stream
  VectorReduceOut two =
      reduce_vector(crd("1,S0,1,S1,2,S0,2,S2,D"), val("1,S0,2,S1,3,S0,4,S2,D"));
  CHECK(to_text(two.crds) == "1,S0,2,S1,D");
  CHECK(to_text(two.vals) == "3,S0,7,S1,D");
}

TEST_CASE("matrix reduction accumulates two-level points") {
  // structure (k, (i, (j))): two k-slices writing overlapping (i, j) points
  TokenStream ci = crd("0,2,S0,1,2,S1,D");
  TokenStream cj = crd("1,S0,0,S1,1,S0,0,1,S2,D");
  TokenStream vv = val("10,S0,20,S1,30,S0,40,5,S2,D");
  MatrixReduceOut out = reduce_matrix(ci, cj, vv);
  CHECK(to_text(out.crds0) == "0,1,2,S0,D");
  CHECK(to_text(out.crds1) == "1,S0,1,S0,0,1,S1,D");
  CHECK(to_text(out.vals) == "10,S0,30,S0,60,5,S1,D");
}

TEST_CASE("coordinate dropper removes empty fibers and re-coalesces") {
  CrdDropOut out = crd_drop_crd(crd("0,1,2,3,S0,D"), crd("1,S0,0,2,S0,S0,1,3,S1,D"));
  CHECK(to_text(out.outer) == "0,1,3,S0,D");
  CHECK(to_text(out.inner) == "1,S0,0,2,S0,1,3,S1,D");

  CrdDropOut id = crd_drop_crd(crd("0,1,S0,D"), crd("1,S0,2,S1,D"));
  CHECK(to_text(id.outer) == "0,1,S0,D");
  CHECK(to_text(id.inner) == "1,S0,2,S1,D");

  CrdDropOut none = crd_drop_crd(crd("0,1,S0,D"), crd("S0,S1,D"));
  CHECK(to_text(none.outer) == "D");
  CHECK(to_text(none.inner) == "D");
}

TEST_CASE("value-mode dropper removes zero pairs") {
  CrdDropOut out = crd_drop_val(crd("0,1,3,S0,D"), val("1,0,9,S0,D"));
  CHECK(to_text(out.outer) == "0,3,S0,D");
  CHECK(to_text(out.inner) == "1,9,S0,D");
}

TEST_CASE("level writer rebuilds the example arrays") {
  CompressedLevel lvl = level_write_crd(crd("1,S0,0,2,S0,1,3,S1,D"));
  CHECK(lvl.seg == std::vector<int64_t>{0, 1, 3, 5});
  CHECK(lvl.crd == std::vector<int64_t>{1, 0, 2, 1, 3});

  CompressedLevel empty = level_write_crd(crd("D"));
  CHECK(empty.seg == std::vector<int64_t>{0});
  CHECK(empty.crd.empty());

  CHECK(level_write_vals(val("1,5,9,S0,D")) == std::vector<double>{1, 5, 9});
}

TEST_CASE("locate probes dense and compressed levels") {
  // the reference stream sits one level up: one fiber reference per crd fiber
  Level dense = DenseLevel{4};
  LocateOut d = locate_level(dense, crd("2,S0,D"), root_ref_stream());
  CHECK(to_text(d.refs_found) == "2,S0,D");

  DenseTensor v({4});
  v.at({0}) = 1;
  v.at({2}) = 1;
  v.at({3}) = 1;
  TensorStorage t = to_levels(v, "s");
  LocateOut hit = locate_level(t.levels[0], crd("3,S0,D"), root_ref_stream());
  CHECK(to_text(hit.crds) == "3,S0,D");
  CHECK(to_text(hit.refs_found) == "2,S0,D");
  CHECK(to_text(hit.refs_in) == "0,S0,D");

  LocateOut miss = locate_level(t.levels[0], crd("1,S0,D"), root_ref_stream());
  CHECK(to_text(miss.refs_found) == "N,S0,D");
  CHECK(to_text(miss.crds) == "S0,D");
}

TEST_CASE("bitvector conversion packs coordinates into words") {
  CHECK(to_text(bv_convert(4, crd("0,2,6,8,9,S0,D"))) == "B:0101,B:0100,B:0011,S0,D");
  CHECK(to_text(bv_convert(4, crd("D"))) == "D");
  CHECK(to_text(bv_convert(8, crd("7,S0,D"))) == "B:10000000,S0,D");
  // an interior all-zero word is kept so positions stay aligned
  CHECK(to_text(bv_convert(4, crd("0,9,S0,D"))) == "B:0001,B:0000,B:0010,S0,D");
}

TEST_CASE("bitvector intersect agrees with the coordinate intersecter") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    DenseTensor a({40}), b({40});
    for (auto& x : a.data)
      if (rng() % 3 == 0) x = 1 + static_cast<double>(rng() % 9);
    for (auto& x : b.data)
      if (rng() % 3 == 0) x = 1 + static_cast<double>(rng() % 9);
    TensorStorage sa = to_levels(a, "s"), sb = to_levels(b, "s");
    TensorStorage ba = to_levels(a, "b8"), bb = to_levels(b, "b8");

    ScanOut ca = scan_compressed(std::get<CompressedLevel>(sa.levels[0]), root_ref_stream());
    ScanOut cb = scan_compressed(std::get<CompressedLevel>(sb.levels[0]), root_ref_stream());
    MergeOut ref_out = intersect_streams({{ca.crds, {ca.refs}}, {cb.crds, {cb.refs}}});

    ScanOut wa = scan_bitvector(std::get<BitvectorLevel>(ba.levels[0]), root_ref_stream());
    ScanOut wb = scan_bitvector(std::get<BitvectorLevel>(bb.levels[0]), root_ref_stream());
    BvMergeOut bv_out = bv_intersect(wa.crds, wa.refs, wb.crds, wb.refs, 8);

    CHECK(bv_out.crd == ref_out.crd);
    // located positions load the same values
    CHECK(array_load(sa.vals, ref_out.refs[0][0]) == array_load(ba.vals, bv_out.refs_a));
    CHECK(array_load(sb.vals, ref_out.refs[1][0]) == array_load(bb.vals, bv_out.refs_b));
  }
}

TEST_CASE("scanner and writer round trip") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 40; ++rep) {
    DenseTensor d({6, 11});
    for (auto& x : d.data)
      if (rng() % 3 == 0) x = 1;
    TensorStorage t = to_levels(d, "ss");
    const auto& outer = std::get<CompressedLevel>(t.levels[0]);
    const auto& inner = std::get<CompressedLevel>(t.levels[1]);
    ScanOut top = scan_compressed(outer, root_ref_stream());
    ScanOut bot = scan_compressed(inner, top.refs);
    CHECK(level_write_crd(top.crds).crd == outer.crd);
    CompressedLevel rebuilt = level_write_crd(bot.crds);
    CHECK(rebuilt.seg == inner.seg);
    CHECK(rebuilt.crd == inner.crd);
  }
}

TEST_CASE("merge set algebra on random fibers") {
  std::mt19937_64 rng(17);
  int tried = 0;
  for (int rep = 0; rep < 200 && tried < 80; ++rep) {
    TokenStream a = random_stream(rng, 2, StreamKind::crd);
    TokenStream b = random_stream(rng, 2, StreamKind::crd);
    auto boundaries = [](const TokenStream& s) {
      std::vector<Token> out;
      for (const auto& t : s.toks)
        if (!t.is_payload()) out.push_back(t);
      return out;
    };
    if (boundaries(a) != boundaries(b)) continue;  // merges need aligned shapes
    ++tried;
    auto mkref = [](const TokenStream& c) {
      TokenStream r = c;
      r.kind = StreamKind::ref;
      int64_t i = 0;
      for (auto& t : r.toks)
        if (t.type == TokenType::Coord) t = Token::ref(i++);
      return r;
    };
    TokenStream ra = mkref(a), rb = mkref(b);
    MergeOut mi = intersect_streams({{a, {ra}}, {b, {rb}}});
    MergeOut mu = union_streams({{a, {ra}}, {b, {rb}}});
    auto coords = [](const TokenStream& s) {
      std::multiset<int64_t> out;
      for (const auto& t : s.toks)
        if (t.type == TokenType::Coord) out.insert(t.n);
      return out;
    };
    auto ca = coords(a), cb = coords(b), ci = coords(mi.crd), cu = coords(mu.crd);
    for (int64_t c : ci) {
      CHECK(ca.count(c) > 0);
      CHECK(cb.count(c) > 0);
    }
    for (int64_t c : ca) CHECK(cu.count(c) > 0);
    for (int64_t c : cb) CHECK(cu.count(c) > 0);
    CHECK(boundaries(mi.crd) == boundaries(a));
    CHECK(boundaries(mu.crd) == boundaries(a));
  }
  CHECK(tried > 10);
}

TEST_CASE("reductions conserve the total sum") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    TokenStream v = random_stream(rng, 2 + static_cast<int>(rng() % 2), StreamKind::val);
    auto total = [](const TokenStream& s) {
      double t = 0;
      for (const auto& tok : s.toks)
        if (tok.type == TokenType::Val) t += tok.val;
      return t;
    };
    CHECK(total(reduce_scalar(v, true)) == total(v));
    CHECK(total(reduce_scalar(v, false)) == total(v));
  }
}

TEST_CASE("crd_drop leaves no empty inner fibers") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    Nested inner = random_tree(rng, 2, StreamKind::crd);
    std::vector<Nested> outer_kids;
    int64_t c = 0;
    for (size_t i = 0; i < inner.kids.size(); ++i)
      outer_kids.push_back(Nested::of(Token::coord(c += 1 + static_cast<int64_t>(rng() % 3))));
    TokenStream outer = flatten(Nested::list(std::move(outer_kids)), StreamKind::crd);
    TokenStream in = flatten(inner, StreamKind::crd);
    CrdDropOut out = crd_drop_crd(outer, in);
    Nested oi = nest(out.inner);
    for (const auto& fiber : oi.kids) CHECK(!fiber.kids.empty());
    size_t empties = 0;
    for (const auto& fiber : nest(in).kids)
      if (fiber.kids.empty()) empties++;
    CHECK(token_stats(outer).coord - token_stats(out.outer).coord ==
          static_cast<int64_t>(empties));
  }
}

TEST_CASE("bv_convert conserves popcount") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    TokenStream c = random_stream(rng, 2, StreamKind::crd);
    TokenStream w = bv_convert(8, c);
    int64_t pop = 0;
    for (const auto& t : w.toks)
      if (t.type == TokenType::BitWord) pop += std::popcount(t.word);
    CHECK(pop == token_stats(c).coord);
  }
}
