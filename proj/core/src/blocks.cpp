#include "sam/blocks.hpp"

#include <algorithm>
#include <bit>
#include <map>

namespace sam {

namespace {

void push_both(ScanOut& out, Token t) {
  out.crds.toks.push_back(t);
  out.refs.toks.push_back(t);
}

// Shared outer loop of every level scanner: walk the input reference stream,
// expand payload refs into fibers, and place boundaries. A boundary coalesces
// with an incoming stop (S_n in becomes S_{n+1} out); the fiber that is still
// open when D arrives closes with S0 first.
template <typename EmitFiber>
ScanOut scan_generic(StreamKind crd_kind, int bv_width, const TokenStream& refs_in,
                     EmitFiber&& emit_fiber) {
  ScanOut out{make_stream(crd_kind, {}, bv_width), make_stream(StreamKind::ref, {})};
  bool open = false;
  for (const Token& t : refs_in.toks) {
    switch (t.type) {
      case TokenType::Ref:
        if (open) push_both(out, Token::stop(0));
        emit_fiber(t.n, out);
        open = true;
        break;
      case TokenType::Empty:
        if (open) push_both(out, Token::stop(0));
        open = true;  // empty fiber: bare boundary
        break;
      case TokenType::Stop:
        push_both(out, Token::stop(t.n + 1));
        open = false;
        break;
      case TokenType::Done:
        if (open) push_both(out, Token::stop(0));
        push_both(out, Token::done());
        open = false;
        break;
      default: fail(errc::wrong_token_kind, "scanner input must be a ref stream");
    }
  }
  return out;
}

}  // namespace

ScanOut scan_compressed(const CompressedLevel& level, const TokenStream& refs_in) {
  return scan_generic(StreamKind::crd, 0, refs_in, [&](int64_t r, ScanOut& out) {
    if (r < 0 || r + 1 >= static_cast<int64_t>(level.seg.size()))
      fail(errc::ref_out_of_range, "fiber " + std::to_string(r));
    for (int64_t p = level.seg[static_cast<size_t>(r)]; p < level.seg[static_cast<size_t>(r) + 1];
         ++p) {
      out.crds.toks.push_back(Token::coord(level.crd[static_cast<size_t>(p)]));
      out.refs.toks.push_back(Token::ref(p));
    }
  });
}

ScanOut scan_dense(int64_t dim, const TokenStream& refs_in) {
  return scan_generic(StreamKind::crd, 0, refs_in, [&](int64_t r, ScanOut& out) {
    for (int64_t c = 0; c < dim; ++c) {
      out.crds.toks.push_back(Token::coord(c));
      out.refs.toks.push_back(Token::ref(r * dim + c));
    }
  });
}

ScanOut scan_bitvector(const BitvectorLevel& level, const TokenStream& refs_in) {
  return scan_generic(StreamKind::bv, level.bits, refs_in, [&](int64_t r, ScanOut& out) {
    if (r < 0 || r + 1 >= static_cast<int64_t>(level.seg.size()))
      fail(errc::ref_out_of_range, "fiber " + std::to_string(r));
    for (int64_t w = level.seg[static_cast<size_t>(r)]; w < level.seg[static_cast<size_t>(r) + 1];
         ++w) {
      out.crds.toks.push_back(Token::bitword(level.words[static_cast<size_t>(w)]));
      out.refs.toks.push_back(Token::ref(level.pop_base[static_cast<size_t>(w)]));
    }
  });
}

namespace {

struct SideCursor {
  const MergeSide* side;
  size_t i = 0;
  size_t checked = SIZE_MAX;
  int64_t prev = -1;
  bool in_run = false;

  const Token& crd() const { return side->crd.toks[i]; }
  Token ref(size_t b) const { return side->refs[b].toks[i]; }
  void advance() {
    ++i;
    if (i > side->crd.size()) fail(errc::shape_misaligned, "stream ran out before Done");
  }
};

MergeOut merge_streams(const std::vector<MergeSide>& sides, bool is_union) {
  if (sides.size() < 2) fail(errc::shape_misaligned, "merge needs at least two sides");
  MergeOut out;
  out.crd = make_stream(StreamKind::crd, {});
  out.refs.resize(sides.size());
  std::vector<SideCursor> cur;
  for (const auto& s : sides) {
    if (s.crd.size() == 0) fail(errc::shape_misaligned, "empty stream");
    for (const auto& r : s.refs)
      if (r.size() != s.crd.size()) fail(errc::shape_misaligned, "side refs not aligned with crd");
    cur.push_back(SideCursor{&s});
  }
  for (size_t si = 0; si < sides.size(); ++si)
    for (size_t b = 0; b < sides[si].refs.size(); ++b)
      out.refs[si].push_back(make_stream(StreamKind::ref, {}));

  auto emit_control = [&](Token t) {
    out.crd.toks.push_back(t);
    for (auto& bundles : out.refs)
      for (auto& r : bundles) r.toks.push_back(t);
  };
  auto check_monotone = [&](SideCursor& c) {
    if (c.checked == c.i) return;  // a head may be inspected across iterations
    c.checked = c.i;
    if (c.crd().type == TokenType::Coord) {
      if (c.in_run && c.crd().n <= c.prev)
        fail(errc::non_monotone_input, "merge input coordinates not increasing");
      c.prev = c.crd().n;
      c.in_run = true;
    } else {
      c.in_run = false;
    }
  };

  while (true) {
    for (auto& c : cur) check_monotone(c);
    bool any_done = false, all_stop = true, any_stop_or_done = false, all_coord = true;
    for (auto& c : cur) {
      switch (c.crd().type) {
        case TokenType::Done: any_done = true; any_stop_or_done = true; all_coord = false; break;
        case TokenType::Stop: any_stop_or_done = true; all_coord = false; break;
        case TokenType::Coord: all_stop = false; break;
        default: fail(errc::wrong_token_kind, "merge input must be a crd stream");
      }
    }
    if (any_done) {
      for (auto& c : cur)
        if (!c.crd().is_done()) fail(errc::shape_misaligned, "Done not aligned across sides");
      emit_control(Token::done());
      break;
    }
    if (all_stop) {
      int64_t lvl = cur[0].crd().n;
      for (auto& c : cur)
        if (c.crd().n != lvl) fail(errc::shape_misaligned, "stop levels differ across sides");
      emit_control(Token::stop(lvl));
      for (auto& c : cur) c.advance();
      continue;
    }
    if (!is_union) {
      if (any_stop_or_done) {
        // some fiber ended; remaining coordinates on other sides cannot match
        for (auto& c : cur)
          if (c.crd().type == TokenType::Coord) c.advance();
        continue;
      }
      int64_t m = cur[0].crd().n;
      for (auto& c : cur) m = std::max(m, c.crd().n);
      bool all_match = true;
      for (auto& c : cur)
        if (c.crd().n != m) all_match = false;
      if (all_match) {
        out.crd.toks.push_back(Token::coord(m));
        for (size_t si = 0; si < cur.size(); ++si) {
          for (size_t b = 0; b < sides[si].refs.size(); ++b)
            out.refs[si][b].toks.push_back(cur[si].ref(b));
          cur[si].advance();
        }
      } else {
        for (auto& c : cur)
          if (c.crd().type == TokenType::Coord && c.crd().n < m) c.advance();
      }
    } else {
      (void)all_coord;
      int64_t c_min = INT64_MAX;
      for (auto& c : cur)
        if (c.crd().type == TokenType::Coord) c_min = std::min(c_min, c.crd().n);
      out.crd.toks.push_back(Token::coord(c_min));
      for (size_t si = 0; si < cur.size(); ++si) {
        bool has = cur[si].crd().type == TokenType::Coord && cur[si].crd().n == c_min;
        for (size_t b = 0; b < sides[si].refs.size(); ++b)
          out.refs[si][b].toks.push_back(has ? cur[si].ref(b) : Token::empty());
        if (has) cur[si].advance();
      }
    }
  }
  return out;
}

}  // namespace

MergeOut intersect_streams(const std::vector<MergeSide>& sides) {
  return merge_streams(sides, false);
}

MergeOut union_streams(const std::vector<MergeSide>& sides) {
  return merge_streams(sides, true);
}

TokenStream repeat_stream(const TokenStream& ref_in, const TokenStream& repsig) {
  TokenStream out = make_stream(StreamKind::ref, {});
  size_t j = 0;
  auto pop_ref = [&]() -> Token {
    if (j >= ref_in.size()) fail(errc::lockstep_violation, "ref stream exhausted early");
    return ref_in.toks[j++];
  };
  Token cur = Token::empty();
  bool fiber_ref_loaded = false;
  for (const Token& t : repsig.toks) {
    switch (t.type) {
      case TokenType::Coord: {
        if (!fiber_ref_loaded) {
          cur = pop_ref();
          if (cur.type != TokenType::Ref && cur.type != TokenType::Empty)
            fail(errc::lockstep_violation, "expected a reference for the next repsig fiber");
          fiber_ref_loaded = true;
        }
        out.toks.push_back(cur);
        break;
      }
      case TokenType::Stop: {
        // an empty repsig fiber still consumes its reference, but an elevated
        // bare stop (a group with no fibers) pairs with an empty ref fiber
        if (!fiber_ref_loaded && j < ref_in.size() &&
            (ref_in.toks[j].type == TokenType::Ref || ref_in.toks[j].is_empty())) {
          pop_ref();
        }
        if (t.n >= 1) {
          Token s = pop_ref();
          if (!s.is_stop() || s.n != t.n - 1)
            fail(errc::lockstep_violation, "repsig stop levels inconsistent with ref stream");
        }
        out.toks.push_back(t);
        fiber_ref_loaded = false;
        break;
      }
      case TokenType::Done: {
        Token d = pop_ref();
        if (!d.is_done()) fail(errc::lockstep_violation, "ref stream has tokens past repsig Done");
        out.toks.push_back(t);
        break;
      }
      default: fail(errc::wrong_token_kind, "repsig must be a crd stream");
    }
  }
  return out;
}

TokenStream array_load(const std::vector<double>& vals, const TokenStream& refs) {
  TokenStream out = make_stream(StreamKind::val, {});
  for (const Token& t : refs.toks) {
    switch (t.type) {
      case TokenType::Ref:
        if (t.n < 0 || t.n >= static_cast<int64_t>(vals.size()))
          fail(errc::ref_out_of_range, "value load at " + std::to_string(t.n));
        out.toks.push_back(Token::value(vals[static_cast<size_t>(t.n)]));
        break;
      case TokenType::Empty: out.toks.push_back(Token::empty()); break;
      case TokenType::Stop:
      case TokenType::Done: out.toks.push_back(t); break;
      default: fail(errc::wrong_token_kind, "array load input must be a ref stream");
    }
  }
  return out;
}

void array_store(std::vector<double>& mem, const TokenStream& refs, const TokenStream& data) {
  if (refs.size() != data.size()) fail(errc::shape_misaligned, "store streams differ in length");
  for (size_t i = 0; i < refs.size(); ++i) {
    const Token& r = refs.toks[i];
    const Token& d = data.toks[i];
    if (r.is_stop() || r.is_done()) {
      if (d.type != r.type || d.n != r.n)
        fail(errc::shape_misaligned, "store boundary mismatch");
      continue;
    }
    if (r.type == TokenType::Empty) continue;
    if (r.type != TokenType::Ref || !(d.type == TokenType::Val || d.is_empty()))
      fail(errc::wrong_token_kind, "store expects ref/data pairs");
    if (r.n < 0 || r.n >= static_cast<int64_t>(mem.size()))
      fail(errc::ref_out_of_range, "store at " + std::to_string(r.n));
    mem[static_cast<size_t>(r.n)] = d.is_empty() ? 0.0 : d.val;
  }
}

const char* alu_op_name(AluOp op) {
  switch (op) {
    case AluOp::add: return "add";
    case AluOp::sub: return "sub";
    case AluOp::mul: return "mul";
  }
  return "?";
}

TokenStream alu(AluOp op, const TokenStream& a, const TokenStream& b) {
  if (a.size() != b.size()) fail(errc::shape_misaligned, "alu inputs differ in length");
  TokenStream out = make_stream(StreamKind::val, {});
  for (size_t i = 0; i < a.size(); ++i) {
    const Token& x = a.toks[i];
    const Token& y = b.toks[i];
    bool xv = x.type == TokenType::Val || x.is_empty();
    bool yv = y.type == TokenType::Val || y.is_empty();
    if (xv && yv) {
      double u = x.is_empty() ? 0.0 : x.val;
      double v = y.is_empty() ? 0.0 : y.val;
      double r = op == AluOp::add ? u + v : op == AluOp::sub ? u - v : u * v;
      out.toks.push_back(Token::value(r));
    } else if (x.is_stop() && y.is_stop() && x.n == y.n) {
      out.toks.push_back(x);
    } else if (x.is_done() && y.is_done()) {
      out.toks.push_back(x);
    } else {
      fail(errc::shape_misaligned, "alu boundary mismatch at index " + std::to_string(i));
    }
  }
  return out;
}

TokenStream reduce_scalar(const TokenStream& vals, bool drop_empty) {
  TokenStream out = make_stream(StreamKind::val, {});
  double acc = 0.0;
  int64_t seen = 0;
  for (const Token& t : vals.toks) {
    switch (t.type) {
      case TokenType::Val:
        acc += t.val;
        ++seen;
        break;
      case TokenType::Empty: ++seen; break;
      case TokenType::Stop:
        if (seen > 0 || !drop_empty) out.toks.push_back(Token::value(acc));
        if (t.n >= 1) out.toks.push_back(Token::stop(t.n - 1));
        acc = 0.0;
        seen = 0;
        break;
      case TokenType::Done: out.toks.push_back(t); break;
      default: fail(errc::wrong_token_kind, "reduce input must be a val stream");
    }
  }
  return out;
}

namespace {

void check_pairwise(const Token& c, const Token& v) {
  bool cp = c.is_payload(), vp = v.is_payload();
  if (cp != vp || (c.is_stop() && (!v.is_stop() || c.n != v.n)) || (c.is_done() != v.is_done()))
    fail(errc::shape_misaligned, "crd/val streams not aligned");
}

}  // namespace

VectorReduceOut reduce_vector(const TokenStream& crds, const TokenStream& vals) {
  if (crds.size() != vals.size()) fail(errc::shape_misaligned, "crd/val lengths differ");
  VectorReduceOut out{make_stream(StreamKind::crd, {}), make_stream(StreamKind::val, {})};
  std::map<int64_t, double> acc;
  auto emit_both = [&](Token t) {
    out.crds.toks.push_back(t);
    out.vals.toks.push_back(t);
  };
  for (size_t i = 0; i < crds.size(); ++i) {
    const Token& c = crds.toks[i];
    const Token& v = vals.toks[i];
    check_pairwise(c, v);
    switch (c.type) {
      case TokenType::Coord: acc[c.n] += v.is_empty() ? 0.0 : v.val; break;
      case TokenType::Stop:
        if (c.n >= 1) {
          for (const auto& [crd, sum] : acc) {
            out.crds.toks.push_back(Token::coord(crd));
            out.vals.toks.push_back(Token::value(sum));
          }
          acc.clear();
          emit_both(Token::stop(c.n - 1));
        }
        break;
      case TokenType::Done: emit_both(Token::done()); break;
      default: fail(errc::wrong_token_kind, "reduce input must be a crd stream");
    }
  }
  return out;
}

MatrixReduceOut reduce_matrix(const TokenStream& crds_outer, const TokenStream& crds_inner,
                              const TokenStream& vals) {
  if (crds_inner.size() != vals.size()) fail(errc::shape_misaligned, "crd/val lengths differ");
  MatrixReduceOut out{make_stream(StreamKind::crd, {}), make_stream(StreamKind::crd, {}),
                      make_stream(StreamKind::val, {})};
  std::map<int64_t, std::map<int64_t, double>> acc;
  size_t oi = 0;
  auto pop_outer = [&]() -> Token {
    if (oi >= crds_outer.size()) fail(errc::shape_misaligned, "outer crd stream exhausted");
    return crds_outer.toks[oi++];
  };
  int64_t cur_outer = -1;
  bool need_outer = true;
  auto drain = [&](int64_t group_stop) {
    size_t n = acc.size(), k = 0;
    for (const auto& [co, inner] : acc) {
      out.crds0.toks.push_back(Token::coord(co));
      for (const auto& [ci, sum] : inner) {
        out.crds1.toks.push_back(Token::coord(ci));
        out.vals.toks.push_back(Token::value(sum));
      }
      if (++k < n) {
        out.crds1.toks.push_back(Token::stop(0));
        out.vals.toks.push_back(Token::stop(0));
      }
    }
    acc.clear();
    out.crds0.toks.push_back(Token::stop(group_stop - 2));
    out.crds1.toks.push_back(Token::stop(group_stop - 1));
    out.vals.toks.push_back(Token::stop(group_stop - 1));
  };
  for (size_t i = 0; i < crds_inner.size(); ++i) {
    const Token& c = crds_inner.toks[i];
    const Token& v = vals.toks[i];
    check_pairwise(c, v);
    switch (c.type) {
      case TokenType::Coord: {
        if (need_outer) {
          Token ot = pop_outer();
          if (ot.type != TokenType::Coord)
            fail(errc::shape_misaligned, "expected an outer coordinate");
          cur_outer = ot.n;
          need_outer = false;
        }
        acc[cur_outer][c.n] += v.is_empty() ? 0.0 : v.val;
        break;
      }
      case TokenType::Stop: {
        if (!need_outer && c.n >= 0) need_outer = true;
        if (c.n >= 1) {
          Token ot = pop_outer();
          if (!ot.is_stop() || ot.n != c.n - 1)
            fail(errc::shape_misaligned, "outer stop misaligned with inner");
        }
        if (c.n >= 2) drain(c.n);
        break;
      }
      case TokenType::Done: {
        Token ot = pop_outer();
        if (!ot.is_done()) fail(errc::shape_misaligned, "outer stream has extra tokens");
        out.crds0.toks.push_back(Token::done());
        out.crds1.toks.push_back(Token::done());
        out.vals.toks.push_back(Token::done());
        break;
      }
      default: fail(errc::wrong_token_kind, "reduce input must be a crd stream");
    }
  }
  return out;
}

namespace {

bool payload_free(const Nested& n) {
  if (n.leaf) return false;
  for (const auto& k : n.kids)
    if (!payload_free(k)) return false;
  return true;
}

// Pairs an outer tree with an inner tree one level deeper and removes outer
// coordinates whose inner fiber carries no payload. A bare elevated stop in
// the deeper stream re-parses as one phantom empty subtree where the shallower
// stream has none at all; such phantoms pair with an empty outer fiber.
void zip_drop(const Nested& o, const Nested& in, int outer_depth, Nested& o_out, Nested& in_out) {
  if (o.kids.size() != in.kids.size()) {
    if (o.kids.empty() && in.kids.size() == 1 && payload_free(in.kids[0])) return;
    fail(errc::lockstep_violation, "outer/inner fiber counts differ");
  }
  if (outer_depth == 1) {
    for (size_t k = 0; k < o.kids.size(); ++k) {
      if (!o.kids[k].leaf || in.kids[k].leaf)
        fail(errc::lockstep_violation, "outer payload must pair with an inner fiber");
      if (!in.kids[k].kids.empty()) {
        o_out.kids.push_back(o.kids[k]);
        in_out.kids.push_back(in.kids[k]);
      }
    }
    return;
  }
  for (size_t k = 0; k < o.kids.size(); ++k) {
    Nested oo = Nested::list({}), ii = Nested::list({});
    zip_drop(o.kids[k], in.kids[k], outer_depth - 1, oo, ii);
    o_out.kids.push_back(std::move(oo));
    in_out.kids.push_back(std::move(ii));
  }
}

int stream_depth(const TokenStream& s) {
  int64_t d = 0;
  for (const auto& t : s.toks)
    if (t.is_stop()) d = std::max(d, t.n + 1);
  return static_cast<int>(d);
}

}  // namespace

CrdDropOut crd_drop_crd(const TokenStream& outer, const TokenStream& inner) {
  Nested o = nest(outer);
  Nested in = nest(inner);
  if (o.kids.empty() && in.kids.empty())
    return {make_stream(outer.kind, {Token::done()}), make_stream(inner.kind, {Token::done()})};
  int od = stream_depth(outer);
  if (od < 1) fail(errc::lockstep_violation, "outer stream must have fibers");
  Nested oo = Nested::list({}), ii = Nested::list({});
  zip_drop(o, in, od, oo, ii);
  // full prunes lose levels from the trees; pin the depths from the streams
  return {flatten(oo, outer.kind, 0, od),
          flatten(ii, inner.kind, inner.bv_width, stream_depth(inner))};
}

CrdDropOut crd_drop_val(const TokenStream& outer, const TokenStream& vals) {
  if (outer.size() != vals.size()) fail(errc::lockstep_violation, "outer/val lengths differ");
  // element-aligned: drop (coordinate, value) pairs whose value is zero
  std::vector<Token> oc, vc;
  for (size_t i = 0; i < outer.size(); ++i) {
    const Token& c = outer.toks[i];
    const Token& v = vals.toks[i];
    check_pairwise(c, v);
    if (c.type == TokenType::Coord) {
      double x = v.is_empty() ? 0.0 : v.val;
      if (x == 0.0) continue;
      oc.push_back(c);
      vc.push_back(v);
    } else {
      oc.push_back(c);
      vc.push_back(v);
    }
  }
  // boundaries are untouched, so an emptied fiber stays a bare boundary
  return {make_stream(outer.kind, std::move(oc)), make_stream(StreamKind::val, std::move(vc))};
}

CompressedLevel level_write_crd(const TokenStream& crds) {
  CompressedLevel level;
  for (const Token& t : crds.toks) {
    switch (t.type) {
      case TokenType::Coord: level.crd.push_back(t.n); break;
      case TokenType::Stop: level.seg.push_back(static_cast<int64_t>(level.crd.size())); break;
      case TokenType::Done: break;
      default: fail(errc::wrong_token_kind, "level writer expects a crd stream");
    }
  }
  return level;
}

std::vector<double> level_write_vals(const TokenStream& vals) {
  std::vector<double> out;
  for (const Token& t : vals.toks) {
    switch (t.type) {
      case TokenType::Val: out.push_back(t.val); break;
      case TokenType::Empty: out.push_back(0.0); break;
      case TokenType::Stop:
      case TokenType::Done: break;
      default: fail(errc::wrong_token_kind, "value writer expects a val stream");
    }
  }
  return out;
}

LocateOut locate_level(const Level& level, const TokenStream& crds, const TokenStream& refs_in) {
  // refs_in is one level up: the t-th crd fiber probes the fiber named by the
  // t-th reference, with the same lockstep as the repeater
  LocateOut out{make_stream(StreamKind::crd, {}), make_stream(StreamKind::ref, {}),
                make_stream(StreamKind::ref, {})};
  auto emit_all = [&](Token t) {
    out.crds.toks.push_back(t);
    out.refs_in.toks.push_back(t);
    out.refs_found.toks.push_back(t);
  };
  size_t j = 0;
  auto pop_ref = [&]() -> Token {
    if (j >= refs_in.size()) fail(errc::lockstep_violation, "ref stream exhausted early");
    return refs_in.toks[j++];
  };
  Token cur = Token::empty();
  bool loaded = false;
  for (const Token& c : crds.toks) {
    switch (c.type) {
      case TokenType::Coord: {
        if (!loaded) {
          cur = pop_ref();
          if (cur.type != TokenType::Ref && cur.type != TokenType::Empty)
            fail(errc::lockstep_violation, "expected a fiber reference");
          loaded = true;
        }
        if (cur.is_empty()) {
          out.refs_found.toks.push_back(Token::empty());
          break;
        }
        if (const auto* d = std::get_if<DenseLevel>(&level)) {
          if (c.n >= d->dim) fail(errc::ref_out_of_range, "coordinate beyond dense dim");
          out.crds.toks.push_back(c);
          out.refs_in.toks.push_back(cur);
          out.refs_found.toks.push_back(Token::ref(cur.n * d->dim + c.n));
        } else if (const auto* cl = std::get_if<CompressedLevel>(&level)) {
          if (cur.n + 1 >= static_cast<int64_t>(cl->seg.size()))
            fail(errc::ref_out_of_range, "locate fiber " + std::to_string(cur.n));
          auto lo = cl->crd.begin() + cl->seg[static_cast<size_t>(cur.n)];
          auto hi = cl->crd.begin() + cl->seg[static_cast<size_t>(cur.n) + 1];
          auto it = std::lower_bound(lo, hi, c.n);
          if (it != hi && *it == c.n) {
            out.crds.toks.push_back(c);
            out.refs_in.toks.push_back(cur);
            out.refs_found.toks.push_back(Token::ref(it - cl->crd.begin()));
          } else {
            out.refs_found.toks.push_back(Token::empty());
          }
        } else {
          fail(errc::format_unsupported_for_block, "locate needs a dense or compressed level");
        }
        break;
      }
      case TokenType::Stop:
        if (!loaded && j < refs_in.size() &&
            (refs_in.toks[j].type == TokenType::Ref || refs_in.toks[j].is_empty()))
          pop_ref();
        if (c.n >= 1) {
          Token s = pop_ref();
          if (!s.is_stop() || s.n != c.n - 1)
            fail(errc::lockstep_violation, "locate stop levels inconsistent");
        }
        emit_all(c);
        loaded = false;
        break;
      case TokenType::Done: {
        Token d = pop_ref();
        if (!d.is_done()) fail(errc::lockstep_violation, "refs past crd Done");
        emit_all(c);
        break;
      }
      default: fail(errc::wrong_token_kind, "locate expects a crd stream");
    }
  }
  return out;
}

TokenStream bv_convert(int bits, const TokenStream& crds) {
  TokenStream out = make_stream(StreamKind::bv, {}, bits);
  std::vector<uint64_t> words;
  auto flush = [&]() {
    for (uint64_t w : words) out.toks.push_back(Token::bitword(w));
    words.clear();
  };
  for (const Token& t : crds.toks) {
    switch (t.type) {
      case TokenType::Coord: {
        size_t w = static_cast<size_t>(t.n / bits);
        if (words.size() <= w) words.resize(w + 1, 0);
        words[w] |= uint64_t{1} << (t.n % bits);
        break;
      }
      case TokenType::Stop:
        flush();
        out.toks.push_back(t);
        break;
      case TokenType::Done:
        flush();
        out.toks.push_back(t);
        break;
      default: fail(errc::wrong_token_kind, "bv convert expects a crd stream");
    }
  }
  return out;
}

BvMergeOut bv_intersect(const TokenStream& a_bv, const TokenStream& a_ref,
                        const TokenStream& b_bv, const TokenStream& b_ref, int bits) {
  if (a_bv.size() != a_ref.size() || b_bv.size() != b_ref.size())
    fail(errc::shape_misaligned, "bv/ref streams not aligned");
  BvMergeOut out{make_stream(StreamKind::crd, {}), make_stream(StreamKind::ref, {}),
                 make_stream(StreamKind::ref, {})};
  size_t ia = 0, ib = 0;
  int64_t word_pos = 0;
  auto emit_all = [&](Token t) {
    out.crd.toks.push_back(t);
    out.refs_a.toks.push_back(t);
    out.refs_b.toks.push_back(t);
  };
  while (true) {
    if (ia >= a_bv.size() || ib >= b_bv.size())
      fail(errc::shape_misaligned, "bv stream ran out before Done");
    const Token& ta = a_bv.toks[ia];
    const Token& tb = b_bv.toks[ib];
    if (ta.is_done() || tb.is_done()) {
      if (!ta.is_done() || !tb.is_done()) fail(errc::shape_misaligned, "Done misaligned");
      emit_all(Token::done());
      break;
    }
    if (ta.is_stop() && tb.is_stop()) {
      if (ta.n != tb.n) fail(errc::shape_misaligned, "stop levels differ");
      emit_all(ta);
      word_pos = 0;
      ++ia, ++ib;
      continue;
    }
    // ragged fiber ends: the shorter side's remaining words AND to zero
    if (ta.is_stop() || tb.is_stop()) {
      if (ta.type == TokenType::BitWord) ++ia;
      if (tb.type == TokenType::BitWord) ++ib;
      ++word_pos;
      continue;
    }
    if (ta.type != TokenType::BitWord || tb.type != TokenType::BitWord)
      fail(errc::wrong_token_kind, "bv intersect expects bitword streams");
    uint64_t both = ta.word & tb.word;
    uint64_t w = both;
    while (w) {
      int bit = std::countr_zero(w);
      w &= w - 1;
      uint64_t below = (uint64_t{1} << bit) - 1;
      out.crd.toks.push_back(Token::coord(word_pos * bits + bit));
      out.refs_a.toks.push_back(Token::ref(a_ref.toks[ia].n + std::popcount(ta.word & below)));
      out.refs_b.toks.push_back(Token::ref(b_ref.toks[ib].n + std::popcount(tb.word & below)));
    }
    ++ia, ++ib, ++word_pos;
  }
  return out;
}

}  // namespace sam
