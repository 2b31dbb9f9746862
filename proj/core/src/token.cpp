#include "sam/token.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sam {

const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_done: return "MissingDone";
    case errc::trailing_tokens_after_done: return "TrailingTokensAfterDone";
    case errc::non_monotone_fiber: return "NonMonotoneFiber";
    case errc::wrong_token_kind: return "WrongTokenKind";
    case errc::bad_nesting: return "BadNesting";
    case errc::illegal_payload: return "IllegalPayload";
    case errc::parse_error: return "ParseError";
    case errc::unsupported_field: return "UnsupportedField";
    case errc::inconsistent_order: return "InconsistentOrder";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::unknown_format_letter: return "UnknownFormatLetter";
    case errc::bad_permutation: return "BadPermutation";
    case errc::bad_split: return "BadSplit";
    case errc::infeasible: return "Infeasible";
    case errc::ref_out_of_range: return "RefOutOfRange";
    case errc::shape_misaligned: return "ShapeMisaligned";
    case errc::non_monotone_input: return "NonMonotoneInput";
    case errc::lockstep_violation: return "LockstepViolation";
    case errc::dot_parse_error: return "DotParseError";
    case errc::unknown_block_type: return "UnknownBlockType";
    case errc::kind_mismatch: return "KindMismatch";
    case errc::missing_input: return "MissingInput";
    case errc::syntax_error: return "SyntaxError";
    case errc::repeated_index_in_access: return "RepeatedIndexInAccess";
    case errc::unbound_output_var: return "UnboundOutputVar";
    case errc::unsupported_reducer_dim: return "UnsupportedReducerDim";
    case errc::format_unsupported_for_block: return "FormatUnsupportedForBlock";
    case errc::shape_inconsistent: return "ShapeInconsistent";
    case errc::deadlock: return "Deadlock";
    case errc::unknown_edge: return "UnknownEdge";
  }
  return "Error";
}

const char* stream_kind_name(StreamKind k) {
  switch (k) {
    case StreamKind::crd: return "crd";
    case StreamKind::ref: return "ref";
    case StreamKind::val: return "val";
    case StreamKind::bv: return "bv";
  }
  return "?";
}

TokenStream make_stream(StreamKind kind, std::vector<Token> toks, int bv_width) {
  return TokenStream{kind, bv_width, std::move(toks)};
}

TokenStream root_ref_stream() {
  return make_stream(StreamKind::ref, {Token::ref(0), Token::done()});
}

static bool payload_legal(StreamKind kind, const Token& t) {
  switch (t.type) {
    case TokenType::Coord: return kind == StreamKind::crd;
    case TokenType::Ref: return kind == StreamKind::ref;
    case TokenType::Val: return kind == StreamKind::val;
    case TokenType::BitWord: return kind == StreamKind::bv;
    case TokenType::Empty: return kind == StreamKind::ref || kind == StreamKind::val;
    default: return true;
  }
}

std::optional<Diagnostic> validate(const TokenStream& s) {
  const auto& t = s.toks;
  if (t.empty() || !t.back().is_done())
    return Diagnostic{errc::missing_done, t.size(), "stream does not end with D"};
  for (size_t i = 0; i + 1 < t.size(); ++i)
    if (t[i].is_done())
      return Diagnostic{errc::trailing_tokens_after_done, i + 1, "tokens after D"};
  int64_t max_stop = -1;
  for (size_t i = 0; i < t.size(); ++i) {
    if (!payload_legal(s.kind, t[i]))
      return Diagnostic{errc::wrong_token_kind, i,
                        std::string("token illegal in ") + stream_kind_name(s.kind) + " stream"};
    if (t[i].is_stop()) {
      if (t[i].n < 0) return Diagnostic{errc::bad_nesting, i, "negative stop level"};
      max_stop = std::max(max_stop, t[i].n);
    }
  }
  // Fiber-local monotonicity of coordinates.
  if (s.kind == StreamKind::crd) {
    int64_t prev = -1;
    bool in_fiber = false;
    for (size_t i = 0; i < t.size(); ++i) {
      if (t[i].type == TokenType::Coord) {
        if (in_fiber && t[i].n <= prev)
          return Diagnostic{errc::non_monotone_fiber, i, "coordinates not strictly increasing"};
        prev = t[i].n;
        in_fiber = true;
      } else {
        in_fiber = false;
      }
    }
  }
  // Canonical nesting: a nonempty stream of depth d is a single depth-d list,
  // so the top-level stop appears exactly once, right before D. A stream with
  // no stops carries at most one payload (a scalar).
  if (max_stop < 0) {
    size_t payloads = 0;
    for (const auto& tok : t)
      if (tok.is_payload()) payloads++;
    if (payloads > 1)
      return Diagnostic{errc::bad_nesting, 1, "multiple payloads without fiber boundaries"};
  } else {
    size_t top_count = 0, top_at = 0;
    for (size_t i = 0; i < t.size(); ++i)
      if (t[i].is_stop() && t[i].n == max_stop) {
        top_count++;
        top_at = i;
      }
    if (top_count != 1 || top_at + 2 != t.size())
      return Diagnostic{errc::bad_nesting, top_at,
                        "top-level stop must appear exactly once, before D"};
  }
  return std::nullopt;
}

void validate_or_throw(const TokenStream& s) {
  if (auto d = validate(s))
    fail(d->code, d->message + " at index " + std::to_string(d->index));
}

bool Nested::operator==(const Nested& o) const {
  if (leaf != o.leaf) return false;
  if (leaf) return payload == o.payload;
  return kids == o.kids;
}

static int tree_depth(const Nested& n) {
  if (n.leaf) return 0;
  int d = 1;
  for (const auto& k : n.kids) d = std::max(d, 1 + tree_depth(k));
  return d;
}

Nested nest(const TokenStream& s) {
  validate_or_throw(s);
  const auto& t = s.toks;
  int64_t depth = 0;
  for (const auto& tok : t)
    if (tok.is_stop()) depth = std::max(depth, tok.n + 1);
  if (depth == 0) {
    // scalar stream: () or a bare payload
    for (const auto& tok : t)
      if (tok.is_payload()) return Nested::of(tok);
    return Nested::list({});
  }
  // Stack of open lists, innermost last. open[0] is the root.
  std::vector<std::vector<Nested>> open(static_cast<size_t>(depth));
  for (const auto& tok : t) {
    if (tok.is_payload()) {
      open.back().push_back(Nested::of(tok));
    } else if (tok.is_stop()) {
      int64_t levels = tok.n + 1;
      if (levels > depth) fail(errc::bad_nesting, "stop deeper than stream depth");
      for (int64_t l = 0; l < levels; ++l) {
        if (open.size() == 1) break;  // the final top stop closes the root at D
        Nested closed = Nested::list(std::move(open.back()));
        open.pop_back();
        open.back().push_back(std::move(closed));
      }
      if (levels < depth) {
        while (static_cast<int64_t>(open.size()) < depth) open.emplace_back();
      }
    }
  }
  while (open.size() > 1) {
    Nested closed = Nested::list(std::move(open.back()));
    open.pop_back();
    open.back().push_back(std::move(closed));
  }
  return Nested::list(std::move(open[0]));
}

static void flatten_rec(const Nested& node, int depth, std::vector<Token>& out, StreamKind kind) {
  if (node.leaf) {
    if (depth != 0) fail(errc::bad_nesting, "tree depth not uniform");
    if (!payload_legal(kind, node.payload)) fail(errc::illegal_payload, "payload illegal for kind");
    out.push_back(node.payload);
    return;
  }
  for (const auto& kid : node.kids) flatten_rec(kid, depth - 1, out, kind);
  // Close this fiber. If the last child closed with a stop of its own, the two
  // boundaries coincide and coalesce into one stop of the next level, which is
  // what makes `4, 5, S1` rather than `4, 5, S0, S1`. An empty fiber is its
  // bare boundary token.
  if (!node.kids.empty() && !node.kids.back().leaf) {
    if (out.empty() || !out.back().is_stop()) fail(errc::bad_nesting, "malformed tree");
    out.back().n += 1;
  } else {
    out.push_back(Token::stop(depth - 1));
  }
}

TokenStream flatten(const Nested& tree, StreamKind kind, int bv_width, int forced_depth) {
  std::vector<Token> out;
  if (tree.leaf) {
    if (!payload_legal(kind, tree.payload)) fail(errc::illegal_payload, "payload illegal for kind");
    out.push_back(tree.payload);
    out.push_back(Token::done());
    return make_stream(kind, std::move(out), bv_width);
  }
  if (tree.kids.empty()) {
    out.push_back(Token::done());
    return make_stream(kind, std::move(out), bv_width);
  }
  int depth = forced_depth >= 0 ? forced_depth : tree_depth(tree);
  flatten_rec(tree, depth, out, kind);
  // The root's own boundary is the single top-level stop before D.
  if (out.empty() || !out.back().is_stop() || out.back().n != depth - 1)
    fail(errc::bad_nesting, "tree depth not uniform");
  out.push_back(Token::done());
  return make_stream(kind, std::move(out), bv_width);
}

int64_t TokenCounts::stops() const {
  int64_t n = 0;
  for (const auto& [lvl, c] : stop_by_level) n += c;
  return n;
}

bool TokenCounts::operator==(const TokenCounts& o) const {
  return coord == o.coord && ref == o.ref && val == o.val && bitword == o.bitword &&
         stop_by_level == o.stop_by_level && done == o.done && empty == o.empty && idle == o.idle;
}

TokenCounts token_stats(const TokenStream& s) {
  validate_or_throw(s);
  TokenCounts c;
  for (const auto& t : s.toks) {
    switch (t.type) {
      case TokenType::Coord: c.coord++; break;
      case TokenType::Ref: c.ref++; break;
      case TokenType::Val: c.val++; break;
      case TokenType::BitWord: c.bitword++; break;
      case TokenType::Stop: c.stop_by_level[t.n]++; break;
      case TokenType::Done: c.done++; break;
      case TokenType::Empty: c.empty++; break;
    }
  }
  return c;
}

static std::string format_value(double v) {
  if (v == static_cast<int64_t>(v) && std::abs(v) < 1e15)
    return std::to_string(static_cast<int64_t>(v));
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string token_text(const Token& t, StreamKind kind, int bv_width) {
  switch (t.type) {
    case TokenType::Coord:
    case TokenType::Ref: return std::to_string(t.n);
    case TokenType::Val: return format_value(t.val);
    case TokenType::BitWord: {
      std::string bits = "B:";
      for (int i = bv_width - 1; i >= 0; --i) bits += ((t.word >> i) & 1) ? '1' : '0';
      return bits;
    }
    case TokenType::Stop: return "S" + std::to_string(t.n);
    case TokenType::Done: return "D";
    case TokenType::Empty: return "N";
  }
  (void)kind;
  return "?";
}

std::string to_text(const TokenStream& s) {
  std::string out;
  for (size_t i = 0; i < s.toks.size(); ++i) {
    if (i) out += ',';
    out += token_text(s.toks[i], s.kind, s.bv_width);
  }
  return out;
}

TokenStream stream_from_text(StreamKind kind, const std::string& text) {
  std::vector<Token> toks;
  int bv_width = 0;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // trim spaces
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    item = item.substr(a, b - a + 1);
    if (item == "D") {
      toks.push_back(Token::done());
    } else if (item == "N") {
      toks.push_back(Token::empty());
    } else if (item[0] == 'S') {
      toks.push_back(Token::stop(std::stoll(item.substr(1))));
    } else if (item.rfind("B:", 0) == 0) {
      std::string bits = item.substr(2);
      uint64_t w = 0;
      for (size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') fail(errc::parse_error, "bad bitword " + item);
        if (bits[i] == '1') w |= uint64_t{1} << (bits.size() - 1 - i);
      }
      bv_width = static_cast<int>(bits.size());
      toks.push_back(Token::bitword(w));
    } else {
      switch (kind) {
        case StreamKind::crd: toks.push_back(Token::coord(std::stoll(item))); break;
        case StreamKind::ref: toks.push_back(Token::ref(std::stoll(item))); break;
        case StreamKind::val: toks.push_back(Token::value(std::stod(item))); break;
        case StreamKind::bv: fail(errc::parse_error, "bare payload in bv stream: " + item);
      }
    }
  }
  return make_stream(kind, std::move(toks), bv_width);
}

}  // namespace sam
