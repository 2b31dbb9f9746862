#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sam/error.hpp"

namespace sam {

// One wire datum. Streams carry payload tokens (coordinates, references,
// values, bitvector words) plus control tokens: Stop(n) closes n+1 nested
// fibers at once, Done terminates the stream, Empty stands in for an absent
// operand and reads as zero downstream.
enum class TokenType : uint8_t { Coord, Ref, Val, BitWord, Stop, Done, Empty };

struct Token {
  TokenType type = TokenType::Done;
  int64_t n = 0;      // Coord/Ref payload or Stop level
  double val = 0.0;   // Val payload
  uint64_t word = 0;  // BitWord payload

  static Token coord(int64_t c) { return {TokenType::Coord, c, 0.0, 0}; }
  static Token ref(int64_t r) { return {TokenType::Ref, r, 0.0, 0}; }
  static Token value(double v) { return {TokenType::Val, 0, v, 0}; }
  static Token bitword(uint64_t w) { return {TokenType::BitWord, 0, 0.0, w}; }
  static Token stop(int64_t level) { return {TokenType::Stop, level, 0.0, 0}; }
  static Token done() { return {TokenType::Done, 0, 0.0, 0}; }
  static Token empty() { return {TokenType::Empty, 0, 0.0, 0}; }

  bool is_payload() const {
    return type == TokenType::Coord || type == TokenType::Ref || type == TokenType::Val ||
           type == TokenType::BitWord || type == TokenType::Empty;
  }
  bool is_stop() const { return type == TokenType::Stop; }
  bool is_done() const { return type == TokenType::Done; }
  bool is_empty() const { return type == TokenType::Empty; }

  bool operator==(const Token& o) const {
    if (type != o.type) return false;
    switch (type) {
      case TokenType::Coord:
      case TokenType::Ref:
      case TokenType::Stop: return n == o.n;
      case TokenType::Val: return val == o.val;
      case TokenType::BitWord: return word == o.word;
      default: return true;
    }
  }
};

enum class StreamKind : uint8_t { crd, ref, val, bv };

const char* stream_kind_name(StreamKind k);

// A flattened coordinate-tree level in emission order (index 0 is sent
// first). bv_width is the configured word width b for bv streams, 0 otherwise.
struct TokenStream {
  StreamKind kind = StreamKind::crd;
  int bv_width = 0;
  std::vector<Token> toks;

  size_t size() const { return toks.size(); }
  bool operator==(const TokenStream& o) const {
    return kind == o.kind && bv_width == o.bv_width && toks == o.toks;
  }
};

TokenStream make_stream(StreamKind kind, std::vector<Token> toks, int bv_width = 0);

/// The root reference stream [Ref 0, Done] that seeds every outermost scanner.
TokenStream root_ref_stream();

struct Diagnostic {
  errc code;
  size_t index;  // first offending token
  std::string message;
};

/// Checks the stream invariants; nullopt means the stream is well formed.
std::optional<Diagnostic> validate(const TokenStream& s);
void validate_or_throw(const TokenStream& s);

// Nested-list view of a stream: a payload leaf or a list of children.
// Depth is uniform; depth = 1 + max stop level of the flattened form.
struct Nested {
  bool leaf = false;
  Token payload;
  std::vector<Nested> kids;

  static Nested of(Token t) { return {true, t, {}}; }
  static Nested list(std::vector<Nested> kids) { return {false, {}, std::move(kids)}; }
  bool operator==(const Nested& o) const;
};

Nested nest(const TokenStream& s);
/// forced_depth pins the nesting depth when the tree alone cannot carry it
/// (fully pruned subtrees lose levels); -1 infers it from the tree.
TokenStream flatten(const Nested& tree, StreamKind kind, int bv_width = 0, int forced_depth = -1);

struct TokenCounts {
  int64_t coord = 0;
  int64_t ref = 0;
  int64_t val = 0;
  int64_t bitword = 0;
  std::map<int64_t, int64_t> stop_by_level;
  int64_t done = 0;
  int64_t empty = 0;
  int64_t idle = 0;  // filled only by the simulator

  int64_t stops() const;
  int64_t payloads() const { return coord + ref + val + bitword + empty; }
  int64_t total() const { return payloads() + stops() + done; }
  // Point-tuple alternative for an order-2 value stream: one (i,j,v) triple
  // per stored value plus the terminator.
  int64_t point_model_tokens() const { return 3 * val + 1; }
  bool operator==(const TokenCounts& o) const;
};

TokenCounts token_stats(const TokenStream& s);

/// Comma-separated text form used by golden tests, e.g. `1,S0,2,3,S0,4,5,S1,D`;
/// `N` for Empty, `B:0101` for a 4-bit word printed MSB first.
std::string to_text(const TokenStream& s);
TokenStream stream_from_text(StreamKind kind, const std::string& text);

std::string token_text(const Token& t, StreamKind kind, int bv_width);

}  // namespace sam
