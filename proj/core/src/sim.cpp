#include "sam/sim.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace sam {

std::string edge_key(const Edge& e) {
  return "n" + std::to_string(e.src) + "." + e.sport + "->n" + std::to_string(e.dst) + "." +
         e.dport;
}

namespace {

constexpr int64_t kSkipToEnd = INT64_MAX;

struct Channel {
  std::deque<Token> q;
  std::vector<Token> staged;
  TokenCounts counts;
  int64_t capacity = 0;

  bool has_room() const {
    return capacity == 0 ||
           static_cast<int64_t>(q.size() + staged.size()) < capacity;
  }
  void count(const Token& t) {
    switch (t.type) {
      case TokenType::Coord: counts.coord++; break;
      case TokenType::Ref: counts.ref++; break;
      case TokenType::Val: counts.val++; break;
      case TokenType::BitWord: counts.bitword++; break;
      case TokenType::Stop: counts.stop_by_level[t.n]++; break;
      case TokenType::Done: counts.done++; break;
      case TokenType::Empty: counts.empty++; break;
    }
  }
};

class Engine;

// Transducer base. Every emission goes through a per-port pending queue;
// step() flushes at most one token per port per tick, and a node consumes new
// input only when nothing is pending, which is what stalls multi-token steps.
class NodeSim {
 public:
  virtual ~NodeSim() = default;

  void attach(const std::string& in_port, Channel* ch) { in_[in_port] = ch; }
  void attach_out(const std::string& out_port, Channel* ch) { out_[out_port].push_back(ch); }

  void step(Engine& eng);
  bool done() const { return done_; }
  bool pending_empty() const {
    for (const auto& [p, q] : pending_)
      if (!q.empty()) return false;
    return true;
  }

 protected:
  virtual void consume(Engine& eng) = 0;
  virtual void drain_side_channels(Engine&) {}

  bool have(const std::string& port) const {
    auto it = in_.find(port);
    return it != in_.end() && !it->second->q.empty();
  }
  Token peek(const std::string& port) const { return in_.at(port)->q.front(); }
  Token pop(Engine& eng, const std::string& port);
  void emit(const std::string& port, Token t) {
    auto targets = out_.find(port);
    if (targets == out_.end() || targets->second.empty()) return;  // dangling port
    pending_[port].push_back(t);
  }
  void finish() { done_ = true; }

  std::map<std::string, Channel*> in_;
  std::map<std::string, std::vector<Channel*>> out_;
  std::map<std::string, std::deque<Token>> pending_;
  bool done_ = false;

 private:
  void flush(Engine& eng);
};

class Engine {
 public:
  bool activity = false;

  void record_pop() { activity = true; }
  void record_push() { activity = true; }
};

Token NodeSim::pop(Engine& eng, const std::string& port) {
  Channel* ch = in_.at(port);
  Token t = ch->q.front();
  ch->q.pop_front();
  eng.record_pop();
  return t;
}

void NodeSim::flush(Engine& eng) {
  for (auto& [port, q] : pending_) {
    if (q.empty()) continue;
    auto& targets = out_.at(port);
    bool room = true;
    for (Channel* ch : targets)
      if (!ch->has_room()) room = false;
    if (!room) continue;
    Token t = q.front();
    q.pop_front();
    for (Channel* ch : targets) ch->staged.push_back(t);
    eng.record_push();
  }
}

void NodeSim::step(Engine& eng) {
  drain_side_channels(eng);
  if (pending_empty()) consume(eng);
  flush(eng);
}

// ---------------------------------------------------------------------------

class RootSim : public NodeSim {
 public:
  void consume(Engine&) override {
    if (phase_ == 0) emit("ref", Token::ref(0));
    else if (phase_ == 1) {
      emit("ref", Token::done());
      finish();
    }
    if (phase_ < 2) ++phase_;
  }

 private:
  int phase_ = 0;
};

class ScanSim : public NodeSim {
 public:
  ScanSim(const BlockConfig& cfg, const TensorMap& inputs) : cfg_(cfg) {
    if (cfg.fmt == LevelKind::dense) {
      dim_ = bound_dim(inputs, cfg);
    } else {
      level_ = &bound_level(inputs, cfg);
    }
  }

  void drain_side_channels(Engine& eng) override {
    if (have("skip")) {
      Token t = pop(eng, "skip");
      // hints are tagged with the producer's fiber index in `word`
      if (static_cast<int64_t>(t.word) == fiber_seq_) hint_ = std::max(hint_, t.n);
    }
  }

  void consume(Engine& eng) override {
    if (in_fiber_) {
      apply_hint();
      if (fiber_exhausted()) {
        in_fiber_ = false;
        open_ = true;
        return;
      }
      emit_next();
      if (fiber_exhausted()) {
        in_fiber_ = false;
        open_ = true;
      }
      return;
    }
    if (!have("ref")) return;
    Token t = peek("ref");
    switch (t.type) {
      case TokenType::Ref:
      case TokenType::Empty:
        if (open_) {
          close_fiber(0);
          return;  // consume the ref next tick
        }
        pop(eng, "ref");
        if (t.type == TokenType::Empty) {
          open_ = true;
        } else {
          load_fiber(t.n);
          if (fiber_exhausted()) {
            in_fiber_ = false;
            open_ = true;
          } else {
            in_fiber_ = true;
            apply_hint();
            if (fiber_exhausted()) {
              in_fiber_ = false;
              open_ = true;
            } else {
              emit_next();
              if (fiber_exhausted()) {
                in_fiber_ = false;
                open_ = true;
              }
            }
          }
        }
        break;
      case TokenType::Stop:
        pop(eng, "ref");
        close_fiber(t.n + 1);
        break;
      case TokenType::Done:
        if (open_) {
          close_fiber(0);
          return;
        }
        pop(eng, "ref");
        emit("crd", Token::done());
        emit("ref", Token::done());
        finish();
        break;
      default: fail(errc::wrong_token_kind, "scanner input must be a ref stream");
    }
  }

 private:
  void close_fiber(int64_t level) {
    emit("crd", Token::stop(level));
    emit("ref", Token::stop(level));
    open_ = false;
    ++fiber_seq_;
    hint_ = -1;
  }

  void load_fiber(int64_t r) {
    if (cfg_.fmt == LevelKind::dense) {
      pos_ = 0;
      end_ = dim_;
      base_ = r * dim_;
    } else if (cfg_.fmt == LevelKind::compressed) {
      const auto& l = std::get<CompressedLevel>(*level_);
      if (r < 0 || r + 1 >= static_cast<int64_t>(l.seg.size()))
        fail(errc::ref_out_of_range, cfg_.tensor + " fiber " + std::to_string(r));
      pos_ = l.seg[static_cast<size_t>(r)];
      end_ = l.seg[static_cast<size_t>(r) + 1];
    } else {
      const auto& l = std::get<BitvectorLevel>(*level_);
      if (r < 0 || r + 1 >= static_cast<int64_t>(l.seg.size()))
        fail(errc::ref_out_of_range, cfg_.tensor + " fiber " + std::to_string(r));
      pos_ = l.seg[static_cast<size_t>(r)];
      end_ = l.seg[static_cast<size_t>(r) + 1];
    }
  }

  bool fiber_exhausted() const { return pos_ >= end_; }

  void apply_hint() {
    if (hint_ < 0) return;
    if (cfg_.fmt == LevelKind::dense) {
      if (hint_ == kSkipToEnd) pos_ = end_;
      else pos_ = std::max(pos_, std::min(hint_, end_));
    } else if (cfg_.fmt == LevelKind::compressed) {
      const auto& l = std::get<CompressedLevel>(*level_);
      if (hint_ == kSkipToEnd) {
        pos_ = end_;
      } else {
        auto lo = l.crd.begin() + pos_;
        auto hi = l.crd.begin() + end_;
        pos_ = std::lower_bound(lo, hi, hint_) - l.crd.begin();
      }
    }
    // bitvector scans ignore hints
    hint_ = -1;
  }

  void emit_next() {
    if (cfg_.fmt == LevelKind::dense) {
      emit("crd", Token::coord(pos_));
      emit("ref", Token::ref(base_ + pos_));
    } else if (cfg_.fmt == LevelKind::compressed) {
      const auto& l = std::get<CompressedLevel>(*level_);
      emit("crd", Token::coord(l.crd[static_cast<size_t>(pos_)]));
      emit("ref", Token::ref(pos_));
    } else {
      const auto& l = std::get<BitvectorLevel>(*level_);
      emit("crd", Token::bitword(l.words[static_cast<size_t>(pos_)]));
      emit("ref", Token::ref(l.pop_base[static_cast<size_t>(pos_)]));
    }
    ++pos_;
  }

  BlockConfig cfg_;
  const Level* level_ = nullptr;
  int64_t dim_ = 0;
  bool in_fiber_ = false;
  bool open_ = false;
  int64_t pos_ = 0, end_ = 0, base_ = 0;
  int64_t fiber_seq_ = 0;
  int64_t hint_ = -1;
};

class MergeSim : public NodeSim {
 public:
  explicit MergeSim(const BlockConfig& cfg) : cfg_(cfg) {
    sides_.resize(static_cast<size_t>(cfg.arity));
    for (int i = 0; i < cfg.arity; ++i) {
      auto& s = sides_[static_cast<size_t>(i)];
      s.crd_port = "crd" + std::to_string(i);
      int nrefs = i < static_cast<int>(cfg.side_refs.size())
                      ? cfg.side_refs[static_cast<size_t>(i)]
                      : 1;
      for (int b = 0; b < nrefs; ++b)
        s.ref_ports.push_back("ref" + std::to_string(i) + "_" + std::to_string(b));
      s.refs.resize(s.ref_ports.size());
    }
  }

  void consume(Engine& eng) override {
    // refill head slots, one pop per channel per tick
    for (auto& s : sides_) {
      if (!s.crd && have(s.crd_port)) s.crd = pop(eng, s.crd_port);
      for (size_t b = 0; b < s.ref_ports.size(); ++b)
        if (!s.refs[b] && have(s.ref_ports[b])) s.refs[b] = pop(eng, s.ref_ports[b]);
    }
    for (auto& s : sides_) {
      if (!s.crd) return;
      for (auto& r : s.refs)
        if (!r) return;
    }

    bool all_done = true, any_done = false, all_stop = true, any_boundary = false;
    for (auto& s : sides_) {
      if (!s.crd->is_done()) all_done = false;
      else any_done = true;
      if (!s.crd->is_stop()) all_stop = false;
      if (s.crd->is_stop() || s.crd->is_done()) any_boundary = true;
    }
    if (any_done && !all_done) fail(errc::shape_misaligned, "merge Done not aligned");
    if (all_done) {
      emit_control(Token::done());
      for (auto& s : sides_) s.clear();
      finish();
      return;
    }
    if (all_stop) {
      int64_t lvl = sides_[0].crd->n;
      for (auto& s : sides_)
        if (s.crd->n != lvl) fail(errc::shape_misaligned, "merge stop levels differ");
      emit_control(Token::stop(lvl));
      for (auto& s : sides_) {
        s.clear();
        ++s.fiber_seq;
      }
      return;
    }
    if (cfg_.kind == BlockKind::intersect) {
      if (any_boundary) {
        for (auto& s : sides_)
          if (s.crd->type == TokenType::Coord) {
            if (cfg_.skip_enabled) send_hint(s, kSkipToEnd);
            s.clear();
          }
        return;
      }
      int64_t m = INT64_MIN;
      for (auto& s : sides_) m = std::max(m, s.crd->n);
      bool all_match = true;
      for (auto& s : sides_)
        if (s.crd->n != m) all_match = false;
      if (all_match) {
        emit("crd", Token::coord(m));
        for (auto& s : sides_) {
          for (size_t b = 0; b < s.ref_ports.size(); ++b) emit(s.ref_ports[b], *s.refs[b]);
          s.clear();
        }
      } else {
        for (auto& s : sides_)
          if (s.crd->n < m) {
            if (cfg_.skip_enabled) send_hint(s, m);
            s.clear();
          }
      }
    } else {  // union
      int64_t c = INT64_MAX;
      for (auto& s : sides_)
        if (s.crd->type == TokenType::Coord) c = std::min(c, s.crd->n);
      emit("crd", Token::coord(c));
      for (auto& s : sides_) {
        bool hit = s.crd->type == TokenType::Coord && s.crd->n == c;
        for (size_t b = 0; b < s.ref_ports.size(); ++b)
          emit(s.ref_ports[b], hit ? *s.refs[b] : Token::empty());
        if (hit) s.clear();
      }
    }
  }

 private:
  struct Side {
    std::string crd_port;
    std::vector<std::string> ref_ports;
    std::optional<Token> crd;
    std::vector<std::optional<Token>> refs;
    int64_t fiber_seq = 0;

    void clear() {
      crd.reset();
      for (auto& r : refs) r.reset();
    }
  };

  void emit_control(Token t) {
    emit("crd", t);
    for (auto& s : sides_)
      for (auto& p : s.ref_ports) emit(p, t);
  }

  void send_hint(Side& s, int64_t coord) {
    size_t idx = static_cast<size_t>(&s - sides_.data());
    Token t = Token::coord(coord);
    t.word = static_cast<uint64_t>(s.fiber_seq);
    emit("skip" + std::to_string(idx), t);
  }

  BlockConfig cfg_;
  std::vector<Side> sides_;
};

class BvMergeSim : public NodeSim {
 public:
  explicit BvMergeSim(const BlockConfig& cfg) : bits_(cfg.bits) {}

  void consume(Engine& eng) override {
    if (!a_ && have("crd0")) a_ = pop(eng, "crd0");
    if (!ar_ && have("ref0_0")) ar_ = pop(eng, "ref0_0");
    if (!b_ && have("crd1")) b_ = pop(eng, "crd1");
    if (!br_ && have("ref1_0")) br_ = pop(eng, "ref1_0");
    if (!a_ || !ar_ || !b_ || !br_) return;
    if (a_->is_done() || b_->is_done()) {
      if (!a_->is_done() || !b_->is_done()) fail(errc::shape_misaligned, "bv Done misaligned");
      emit_all(Token::done());
      clear();
      finish();
      return;
    }
    if (a_->is_stop() && b_->is_stop()) {
      if (a_->n != b_->n) fail(errc::shape_misaligned, "bv stop levels differ");
      emit_all(*a_);
      word_pos_ = 0;
      clear();
      return;
    }
    if (a_->is_stop() || b_->is_stop()) {
      // ragged tail: remaining words AND with nothing
      if (a_->type == TokenType::BitWord) { a_.reset(); ar_.reset(); }
      if (b_->type == TokenType::BitWord) { b_.reset(); br_.reset(); }
      ++word_pos_;
      return;
    }
    uint64_t both = a_->word & b_->word;
    uint64_t w = both;
    while (w) {
      int bit = std::countr_zero(w);
      w &= w - 1;
      uint64_t below = (uint64_t{1} << bit) - 1;
      emit("crd", Token::coord(word_pos_ * bits_ + bit));
      emit("ref0_0", Token::ref(ar_->n + std::popcount(a_->word & below)));
      emit("ref1_0", Token::ref(br_->n + std::popcount(b_->word & below)));
    }
    ++word_pos_;
    clear();
  }

 private:
  void emit_all(Token t) {
    emit("crd", t);
    emit("ref0_0", t);
    emit("ref1_0", t);
  }
  void clear() {
    a_.reset();
    ar_.reset();
    b_.reset();
    br_.reset();
  }

  int bits_;
  int64_t word_pos_ = 0;
  std::optional<Token> a_, ar_, b_, br_;
};

class RepeatSim : public NodeSim {
 public:
  void consume(Engine& eng) override {
    if (pending_stop_ >= 0) {
      if (!have("ref")) return;
      Token s = pop(eng, "ref");
      if (!s.is_stop() || s.n != pending_stop_ - 1)
        fail(errc::lockstep_violation, "repeat: ref stop misaligned with repsig");
      emit("ref", Token::stop(pending_stop_));
      pending_stop_ = -1;
      return;
    }
    if (!have("repsig")) return;
    Token t = peek("repsig");
    switch (t.type) {
      case TokenType::Coord: {
        if (!loaded_) {
          if (!have("ref")) return;
          cur_ = pop(eng, "ref");
          if (cur_.type != TokenType::Ref && cur_.type != TokenType::Empty)
            fail(errc::lockstep_violation, "repeat expected a reference");
          loaded_ = true;
        }
        pop(eng, "repsig");
        emit("ref", cur_);
        break;
      }
      case TokenType::Stop: {
        if (!loaded_) {
          // an empty repsig fiber consumes its unused reference; a bare
          // elevated stop pairs with an empty ref fiber and consumes nothing
          if (!have("ref")) return;
          Token head = peek("ref");
          if (head.type == TokenType::Ref || head.is_empty()) {
            pop(eng, "ref");
            pop(eng, "repsig");
            if (t.n >= 1) pending_stop_ = t.n;
            else emit("ref", Token::stop(0));
            return;
          }
        }
        pop(eng, "repsig");
        if (t.n >= 1) {
          if (!have("ref")) {
            pending_stop_ = t.n;  // pop the matching ref stop next tick
            loaded_ = false;
            return;
          }
          Token s = pop(eng, "ref");
          if (!s.is_stop() || s.n != t.n - 1)
            fail(errc::lockstep_violation, "repeat: ref stop misaligned with repsig");
        }
        emit("ref", Token::stop(t.n));
        loaded_ = false;
        break;
      }
      case TokenType::Done: {
        if (!have("ref")) return;
        Token d = pop(eng, "ref");
        if (!d.is_done()) fail(errc::lockstep_violation, "repeat: refs past repsig Done");
        pop(eng, "repsig");
        emit("ref", Token::done());
        finish();
        break;
      }
      default: fail(errc::wrong_token_kind, "repsig must be a crd stream");
    }
  }

 private:
  Token cur_ = Token::empty();
  bool loaded_ = false;
  int64_t pending_stop_ = -1;
};

class ArraySim : public NodeSim {
 public:
  ArraySim(const BlockConfig& cfg, const TensorMap& inputs)
      : vals_(&bound_tensor(inputs, cfg.tensor).vals), name_(cfg.tensor) {}

  void consume(Engine& eng) override {
    if (!have("ref")) return;
    Token t = pop(eng, "ref");
    switch (t.type) {
      case TokenType::Ref:
        if (t.n < 0 || t.n >= static_cast<int64_t>(vals_->size()))
          fail(errc::ref_out_of_range, name_ + "[" + std::to_string(t.n) + "]");
        emit("val", Token::value((*vals_)[static_cast<size_t>(t.n)]));
        break;
      case TokenType::Empty: emit("val", Token::empty()); break;
      case TokenType::Stop: emit("val", t); break;
      case TokenType::Done:
        emit("val", t);
        finish();
        break;
      default: fail(errc::wrong_token_kind, "array input must be a ref stream");
    }
  }

 private:
  const std::vector<double>* vals_;
  std::string name_;
};

class AluSim : public NodeSim {
 public:
  explicit AluSim(AluOp op) : op_(op) {}

  void consume(Engine& eng) override {
    if (!a_ && have("a")) a_ = pop(eng, "a");
    if (!b_ && have("b")) b_ = pop(eng, "b");
    if (!a_ || !b_) return;
    bool av = a_->type == TokenType::Val || a_->is_empty();
    bool bv = b_->type == TokenType::Val || b_->is_empty();
    if (av && bv) {
      double x = a_->is_empty() ? 0.0 : a_->val;
      double y = b_->is_empty() ? 0.0 : b_->val;
      emit("val", Token::value(op_ == AluOp::add ? x + y : op_ == AluOp::sub ? x - y : x * y));
    } else if (a_->is_stop() && b_->is_stop() && a_->n == b_->n) {
      emit("val", *a_);
    } else if (a_->is_done() && b_->is_done()) {
      emit("val", *a_);
      finish();
    } else {
      fail(errc::shape_misaligned, "alu boundary mismatch");
    }
    a_.reset();
    b_.reset();
  }

 private:
  AluOp op_;
  std::optional<Token> a_, b_;
};

class ReduceScalarSim : public NodeSim {
 public:
  explicit ReduceScalarSim(bool drop_empty) : drop_empty_(drop_empty) {}

  void consume(Engine& eng) override {
    if (!have("val")) return;
    Token t = pop(eng, "val");
    switch (t.type) {
      case TokenType::Val:
        acc_ += t.val;
        ++seen_;
        break;
      case TokenType::Empty: ++seen_; break;
      case TokenType::Stop:
        if (seen_ > 0 || !drop_empty_) emit("val", Token::value(acc_));
        if (t.n >= 1) emit("val", Token::stop(t.n - 1));
        acc_ = 0.0;
        seen_ = 0;
        break;
      case TokenType::Done:
        emit("val", t);
        finish();
        break;
      default: fail(errc::wrong_token_kind, "reduce input must carry values");
    }
  }

 private:
  bool drop_empty_;
  double acc_ = 0.0;
  int64_t seen_ = 0;
};

class ReduceVectorSim : public NodeSim {
 public:
  void consume(Engine& eng) override {
    if (!c_ && have("crd")) c_ = pop(eng, "crd");
    if (!v_ && have("val")) v_ = pop(eng, "val");
    if (!c_ || !v_) return;
    if (c_->type == TokenType::Coord) {
      if (v_->type != TokenType::Val && !v_->is_empty())
        fail(errc::shape_misaligned, "vector reduce crd/val misaligned");
      acc_[c_->n] += v_->is_empty() ? 0.0 : v_->val;
    } else if (c_->is_stop()) {
      if (!v_->is_stop() || v_->n != c_->n)
        fail(errc::shape_misaligned, "vector reduce boundary mismatch");
      if (c_->n >= 1) {
        for (const auto& [crd, sum] : acc_) {
          emit("crd", Token::coord(crd));
          emit("val", Token::value(sum));
        }
        acc_.clear();
        emit("crd", Token::stop(c_->n - 1));
        emit("val", Token::stop(c_->n - 1));
      }
    } else {
      if (!v_->is_done()) fail(errc::shape_misaligned, "vector reduce Done mismatch");
      emit("crd", Token::done());
      emit("val", Token::done());
      finish();
    }
    c_.reset();
    v_.reset();
  }

 private:
  std::map<int64_t, double> acc_;
  std::optional<Token> c_, v_;
};

class ReduceMatrixSim : public NodeSim {
 public:
  void consume(Engine& eng) override {
    if (!c_ && have("crd1")) c_ = pop(eng, "crd1");
    if (!v_ && have("val")) v_ = pop(eng, "val");
    if (!c_ || !v_) return;
    if (c_->type == TokenType::Coord) {
      if (need_outer_) {
        if (!o_ && have("crd0")) o_ = pop(eng, "crd0");
        if (!o_) return;
        if (o_->type != TokenType::Coord)
          fail(errc::shape_misaligned, "matrix reduce expected an outer coordinate");
        cur_outer_ = o_->n;
        o_.reset();
        need_outer_ = false;
      }
      acc_[cur_outer_][c_->n] += v_->is_empty() ? 0.0 : v_->val;
    } else if (c_->is_stop()) {
      if (!v_->is_stop() || v_->n != c_->n)
        fail(errc::shape_misaligned, "matrix reduce boundary mismatch");
      if (c_->n >= 1) {
        if (!o_ && have("crd0")) o_ = pop(eng, "crd0");
        if (!o_) return;
        if (!o_->is_stop() || o_->n != c_->n - 1)
          fail(errc::shape_misaligned, "matrix reduce outer stop misaligned");
        o_.reset();
      }
      need_outer_ = true;
      if (c_->n >= 2) drain(c_->n);
    } else {
      if (!o_ && have("crd0")) o_ = pop(eng, "crd0");
      if (!o_) return;
      if (!o_->is_done() || !v_->is_done())
        fail(errc::shape_misaligned, "matrix reduce Done mismatch");
      o_.reset();
      emit("crd0", Token::done());
      emit("crd1", Token::done());
      emit("val", Token::done());
      finish();
    }
    c_.reset();
    v_.reset();
  }

 private:
  void drain(int64_t group_stop) {
    size_t n = acc_.size(), k = 0;
    for (const auto& [co, inner] : acc_) {
      emit("crd0", Token::coord(co));
      for (const auto& [ci, sum] : inner) {
        emit("crd1", Token::coord(ci));
        emit("val", Token::value(sum));
      }
      if (++k < n) {
        emit("crd1", Token::stop(0));
        emit("val", Token::stop(0));
      }
    }
    acc_.clear();
    emit("crd0", Token::stop(group_stop - 2));
    emit("crd1", Token::stop(group_stop - 1));
    emit("val", Token::stop(group_stop - 1));
  }

  std::map<int64_t, std::map<int64_t, double>> acc_;
  std::optional<Token> c_, v_, o_;
  int64_t cur_outer_ = -1;
  bool need_outer_ = true;
};

// Streaming coordinate dropper. The inner side holds the most recent fiber
// boundary so a dropped fiber's boundary coalesces into it exactly as the
// nest/flatten form would; the outer side passes its own boundaries verbatim
// except that a stream left with a single bare boundary collapses to Done.
class CrdDropSim : public NodeSim {
 public:
  explicit CrdDropSim(bool val_mode) : val_mode_(val_mode) {}

  void consume(Engine& eng) override {
    if (val_mode_) {
      consume_val(eng);
      return;
    }
    if (!have("inner")) return;
    Token t = peek("inner");
    switch (t.type) {
      case TokenType::Coord:
      case TokenType::Ref:
      case TokenType::Val:
      case TokenType::BitWord:
      case TokenType::Empty: {
        if (!fiber_has_payload_) {
          if (!outer_taken_) {
            if (!have("outer")) return;
            Token oc = pop(eng, "outer");
            if (oc.type != TokenType::Coord)
              fail(errc::lockstep_violation, "crd_drop outer must be a coordinate");
            outer_coord_ = oc;
            outer_taken_ = true;
          }
          if (held_inner_ >= 0) {
            emit("inner", Token::stop(held_inner_));
            held_inner_ = -1;
            inner_emitted_ = true;
          }
          outer_emit_coord(outer_coord_);
          fiber_has_payload_ = true;
        }
        emit("inner", pop(eng, "inner"));
        inner_emitted_ = true;
        break;
      }
      case TokenType::Stop: {
        // consume this fiber's outer coordinate first (dropping it when the
        // fiber stayed empty), then the matching outer stop for levels >= 1;
        // each needs its own tick since both come from the outer port. An
        // outer boundary at the head means a fiberless group: no coordinate
        // to drop.
        if (!outer_taken_) {
          if (!have("outer")) return;
          if (peek("outer").type == TokenType::Coord) {
            pop(eng, "outer");
            outer_taken_ = true;
            if (t.n >= 1) return;
          } else {
            outer_taken_ = true;
          }
        }
        if (t.n >= 1) {
          if (!have("outer")) return;
          Token os = pop(eng, "outer");
          if (!os.is_stop() || os.n != t.n - 1)
            fail(errc::lockstep_violation, "crd_drop outer stop misaligned");
          outer_emit_boundary(t.n - 1);
        }
        if (fiber_has_payload_) {
          held_inner_ = t.n;
        } else if (t.n >= 1) {
          // a dropped fiber's boundary still closes surviving parents; it
          // merges into a fiber-level hold but not across a parent close
          if (held_inner_ >= 1) {
            emit("inner", Token::stop(held_inner_));
            inner_emitted_ = true;
          }
          held_inner_ = t.n;
        }
        pop(eng, "inner");
        fiber_has_payload_ = false;
        outer_taken_ = false;
        break;
      }
      case TokenType::Done: {
        if (!have("outer")) return;
        Token od = pop(eng, "outer");
        if (!od.is_done()) fail(errc::lockstep_violation, "crd_drop outer has extra tokens");
        pop(eng, "inner");
        if (inner_emitted_ && held_inner_ >= 0) emit("inner", Token::stop(held_inner_));
        if (outer_emitted_ && outer_held_ >= 0) emit("outer", Token::stop(outer_held_));
        emit("inner", Token::done());
        emit("outer", Token::done());
        finish();
        break;
      }
    }
  }

 private:
  void outer_emit_coord(const Token& c) {
    if (outer_held_ >= 0) {
      emit("outer", Token::stop(outer_held_));
      outer_held_ = -1;
    }
    emit("outer", c);
    outer_emitted_ = true;
  }

  void outer_emit_boundary(int64_t m) {
    if (!outer_emitted_ && outer_held_ < 0) {
      outer_held_ = m;  // a lone trailing boundary collapses into Done
      return;
    }
    if (outer_held_ >= 0) {
      emit("outer", Token::stop(outer_held_));
      outer_held_ = -1;
    }
    emit("outer", Token::stop(m));
    outer_emitted_ = true;
  }

  void consume_val(Engine& eng) {
    if (!oc_ && have("outer")) oc_ = pop(eng, "outer");
    if (!vc_ && have("inner")) vc_ = pop(eng, "inner");
    if (!oc_ || !vc_) return;
    if (oc_->type == TokenType::Coord) {
      double x = vc_->is_empty() ? 0.0 : vc_->val;
      if (x != 0.0) {
        emit("outer", *oc_);
        emit("inner", *vc_);
      }
    } else if (oc_->is_stop() && vc_->is_stop() && oc_->n == vc_->n) {
      emit("outer", *oc_);
      emit("inner", *vc_);
    } else if (oc_->is_done() && vc_->is_done()) {
      emit("outer", *oc_);
      emit("inner", *vc_);
      finish();
    } else {
      fail(errc::lockstep_violation, "crd_drop val-mode streams misaligned");
    }
    oc_.reset();
    vc_.reset();
  }

  bool val_mode_;
  std::optional<Token> oc_, vc_;
  Token outer_coord_ = Token::empty();
  bool outer_taken_ = false;
  int64_t held_inner_ = -1, outer_held_ = -1;
  bool fiber_has_payload_ = false;
  bool inner_emitted_ = false, outer_emitted_ = false;
};

// Locate pairs the t-th coordinate fiber with the t-th fiber reference, the
// same lockstep as the repeater.
class LocateSim : public NodeSim {
 public:
  LocateSim(const BlockConfig& cfg, const TensorMap& inputs)
      : level_(&bound_level(inputs, cfg)) {}

  void consume(Engine& eng) override {
    if (pending_stop_ >= 0) {
      if (!have("ref")) return;
      Token s = pop(eng, "ref");
      if (!s.is_stop() || s.n != pending_stop_ - 1)
        fail(errc::lockstep_violation, "locate stop levels inconsistent");
      emit_all(Token::stop(pending_stop_));
      pending_stop_ = -1;
      return;
    }
    if (!have("crd")) return;
    Token c = peek("crd");
    switch (c.type) {
      case TokenType::Coord: {
        if (!loaded_) {
          if (!have("ref")) return;
          cur_ = pop(eng, "ref");
          if (cur_.type != TokenType::Ref && cur_.type != TokenType::Empty)
            fail(errc::lockstep_violation, "locate expected a fiber reference");
          loaded_ = true;
        }
        pop(eng, "crd");
        probe(c.n);
        break;
      }
      case TokenType::Stop: {
        if (!loaded_) {
          if (!have("ref")) return;
          Token head = peek("ref");
          if (head.type == TokenType::Ref || head.is_empty()) {
            pop(eng, "ref");
            pop(eng, "crd");
            if (c.n >= 1) pending_stop_ = c.n;
            else emit_all(Token::stop(0));
            return;
          }
        }
        pop(eng, "crd");
        loaded_ = false;
        if (c.n >= 1) {
          if (!have("ref")) {
            pending_stop_ = c.n;
            return;
          }
          Token s = pop(eng, "ref");
          if (!s.is_stop() || s.n != c.n - 1)
            fail(errc::lockstep_violation, "locate stop levels inconsistent");
        }
        emit_all(Token::stop(c.n));
        break;
      }
      case TokenType::Done: {
        if (!have("ref")) return;
        Token d = pop(eng, "ref");
        if (!d.is_done()) fail(errc::lockstep_violation, "locate refs past Done");
        pop(eng, "crd");
        emit_all(Token::done());
        finish();
        break;
      }
      default: fail(errc::wrong_token_kind, "locate expects a crd stream");
    }
  }

 private:

  void probe(int64_t c) {
    if (cur_.is_empty()) {
      emit("ref_found", Token::empty());
      return;
    }
    if (const auto* d = std::get_if<DenseLevel>(level_)) {
      if (c >= d->dim) fail(errc::ref_out_of_range, "coordinate beyond dense dim");
      emit("crd", Token::coord(c));
      emit("ref_in", cur_);
      emit("ref_found", Token::ref(cur_.n * d->dim + c));
    } else if (const auto* cl = std::get_if<CompressedLevel>(level_)) {
      if (cur_.n + 1 >= static_cast<int64_t>(cl->seg.size()))
        fail(errc::ref_out_of_range, "locate fiber " + std::to_string(cur_.n));
      auto lo = cl->crd.begin() + cl->seg[static_cast<size_t>(cur_.n)];
      auto hi = cl->crd.begin() + cl->seg[static_cast<size_t>(cur_.n) + 1];
      auto it = std::lower_bound(lo, hi, c);
      if (it != hi && *it == c) {
        emit("crd", Token::coord(c));
        emit("ref_in", cur_);
        emit("ref_found", Token::ref(it - cl->crd.begin()));
      } else {
        emit("ref_found", Token::empty());
      }
    } else {
      fail(errc::format_unsupported_for_block, "locate needs a dense or compressed level");
    }
  }

  void emit_all(Token t) {
    emit("crd", t);
    emit("ref_in", t);
    emit("ref_found", t);
  }

  const Level* level_;
  Token cur_ = Token::empty();
  bool loaded_ = false;
  int64_t pending_stop_ = -1;
};

class BvConvertSim : public NodeSim {
 public:
  explicit BvConvertSim(int bits) : bits_(bits) {}

  void consume(Engine& eng) override {
    if (!have("crd")) return;
    Token t = pop(eng, "crd");
    switch (t.type) {
      case TokenType::Coord: {
        size_t w = static_cast<size_t>(t.n / bits_);
        if (words_.size() <= w) words_.resize(w + 1, 0);
        words_[w] |= uint64_t{1} << (t.n % bits_);
        break;
      }
      case TokenType::Stop:
        for (uint64_t w : words_) emit("bv", Token::bitword(w));
        words_.clear();
        emit("bv", t);
        break;
      case TokenType::Done:
        for (uint64_t w : words_) emit("bv", Token::bitword(w));
        words_.clear();
        emit("bv", t);
        finish();
        break;
      default: fail(errc::wrong_token_kind, "bv convert expects a crd stream");
    }
  }

 private:
  int bits_;
  std::vector<uint64_t> words_;
};

class WriteSim : public NodeSim {
 public:
  explicit WriteSim(StreamKind kind) { collected_.kind = kind; }

  void consume(Engine& eng) override {
    if (!have("data")) return;
    Token t = pop(eng, "data");
    collected_.toks.push_back(t);
    if (t.is_done()) finish();
  }

  const TokenStream& collected() const { return collected_; }

 private:
  TokenStream collected_;
};

}  // namespace

SimReport run_graph(const SamGraph& g, const TensorMap& inputs, const SimOptions& opt) {
  graph_validate_or_throw(g);

  std::vector<Channel> channels(g.edges.size());
  for (auto& ch : channels) ch.capacity = opt.queue_capacity;

  std::vector<std::unique_ptr<NodeSim>> nodes;
  for (const auto& cfg : g.nodes) {
    switch (cfg.kind) {
      case BlockKind::root: nodes.push_back(std::make_unique<RootSim>()); break;
      case BlockKind::scan: nodes.push_back(std::make_unique<ScanSim>(cfg, inputs)); break;
      case BlockKind::intersect:
      case BlockKind::union_:
        if (cfg.bv_mode) nodes.push_back(std::make_unique<BvMergeSim>(cfg));
        else nodes.push_back(std::make_unique<MergeSim>(cfg));
        break;
      case BlockKind::repeat: nodes.push_back(std::make_unique<RepeatSim>()); break;
      case BlockKind::array: nodes.push_back(std::make_unique<ArraySim>(cfg, inputs)); break;
      case BlockKind::alu: nodes.push_back(std::make_unique<AluSim>(cfg.op)); break;
      case BlockKind::reduce:
        if (cfg.n == 0) nodes.push_back(std::make_unique<ReduceScalarSim>(cfg.drop_empty));
        else if (cfg.n == 1) nodes.push_back(std::make_unique<ReduceVectorSim>());
        else if (cfg.n == 2) nodes.push_back(std::make_unique<ReduceMatrixSim>());
        else fail(errc::unsupported_reducer_dim, std::to_string(cfg.n));
        break;
      case BlockKind::crd_drop: nodes.push_back(std::make_unique<CrdDropSim>(cfg.val_mode)); break;
      case BlockKind::write: nodes.push_back(std::make_unique<WriteSim>(cfg.write_kind)); break;
      case BlockKind::locate: nodes.push_back(std::make_unique<LocateSim>(cfg, inputs)); break;
      case BlockKind::bv_convert: nodes.push_back(std::make_unique<BvConvertSim>(cfg.bits)); break;
    }
  }
  for (size_t ei = 0; ei < g.edges.size(); ++ei) {
    const Edge& e = g.edges[ei];
    nodes[static_cast<size_t>(e.src)]->attach_out(e.sport, &channels[ei]);
    nodes[static_cast<size_t>(e.dst)]->attach(e.dport, &channels[ei]);
  }

  Engine eng;
  int64_t ticks = 0;
  while (true) {
    eng.activity = false;
    for (auto& n : nodes) n->step(eng);
    for (auto& ch : channels) {
      for (const Token& t : ch.staged) {
        ch.count(t);
        ch.q.push_back(t);
      }
      ch.staged.clear();
    }
    ++ticks;
    bool complete = true;
    for (auto& n : nodes)
      if (!n->done() || !n->pending_empty()) complete = false;
    if (complete)
      for (auto& ch : channels)
        if (!ch.q.empty()) complete = false;
    if (complete) break;
    if (!eng.activity) {
      std::string diag = "no progress at tick " + std::to_string(ticks) + "; blocked nodes:";
      for (size_t v = 0; v < nodes.size(); ++v)
        if (!nodes[v]->done())
          diag += " n" + std::to_string(v) + "(" +
                  block_kind_name(g.nodes[v].kind) + ")";
      fail(errc::deadlock, diag);
    }
    if (ticks > opt.max_ticks) fail(errc::deadlock, "tick budget exhausted");
  }

  SimReport report;
  report.cycles = ticks;
  report.done = true;
  for (size_t ei = 0; ei < g.edges.size(); ++ei) {
    TokenCounts c = channels[ei].counts;
    c.idle = ticks - c.total();
    report.channels[edge_key(g.edges[ei])] = c;
  }
  std::map<int, TokenStream> writer_streams;
  for (size_t v = 0; v < nodes.size(); ++v)
    if (auto* w = dynamic_cast<WriteSim*>(nodes[v].get()))
      writer_streams[static_cast<int>(v)] = w->collected();
  report.outputs = assemble_outputs(g, inputs, writer_streams);
  return report;
}

TokenCounts channel_stats(const SimReport& report, const std::string& edge) {
  auto it = report.channels.find(edge);
  if (it == report.channels.end()) fail(errc::unknown_edge, edge);
  return it->second;
}

std::string report_to_json(const SimReport& report) {
  nlohmann::json j;
  j["cycles"] = report.cycles;
  j["done"] = report.done;
  nlohmann::json chans = nlohmann::json::object();
  for (const auto& [key, c] : report.channels) {
    nlohmann::json jc;
    jc["coord"] = c.coord;
    jc["ref"] = c.ref;
    jc["val"] = c.val;
    jc["bv"] = c.bitword;
    nlohmann::json stops = nlohmann::json::object();
    for (const auto& [lvl, n] : c.stop_by_level) stops[std::to_string(lvl)] = n;
    jc["stop"] = stops;
    jc["done"] = c.done;
    jc["empty"] = c.empty;
    jc["idle"] = c.idle;
    chans[key] = jc;
  }
  j["channels"] = chans;
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [name, t] : report.outputs) {
    nlohmann::json jt;
    jt["shape"] = t.shape;
    jt["mode_order"] = t.mode_order;
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : t.levels) {
      nlohmann::json jl;
      if (const auto* d = std::get_if<DenseLevel>(&l)) {
        jl["kind"] = "dense";
        jl["dim"] = d->dim;
      } else if (const auto* cl = std::get_if<CompressedLevel>(&l)) {
        jl["kind"] = "compressed";
        jl["seg"] = cl->seg;
        jl["crd"] = cl->crd;
      } else if (const auto* b = std::get_if<BitvectorLevel>(&l)) {
        jl["kind"] = "bitvector";
        jl["seg"] = b->seg;
        jl["words"] = b->words;
        jl["bits"] = b->bits;
      }
      levels.push_back(jl);
    }
    jt["levels"] = levels;
    jt["vals"] = t.vals;
    outs[name] = jt;
  }
  j["outputs"] = outs;
  return j.dump(2);
}

}  // namespace sam
