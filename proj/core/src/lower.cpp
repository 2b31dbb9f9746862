#include <algorithm>
#include <optional>
#include <set>

#include "sam/compile.hpp"

namespace sam {

namespace {

struct PortRef {
  int node = -1;
  std::string port;
  bool valid() const { return node >= 0; }
};

struct AccState {
  const Access* acc = nullptr;
  size_t term = 0;
  std::vector<LevelFormat> fmts;             // storage-order level formats
  std::map<std::string, int> level_of;       // var -> storage level
  std::map<std::string, int> lmode_of;       // var -> logical mode
  PortRef cur;                               // current reference stream
  int scan_node = -1;                        // scanner placed at the current var
};

struct Lowerer {
  const EinsumAst& ast;
  const FormatSpec& fmt;
  const Schedule& sched;
  SamGraph g;

  std::vector<AccState> accs;
  std::map<std::string, PortRef> final_crd;         // post-merge/locate coordinate stream per var
  std::map<std::string, PortRef> construction_crd;  // reducer-provided construction feeds
  std::map<std::string, bool> is_intersect_var;
  std::map<std::string, std::string> dim_src;       // var -> "T:m"
  std::set<std::string> outputs;
  bool multi_term = false;

  explicit Lowerer(const EinsumAst& a, const FormatSpec& f, const Schedule& s)
      : ast(a), fmt(f), sched(s) {}

  int pos_in_schedule(const std::string& v) const {
    auto it = std::find(sched.order.begin(), sched.order.end(), v);
    if (it == sched.order.end()) fail(errc::shape_inconsistent, "schedule misses index " + v);
    return static_cast<int>(it - sched.order.begin());
  }

  bool term_has_var(size_t t, const std::string& v) const {
    for (const auto& f : ast.terms[t].factors)
      if (std::find(f.vars.begin(), f.vars.end(), v) != f.vars.end()) return true;
    return false;
  }

  // vars a term traverses: its own plus every output var
  bool term_traverses(size_t t, const std::string& v) const {
    return term_has_var(t, v) || outputs.count(v) > 0;
  }

  bool located(const std::string& tensor, const std::string& v) const {
    for (const auto& [lt, lv] : sched.locate)
      if (lt == tensor && lv == v) return true;
    return false;
  }

  bool skipped(const std::string& v) const {
    return std::find(sched.skip.begin(), sched.skip.end(), v) != sched.skip.end();
  }

  void init() {
    // schedule must cover the expression's vars exactly
    std::set<std::string> sv(sched.order.begin(), sched.order.end());
    std::set<std::string> av(ast.vars.begin(), ast.vars.end());
    if (sv != av || sv.size() != sched.order.size())
      fail(errc::shape_inconsistent, "schedule order must cover the expression's index vars");
    outputs.insert(ast.output.vars.begin(), ast.output.vars.end());

    for (size_t t = 0; t < ast.terms.size(); ++t)
      for (const auto& f : ast.terms[t].factors) {
        AccState st;
        st.acc = &f;
        st.term = t;
        auto fit = fmt.per_tensor.find(f.tensor);
        std::string letters = fit == fmt.per_tensor.end() ? std::string() : fit->second;
        if (letters.empty() && !f.vars.empty())
          fail(errc::format_unsupported_for_block, "no format given for " + f.tensor);
        st.fmts = parse_format(letters);
        if (st.fmts.size() != f.vars.size())
          fail(errc::shape_inconsistent, f.tensor + " format has " +
                                             std::to_string(st.fmts.size()) + " letters for " +
                                             std::to_string(f.vars.size()) + " modes");
        // storage levels follow the schedule order of the access's vars
        std::vector<std::string> sorted = f.vars;
        std::sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
          return pos_in_schedule(a) < pos_in_schedule(b);
        });
        for (size_t k = 0; k < sorted.size(); ++k) {
          st.level_of[sorted[k]] = static_cast<int>(k);
          st.lmode_of[sorted[k]] = static_cast<int>(
              std::find(f.vars.begin(), f.vars.end(), sorted[k]) - f.vars.begin());
        }
        BlockConfig root;
        root.kind = BlockKind::root;
        root.tensor = f.tensor;
        int r = g.add_node(root);
        st.cur = {r, "ref"};
        accs.push_back(std::move(st));
      }
    multi_term = ast.terms.size() > 1;
    for (const auto& v : sched.order)
      for (const auto& st : accs)
        if (!dim_src.count(v) && st.level_of.count(v))
          dim_src[v] = st.acc->tensor + ":" + std::to_string(st.lmode_of.at(v));
  }

  // ------------------------------------------------------------------
  // phase 1: iteration and merging
  void build_var(const std::string& v) {
    struct TermSide {
      size_t term;
      PortRef crd;
      std::vector<size_t> members;  // acc indices participating via scanners
      std::vector<PortRef> refs;
    };
    std::vector<TermSide> sides;
    std::vector<size_t> located_accs;

    for (size_t t = 0; t < ast.terms.size(); ++t) {
      if (!term_has_var(t, v)) continue;
      TermSide side;
      side.term = t;
      for (size_t a = 0; a < accs.size(); ++a) {
        AccState& st = accs[a];
        if (st.term != t || !st.level_of.count(v)) continue;
        if (located(st.acc->tensor, v)) {
          located_accs.push_back(a);
          continue;
        }
        // place the level scanner
        BlockConfig sc;
        sc.kind = BlockKind::scan;
        sc.tensor = st.acc->tensor;
        sc.level = st.level_of.at(v);
        sc.lmode = st.lmode_of.at(v);
        sc.var = v;
        sc.fmt = st.fmts[static_cast<size_t>(sc.level)].kind;
        sc.bits = st.fmts[static_cast<size_t>(sc.level)].bits;
        sc.skip_enabled = skipped(v) && sc.fmt != LevelKind::bitvector;
        int n = g.add_node(sc);
        g.connect(st.cur.node, st.cur.port, n, "ref");
        st.scan_node = n;
        st.cur = {n, "ref"};
        side.members.push_back(a);
        side.refs.push_back({n, "ref"});
      }
      if (side.members.empty() && located_accs.empty())
        fail(errc::shape_inconsistent, "no source for index " + v + " in term");
      if (!side.members.empty()) {
        // intersect the term's factors sharing v
        if (side.members.size() >= 2) {
          side.crd = place_merge(BlockKind::intersect, v, side.members, side.refs);
        } else {
          side.crd = {accs[side.members[0]].scan_node, "crd"};
        }
        sides.push_back(std::move(side));
      }
    }

    PortRef crd_v;
    if (sides.size() >= 2) {
      // cross-term union with one ref bundle per term
      BlockConfig mu;
      mu.kind = BlockKind::union_;
      mu.var = v;
      mu.arity = static_cast<int>(sides.size());
      for (const auto& s : sides) mu.side_refs.push_back(static_cast<int>(s.members.size()));
      int n = g.add_node(mu);
      for (size_t i = 0; i < sides.size(); ++i) {
        g.connect(sides[i].crd.node, sides[i].crd.port, n, "crd" + std::to_string(i));
        for (size_t b = 0; b < sides[i].members.size(); ++b) {
          PortRef r = accs[sides[i].members[b]].cur;
          g.connect(r.node, r.port, n, "ref" + std::to_string(i) + "_" + std::to_string(b));
          accs[sides[i].members[b]].cur = {n, "ref" + std::to_string(i) + "_" +
                                                  std::to_string(b)};
        }
      }
      crd_v = {n, "crd"};
    } else if (sides.size() == 1) {
      crd_v = sides[0].crd;
    } else if (!located_accs.empty()) {
      fail(errc::format_unsupported_for_block,
           "every source of index " + v + " is located; one streamed source is required");
    } else {
      fail(errc::shape_inconsistent, "no term provides index " + v);
    }

    // locates probe the merged coordinates
    for (size_t a : located_accs) {
      AccState& st = accs[a];
      LevelFormat lf = st.fmts[static_cast<size_t>(st.level_of.at(v))];
      if (lf.kind != LevelKind::dense)
        fail(errc::format_unsupported_for_block,
             "locate lowering supports dense levels only; a compressed miss would misalign "
             "sibling streams");
      BlockConfig lc;
      lc.kind = BlockKind::locate;
      lc.tensor = st.acc->tensor;
      lc.level = st.level_of.at(v);
      lc.lmode = st.lmode_of.at(v);
      lc.var = v;
      lc.fmt = lf.kind;
      int n = g.add_node(lc);
      g.connect(crd_v.node, crd_v.port, n, "crd");
      g.connect(st.cur.node, st.cur.port, n, "ref");
      st.cur = {n, "ref_found"};
      crd_v = {n, "crd"};
    }

    // repeaters broadcast every traversing factor that lacks v
    for (size_t a = 0; a < accs.size(); ++a) {
      AccState& st = accs[a];
      if (st.level_of.count(v) || !term_traverses(st.term, v)) continue;
      BlockConfig rp;
      rp.kind = BlockKind::repeat;
      rp.var = v;
      int n = g.add_node(rp);
      g.connect(st.cur.node, st.cur.port, n, "ref");
      g.connect(crd_v.node, crd_v.port, n, "repsig");
      st.cur = {n, "ref"};
    }

    final_crd[v] = crd_v;
  }

  PortRef place_merge(BlockKind kind, const std::string& v, const std::vector<size_t>& members,
                      const std::vector<PortRef>& refs) {
    bool any_bv = false, all_bv = true;
    for (size_t a : members) {
      LevelKind k = accs[a].fmts[static_cast<size_t>(accs[a].level_of.at(v))].kind;
      if (k == LevelKind::bitvector) any_bv = true;
      else all_bv = false;
    }
    BlockConfig mc;
    mc.kind = kind;
    mc.var = v;
    mc.arity = static_cast<int>(members.size());
    mc.side_refs.assign(members.size(), 1);
    if (any_bv) {
      if (!all_bv || kind != BlockKind::intersect || members.size() != 2)
        fail(errc::format_unsupported_for_block,
             "bitvector merging needs exactly two bitvector operands under multiplication");
      mc.bv_mode = true;
      mc.bits = accs[members[0]].fmts[static_cast<size_t>(accs[members[0]].level_of.at(v))].bits;
    }
    mc.skip_enabled = skipped(v) && !mc.bv_mode && kind == BlockKind::intersect;
    int n = g.add_node(mc);
    for (size_t i = 0; i < members.size(); ++i) {
      g.connect(refs[i].node, "crd", n, "crd" + std::to_string(i));
      g.connect(accs[members[i]].cur.node, accs[members[i]].cur.port, n,
                "ref" + std::to_string(i) + "_0");
      accs[members[i]].cur = {n, "ref" + std::to_string(i) + "_0"};
      if (mc.skip_enabled && accs[members[i]].scan_node >= 0 &&
          g.nodes[static_cast<size_t>(accs[members[i]].scan_node)].skip_enabled)
        g.connect(n, "skip" + std::to_string(i), accs[members[i]].scan_node, "skip");
    }
    return {n, "crd"};
  }

  // ------------------------------------------------------------------
  // phase 2: computation
  PortRef term_values(size_t t) {
    std::vector<PortRef> vals;
    for (size_t a = 0; a < accs.size(); ++a) {
      if (accs[a].term != t) continue;
      BlockConfig ac;
      ac.kind = BlockKind::array;
      ac.tensor = accs[a].acc->tensor;
      int n = g.add_node(ac);
      g.connect(accs[a].cur.node, accs[a].cur.port, n, "ref");
      vals.push_back({n, "val"});
    }
    PortRef cur = vals[0];
    for (size_t i = 1; i < vals.size(); ++i) {
      BlockConfig al;
      al.kind = BlockKind::alu;
      al.op = AluOp::mul;
      int n = g.add_node(al);
      g.connect(cur.node, cur.port, n, "a");
      g.connect(vals[i].node, vals[i].port, n, "b");
      cur = {n, "val"};
    }
    // reducers, innermost variable first
    std::vector<std::string> reds;
    for (const auto& v : sched.order)
      if (!outputs.count(v) && term_has_var(t, v)) reds.push_back(v);
    std::reverse(reds.begin(), reds.end());
    bool saw_wide = false;
    for (const auto& r : reds) {
      int n_dim = 0;
      std::vector<std::string> after;
      for (int p = pos_in_schedule(r) + 1; p < static_cast<int>(sched.order.size()); ++p)
        if (outputs.count(sched.order[static_cast<size_t>(p)])) {
          ++n_dim;
          after.push_back(sched.order[static_cast<size_t>(p)]);
        }
      if (n_dim > 2)
        fail(errc::unsupported_reducer_dim,
             "reducing " + r + " needs an order-" + std::to_string(n_dim) + " accumulator");
      if (saw_wide)
        fail(errc::unsupported_reducer_dim, "stacked reductions above a vector reducer");
      BlockConfig rc;
      rc.kind = BlockKind::reduce;
      rc.n = n_dim;
      rc.var = r;
      rc.drop_empty = !multi_term;
      int n = g.add_node(rc);
      if (n_dim == 0) {
        g.connect(cur.node, cur.port, n, "val");
      } else if (n_dim == 1) {
        PortRef c = final_crd.at(after[0]);
        g.connect(c.node, c.port, n, "crd");
        g.connect(cur.node, cur.port, n, "val");
        construction_crd[after[0]] = {n, "crd"};
        saw_wide = true;
      } else {
        PortRef c0 = final_crd.at(after[0]);
        PortRef c1 = final_crd.at(after[1]);
        g.connect(c0.node, c0.port, n, "crd0");
        g.connect(c1.node, c1.port, n, "crd1");
        g.connect(cur.node, cur.port, n, "val");
        construction_crd[after[0]] = {n, "crd0"};
        construction_crd[after[1]] = {n, "crd1"};
        saw_wide = true;
      }
      cur = {n, "val"};
    }
    return cur;
  }

  // ------------------------------------------------------------------
  // phase 3: construction
  void build_output(PortRef final_val) {
    std::map<std::string, PortRef> writer_feed;
    std::optional<std::string> chain_var;
    PortRef val_feed = final_val;
    bool vanish = false;
    bool placed_val_dropper = false;

    auto output_at_or_above = [&](const std::string& v) {
      int p = pos_in_schedule(v);
      for (const auto& o : ast.output.vars)
        if (pos_in_schedule(o) <= p) return true;
      return false;
    };

    for (auto it = sched.order.rbegin(); it != sched.order.rend(); ++it) {
      const std::string& v = *it;
      PortRef src = construction_crd.count(v) ? construction_crd.at(v) : final_crd.at(v);
      bool reduced = !outputs.count(v);
      if (vanish && output_at_or_above(v)) {
        if (multi_term && !placed_val_dropper) {
          // explicit zeros flow through additions; scrub them at the
          // innermost output level by value
          BlockConfig dc;
          dc.kind = BlockKind::crd_drop;
          dc.var = v;
          dc.val_mode = true;
          int n = g.add_node(dc);
          g.connect(src.node, src.port, n, "outer");
          g.connect(val_feed.node, val_feed.port, n, "inner");
          src = {n, "outer"};
          val_feed = {n, "inner"};
          placed_val_dropper = true;
        } else if (chain_var) {
          BlockConfig dc;
          dc.kind = BlockKind::crd_drop;
          dc.var = v;
          int n = g.add_node(dc);
          PortRef inner = writer_feed.at(*chain_var);
          g.connect(src.node, src.port, n, "outer");
          g.connect(inner.node, inner.port, n, "inner");
          src = {n, "outer"};
          writer_feed[*chain_var] = {n, "inner"};
        }
      }
      writer_feed[v] = src;
      if (is_intersect_var.count(v) && is_intersect_var.at(v)) vanish = true;
      int n_dim = 0;
      if (reduced)
        for (int p = pos_in_schedule(v) + 1; p < static_cast<int>(sched.order.size()); ++p)
          if (outputs.count(sched.order[static_cast<size_t>(p)])) ++n_dim;
      if (!(reduced && n_dim >= 1)) chain_var = v;
    }

    // writers: one compressed level per output var in schedule order, then vals
    int level = 0;
    for (const auto& v : sched.order) {
      if (!outputs.count(v)) continue;
      BlockConfig wc;
      wc.kind = BlockKind::write;
      wc.tensor = ast.output.tensor;
      wc.write_kind = StreamKind::crd;
      wc.level = level++;
      wc.lmode = static_cast<int>(std::find(ast.output.vars.begin(), ast.output.vars.end(), v) -
                                  ast.output.vars.begin());
      wc.var = v;
      wc.dim_source = dim_src.at(v);
      int n = g.add_node(wc);
      PortRef f = writer_feed.at(v);
      g.connect(f.node, f.port, n, "data");
    }
    BlockConfig vw;
    vw.kind = BlockKind::write;
    vw.tensor = ast.output.tensor;
    vw.write_kind = StreamKind::val;
    vw.level = static_cast<int>(ast.output.vars.size());
    int n = g.add_node(vw);
    g.connect(val_feed.node, val_feed.port, n, "data");
  }

  SamGraph run() {
    init();
    for (const auto& v : sched.order) {
      build_var(v);
      // vars merged multiplicatively can empty their parents' fibers
      bool inter = false;
      for (size_t u = 0; u < g.size(); ++u)
        if (g.nodes[u].kind == BlockKind::intersect && g.nodes[u].var == v) inter = true;
      is_intersect_var[v] = inter;
    }
    // per-term values and the cross-term ALU chain
    PortRef cur = term_values(0);
    for (size_t t = 1; t < ast.terms.size(); ++t) {
      PortRef rhs = term_values(t);
      BlockConfig al;
      al.kind = BlockKind::alu;
      al.op = ast.terms[t].negate ? AluOp::sub : AluOp::add;
      int n = g.add_node(al);
      g.connect(cur.node, cur.port, n, "a");
      g.connect(rhs.node, rhs.port, n, "b");
      cur = {n, "val"};
    }
    build_output(cur);
    graph_validate_or_throw(g);
    return std::move(g);
  }
};

}  // namespace

SamGraph lower(const EinsumAst& ast, const FormatSpec& fmt, const Schedule& sched) {
  Lowerer lw(ast, fmt, sched);
  return lw.run();
}

std::vector<int> required_mode_order(const EinsumAst& ast, const Schedule& sched,
                                     const std::string& tensor) {
  auto pos = [&](const std::string& v) {
    auto it = std::find(sched.order.begin(), sched.order.end(), v);
    if (it == sched.order.end()) fail(errc::shape_inconsistent, "schedule misses index " + v);
    return static_cast<int>(it - sched.order.begin());
  };
  for (const auto& t : ast.terms)
    for (const auto& f : t.factors)
      if (f.tensor == tensor) {
        std::vector<std::string> sorted = f.vars;
        std::sort(sorted.begin(), sorted.end(),
                  [&](const std::string& a, const std::string& b) { return pos(a) < pos(b); });
        std::vector<int> mo;
        for (const auto& v : sorted)
          mo.push_back(static_cast<int>(std::find(f.vars.begin(), f.vars.end(), v) -
                                        f.vars.begin()));
        return mo;
      }
  if (ast.output.tensor == tensor) {
    std::vector<std::string> sorted = ast.output.vars;
    std::sort(sorted.begin(), sorted.end(),
              [&](const std::string& a, const std::string& b) { return pos(a) < pos(b); });
    std::vector<int> mo;
    for (const auto& v : sorted)
      mo.push_back(static_cast<int>(
          std::find(ast.output.vars.begin(), ast.output.vars.end(), v) -
          ast.output.vars.begin()));
    return mo;
  }
  fail(errc::shape_inconsistent, tensor + " does not appear in the expression");
}

}  // namespace sam
