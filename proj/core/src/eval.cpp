#include "sam/eval.hpp"

#include <algorithm>

namespace sam {

const TensorStorage& bound_tensor(const TensorMap& inputs, const std::string& name) {
  auto it = inputs.find(name);
  if (it == inputs.end()) fail(errc::shape_inconsistent, "tensor " + name + " is not bound");
  return it->second;
}

const Level& bound_level(const TensorMap& inputs, const BlockConfig& cfg) {
  const TensorStorage& t = bound_tensor(inputs, cfg.tensor);
  if (cfg.level < 0 || cfg.level >= t.order())
    fail(errc::shape_inconsistent, cfg.tensor + " has no level " + std::to_string(cfg.level));
  if (t.mode_order[static_cast<size_t>(cfg.level)] != cfg.lmode)
    fail(errc::shape_inconsistent,
         cfg.tensor + " level " + std::to_string(cfg.level) + " holds logical mode " +
             std::to_string(t.mode_order[static_cast<size_t>(cfg.level)]) + ", graph expects " +
             std::to_string(cfg.lmode) + " (present the operand pre-transposed)");
  const Level& l = t.levels[static_cast<size_t>(cfg.level)];
  if (cfg.kind == BlockKind::scan && level_kind(l) != cfg.fmt)
    fail(errc::shape_inconsistent, cfg.tensor + " level " + std::to_string(cfg.level) +
                                       " format differs from the compiled graph");
  return l;
}

int64_t bound_dim(const TensorMap& inputs, const BlockConfig& cfg) {
  const TensorStorage& t = bound_tensor(inputs, cfg.tensor);
  return t.shape[static_cast<size_t>(cfg.lmode)];
}

namespace {

std::pair<std::string, int> parse_dim_source(const std::string& s) {
  size_t c = s.find(':');
  if (c == std::string::npos) fail(errc::shape_inconsistent, "bad dim source " + s);
  return {s.substr(0, c), std::stoi(s.substr(c + 1))};
}

}  // namespace

TensorMap assemble_outputs(const SamGraph& g, const TensorMap& inputs,
                           const std::map<int, TokenStream>& writer_streams) {
  struct Pending {
    int order = 0;
    std::vector<CompressedLevel> levels;
    std::vector<int> lmodes;
    std::vector<int64_t> dims;
    std::vector<double> vals;
    bool has_vals = false;
  };
  std::map<std::string, Pending> pend;
  for (size_t v = 0; v < g.nodes.size(); ++v) {
    const BlockConfig& cfg = g.nodes[v];
    if (cfg.kind != BlockKind::write) continue;
    auto it = writer_streams.find(static_cast<int>(v));
    if (it == writer_streams.end()) fail(errc::missing_input, "writer produced no stream");
    Pending& p = pend[cfg.tensor];
    if (cfg.write_kind == StreamKind::crd) {
      if (static_cast<int>(p.levels.size()) <= cfg.level) {
        p.levels.resize(static_cast<size_t>(cfg.level) + 1);
        p.lmodes.resize(static_cast<size_t>(cfg.level) + 1);
        p.dims.resize(static_cast<size_t>(cfg.level) + 1);
      }
      p.levels[static_cast<size_t>(cfg.level)] = level_write_crd(it->second);
      p.lmodes[static_cast<size_t>(cfg.level)] = cfg.lmode;
      auto [tn, tm] = parse_dim_source(cfg.dim_source);
      p.dims[static_cast<size_t>(cfg.level)] =
          bound_tensor(inputs, tn).shape[static_cast<size_t>(tm)];
    } else {
      p.vals = level_write_vals(it->second);
      p.order = cfg.level;  // val writer records the output order
      p.has_vals = true;
    }
  }

  TensorMap out;
  for (auto& [name, p] : pend) {
    TensorStorage t;
    t.name = name;
    if (!p.has_vals) fail(errc::missing_input, name + " has no value writer");
    if (static_cast<int>(p.levels.size()) != p.order)
      fail(errc::missing_input, name + " writer levels incomplete");
    t.shape.assign(static_cast<size_t>(p.order), 0);
    t.mode_order.assign(static_cast<size_t>(p.order), 0);
    for (int k = 0; k < p.order; ++k) {
      t.shape[static_cast<size_t>(p.lmodes[static_cast<size_t>(k)])] =
          p.dims[static_cast<size_t>(k)];
      t.mode_order[static_cast<size_t>(k)] = p.lmodes[static_cast<size_t>(k)];
    }
    // Reconcile fiber counts: a fully dropped stream collapses to [D], which
    // writes fewer (or zero) segments than the parent has coordinates.
    int64_t fibers = 1;
    for (int k = 0; k < p.order; ++k) {
      CompressedLevel& lvl = p.levels[static_cast<size_t>(k)];
      while (static_cast<int64_t>(lvl.seg.size()) - 1 < fibers)
        lvl.seg.push_back(lvl.seg.back());
      while (static_cast<int64_t>(lvl.seg.size()) - 1 > fibers) {
        if (lvl.seg.back() != lvl.seg[lvl.seg.size() - 2])
          fail(errc::shape_inconsistent, name + ": nonempty segment beyond parent coords");
        lvl.seg.pop_back();
      }
      fibers = static_cast<int64_t>(lvl.crd.size());
      t.levels.emplace_back(std::move(lvl));
    }
    while (static_cast<int64_t>(p.vals.size()) < fibers) p.vals.push_back(0.0);
    t.vals = std::move(p.vals);
    if (p.order == 0 && t.vals.empty()) t.vals.push_back(0.0);
    if (static_cast<int64_t>(t.vals.size()) != fibers && p.order > 0)
      fail(errc::shape_inconsistent,
           name + ": " + std::to_string(t.vals.size()) + " values for " + std::to_string(fibers) +
               " stored coordinates");
    t.check();
    out[name] = std::move(t);
  }
  return out;
}

TensorMap eval_graph(const SamGraph& g, const TensorMap& inputs) {
  graph_validate_or_throw(g);
  std::map<std::pair<int, std::string>, TokenStream> streams;
  auto in_stream = [&](int v, const std::string& port) -> const TokenStream& {
    for (const auto& e : g.edges)
      if (e.dst == v && e.dport == port && e.kind != EdgeKind::skip) {
        auto it = streams.find({e.src, e.sport});
        if (it == streams.end()) fail(errc::missing_input, "stream not yet produced");
        return it->second;
      }
    fail(errc::missing_input, "no edge into port " + port);
  };
  std::map<int, TokenStream> writer_streams;

  for (int v : topo_order(g)) {
    const BlockConfig& cfg = g.nodes[static_cast<size_t>(v)];
    auto out = [&](const std::string& port, TokenStream s) {
      streams[{v, port}] = std::move(s);
    };
    switch (cfg.kind) {
      case BlockKind::root: out("ref", root_ref_stream()); break;
      case BlockKind::scan: {
        const TokenStream& refs = in_stream(v, "ref");
        ScanOut so;
        if (cfg.fmt == LevelKind::dense) {
          so = scan_dense(bound_dim(inputs, cfg), refs);
        } else if (cfg.fmt == LevelKind::compressed) {
          so = scan_compressed(std::get<CompressedLevel>(bound_level(inputs, cfg)), refs);
        } else {
          so = scan_bitvector(std::get<BitvectorLevel>(bound_level(inputs, cfg)), refs);
        }
        out("crd", std::move(so.crds));
        out("ref", std::move(so.refs));
        break;
      }
      case BlockKind::intersect:
      case BlockKind::union_: {
        if (cfg.bv_mode) {
          if (cfg.kind == BlockKind::union_)
            fail(errc::format_unsupported_for_block, "bitvector union is not supported");
          BvMergeOut mo = bv_intersect(in_stream(v, "crd0"), in_stream(v, "ref0_0"),
                                       in_stream(v, "crd1"), in_stream(v, "ref1_0"), cfg.bits);
          out("crd", std::move(mo.crd));
          out("ref0_0", std::move(mo.refs_a));
          out("ref1_0", std::move(mo.refs_b));
          break;
        }
        std::vector<MergeSide> sides;
        for (int i = 0; i < cfg.arity; ++i) {
          MergeSide s;
          s.crd = in_stream(v, "crd" + std::to_string(i));
          int nrefs = i < static_cast<int>(cfg.side_refs.size())
                          ? cfg.side_refs[static_cast<size_t>(i)]
                          : 1;
          for (int b = 0; b < nrefs; ++b)
            s.refs.push_back(in_stream(v, "ref" + std::to_string(i) + "_" + std::to_string(b)));
          sides.push_back(std::move(s));
        }
        MergeOut mo = cfg.kind == BlockKind::intersect ? intersect_streams(sides)
                                                       : union_streams(sides);
        out("crd", std::move(mo.crd));
        for (int i = 0; i < cfg.arity; ++i)
          for (size_t b = 0; b < mo.refs[static_cast<size_t>(i)].size(); ++b)
            out("ref" + std::to_string(i) + "_" + std::to_string(b),
                std::move(mo.refs[static_cast<size_t>(i)][b]));
        break;
      }
      case BlockKind::repeat:
        out("ref", repeat_stream(in_stream(v, "ref"), in_stream(v, "repsig")));
        break;
      case BlockKind::array:
        out("val", array_load(bound_tensor(inputs, cfg.tensor).vals, in_stream(v, "ref")));
        break;
      case BlockKind::alu: out("val", alu(cfg.op, in_stream(v, "a"), in_stream(v, "b"))); break;
      case BlockKind::reduce: {
        if (cfg.n == 0) {
          out("val", reduce_scalar(in_stream(v, "val"), cfg.drop_empty));
        } else if (cfg.n == 1) {
          VectorReduceOut r = reduce_vector(in_stream(v, "crd"), in_stream(v, "val"));
          out("crd", std::move(r.crds));
          out("val", std::move(r.vals));
        } else if (cfg.n == 2) {
          MatrixReduceOut r =
              reduce_matrix(in_stream(v, "crd0"), in_stream(v, "crd1"), in_stream(v, "val"));
          out("crd0", std::move(r.crds0));
          out("crd1", std::move(r.crds1));
          out("val", std::move(r.vals));
        } else {
          fail(errc::unsupported_reducer_dim, std::to_string(cfg.n));
        }
        break;
      }
      case BlockKind::crd_drop: {
        CrdDropOut r = cfg.val_mode ? crd_drop_val(in_stream(v, "outer"), in_stream(v, "inner"))
                                    : crd_drop_crd(in_stream(v, "outer"), in_stream(v, "inner"));
        out("outer", std::move(r.outer));
        out("inner", std::move(r.inner));
        break;
      }
      case BlockKind::write: writer_streams[v] = in_stream(v, "data"); break;
      case BlockKind::locate: {
        LocateOut r = locate_level(bound_level(inputs, cfg), in_stream(v, "crd"),
                                   in_stream(v, "ref"));
        out("crd", std::move(r.crds));
        out("ref_in", std::move(r.refs_in));
        out("ref_found", std::move(r.refs_found));
        break;
      }
      case BlockKind::bv_convert: out("bv", bv_convert(cfg.bits, in_stream(v, "crd"))); break;
    }
  }
  return assemble_outputs(g, inputs, writer_streams);
}

}  // namespace sam
