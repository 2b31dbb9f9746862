#include "sam/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace sam {

const char* block_kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::root: return "root";
    case BlockKind::scan: return "scan";
    case BlockKind::intersect: return "intersect";
    case BlockKind::union_: return "union";
    case BlockKind::repeat: return "repeat";
    case BlockKind::array: return "array";
    case BlockKind::alu: return "alu";
    case BlockKind::reduce: return "reduce";
    case BlockKind::crd_drop: return "crd_drop";
    case BlockKind::write: return "write";
    case BlockKind::locate: return "locate";
    case BlockKind::bv_convert: return "bv_convert";
  }
  return "?";
}

const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::crd: return "crd";
    case EdgeKind::ref: return "ref";
    case EdgeKind::val: return "val";
    case EdgeKind::bv: return "bv";
    case EdgeKind::skip: return "skip";
  }
  return "?";
}

PortSignature port_signature(const BlockConfig& cfg) {
  PortSignature s;
  const EdgeKind coord_kind = cfg.bv_mode ? EdgeKind::bv : EdgeKind::crd;
  switch (cfg.kind) {
    case BlockKind::root: s.outputs = {{"ref", EdgeKind::ref}}; break;
    case BlockKind::scan: {
      s.inputs = {{"ref", EdgeKind::ref}};
      if (cfg.skip_enabled) s.inputs.push_back({"skip", EdgeKind::skip});
      s.outputs = {{"crd", cfg.fmt == LevelKind::bitvector ? EdgeKind::bv : EdgeKind::crd},
                   {"ref", EdgeKind::ref}};
      break;
    }
    case BlockKind::intersect:
    case BlockKind::union_: {
      for (int i = 0; i < cfg.arity; ++i) {
        s.inputs.push_back({"crd" + std::to_string(i), coord_kind});
        int nrefs = i < static_cast<int>(cfg.side_refs.size()) ? cfg.side_refs[static_cast<size_t>(i)] : 1;
        for (int b = 0; b < nrefs; ++b)
          s.inputs.push_back({"ref" + std::to_string(i) + "_" + std::to_string(b), EdgeKind::ref});
      }
      s.outputs.push_back({"crd", EdgeKind::crd});
      for (int i = 0; i < cfg.arity; ++i) {
        int nrefs = i < static_cast<int>(cfg.side_refs.size()) ? cfg.side_refs[static_cast<size_t>(i)] : 1;
        for (int b = 0; b < nrefs; ++b)
          s.outputs.push_back({"ref" + std::to_string(i) + "_" + std::to_string(b), EdgeKind::ref});
      }
      if (cfg.kind == BlockKind::intersect && cfg.skip_enabled)
        for (int i = 0; i < cfg.arity; ++i)
          s.outputs.push_back({"skip" + std::to_string(i), EdgeKind::skip});
      break;
    }
    case BlockKind::repeat:
      s.inputs = {{"ref", EdgeKind::ref}, {"repsig", EdgeKind::crd}};
      s.outputs = {{"ref", EdgeKind::ref}};
      break;
    case BlockKind::array:
      s.inputs = {{"ref", EdgeKind::ref}};
      s.outputs = {{"val", EdgeKind::val}};
      break;
    case BlockKind::alu:
      s.inputs = {{"a", EdgeKind::val}, {"b", EdgeKind::val}};
      s.outputs = {{"val", EdgeKind::val}};
      break;
    case BlockKind::reduce: {
      if (cfg.n == 0) {
        s.inputs = {{"val", EdgeKind::val}};
        s.outputs = {{"val", EdgeKind::val}};
      } else if (cfg.n == 1) {
        s.inputs = {{"crd", EdgeKind::crd}, {"val", EdgeKind::val}};
        s.outputs = {{"crd", EdgeKind::crd}, {"val", EdgeKind::val}};
      } else {
        s.inputs = {{"crd0", EdgeKind::crd}, {"crd1", EdgeKind::crd}, {"val", EdgeKind::val}};
        s.outputs = {{"crd0", EdgeKind::crd}, {"crd1", EdgeKind::crd}, {"val", EdgeKind::val}};
      }
      break;
    }
    case BlockKind::crd_drop:
      s.inputs = {{"outer", EdgeKind::crd},
                  {"inner", cfg.val_mode ? EdgeKind::val : EdgeKind::crd}};
      s.outputs = {{"outer", EdgeKind::crd},
                   {"inner", cfg.val_mode ? EdgeKind::val : EdgeKind::crd}};
      break;
    case BlockKind::write:
      s.inputs = {{"data", cfg.write_kind == StreamKind::val ? EdgeKind::val : EdgeKind::crd}};
      break;
    case BlockKind::locate:
      s.inputs = {{"crd", EdgeKind::crd}, {"ref", EdgeKind::ref}};
      s.outputs = {{"crd", EdgeKind::crd}, {"ref_in", EdgeKind::ref}, {"ref_found", EdgeKind::ref}};
      break;
    case BlockKind::bv_convert:
      s.inputs = {{"crd", EdgeKind::crd}};
      s.outputs = {{"bv", EdgeKind::bv}};
      break;
  }
  return s;
}

int SamGraph::add_node(BlockConfig cfg) {
  nodes.push_back(std::move(cfg));
  return static_cast<int>(nodes.size()) - 1;
}

void SamGraph::connect(int src, const std::string& sport, int dst, const std::string& dport) {
  EdgeKind kind = EdgeKind::ref;
  bool found = false;
  for (const Port& p : port_signature(nodes[static_cast<size_t>(src)]).outputs)
    if (p.name == sport) {
      kind = p.kind;
      found = true;
    }
  if (!found)
    fail(errc::missing_input, "no output port " + sport + " on " +
                                  block_kind_name(nodes[static_cast<size_t>(src)].kind));
  edges.push_back(Edge{src, sport, dst, dport, kind});
}

std::vector<GraphDiagnostic> graph_validate(const SamGraph& g) {
  std::vector<GraphDiagnostic> diags;
  auto report = [&](errc c, std::string m) { diags.push_back({c, std::move(m)}); };

  std::vector<PortSignature> sigs;
  for (const auto& n : g.nodes) sigs.push_back(port_signature(n));

  auto find_port = [](const std::vector<Port>& ports, const std::string& name) -> const Port* {
    for (const auto& p : ports)
      if (p.name == name) return &p;
    return nullptr;
  };

  std::map<std::pair<int, std::string>, int> in_edge_count;
  for (const auto& e : g.edges) {
    if (e.src < 0 || e.src >= static_cast<int>(g.size()) || e.dst < 0 ||
        e.dst >= static_cast<int>(g.size())) {
      report(errc::missing_input, "edge references a missing node");
      continue;
    }
    const Port* sp = find_port(sigs[static_cast<size_t>(e.src)].outputs, e.sport);
    const Port* dp = find_port(sigs[static_cast<size_t>(e.dst)].inputs, e.dport);
    if (!sp)
      report(errc::missing_input, std::string("node ") + std::to_string(e.src) + " has no output " + e.sport);
    if (!dp)
      report(errc::missing_input, std::string("node ") + std::to_string(e.dst) + " has no input " + e.dport);
    if (sp && dp) {
      if (sp->kind != e.kind || dp->kind != e.kind)
        report(errc::kind_mismatch,
               std::string("edge ") + std::to_string(e.src) + ":" + e.sport + " -> " +
                   std::to_string(e.dst) + ":" + e.dport + " kind " + edge_kind_name(e.kind));
      in_edge_count[{e.dst, e.dport}]++;
    }
  }
  for (int v = 0; v < static_cast<int>(g.size()); ++v)
    for (const Port& p : sigs[static_cast<size_t>(v)].inputs) {
      int c = in_edge_count.count({v, p.name}) ? in_edge_count[{v, p.name}] : 0;
      if (c == 0)
        report(errc::missing_input, std::string(block_kind_name(g.nodes[static_cast<size_t>(v)].kind)) +
                                        " node " + std::to_string(v) + " input " + p.name +
                                        " is unconnected");
      else if (c > 1)
        report(errc::kind_mismatch, "input " + p.name + " of node " + std::to_string(v) +
                                        " has " + std::to_string(c) + " incoming edges");
    }

  // Acyclicity over non-skip edges.
  std::vector<int> indeg(g.size(), 0);
  for (const auto& e : g.edges)
    if (e.kind != EdgeKind::skip && e.dst >= 0 && e.dst < static_cast<int>(g.size())) indeg[static_cast<size_t>(e.dst)]++;
  std::deque<int> q;
  for (size_t v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) q.push_back(static_cast<int>(v));
  size_t seen = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    ++seen;
    for (const auto& e : g.edges)
      if (e.kind != EdgeKind::skip && e.src == v && --indeg[static_cast<size_t>(e.dst)] == 0)
        q.push_back(e.dst);
  }
  if (seen != g.size()) report(errc::kind_mismatch, "graph has a cycle outside skip edges");

  // Connectivity: every node reachable from some root, every writer reachable.
  std::vector<bool> reach(g.size(), false);
  std::deque<int> bfs;
  for (size_t v = 0; v < g.size(); ++v)
    if (g.nodes[v].kind == BlockKind::root) {
      reach[v] = true;
      bfs.push_back(static_cast<int>(v));
    }
  while (!bfs.empty()) {
    int v = bfs.front();
    bfs.pop_front();
    for (const auto& e : g.edges)
      if (e.src == v && e.kind != EdgeKind::skip && !reach[static_cast<size_t>(e.dst)]) {
        reach[static_cast<size_t>(e.dst)] = true;
        bfs.push_back(e.dst);
      }
  }
  for (size_t v = 0; v < g.size(); ++v)
    if (!reach[v])
      report(errc::missing_input,
             std::string("node ") + std::to_string(v) + " (" +
                 block_kind_name(g.nodes[v].kind) + ") unreachable from root sources");
  return diags;
}

void graph_validate_or_throw(const SamGraph& g) {
  auto diags = graph_validate(g);
  if (!diags.empty()) {
    std::string msg;
    for (const auto& d : diags) msg += d.message + "; ";
    fail(diags[0].code, msg);
  }
}

std::map<std::string, int> primitive_counts(const SamGraph& g) {
  std::map<std::string, int> counts;
  for (const auto& n : g.nodes) {
    if (n.kind == BlockKind::root) continue;
    counts[block_kind_name(n.kind)]++;
  }
  return counts;
}

std::vector<int> topo_order(const SamGraph& g) {
  std::vector<int> indeg(g.size(), 0);
  for (const auto& e : g.edges)
    if (e.kind != EdgeKind::skip) indeg[static_cast<size_t>(e.dst)]++;
  std::deque<int> q;
  for (size_t v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) q.push_back(static_cast<int>(v));
  std::vector<int> order;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    order.push_back(v);
    for (const auto& e : g.edges)
      if (e.kind != EdgeKind::skip && e.src == v && --indeg[static_cast<size_t>(e.dst)] == 0)
        q.push_back(e.dst);
  }
  if (order.size() != g.size()) fail(errc::kind_mismatch, "cycle outside skip edges");
  return order;
}

}  // namespace sam
