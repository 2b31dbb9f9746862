#include <algorithm>
#include <sstream>

#include "sam/graph.hpp"

namespace sam {

namespace {

const char* fmt_name(LevelKind k) {
  switch (k) {
    case LevelKind::dense: return "dense";
    case LevelKind::compressed: return "compressed";
    case LevelKind::bitvector: return "bitvector";
  }
  return "?";
}

LevelKind fmt_from_name(const std::string& s) {
  if (s == "dense") return LevelKind::dense;
  if (s == "compressed") return LevelKind::compressed;
  if (s == "bitvector") return LevelKind::bitvector;
  fail(errc::dot_parse_error, "unknown level format " + s);
}

std::string edge_style(EdgeKind k) {
  switch (k) {
    case EdgeKind::crd: return "solid";
    case EdgeKind::ref: return "dashed";
    case EdgeKind::val: return "bold";
    case EdgeKind::bv: return "solid";
    case EdgeKind::skip: return "dotted";
  }
  return "solid";
}

std::string config_label(const BlockConfig& c) {
  std::ostringstream os;
  os << block_kind_name(c.kind);
  auto kv = [&](const std::string& k, const std::string& v) { os << " " << k << "=" << v; };
  switch (c.kind) {
    case BlockKind::root: kv("tensor", c.tensor); break;
    case BlockKind::scan:
      kv("tensor", c.tensor);
      kv("mode", std::to_string(c.level));
      kv("lmode", std::to_string(c.lmode));
      if (!c.var.empty()) kv("var", c.var);
      kv("fmt", fmt_name(c.fmt));
      if (c.fmt == LevelKind::bitvector) kv("b", std::to_string(c.bits));
      if (c.skip_enabled) kv("skip", "1");
      break;
    case BlockKind::intersect:
    case BlockKind::union_: {
      if (!c.var.empty()) kv("var", c.var);
      kv("arity", std::to_string(c.arity));
      std::string refs;
      for (size_t i = 0; i < c.side_refs.size(); ++i) {
        if (i) refs += ",";
        refs += std::to_string(c.side_refs[i]);
      }
      if (!refs.empty()) kv("refs", refs);
      if (c.skip_enabled) kv("skip", "1");
      if (c.bv_mode) {
        kv("bv", "1");
        kv("b", std::to_string(c.bits));
      }
      break;
    }
    case BlockKind::repeat:
      if (!c.var.empty()) kv("var", c.var);
      break;
    case BlockKind::array: kv("tensor", c.tensor); break;
    case BlockKind::alu: kv("op", alu_op_name(c.op)); break;
    case BlockKind::reduce:
      kv("n", std::to_string(c.n));
      if (!c.drop_empty) kv("keep_empty", "1");
      if (!c.var.empty()) kv("var", c.var);
      break;
    case BlockKind::crd_drop:
      if (!c.var.empty()) kv("var", c.var);
      if (c.val_mode) kv("mode", "val");
      break;
    case BlockKind::write:
      kv("tensor", c.tensor);
      kv("kind", c.write_kind == StreamKind::val ? "val" : "crd");
      if (c.write_kind == StreamKind::crd) {
        kv("mode", std::to_string(c.level));
        kv("lmode", std::to_string(c.lmode));
        if (!c.var.empty()) kv("var", c.var);
        if (!c.dim_source.empty()) kv("dim", c.dim_source);
      } else {
        kv("levels", std::to_string(c.level));
      }
      break;
    case BlockKind::locate:
      kv("tensor", c.tensor);
      kv("mode", std::to_string(c.level));
      kv("lmode", std::to_string(c.lmode));
      if (!c.var.empty()) kv("var", c.var);
      kv("fmt", fmt_name(c.fmt));
      break;
    case BlockKind::bv_convert: kv("b", std::to_string(c.bits)); break;
  }
  return os.str();
}

BlockConfig config_from_label(const std::string& label) {
  std::istringstream is(label);
  std::string kind_name;
  is >> kind_name;
  BlockConfig c;
  if (kind_name == "root") c.kind = BlockKind::root;
  else if (kind_name == "scan") c.kind = BlockKind::scan;
  else if (kind_name == "intersect") c.kind = BlockKind::intersect;
  else if (kind_name == "union") c.kind = BlockKind::union_;
  else if (kind_name == "repeat") c.kind = BlockKind::repeat;
  else if (kind_name == "array") c.kind = BlockKind::array;
  else if (kind_name == "alu") c.kind = BlockKind::alu;
  else if (kind_name == "reduce") c.kind = BlockKind::reduce;
  else if (kind_name == "crd_drop") c.kind = BlockKind::crd_drop;
  else if (kind_name == "write") c.kind = BlockKind::write;
  else if (kind_name == "locate") c.kind = BlockKind::locate;
  else if (kind_name == "bv_convert") c.kind = BlockKind::bv_convert;
  else fail(errc::unknown_block_type, kind_name);

  std::string item;
  while (is >> item) {
    size_t eq = item.find('=');
    if (eq == std::string::npos) fail(errc::dot_parse_error, "bad attribute " + item);
    std::string k = item.substr(0, eq), v = item.substr(eq + 1);
    if (k == "tensor") c.tensor = v;
    else if (k == "mode") {
      if (c.kind == BlockKind::crd_drop) c.val_mode = v == "val";
      else c.level = std::stoi(v);
    }
    else if (k == "lmode") c.lmode = std::stoi(v);
    else if (k == "var") c.var = v;
    else if (k == "fmt") c.fmt = fmt_from_name(v);
    else if (k == "b") c.bits = std::stoi(v);
    else if (k == "arity") c.arity = std::stoi(v);
    else if (k == "skip") c.skip_enabled = v == "1";
    else if (k == "bv") c.bv_mode = v == "1";
    else if (k == "op") {
      if (v == "add") c.op = AluOp::add;
      else if (v == "sub") c.op = AluOp::sub;
      else if (v == "mul") c.op = AluOp::mul;
      else fail(errc::dot_parse_error, "unknown alu op " + v);
    } else if (k == "n") c.n = std::stoi(v);
    else if (k == "keep_empty") c.drop_empty = v != "1";
    else if (k == "refs") {
      c.side_refs.clear();
      std::stringstream rs(v);
      std::string tok;
      while (std::getline(rs, tok, ',')) c.side_refs.push_back(std::stoi(tok));
    } else if (k == "kind") c.write_kind = v == "val" ? StreamKind::val : StreamKind::crd;
    else if (k == "levels") c.level = std::stoi(v);
    else if (k == "dim") c.dim_source = v;
    else fail(errc::dot_parse_error, "unknown attribute " + k);
  }
  if (c.kind == BlockKind::intersect || c.kind == BlockKind::union_) {
    if (c.side_refs.empty()) c.side_refs.assign(static_cast<size_t>(c.arity), 1);
  }
  return c;
}

}  // namespace

std::string to_dot(const SamGraph& g) {
  std::ostringstream os;
  os << "digraph sam {\n";
  os << "  // samgraph v1\n";
  for (size_t v = 0; v < g.nodes.size(); ++v)
    os << "  n" << v << " [label=\"" << config_label(g.nodes[v]) << "\"];\n";
  for (const auto& e : g.edges)
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << edge_kind_name(e.kind)
       << "\" out=\"" << e.sport << "\" in=\"" << e.dport << "\" style=" << edge_style(e.kind)
       << "];\n";
  os << "}\n";
  return os.str();
}

namespace {

// minimal attribute scanner for `key="value"` and `key=value` inside [...]
std::map<std::string, std::string> parse_attrs(const std::string& s) {
  std::map<std::string, std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    if (i >= s.size()) break;
    size_t eq = s.find('=', i);
    if (eq == std::string::npos) fail(errc::dot_parse_error, "attribute without '=' in " + s);
    std::string key = s.substr(i, eq - i);
    key.erase(std::remove_if(key.begin(), key.end(),
                             [](unsigned char c) { return std::isspace(c); }),
              key.end());
    size_t j = eq + 1;
    std::string val;
    if (j < s.size() && s[j] == '"') {
      size_t close = s.find('"', j + 1);
      if (close == std::string::npos) fail(errc::dot_parse_error, "unterminated string in " + s);
      val = s.substr(j + 1, close - j - 1);
      i = close + 1;
    } else {
      size_t end = j;
      while (end < s.size() && !isspace(static_cast<unsigned char>(s[end])) && s[end] != ',') ++end;
      val = s.substr(j, end - j);
      i = end;
    }
    out[key] = val;
  }
  return out;
}

}  // namespace

SamGraph from_dot(const std::string& text) {
  SamGraph g;
  std::istringstream is(text);
  std::string line;
  bool in_graph = false;
  std::map<int, BlockConfig> nodes;
  struct RawEdge {
    int src, dst;
    std::map<std::string, std::string> attrs;
  };
  std::vector<RawEdge> raw_edges;
  while (std::getline(is, line)) {
    size_t c = line.find("//");
    if (c != std::string::npos) line = line.substr(0, c);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    if (line.rfind("digraph", 0) == 0) {
      in_graph = true;
      continue;
    }
    if (line[0] == '}') break;
    if (!in_graph) fail(errc::dot_parse_error, "content outside digraph");
    size_t lb = line.find('[');
    size_t rb = line.rfind(']');
    if (lb == std::string::npos || rb == std::string::npos || rb < lb)
      fail(errc::dot_parse_error, "statement without attributes: " + line);
    std::string head = line.substr(0, lb);
    auto attrs = parse_attrs(line.substr(lb + 1, rb - lb - 1));
    size_t arrow = head.find("->");
    auto node_id = [](const std::string& s) {
      size_t p = s.find('n');
      if (p == std::string::npos) fail(errc::dot_parse_error, "bad node id " + s);
      return std::stoi(s.substr(p + 1));
    };
    if (arrow == std::string::npos) {
      int id = node_id(head);
      if (!attrs.count("label")) fail(errc::dot_parse_error, "node without label");
      nodes[id] = config_from_label(attrs["label"]);
    } else {
      RawEdge e;
      e.src = node_id(head.substr(0, arrow));
      e.dst = node_id(head.substr(arrow + 2));
      e.attrs = attrs;
      raw_edges.push_back(std::move(e));
    }
  }
  if (nodes.empty()) fail(errc::dot_parse_error, "no nodes");
  int max_id = nodes.rbegin()->first;
  if (static_cast<size_t>(max_id + 1) != nodes.size())
    fail(errc::dot_parse_error, "node ids must be dense n0..nK");
  g.nodes.resize(nodes.size());
  for (auto& [id, cfg] : nodes) g.nodes[static_cast<size_t>(id)] = cfg;
  for (auto& re : raw_edges) {
    if (!re.attrs.count("label") || !re.attrs.count("out") || !re.attrs.count("in"))
      fail(errc::dot_parse_error, "edge needs label/out/in attributes");
    std::string kind = re.attrs["label"];
    EdgeKind ek;
    if (kind == "crd") ek = EdgeKind::crd;
    else if (kind == "ref") ek = EdgeKind::ref;
    else if (kind == "val") ek = EdgeKind::val;
    else if (kind == "bv") ek = EdgeKind::bv;
    else if (kind == "skip") ek = EdgeKind::skip;
    else fail(errc::dot_parse_error, "unknown edge kind " + kind);
    g.edges.push_back(Edge{re.src, re.attrs["out"], re.dst, re.attrs["in"], ek});
  }
  return g;
}

bool graph_isomorphic(const SamGraph& a, const SamGraph& b) {
  if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
  for (size_t i = 0; i < a.nodes.size(); ++i)
    if (!(a.nodes[i] == b.nodes[i])) return false;
  auto key = [](const Edge& e) {
    return std::tuple<int, std::string, int, std::string, int>(e.src, e.sport, e.dst, e.dport,
                                                               static_cast<int>(e.kind));
  };
  std::vector<Edge> ea = a.edges, eb = b.edges;
  auto lt = [&](const Edge& x, const Edge& y) { return key(x) < key(y); };
  std::sort(ea.begin(), ea.end(), lt);
  std::sort(eb.begin(), eb.end(), lt);
  for (size_t i = 0; i < ea.size(); ++i)
    if (key(ea[i]) != key(eb[i])) return false;
  return true;
}

}  // namespace sam
