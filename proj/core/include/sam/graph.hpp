#pragma once

#include <map>
#include <string>
#include <vector>

#include "sam/blocks.hpp"
#include "sam/tensor.hpp"

namespace sam {

enum class BlockKind : uint8_t {
  root,
  scan,
  intersect,
  union_,
  repeat,
  array,
  alu,
  reduce,
  crd_drop,
  write,
  locate,
  bv_convert,
};

const char* block_kind_name(BlockKind k);

enum class EdgeKind : uint8_t { crd, ref, val, bv, skip };
const char* edge_kind_name(EdgeKind k);

// One node configuration; fields are meaningful per kind (see port_signature).
struct BlockConfig {
  BlockKind kind = BlockKind::root;
  std::string tensor;              // scan/array/locate/write/root: tensor name
  int level = 0;                   // scan/locate/write: storage level index
  int lmode = 0;                   // logical mode of that level
  LevelKind fmt = LevelKind::compressed;  // scan level format
  int bits = 64;                   // bitvector width
  std::string var;                 // index variable this node serves (label only)
  int arity = 2;                   // merge input sides
  std::vector<int> side_refs;      // merge: ref bundle width per side
  bool skip_enabled = false;       // intersect: emit skip hints upstream
  bool bv_mode = false;            // merge on bitvector words
  AluOp op = AluOp::mul;           // alu
  int n = 0;                       // reduce dimension
  bool drop_empty = true;          // reduce: filter empty fibers
  bool val_mode = false;           // crd_drop: zero-value mode
  StreamKind write_kind = StreamKind::crd;  // write: crd level or val array
  std::string dim_source;          // write: "T:m" giving the output dim origin

  bool operator==(const BlockConfig&) const = default;
};

struct Port {
  std::string name;
  EdgeKind kind;
};

struct PortSignature {
  std::vector<Port> inputs;
  std::vector<Port> outputs;
};

PortSignature port_signature(const BlockConfig& cfg);

struct Edge {
  int src = -1;
  std::string sport;
  int dst = -1;
  std::string dport;
  EdgeKind kind = EdgeKind::ref;
};

struct SamGraph {
  std::vector<BlockConfig> nodes;
  std::vector<Edge> edges;

  int add_node(BlockConfig cfg);
  void connect(int src, const std::string& sport, int dst, const std::string& dport);
  size_t size() const { return nodes.size(); }
};

struct GraphDiagnostic {
  errc code;
  std::string message;
};

/// Collects every invariant violation: port kind mismatches, unconnected
/// inputs, root-to-writer connectivity, and cycles outside skip edges.
std::vector<GraphDiagnostic> graph_validate(const SamGraph& g);
void graph_validate_or_throw(const SamGraph& g);

/// Node counts per block kind, root sources excluded.
std::map<std::string, int> primitive_counts(const SamGraph& g);

/// Topological order over non-skip edges.
std::vector<int> topo_order(const SamGraph& g);

std::string to_dot(const SamGraph& g);
SamGraph from_dot(const std::string& text);

/// True when the graphs are isomorphic under the canonical (topological,
/// config-lexicographic) ordering with identical configs and edge kinds.
bool graph_isomorphic(const SamGraph& a, const SamGraph& b);

}  // namespace sam
