#include <map>

#include "doctest.h"
#include "testutil.hpp"

using namespace sam;
using namespace samtest;

namespace {

DenseTensor example_matrix() {
  DenseTensor d({4, 4});
  d.at({0, 1}) = 1;
  d.at({1, 0}) = 2;
  d.at({1, 2}) = 3;
  d.at({3, 1}) = 4;
  d.at({3, 3}) = 5;
  return d;
}

std::string find_edge(const SamGraph& g, BlockKind src_kind, const std::string& src_var,
                      const std::string& sport) {
  for (const auto& e : g.edges) {
    const BlockConfig& s = g.nodes[static_cast<size_t>(e.src)];
    if (s.kind == src_kind && s.var == src_var && e.sport == sport) return edge_key(e);
  }
  fail(errc::unknown_edge, "no such edge in test graph");
}

}  // namespace

TEST_CASE("matrix identity reproduces the input storage") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"X", "ss"}};
  EinsumAst ast = parse_einsum("X(i,j)=B(i,j)");
  SamGraph g = lower(ast, fmt, Schedule{{"i", "j"}, {}, {}});
  TensorMap inputs;
  inputs["B"] = to_levels(example_matrix(), "ss", "B");
  SimReport r = run_graph(g, inputs);
  CHECK(r.done);
  const TensorStorage& X = r.outputs.at("X");
  CHECK(X.levels == inputs["B"].levels);
  CHECK(X.vals == inputs["B"].vals);
}

TEST_CASE("spmv on the example matrix") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"c", "d"}, {"x", "s"}};
  EinsumAst ast = parse_einsum("x(i)=B(i,j)*c(j)");
  SamGraph g = lower(ast, fmt, Schedule{{"i", "j"}, {}, {}});
  TensorMap inputs;
  inputs["B"] = to_levels(example_matrix(), "ss", "B");
  DenseTensor ones({4});
  for (auto& v : ones.data) v = 1;
  inputs["c"] = to_levels(ones, "d", "c");
  SimReport r = run_graph(g, inputs);
  const auto& lvl = std::get<CompressedLevel>(r.outputs.at("x").levels[0]);
  CHECK(lvl.crd == std::vector<int64_t>{0, 1, 3});
  CHECK(r.outputs.at("x").vals == std::vector<double>{1, 5, 9});
}

TEST_CASE("a scanner spends a cycle per token") {
  FormatSpec fmt;
  fmt.per_tensor = {{"b", "s"}, {"x", "s"}};
  EinsumAst ast = parse_einsum("x(i)=b(i)");
  SamGraph g = lower(ast, fmt, Schedule{{"i"}, {}, {}});
  DenseTensor v({8});
  v.at({1}) = 4;
  v.at({4}) = 5;
  v.at({6}) = 6;
  TensorMap inputs;
  inputs["b"] = to_levels(v, "s", "b");
  SimReport r = run_graph(g, inputs);
  CHECK(r.cycles >= 5);  // three coordinates, a stop, and Done
  CHECK(r.outputs.at("x").vals == std::vector<double>{4, 5, 6});
}

TEST_CASE("simulated outputs equal the functional evaluation") {
  struct Case {
    std::string expr;
    std::vector<std::string> order;
    std::map<std::string, std::string> fmts;
  };
  std::vector<Case> cases = {
      {"x(i)=B(i,j)*c(j)", {"i", "j"}, {{"B", "ss"}, {"c", "s"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"i", "k", "j"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"i", "j", "k"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"k", "i", "j"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"j", "k", "i"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"j", "i", "k"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k)*C(k,j)", {"k", "j", "i"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,j)*C(i,k)*D(j,k)", {"i", "j", "k"},
       {{"B", "ss"}, {"C", "dd"}, {"D", "dd"}}},
      {"x=B(i,j,k)*C(i,j,k)", {"i", "j", "k"}, {{"B", "sss"}, {"C", "sss"}}},
      {"X(i,j)=B(i,j,k)*c(k)", {"i", "j", "k"}, {{"B", "sss"}, {"c", "s"}}},
      {"X(i,j,k)=B(i,j,l)*C(k,l)", {"i", "j", "k", "l"}, {{"B", "sss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,k,l)*C(j,k)*D(j,l)", {"i", "j", "k", "l"},
       {{"B", "sss"}, {"C", "ss"}, {"D", "ss"}}},
      {"x(i)=b(i)-C(i,j)*d(j)", {"i", "j"}, {{"b", "s"}, {"C", "ss"}, {"d", "s"}}},
      {"x(i)=a*Bt(i,j)*c(j)+b*d(i)", {"i", "j"}, {{"Bt", "ss"}, {"c", "s"}, {"d", "s"}}},
      {"X(i,j)=B(i,j)+C(i,j)", {"i", "j"}, {{"B", "ss"}, {"C", "ss"}}},
      {"X(i,j)=B(i,j)+C(i,j)+D(i,j)", {"i", "j"}, {{"B", "ss"}, {"C", "ss"}, {"D", "ss"}}},
      {"X(i,j,k)=B(i,j,k)+C(i,j,k)", {"i", "j", "k"}, {{"B", "sss"}, {"C", "sss"}}},
      {"x(i)=b(i)*c(i)", {"i"}, {{"b", "b8"}, {"c", "b8"}}},
  };
  std::map<std::string, int64_t> dims = {{"i", 8}, {"j", 7}, {"k", 6}, {"l", 5}};
  for (const auto& c : cases) {
    CAPTURE(c.expr);
    EinsumAst ast = parse_einsum(c.expr);
    FormatSpec fmt;
    fmt.per_tensor = c.fmts;
    fmt.per_tensor[ast.output.tensor] = std::string(ast.output.vars.size(), 's');
    Schedule sched{c.order, {}, {}};
    SamGraph g = lower(ast, fmt, sched);
    for (uint64_t seed = 1; seed <= 6; ++seed) {
      TensorMap inputs = random_bindings(ast, fmt, sched, dims, 0.65, seed);
      TensorMap pure = eval_graph(g, inputs);
      SimReport r = run_graph(g, inputs);
      REQUIRE(r.done);
      const std::string& out = ast.output.tensor;
      CHECK(storage_equal(pure.at(out), r.outputs.at(out)));
      CHECK(dense_equal(from_levels(r.outputs.at(out)), reference_eval(ast, inputs)));
    }
  }
}

TEST_CASE("two runs of the same graph are identical") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}};
  EinsumAst ast = parse_einsum("X(i,j)=B(i,k)*C(k,j)");
  Schedule sched{{"i", "k", "j"}, {}, {}};
  SamGraph g = lower(ast, fmt, sched);
  std::map<std::string, int64_t> dims = {{"i", 10}, {"j", 9}, {"k", 8}};
  TensorMap inputs = random_bindings(ast, fmt, sched, dims, 0.6, 4);
  SimReport a = run_graph(g, inputs);
  SimReport b = run_graph(g, inputs);
  CHECK(a.cycles == b.cycles);
  CHECK(a.channels.size() == b.channels.size());
  for (const auto& [k, v] : a.channels) CHECK(b.channels.at(k) == v);
  CHECK(storage_equal(a.outputs.at("X"), b.outputs.at("X")));
}

TEST_CASE("per-channel accounting: idle plus tokens equals cycles") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"X", "ss"}};
  EinsumAst ast = parse_einsum("X(i,j)=B(i,j)");
  SamGraph g = lower(ast, fmt, Schedule{{"i", "j"}, {}, {}});
  TensorMap inputs;
  inputs["B"] = to_levels(example_matrix(), "ss", "B");
  SimReport r = run_graph(g, inputs);
  for (const auto& [key, c] : r.channels) CHECK(c.idle + c.total() == r.cycles);
}

TEST_CASE("identity stream breakdown matches the closed-form fractions") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"X", "ss"}};
  EinsumAst ast = parse_einsum("X(i,j)=B(i,j)");
  SamGraph g = lower(ast, fmt, Schedule{{"i", "j"}, {}, {}});
  TensorMap inputs;
  inputs["B"] = gen_even_matrix(40, 30, 200, "B");  // five nonzeros per row
  SimReport r = run_graph(g, inputs);

  int64_t nnz = 200, nnr = 40;
  auto inner = channel_stats(r, find_edge(g, BlockKind::scan, "j", "crd"));
  CHECK(inner.coord == nnz);
  CHECK(inner.stops() == nnr);
  CHECK(inner.total() == nnz + nnr + 1);

  auto outer = channel_stats(r, find_edge(g, BlockKind::scan, "i", "crd"));
  double idle_frac = static_cast<double>(outer.idle) / static_cast<double>(r.cycles);
  CHECK(idle_frac > 0.5);

  CHECK_THROWS_WITH_AS(channel_stats(r, "bogus"), doctest::Contains("UnknownEdge"), Error);
}

TEST_CASE("coordinate skipping changes timing but never tokens") {
  EinsumAst ast = parse_einsum("x(i)=b(i)*c(i)");
  FormatSpec fmt;
  fmt.per_tensor = {{"b", "s"}, {"c", "s"}, {"x", "s"}};
  Schedule plain{{"i"}, {}, {}};
  Schedule skipping{{"i"}, {}, {"i"}};
  SamGraph g0 = lower(ast, fmt, plain);
  SamGraph g1 = lower(ast, fmt, skipping);

  // long disjoint runs: skipping must strictly reduce cycles
  auto runs_pair = gen_runs(2000, 400, 16, 5);
  TensorMap runs_in{{"b", runs_pair.first}, {"c", runs_pair.second}};
  SimReport plain_runs = run_graph(g0, runs_in);
  SimReport skip_runs = run_graph(g1, runs_in);
  CHECK(storage_equal(plain_runs.outputs.at("x"), skip_runs.outputs.at("x")));
  CHECK(skip_runs.cycles < plain_runs.cycles);

  // uniform random data: within 5% of the plain intersecter
  TensorMap ur{{"b", gen_urandom(2000, 100, 7, "b")}, {"c", gen_urandom(2000, 100, 8, "c")}};
  SimReport plain_ur = run_graph(g0, ur);
  SimReport skip_ur = run_graph(g1, ur);
  CHECK(storage_equal(plain_ur.outputs.at("x"), skip_ur.outputs.at("x")));
  double ratio = static_cast<double>(skip_ur.cycles) / static_cast<double>(plain_ur.cycles);
  CHECK(ratio < 1.05);
}

TEST_CASE("work grows with nonzeros on nested inputs") {
  EinsumAst ast = parse_einsum("x(i)=b(i)*c(i)");
  FormatSpec fmt;
  fmt.per_tensor = {{"b", "s"}, {"c", "s"}, {"x", "s"}};
  Schedule sched{{"i"}, {}, {}};
  SamGraph g = lower(ast, fmt, sched);

  TensorStorage full = gen_urandom(2000, 400, 9, "b");
  Coo coo = storage_to_coo(full);
  int64_t prev_cycles = 0;
  for (int64_t keep_every : {8, 4, 2, 1}) {
    Coo thin;
    thin.shape = coo.shape;
    thin.order = 1;
    for (int64_t p = 0; p < coo.count(); ++p)
      if (p % keep_every == 0)
        thin.add({coo.idx[static_cast<size_t>(p)]}, coo.val[static_cast<size_t>(p)]);
    TensorStorage b = build_storage("b", std::move(thin), {0},
                                    {LevelFormat{LevelKind::compressed, 64}});
    TensorMap inputs{{"b", b}, {"c", b}};
    inputs.at("c").name = "c";
    SimReport r = run_graph(g, inputs);
    CHECK(r.cycles >= prev_cycles);
    prev_cycles = r.cycles;
  }
}

TEST_CASE("a starved input is reported as a deadlock") {
  SamGraph g;
  BlockConfig root;
  root.kind = BlockKind::root;
  root.tensor = "b";
  int r0 = g.add_node(root);
  int r1 = g.add_node(root);
  BlockConfig sc;
  sc.kind = BlockKind::scan;
  sc.tensor = "b";
  sc.level = 0;
  sc.lmode = 0;
  sc.fmt = LevelKind::compressed;
  int s = g.add_node(sc);
  BlockConfig mc;
  mc.kind = BlockKind::intersect;
  mc.arity = 2;
  mc.side_refs = {1, 1};
  int m = g.add_node(mc);
  g.connect(r0, "ref", s, "ref");
  g.connect(s, "crd", m, "crd0");
  g.connect(s, "ref", m, "ref0_0");
  g.connect(s, "crd", m, "crd1");
  // side 1's refs come from a bare root: two tokens against a full fiber
  g.connect(r1, "ref", m, "ref1_0");

  DenseTensor v({6});
  v.at({0}) = 1;
  v.at({2}) = 2;
  v.at({4}) = 3;
  TensorMap inputs{{"b", to_levels(v, "s", "b")}};
  CHECK_THROWS_WITH_AS(run_graph(g, inputs), doctest::Contains("Deadlock"), Error);
}

TEST_CASE("report serializes to json") {
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"X", "ss"}};
  SamGraph g = lower(parse_einsum("X(i,j)=B(i,j)"), fmt, Schedule{{"i", "j"}, {}, {}});
  TensorMap inputs{{"B", to_levels(example_matrix(), "ss", "B")}};
  SimReport r = run_graph(g, inputs);
  std::string j = report_to_json(r);
  CHECK(j.find("\"cycles\"") != std::string::npos);
  CHECK(j.find("\"idle\"") != std::string::npos);
  CHECK(j.find("\"outputs\"") != std::string::npos);
}
