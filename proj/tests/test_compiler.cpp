#include <map>

#include "doctest.h"
#include "testutil.hpp"

using namespace sam;
using namespace samtest;

namespace {

struct Counts {
  int scan = 0, repeat = 0, intersect = 0, unions = 0, alu = 0, reduce = 0, crd_drop = 0,
      write = 0, array = 0;
};

Counts table_counts(const std::string& expr, const std::vector<std::string>& order,
                    const std::map<std::string, std::string>& fmts) {
  FormatSpec f;
  f.per_tensor = fmts;
  SamGraph g = lower(parse_einsum(expr), f, Schedule{order, {}, {}});
  auto c = primitive_counts(g);
  Counts out;
  out.scan = c["scan"];
  out.repeat = c["repeat"];
  out.intersect = c["intersect"];
  out.unions = c["union"];
  out.alu = c["alu"];
  out.reduce = c["reduce"];
  out.crd_drop = c["crd_drop"];
  out.write = c["write"];
  out.array = c["array"];
  return out;
}

void check_counts(const Counts& got, const Counts& want) {
  CHECK(got.scan == want.scan);
  CHECK(got.repeat == want.repeat);
  CHECK(got.intersect == want.intersect);
  CHECK(got.unions == want.unions);
  CHECK(got.alu == want.alu);
  CHECK(got.reduce == want.reduce);
  CHECK(got.crd_drop == want.crd_drop);
  CHECK(got.write == want.write);
  CHECK(got.array == want.array);
}

}  // namespace

TEST_CASE("einsum parsing") {
  EinsumAst mm = parse_einsum("X(i,j)=B(i,k)*C(k,j)");
  CHECK(mm.output.tensor == "X");
  CHECK(mm.reduction_vars == std::vector<std::string>{"k"});
  CHECK(mm.terms.size() == 1);
  CHECK(mm.terms[0].factors.size() == 2);

  EinsumAst res = parse_einsum("x(i)=b(i)-C(i,j)*d(j)");
  CHECK(res.terms.size() == 2);
  CHECK(res.terms[1].negate);
  CHECK(res.reduction_vars == std::vector<std::string>{"j"});

  CHECK_THROWS_WITH_AS(parse_einsum("X(i,i)=B(i)"), doctest::Contains("RepeatedIndexInAccess"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_einsum("X(i,j)=B(i)"), doctest::Contains("UnboundOutputVar"), Error);
  CHECK_THROWS_WITH_AS(parse_einsum("X(i) B(i)"), doctest::Contains("SyntaxError"), Error);
}

TEST_CASE("spmv lowering matches the published primitive counts") {
  check_counts(table_counts("x(i)=B(i,j)*c(j)", {"i", "j"}, {{"B", "ss"}, {"c", "s"}, {"x", "s"}}),
               Counts{3, 1, 1, 0, 1, 1, 1, 2, 2});
}

TEST_CASE("matmul lowering counts across dataflow orders") {
  std::map<std::string, std::string> f = {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}};
  const std::string e = "X(i,j)=B(i,k)*C(k,j)";
  check_counts(table_counts(e, {"i", "j", "k"}, f), Counts{4, 2, 1, 0, 1, 1, 2, 3, 2});
  check_counts(table_counts(e, {"i", "k", "j"}, f), Counts{4, 2, 1, 0, 1, 1, 1, 3, 2});
  check_counts(table_counts(e, {"k", "i", "j"}, f), Counts{4, 2, 1, 0, 1, 1, 0, 3, 2});
  check_counts(table_counts(e, {"j", "k", "i"}, f), Counts{4, 2, 1, 0, 1, 1, 1, 3, 2});
  check_counts(table_counts(e, {"j", "i", "k"}, f), Counts{4, 2, 1, 0, 1, 1, 2, 3, 2});
  check_counts(table_counts(e, {"k", "j", "i"}, f), Counts{4, 2, 1, 0, 1, 1, 0, 3, 2});
}

TEST_CASE("sddmm lowering counts") {
  check_counts(table_counts("X(i,j)=B(i,j)*C(i,k)*D(j,k)", {"i", "j", "k"},
                            {{"B", "ss"}, {"C", "ss"}, {"D", "ss"}, {"X", "ss"}}),
               Counts{6, 3, 3, 0, 2, 1, 2, 3, 3});
}

TEST_CASE("inner product lowering counts") {
  check_counts(table_counts("x=B(i,j,k)*C(i,j,k)", {"i", "j", "k"},
                            {{"B", "sss"}, {"C", "sss"}}),
               Counts{6, 0, 3, 0, 1, 3, 0, 1, 2});
}

TEST_CASE("ttv and ttm lowering counts") {
  check_counts(table_counts("X(i,j)=B(i,j,k)*c(k)", {"i", "j", "k"},
                            {{"B", "sss"}, {"c", "s"}, {"X", "ss"}}),
               Counts{4, 2, 1, 0, 1, 1, 2, 3, 2});
  check_counts(table_counts("X(i,j,k)=B(i,j,l)*C(k,l)", {"i", "j", "k", "l"},
                            {{"B", "sss"}, {"C", "ss"}, {"X", "sss"}}),
               Counts{5, 3, 1, 0, 1, 1, 3, 4, 2});
}

TEST_CASE("mttkrp lowering counts") {
  check_counts(table_counts("X(i,j)=B(i,k,l)*C(j,k)*D(j,l)", {"i", "j", "k", "l"},
                            {{"B", "sss"}, {"C", "ss"}, {"D", "ss"}, {"X", "ss"}}),
               Counts{7, 5, 3, 0, 2, 2, 3, 3, 3});
}

TEST_CASE("residual and mattransmul lowering counts") {
  check_counts(table_counts("x(i)=b(i)-C(i,j)*d(j)", {"i", "j"},
                            {{"b", "s"}, {"C", "ss"}, {"d", "s"}, {"x", "s"}}),
               Counts{4, 1, 1, 1, 2, 1, 1, 2, 3});
  check_counts(table_counts("x(i)=a*Bt(i,j)*c(j)+b*d(i)", {"i", "j"},
                            {{"Bt", "ss"}, {"c", "s"}, {"d", "s"}, {"x", "s"}}),
               Counts{4, 4, 1, 1, 4, 1, 1, 2, 5});
}

TEST_CASE("elementwise addition lowering counts") {
  check_counts(table_counts("X(i,j)=B(i,j)+C(i,j)", {"i", "j"},
                            {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}),
               Counts{4, 0, 0, 2, 1, 0, 0, 3, 2});
  check_counts(table_counts("X(i,j)=B(i,j)+C(i,j)+D(i,j)", {"i", "j"},
                            {{"B", "ss"}, {"C", "ss"}, {"D", "ss"}, {"X", "ss"}}),
               Counts{6, 0, 0, 2, 2, 0, 0, 3, 3});
  check_counts(table_counts("X(i,j,k)=B(i,j,k)+C(i,j,k)", {"i", "j", "k"},
                            {{"B", "sss"}, {"C", "sss"}, {"X", "sss"}}),
               Counts{6, 0, 0, 3, 1, 0, 0, 4, 2});
}

TEST_CASE("count stability: lowering is a pure function of its inputs") {
  std::map<std::string, std::string> f = {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}};
  SamGraph a = lower(parse_einsum("X(i,j)=B(i,k)*C(k,j)"), FormatSpec{f},
                     Schedule{{"i", "k", "j"}, {}, {}});
  SamGraph b = lower(parse_einsum("X(i,j)=B(i,k)*C(k,j)"), FormatSpec{f},
                     Schedule{{"i", "k", "j"}, {}, {}});
  CHECK(graph_isomorphic(a, b));
}

TEST_CASE("reducer dimension beyond two is rejected") {
  // three output vars after the reduced var would need an order-3 accumulator
  FormatSpec f;
  f.per_tensor = {{"B", "ssss"}, {"C", "s"}, {"X", "sss"}};
  CHECK_THROWS_WITH_AS(
      lower(parse_einsum("X(i,j,k)=B(l,i,j,k)*C(l)"), f,
            Schedule{{"l", "i", "j", "k"}, {}, {}}),
      doctest::Contains("UnsupportedReducerDim"), Error);
}

TEST_CASE("reference evaluation of spmv on the example matrix") {
  DenseTensor Bd({4, 4});
  Bd.at({0, 1}) = 1;
  Bd.at({1, 0}) = 2;
  Bd.at({1, 2}) = 3;
  Bd.at({3, 1}) = 4;
  Bd.at({3, 3}) = 5;
  DenseTensor cd({4});
  for (int64_t i = 0; i < 4; ++i) cd.at({i}) = 1;
  TensorMap inputs;
  inputs["B"] = to_levels(Bd, "ss", "B");
  inputs["c"] = to_levels(cd, "d", "c");
  EinsumAst ast = parse_einsum("x(i)=B(i,j)*c(j)");
  DenseTensor x = reference_eval(ast, inputs);
  CHECK(x.shape == std::vector<int64_t>{4});
  CHECK(x.data == std::vector<double>{1, 5, 0, 9});
}

TEST_CASE("reference evaluation covers additions and self products") {
  std::mt19937_64 rng(3);
  DenseTensor Bd({5, 6});
  for (auto& x : Bd.data)
    if (rng() % 3 == 0) x = static_cast<double>(1 + rng() % 9);
  TensorMap inputs;
  inputs["B"] = to_levels(Bd, "ss", "B");
  inputs["C"] = to_levels(Bd, "ss", "C");
  DenseTensor sum = reference_eval(parse_einsum("X(i,j)=B(i,j)+C(i,j)"), inputs);
  for (size_t k = 0; k < sum.data.size(); ++k) CHECK(sum.data[k] == 2 * Bd.data[k]);

  TensorMap self;
  self["B"] = inputs["B"];
  self["C"] = inputs["C"];
  DenseTensor ip = reference_eval(parse_einsum("x=B(i,j)*C(i,j)"), self);
  double expect = 0;
  for (double v : Bd.data) expect += v * v;
  CHECK(ip.data == std::vector<double>{expect});
}

TEST_CASE("functional evaluation matches the dense oracle per expression") {
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
  };
  std::map<std::string, int64_t> dims = {{"i", 7}, {"j", 6}, {"k", 5}, {"l", 4}};
  for (const auto& c : cases) {
    CAPTURE(c.expr);
    EinsumAst ast = parse_einsum(c.expr);
    FormatSpec fmt;
    fmt.per_tensor = c.fmts;
    fmt.per_tensor[ast.output.tensor] =
        std::string(ast.output.vars.size(), 's');
    Schedule sched{c.order, {}, {}};
    SamGraph g = lower(ast, fmt, sched);
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      TensorMap inputs = random_bindings(ast, fmt, sched, dims, 0.6, seed);
      TensorMap outs = eval_graph(g, inputs);
      DenseTensor got = from_levels(outs.at(ast.output.tensor));
      DenseTensor want = reference_eval(ast, inputs);
      CHECK(dense_equal(got, want));
    }
  }
}

TEST_CASE("format independence for spmv") {
  EinsumAst ast = parse_einsum("x(i)=B(i,j)*c(j)");
  Schedule sched{{"i", "j"}, {}, {}};
  std::map<std::string, int64_t> dims = {{"i", 9}, {"j", 8}};
  DenseTensor want;
  bool first = true;
  for (const std::string& bf : {"dd", "ds", "sd", "ss"})
    for (const std::string& cf : {"d", "s"}) {
      FormatSpec fmt;
      fmt.per_tensor = {{"B", bf}, {"c", cf}, {"x", "s"}};
      SamGraph g = lower(ast, fmt, sched);
      TensorMap inputs = random_bindings(ast, fmt, sched, dims, 0.5, 42);
      DenseTensor got = from_levels(eval_graph(g, inputs).at("x"));
      if (first) {
        want = reference_eval(ast, inputs);
        first = false;
      }
      CHECK(dense_equal(got, want));
    }
}

TEST_CASE("locate lowering keeps values and removes the dense coiteration") {
  EinsumAst ast = parse_einsum("X(i,j)=B(i,j)*C(i,k)*D(j,k)");
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"C", "dd"}, {"D", "dd"}, {"X", "ss"}};
  Schedule plain{{"i", "j", "k"}, {}, {}};
  Schedule located{{"i", "j", "k"}, {{"C", "i"}, {"D", "j"}}, {}};
  SamGraph g0 = lower(ast, fmt, plain);
  SamGraph g1 = lower(ast, fmt, located);
  auto c0 = primitive_counts(g0);
  auto c1 = primitive_counts(g1);
  CHECK(c1["locate"] == 2);
  CHECK(c1["scan"] == c0["scan"] - 2);
  CHECK(c1["intersect"] == c0["intersect"] - 2);

  std::map<std::string, int64_t> dims = {{"i", 6}, {"j", 5}, {"k", 4}};
  TensorMap inputs = random_bindings(ast, fmt, plain, dims, 0.7, 9);
  DenseTensor a = from_levels(eval_graph(g0, inputs).at("X"));
  DenseTensor b = from_levels(eval_graph(g1, inputs).at("X"));
  CHECK(dense_equal(a, b));
}

TEST_CASE("bitvector formats lower to word pipelines") {
  EinsumAst ast = parse_einsum("x(i)=b(i)*c(i)");
  FormatSpec fmt;
  fmt.per_tensor = {{"b", "b8"}, {"c", "b8"}, {"x", "s"}};
  Schedule sched{{"i"}, {}, {}};
  SamGraph g = lower(ast, fmt, sched);
  bool bv_scan = false, bv_merge = false;
  for (const auto& n : g.nodes) {
    if (n.kind == BlockKind::scan && n.fmt == LevelKind::bitvector) bv_scan = true;
    if (n.kind == BlockKind::intersect && n.bv_mode) bv_merge = true;
  }
  CHECK(bv_scan);
  CHECK(bv_merge);

  std::map<std::string, int64_t> dims = {{"i", 60}};
  TensorMap inputs = random_bindings(ast, fmt, sched, dims, 0.7, 5);
  DenseTensor got = from_levels(eval_graph(g, inputs).at("x"));
  CHECK(dense_equal(got, reference_eval(ast, inputs)));
}

TEST_CASE("mixing bitvector and compressed levels at one variable is rejected") {
  FormatSpec fmt;
  fmt.per_tensor = {{"b", "b8"}, {"c", "s"}, {"x", "s"}};
  CHECK_THROWS_WITH_AS(lower(parse_einsum("x(i)=b(i)*c(i)"), fmt, Schedule{{"i"}, {}, {}}),
                       doctest::Contains("FormatUnsupportedForBlock"), Error);
}
