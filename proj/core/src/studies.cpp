#include "sam/studies.hpp"

#include <sstream>

#include "sam/gen.hpp"

namespace sam {

namespace {

SamGraph compile(const std::string& expr, const std::map<std::string, std::string>& fmts,
                 const std::vector<std::string>& order,
                 const std::vector<std::pair<std::string, std::string>>& locate = {},
                 const std::vector<std::string>& skip = {}) {
  FormatSpec f;
  f.per_tensor = fmts;
  return lower(parse_einsum(expr), f, Schedule{order, locate, skip});
}

int64_t cycles_of(const SamGraph& g, const TensorMap& inputs) {
  return run_graph(g, inputs).cycles;
}

}  // namespace

std::vector<StudyRow> study_ordering(int64_t rows_b, int64_t inner, int64_t cols_c,
                                     double sparsity, uint64_t seed) {
  const std::string expr = "X(i,j)=B(i,k)*C(k,j)";
  int64_t nnz_b = static_cast<int64_t>(static_cast<double>(rows_b * inner) * (1.0 - sparsity));
  int64_t nnz_c = static_cast<int64_t>(static_cast<double>(inner * cols_c) * (1.0 - sparsity));
  DenseTensor Bd = from_levels(gen_urandom_matrix(rows_b, inner, nnz_b, seed, "B"));
  DenseTensor Cd = from_levels(gen_urandom_matrix(inner, cols_c, nnz_c, seed + 1, "C"));

  std::vector<StudyRow> rows;
  for (const char* order_name : {"ijk", "ikj", "jik", "jki", "kij", "kji"}) {
    std::string order = order_name;
    std::vector<std::string> ov;
    for (char c : order) ov.emplace_back(1, c);
    EinsumAst ast = parse_einsum(expr);
    Schedule sched{ov, {}, {}};
    SamGraph g = compile(expr, {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}, ov);
    TensorMap inputs;
    inputs["B"] = to_levels(Bd, parse_format("ss"), required_mode_order(ast, sched, "B"), "B");
    inputs["C"] = to_levels(Cd, parse_format("ss"), required_mode_order(ast, sched, "C"), "C");
    rows.push_back({order, "spmspm", cycles_of(g, inputs)});
  }
  return rows;
}

std::vector<StudyRow> study_fusion(int64_t dim, double sparsity_b,
                                   const std::vector<int64_t>& k_sweep, uint64_t seed) {
  std::vector<StudyRow> rows;
  int64_t nnz_b = static_cast<int64_t>(static_cast<double>(dim * dim) * (1.0 - sparsity_b));
  TensorStorage B = gen_urandom_matrix(dim, dim, nnz_b, seed, "B");
  for (int64_t K : k_sweep) {
    TensorStorage C = gen_dense_matrix(dim, K, seed + 1, "C");
    TensorStorage D = gen_dense_matrix(dim, K, seed + 2, "D");

    const std::string expr = "X(i,j)=B(i,j)*C(i,k)*D(j,k)";
    std::map<std::string, std::string> fmts = {
        {"B", "ss"}, {"C", "dd"}, {"D", "dd"}, {"X", "ss"}};
    std::vector<std::string> order = {"i", "j", "k"};
    TensorMap inputs{{"B", B}, {"C", C}, {"D", D}};

    SamGraph fused = compile(expr, fmts, order);
    rows.push_back({std::to_string(K), "fused", cycles_of(fused, inputs)});

    SamGraph located = compile(expr, fmts, order, {{"C", "i"}, {"D", "j"}});
    rows.push_back({std::to_string(K), "fused+locate", cycles_of(located, inputs)});

    // factorized baseline: a dense temporary, then a sampling multiply
    SamGraph gemm = compile("T(i,j)=C(i,k)*D(j,k)", {{"C", "dd"}, {"D", "dd"}, {"T", "ss"}},
                            order);
    SimReport first = run_graph(gemm, inputs);
    TensorMap second_in{{"B", B}, {"T", first.outputs.at("T")}};
    SamGraph sample = compile("X(i,j)=B(i,j)*T(i,j)", {{"B", "ss"}, {"T", "ss"}, {"X", "ss"}},
                              {"i", "j"});
    int64_t total = first.cycles + cycles_of(sample, second_in);
    rows.push_back({std::to_string(K), "unfused", total});
  }
  return rows;
}

namespace {

struct AccelVariant {
  std::string name;
  int64_t cycles;
};

std::vector<AccelVariant> accel_variants(const TensorStorage& b, const TensorStorage& c,
                                         int bv_bits, int64_t split, bool include_dense) {
  std::vector<AccelVariant> out;
  const std::string e1 = "x(i)=b(i)*c(i)";
  const std::vector<std::string> o1 = {"i"};
  auto run1 = [&](const std::string& fmt_letters, const std::vector<std::string>& skip,
                  const TensorStorage& bb, const TensorStorage& cc) {
    SamGraph g = compile(e1, {{"b", fmt_letters}, {"c", fmt_letters}, {"x", "s"}}, o1, {}, skip);
    TensorMap inputs{{"b", bb}, {"c", cc}};
    return cycles_of(g, inputs);
  };
  if (include_dense) {
    TensorStorage bd = reformat(b, parse_format("d"));
    TensorStorage cd = reformat(c, parse_format("d"));
    out.push_back({"Dense", run1("d", {}, bd, cd)});
  }
  out.push_back({"Crd", run1("s", {}, b, c)});
  out.push_back({"Crd-skip", run1("s", {"i"}, b, c)});
  std::string bw = "b" + std::to_string(bv_bits);
  out.push_back({"BV", run1(bw, {}, reformat(b, parse_format(bw)), reformat(c, parse_format(bw)))});

  // split variants iterate chunk ids at an extra outer level
  TensorStorage bs = split_vector(b, split);
  TensorStorage cs = split_vector(c, split);
  const std::string e2 = "x(i,j)=b(i,j)*c(i,j)";
  const std::vector<std::string> o2 = {"i", "j"};
  auto run2 = [&](const std::string& letters, const TensorStorage& bb, const TensorStorage& cc) {
    SamGraph g = compile(e2, {{"b", letters}, {"c", letters}, {"x", "ss"}}, o2);
    TensorMap inputs{{"b", bb}, {"c", cc}};
    return cycles_of(g, inputs);
  };
  out.push_back({"Crd-split", run2("ss", bs, cs)});
  std::string bb2 = bw + bw;
  out.push_back({"BV-split", run2(bb2, reformat(bs, parse_format(bb2)),
                                  reformat(cs, parse_format(bb2)))});
  return out;
}

}  // namespace

std::vector<StudyRow> study_accel_urandom(int64_t dim, const std::vector<double>& sparsities,
                                          int bv_bits, int64_t split, uint64_t seed) {
  std::vector<StudyRow> rows;
  for (double s : sparsities) {
    TensorStorage b = gen_urandom_sparsity(dim, s, seed, "b");
    TensorStorage c = gen_urandom_sparsity(dim, s, seed + 1, "c");
    std::ostringstream x;
    x << s;
    for (const auto& v : accel_variants(b, c, bv_bits, split, true))
      rows.push_back({x.str(), v.name, v.cycles});
  }
  return rows;
}

std::vector<StudyRow> study_accel_runs(int64_t dim, int64_t nnz,
                                       const std::vector<int64_t>& run_lens, int bv_bits,
                                       int64_t split, uint64_t seed) {
  std::vector<StudyRow> rows;
  for (int64_t len : run_lens) {
    auto pair = gen_runs(dim, nnz, len, seed);
    for (const auto& v : accel_variants(pair.first, pair.second, bv_bits, split, false))
      rows.push_back({std::to_string(len), v.name, v.cycles});
  }
  return rows;
}

std::vector<StudyRow> study_accel_blocks(int64_t dim, int64_t nnz,
                                         const std::vector<int64_t>& block_sizes, int bv_bits,
                                         int64_t split, uint64_t seed) {
  std::vector<StudyRow> rows;
  for (int64_t bs : block_sizes) {
    auto pair = gen_blocks(dim, nnz, bs, seed);
    for (const auto& v : accel_variants(pair.first, pair.second, bv_bits, split, false))
      rows.push_back({std::to_string(bs), v.name, v.cycles});
  }
  return rows;
}

std::vector<StreamBreakdownRow> study_stream_breakdown(const TensorStorage& matrix) {
  SamGraph g = compile("X(i,j)=B(i,j)", {{"B", "ss"}, {"X", "ss"}}, {"i", "j"});
  TensorMap inputs;
  inputs["B"] = matrix;
  inputs["B"].name = "B";
  SimReport r = run_graph(g, inputs);

  std::vector<StreamBreakdownRow> rows;
  for (const auto& e : g.edges) {
    const BlockConfig& src = g.nodes[static_cast<size_t>(e.src)];
    if (src.kind != BlockKind::scan || e.sport != "crd") continue;
    TokenCounts c = channel_stats(r, edge_key(e));
    StreamBreakdownRow row;
    row.matrix = matrix.name;
    row.level = src.level == 0 ? "outer" : "inner";
    row.coords = c.coord;
    row.stops = c.stops();
    row.done = c.done;
    row.idle = c.idle;
    row.cycles = r.cycles;
    row.stop_fraction = static_cast<double>(row.stops) / static_cast<double>(c.total());
    row.idle_fraction = static_cast<double>(row.idle) / static_cast<double>(r.cycles);
    rows.push_back(row);
  }
  return rows;
}

std::string rows_to_csv(const std::vector<StudyRow>& rows, const std::string& x_name) {
  std::ostringstream os;
  os << x_name << ",config,cycles\n";
  for (const auto& r : rows) os << r.x << "," << r.config << "," << r.cycles << "\n";
  return os.str();
}

std::string breakdown_to_csv(const std::vector<StreamBreakdownRow>& rows) {
  // long form: token classes carry their fraction of non-idle tokens, idle its
  // fraction of total cycles
  std::ostringstream os;
  os << "matrix,level,token_class,count,fraction\n";
  for (const auto& r : rows) {
    double non_idle = static_cast<double>(r.coords + r.stops + r.done);
    auto line = [&](const std::string& cls, int64_t count, double frac) {
      os << r.matrix << "," << r.level << "," << cls << "," << count << "," << frac << "\n";
    };
    line("coord", r.coords, static_cast<double>(r.coords) / non_idle);
    line("stop", r.stops, r.stop_fraction);
    line("done", r.done, static_cast<double>(r.done) / non_idle);
    line("idle", r.idle, r.idle_fraction);
  }
  return os.str();
}

}  // namespace sam
