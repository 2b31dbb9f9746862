#include <benchmark/benchmark.h>

#include <random>

#include "sam/blocks.hpp"
#include "sam/compile.hpp"
#include "sam/gen.hpp"
#include "sam/sim.hpp"

using namespace sam;

namespace {

ScanOut scan_vector(const TensorStorage& t) {
  return scan_compressed(std::get<CompressedLevel>(t.levels[0]), root_ref_stream());
}

void BM_ScanCompressed(benchmark::State& state) {
  TensorStorage v = gen_urandom(1 << 16, state.range(0), 7);
  for (auto _ : state) {
    ScanOut out = scan_vector(v);
    benchmark::DoNotOptimize(out.crds.toks.data());
  }
}
BENCHMARK(BM_ScanCompressed)->Arg(1 << 10)->Arg(1 << 14);

void BM_Intersect(benchmark::State& state) {
  TensorStorage a = gen_urandom(1 << 16, state.range(0), 7);
  TensorStorage b = gen_urandom(1 << 16, state.range(0), 8);
  ScanOut sa = scan_vector(a), sb = scan_vector(b);
  for (auto _ : state) {
    MergeOut out = intersect_streams({{sa.crds, {sa.refs}}, {sb.crds, {sb.refs}}});
    benchmark::DoNotOptimize(out.crd.toks.data());
  }
}
BENCHMARK(BM_Intersect)->Arg(1 << 10)->Arg(1 << 14);

void BM_Union(benchmark::State& state) {
  TensorStorage a = gen_urandom(1 << 16, state.range(0), 7);
  TensorStorage b = gen_urandom(1 << 16, state.range(0), 8);
  ScanOut sa = scan_vector(a), sb = scan_vector(b);
  for (auto _ : state) {
    MergeOut out = union_streams({{sa.crds, {sa.refs}}, {sb.crds, {sb.refs}}});
    benchmark::DoNotOptimize(out.crd.toks.data());
  }
}
BENCHMARK(BM_Union)->Arg(1 << 10)->Arg(1 << 14);

void BM_ReduceVector(benchmark::State& state) {
  TensorStorage m = gen_urandom_matrix(64, 1 << 10, state.range(0), 7);
  ScanOut top = scan_compressed(std::get<CompressedLevel>(m.levels[0]), root_ref_stream());
  ScanOut bot = scan_compressed(std::get<CompressedLevel>(m.levels[1]), top.refs);
  TokenStream vals = array_load(m.vals, bot.refs);
  for (auto _ : state) {
    VectorReduceOut out = reduce_vector(bot.crds, vals);
    benchmark::DoNotOptimize(out.vals.toks.data());
  }
}
BENCHMARK(BM_ReduceVector)->Arg(1 << 12);

void BM_SpMVSimulation(benchmark::State& state) {
  EinsumAst ast = parse_einsum("x(i)=B(i,j)*c(j)");
  FormatSpec fmt;
  fmt.per_tensor = {{"B", "ss"}, {"c", "s"}, {"x", "s"}};
  Schedule sched{{"i", "j"}, {}, {}};
  SamGraph g = lower(ast, fmt, sched);
  TensorMap inputs;
  inputs["B"] = gen_urandom_matrix(256, 256, state.range(0), 7, "B");
  inputs["c"] = gen_urandom(256, 192, 8, "c");
  for (auto _ : state) {
    SimReport r = run_graph(g, inputs);
    benchmark::DoNotOptimize(r.cycles);
  }
}
BENCHMARK(BM_SpMVSimulation)->Arg(1 << 10)->Arg(1 << 12);

}  // namespace

BENCHMARK_MAIN();
