// samkit: compile tensor index notation to dataflow graphs, simulate them,
// verify against a dense oracle, generate synthetic data, and reproduce the
// desk-scale studies.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sam/compile.hpp"
#include "sam/gen.hpp"
#include "sam/io.hpp"
#include "sam/sim.hpp"
#include "sam/studies.hpp"

using namespace sam;

namespace {

uint64_t default_seed() {
  if (const char* s = std::getenv("SAMKIT_SEED")) return std::strtoull(s, nullptr, 10);
  return 42;
}

FormatSpec parse_formats(const std::string& spec) {
  // "B:ss,C:dd,x:s"
  FormatSpec out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t c = item.find(':');
    if (c == std::string::npos) fail(errc::parse_error, "format entry needs TENSOR:letters");
    out.per_tensor[item.substr(0, c)] = item.substr(c + 1);
  }
  return out;
}

std::vector<std::string> parse_order(const std::string& order) {
  std::vector<std::string> out;
  std::stringstream ss(order);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

Schedule make_schedule(const std::string& order, const std::vector<std::string>& locates,
                       const std::vector<std::string>& skips) {
  Schedule sched;
  sched.order = parse_order(order);
  for (const auto& l : locates) {
    size_t c = l.find(':');
    if (c == std::string::npos) fail(errc::parse_error, "--locate needs TENSOR:var");
    sched.locate.emplace_back(l.substr(0, c), l.substr(c + 1));
  }
  sched.skip = skips;
  return sched;
}

TensorStorage load_any(const std::string& path, const std::string& name) {
  TensorStorage t;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".tns") t = load_frostt(path);
  else t = load_matrix_market(path);
  t.name = name;
  return t;
}

TensorMap load_bindings(const std::vector<std::string>& tensor_args) {
  TensorMap out;
  for (const auto& a : tensor_args) {
    size_t eq = a.find('=');
    if (eq == std::string::npos) fail(errc::parse_error, "-t needs NAME=PATH");
    std::string name = a.substr(0, eq);
    out[name] = load_any(a.substr(eq + 1), name);
  }
  return out;
}

/// Re-stores file-loaded tensors in the mode order and formats the graph's
/// scanner nodes expect, so callers can hand any .mtx/.tns to `run`.
TensorMap conform_to_graph(const SamGraph& g, TensorMap raw) {
  struct Want {
    std::map<int, std::pair<int, LevelFormat>> levels;  // level -> (lmode, format)
  };
  std::map<std::string, Want> wants;
  for (const auto& n : g.nodes) {
    if (n.kind != BlockKind::scan && n.kind != BlockKind::locate) continue;
    LevelFormat lf;
    lf.kind = n.fmt;
    lf.bits = n.bits;
    wants[n.tensor].levels[n.level] = {n.lmode, lf};
  }
  TensorMap out;
  for (auto& [name, t] : raw) {
    auto w = wants.find(name);
    if (w == wants.end() ||
        static_cast<int>(w->second.levels.size()) != t.order()) {
      out[name] = std::move(t);
      continue;
    }
    std::vector<int> mode_order;
    std::vector<LevelFormat> fmts;
    for (int k = 0; k < t.order(); ++k) {
      auto it = w->second.levels.find(k);
      if (it == w->second.levels.end()) fail(errc::shape_inconsistent, name + " level gap");
      mode_order.push_back(it->second.first);
      fmts.push_back(it->second.second);
    }
    out[name] = build_storage(name, storage_to_coo(t), mode_order, fmts);
  }
  return out;
}

/// Re-stores each operand in the mode order and format the compiled schedule
/// expects; scalars pass through.
TensorMap conform_bindings(const EinsumAst& ast, const FormatSpec& fmt, const Schedule& sched,
                           TensorMap raw) {
  TensorMap out;
  for (const auto& term : ast.terms)
    for (const auto& acc : term.factors) {
      if (out.count(acc.tensor)) continue;
      auto it = raw.find(acc.tensor);
      if (it == raw.end()) fail(errc::shape_inconsistent, "no binding for " + acc.tensor);
      if (acc.vars.empty()) {
        out[acc.tensor] = it->second;
        continue;
      }
      auto f = fmt.per_tensor.find(acc.tensor);
      if (f == fmt.per_tensor.end()) fail(errc::shape_inconsistent, "no format for " + acc.tensor);
      out[acc.tensor] = build_storage(acc.tensor, storage_to_coo(it->second),
                                      required_mode_order(ast, sched, acc.tensor),
                                      parse_format(f->second));
    }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) fail(errc::parse_error, "cannot open " + path + " for writing");
  out << text;
}

struct NamedCase {
  std::string name, expr, order;
  std::map<std::string, std::string> fmts;
};

// the standard expression suite, alphabetical index order (plus the two
// extra matmul dataflows)
const std::vector<NamedCase>& table_cases() {
  static const std::vector<NamedCase> cases = {
      {"SpMV", "x(i)=B(i,j)*c(j)", "i,j", {{"B", "ss"}, {"c", "s"}, {"x", "s"}}},
      {"SpMSpM-ijk", "X(i,j)=B(i,k)*C(k,j)", "i,j,k", {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}},
      {"SpMSpM-ikj", "X(i,j)=B(i,k)*C(k,j)", "i,k,j", {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}},
      {"SpMSpM-kij", "X(i,j)=B(i,k)*C(k,j)", "k,i,j", {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}},
      {"SDDMM", "X(i,j)=B(i,j)*C(i,k)*D(j,k)", "i,j,k",
       {{"B", "ss"}, {"C", "dd"}, {"D", "dd"}, {"X", "ss"}}},
      {"InnerProd", "x=B(i,j,k)*C(i,j,k)", "i,j,k", {{"B", "sss"}, {"C", "sss"}}},
      {"TTV", "X(i,j)=B(i,j,k)*c(k)", "i,j,k", {{"B", "sss"}, {"c", "s"}, {"X", "ss"}}},
      {"TTM", "X(i,j,k)=B(i,j,l)*C(k,l)", "i,j,k,l", {{"B", "sss"}, {"C", "ss"}, {"X", "sss"}}},
      {"MTTKRP", "X(i,j)=B(i,k,l)*C(j,k)*D(j,l)", "i,j,k,l",
       {{"B", "sss"}, {"C", "ss"}, {"D", "ss"}, {"X", "ss"}}},
      {"Residual", "x(i)=b(i)-C(i,j)*d(j)", "i,j",
       {{"b", "s"}, {"C", "ss"}, {"d", "s"}, {"x", "s"}}},
      {"MatTransMul", "x(i)=a*Bt(i,j)*c(j)+b*d(i)", "i,j",
       {{"Bt", "ss"}, {"c", "s"}, {"d", "s"}, {"x", "s"}}},
      {"MMAdd", "X(i,j)=B(i,j)+C(i,j)", "i,j", {{"B", "ss"}, {"C", "ss"}, {"X", "ss"}}},
      {"Plus3", "X(i,j)=B(i,j)+C(i,j)+D(i,j)", "i,j",
       {{"B", "ss"}, {"C", "ss"}, {"D", "ss"}, {"X", "ss"}}},
      {"Plus2", "X(i,j,k)=B(i,j,k)+C(i,j,k)", "i,j,k",
       {{"B", "sss"}, {"C", "sss"}, {"X", "sss"}}},
  };
  return cases;
}

TensorMap random_instance(const EinsumAst& ast, const FormatSpec& fmt, const Schedule& sched,
                          const std::map<std::string, int64_t>& dims, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorMap inputs;
  for (const auto& term : ast.terms)
    for (const auto& acc : term.factors) {
      if (inputs.count(acc.tensor)) continue;
      if (acc.vars.empty()) {
        Coo coo;
        coo.order = 0;
        coo.add({}, static_cast<double>(1 + rng() % 9));
        inputs[acc.tensor] = build_storage(acc.tensor, std::move(coo), {}, {});
        continue;
      }
      std::vector<int64_t> shape;
      for (const auto& v : acc.vars) shape.push_back(dims.at(v));
      DenseTensor d(shape);
      double sparsity = 0.8 + 0.19 * static_cast<double>(rng() % 100) / 100.0;
      for (auto& x : d.data)
        if (static_cast<double>(rng() % 1000) / 1000.0 >= sparsity)
          x = static_cast<double>(1 + rng() % 9);
      inputs[acc.tensor] = to_levels(d, parse_format(fmt.per_tensor.at(acc.tensor)),
                                     required_mode_order(ast, sched, acc.tensor), acc.tensor);
    }
  return inputs;
}

int cmd_verify_builtin(int seeds, uint64_t seed0) {
  std::map<std::string, int64_t> dims = {{"i", 24}, {"j", 20}, {"k", 16}, {"l", 12}};
  int failures = 0;
  for (const auto& c : table_cases()) {
    EinsumAst ast = parse_einsum(c.expr);
    FormatSpec fmt;
    fmt.per_tensor = c.fmts;
    Schedule sched = make_schedule(c.order, {}, {});
    SamGraph g = lower(ast, fmt, sched);
    bool ok = true;
    for (int s = 0; s < seeds && ok; ++s) {
      TensorMap inputs =
          random_instance(ast, fmt, sched, dims, seed0 + static_cast<uint64_t>(s) * 1000003);
      SimReport r = run_graph(g, inputs);
      DenseTensor got = from_levels(r.outputs.at(ast.output.tensor));
      DenseTensor want = reference_eval(ast, inputs);
      if (!(got.shape == want.shape && got.data == want.data)) ok = false;
    }
    std::cout << (ok ? "pass" : "FAIL") << "  " << c.name << " (" << seeds << " seeds)\n";
    if (!ok) failures++;
  }
  return failures == 0 ? 0 : 1;
}

int cmd_bench(const std::string& study, const std::string& out_path, uint64_t seed) {
  std::string csv;
  if (study == "fig12") {
    csv = rows_to_csv(study_ordering(250, 100, 250, 0.95, seed), "order");
  } else if (study == "fig11") {
    csv = rows_to_csv(study_fusion(250, 0.95, {1, 10, 100}, seed), "K");
  } else if (study == "fig13a") {
    csv = rows_to_csv(
        study_accel_urandom(2000, {0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999}, 64, 64, seed),
        "sparsity");
  } else if (study == "fig13b") {
    csv = rows_to_csv(study_accel_runs(2000, 400, {1, 2, 4, 8, 16, 25, 50}, 64, 64, seed),
                      "run_len");
  } else if (study == "fig13c") {
    csv = rows_to_csv(study_accel_blocks(2000, 400, {16, 25, 50, 100, 200, 400}, 64, 64, seed),
                      "block");
  } else if (study == "fig14") {
    std::vector<StreamBreakdownRow> rows;
    for (const auto& r : study_stream_breakdown(gen_even_matrix(630, 42, 1260, "ch7-6-b1-like")))
      rows.push_back(r);
    for (const auto& r :
         study_stream_breakdown(gen_even_matrix(507, 63516, 409856, "rail507-like")))
      rows.push_back(r);
    csv = breakdown_to_csv(rows);
  } else if (study == "table1") {
    std::ostringstream os;
    os << "name,scan,repeat,intersect,union,alu,reduce,crd_drop,write,array\n";
    for (const auto& r : table_cases()) {
      FormatSpec f;
      f.per_tensor = r.fmts;
      SamGraph g = lower(parse_einsum(r.expr), f, make_schedule(r.order, {}, {}));
      auto c = primitive_counts(g);
      os << r.name << "," << c["scan"] << "," << c["repeat"] << "," << c["intersect"] << ","
         << c["union"] << "," << c["alu"] << "," << c["reduce"] << "," << c["crd_drop"] << ","
         << c["write"] << "," << c["array"] << "\n";
    }
    csv = os.str();
  } else {
    std::cerr << "unknown study " << study
              << " (expected table1, fig11, fig12, fig13a, fig13b, fig13c, fig14)\n";
    return 2;
  }
  write_text(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse tensor dataflow toolkit"};
  app.require_subcommand(1);

  auto* compile = app.add_subcommand("compile", "lower an expression to a dataflow graph");
  std::string expr, formats, order, out_path;
  std::vector<std::string> locates, skips;
  compile->add_option("-e,--expr", expr, "tensor index expression")->required();
  compile->add_option("-f,--formats", formats, "per-tensor level formats, e.g. B:ss,c:d")
      ->required();
  compile->add_option("--order", order, "index variable order, e.g. i,k,j")->required();
  compile->add_option("--locate", locates, "probe a tensor level instead of streaming (T:var)");
  compile->add_option("--skip", skips, "enable coordinate skipping at a variable");
  compile->add_option("-o,--out", out_path, "output DOT path (default stdout)");

  auto* run = app.add_subcommand("run", "simulate a compiled graph");
  std::string graph_path, report_path;
  std::vector<std::string> tensor_args, dump_args;
  int64_t queue_capacity = 0;
  run->add_option("graph", graph_path, "graph DOT file")->required();
  run->add_option("-t,--tensor", tensor_args, "bind NAME=PATH (.mtx or .tns)");
  run->add_option("-o,--report", report_path, "write the run report JSON");
  run->add_option("--dump", dump_args, "write an output tensor, NAME=PATH");
  run->add_option("--queue-capacity", queue_capacity,
                  "finite channel depth (0 = unbounded, the reference model)");

  auto* verify = app.add_subcommand("verify", "simulate and compare against the dense oracle");
  std::string v_expr, v_formats, v_order, v_suite;
  std::vector<std::string> v_tensors, v_locates, v_skips;
  int v_seeds = 20;
  verify->add_option("-e,--expr", v_expr, "tensor index expression");
  verify->add_option("-f,--formats", v_formats, "per-tensor level formats");
  verify->add_option("--order", v_order, "index variable order");
  verify->add_option("-t,--tensor", v_tensors, "bind NAME=PATH");
  verify->add_option("--locate", v_locates, "locate annotations");
  verify->add_option("--skip", v_skips, "skip annotations");
  verify->add_option("--suite", v_suite, "run a built-in suite: table1");
  verify->add_option("--seeds", v_seeds, "random instances per expression for --suite");

  auto* gen = app.add_subcommand("gen", "generate synthetic tensors");
  std::string g_kind, g_out, g_out2;
  int64_t g_dim = 2000, g_rows = 0, g_cols = 0, g_nnz = 100, g_len = 1;
  double g_sparsity = -1.0;
  uint64_t g_seed = default_seed();
  gen->add_option("kind", g_kind, "urandom | runs | blocks | even")->required();
  gen->add_option("--dim", g_dim, "vector dimension");
  gen->add_option("--rows", g_rows, "matrix rows (urandom/even)");
  gen->add_option("--cols", g_cols, "matrix cols (urandom/even)");
  gen->add_option("--nnz", g_nnz, "number of nonzeros");
  gen->add_option("--sparsity", g_sparsity, "sparsity fraction instead of --nnz");
  gen->add_option("--len", g_len, "run or block length");
  gen->add_option("--seed", g_seed, "rng seed");
  gen->add_option("-o,--out", g_out, "output path (.mtx or .tns)")->required();
  gen->add_option("--out2", g_out2, "second output for runs/blocks pairs");

  auto* stats = app.add_subcommand("stats", "per-channel token breakdown of a run report");
  std::string s_report, s_out;
  stats->add_option("report", s_report, "report JSON from `run`")->required();
  stats->add_option("-o,--out", s_out, "CSV path (default stdout)");

  auto* bench = app.add_subcommand("bench", "reproduce a desk-scale study");
  std::string b_study, b_out;
  uint64_t b_seed = default_seed();
  bench->add_option("study", b_study, "table1 | fig11 | fig12 | fig13a | fig13b | fig13c | fig14")
      ->required();
  bench->add_option("-o,--out", b_out, "CSV path (default stdout)");
  bench->add_option("--seed", b_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) {
      EinsumAst ast = parse_einsum(expr);
      Schedule sched = make_schedule(order, locates, skips);
      SamGraph g = lower(ast, parse_formats(formats), sched);
      write_text(out_path, to_dot(g));
      return 0;
    }
    if (run->parsed()) {
      std::ifstream in(graph_path);
      if (!in) fail(errc::parse_error, "cannot open " + graph_path);
      std::stringstream buf;
      buf << in.rdbuf();
      SamGraph g = from_dot(buf.str());
      TensorMap inputs = conform_to_graph(g, load_bindings(tensor_args));
      SimOptions opt;
      opt.queue_capacity = queue_capacity;
      SimReport r = run_graph(g, inputs, opt);
      std::cout << "cycles " << r.cycles << "\n";
      for (const auto& [name, t] : r.outputs)
        std::cout << "output " << name << ": order " << t.order() << ", " << t.nnz()
                  << " stored values\n";
      if (!report_path.empty()) write_text(report_path, report_to_json(r));
      for (const auto& d : dump_args) {
        size_t eq = d.find('=');
        if (eq == std::string::npos) fail(errc::parse_error, "--dump needs NAME=PATH");
        const TensorStorage& t = r.outputs.at(d.substr(0, eq));
        std::string path = d.substr(eq + 1);
        if (path.size() > 4 && path.substr(path.size() - 4) == ".tns") write_frostt(path, t);
        else write_matrix_market(path, t);
      }
      return 0;
    }
    if (verify->parsed()) {
      if (!v_suite.empty()) {
        if (v_suite != "table1") fail(errc::parse_error, "unknown suite " + v_suite);
        return cmd_verify_builtin(v_seeds, default_seed());
      }
      if (v_expr.empty() || v_formats.empty() || v_order.empty())
        fail(errc::parse_error, "verify needs -e, -f, and --order (or --suite)");
      EinsumAst ast = parse_einsum(v_expr);
      FormatSpec fmt = parse_formats(v_formats);
      Schedule sched = make_schedule(v_order, v_locates, v_skips);
      SamGraph g = lower(ast, fmt, sched);
      TensorMap inputs = conform_bindings(ast, fmt, sched, load_bindings(v_tensors));
      SimReport r = run_graph(g, inputs);
      DenseTensor got = from_levels(r.outputs.at(ast.output.tensor));
      DenseTensor want = reference_eval(ast, inputs);
      if (got.shape == want.shape && got.data == want.data) {
        std::cout << "pass: simulated output equals the dense reference ("
                  << r.outputs.at(ast.output.tensor).nnz() << " stored values, " << r.cycles
                  << " cycles)\n";
        return 0;
      }
      std::cout << "FAIL: simulated output differs from the dense reference\n";
      return 1;
    }
    if (gen->parsed()) {
      auto write_any = [](const std::string& path, const TensorStorage& t) {
        if (path.size() > 4 && path.substr(path.size() - 4) == ".tns") write_frostt(path, t);
        else write_matrix_market(path, t);
      };
      if (g_kind == "urandom") {
        if (g_rows > 0) {
          int64_t nnz = g_sparsity >= 0
                            ? static_cast<int64_t>(static_cast<double>(g_rows * g_cols) *
                                                   (1.0 - g_sparsity))
                            : g_nnz;
          write_any(g_out, gen_urandom_matrix(g_rows, g_cols, nnz, g_seed));
        } else if (g_sparsity >= 0) {
          write_any(g_out, gen_urandom_sparsity(g_dim, g_sparsity, g_seed));
        } else {
          write_any(g_out, gen_urandom(g_dim, g_nnz, g_seed));
        }
      } else if (g_kind == "runs" || g_kind == "blocks") {
        if (g_out2.empty()) fail(errc::parse_error, g_kind + " generates a pair; give --out2");
        auto pair = g_kind == "runs" ? gen_runs(g_dim, g_nnz, g_len, g_seed)
                                     : gen_blocks(g_dim, g_nnz, g_len, g_seed);
        write_any(g_out, pair.first);
        write_any(g_out2, pair.second);
      } else if (g_kind == "even") {
        write_any(g_out, gen_even_matrix(g_rows, g_cols, g_nnz));
      } else {
        fail(errc::parse_error, "unknown generator " + g_kind);
      }
      return 0;
    }
    if (stats->parsed()) {
      std::ifstream in(s_report);
      if (!in) fail(errc::parse_error, "cannot open " + s_report);
      nlohmann::json j = nlohmann::json::parse(in);
      std::ostringstream os;
      os << "edge,coord,ref,val,bv,stop,done,empty,idle\n";
      for (const auto& [key, c] : j["channels"].items()) {
        int64_t stops = 0;
        for (const auto& [lvl, n] : c["stop"].items()) stops += n.get<int64_t>();
        os << key << "," << c["coord"] << "," << c["ref"] << "," << c["val"] << "," << c["bv"]
           << "," << stops << "," << c["done"] << "," << c["empty"] << "," << c["idle"] << "\n";
      }
      write_text(s_out, os.str());
      return 0;
    }
    if (bench->parsed()) return cmd_bench(b_study, b_out, b_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
