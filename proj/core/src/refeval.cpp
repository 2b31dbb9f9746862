#include <algorithm>

#include "sam/compile.hpp"

namespace sam {

namespace {

// var -> dimension, consistency-checked across every access
std::map<std::string, int64_t> var_dims(const EinsumAst& ast, const TensorMap& tensors) {
  std::map<std::string, int64_t> dims;
  for (const auto& t : ast.terms)
    for (const auto& f : t.factors) {
      const TensorStorage& ts = bound_tensor(tensors, f.tensor);
      if (static_cast<size_t>(ts.order()) != f.vars.size())
        fail(errc::shape_inconsistent,
             f.tensor + " is order " + std::to_string(ts.order()) + " but accessed with " +
                 std::to_string(f.vars.size()) + " indices");
      for (size_t m = 0; m < f.vars.size(); ++m) {
        int64_t d = ts.shape[m];
        auto [it, fresh] = dims.emplace(f.vars[m], d);
        if (!fresh && it->second != d)
          fail(errc::shape_inconsistent, "index " + f.vars[m] + " ranges over both " +
                                             std::to_string(it->second) + " and " +
                                             std::to_string(d));
      }
    }
  return dims;
}

}  // namespace

std::vector<int64_t> output_shape(const EinsumAst& ast, const TensorMap& tensors) {
  auto dims = var_dims(ast, tensors);
  std::vector<int64_t> shape;
  for (const auto& v : ast.output.vars) shape.push_back(dims.at(v));
  return shape;
}

DenseTensor reference_eval(const EinsumAst& ast, const TensorMap& tensors) {
  auto dims = var_dims(ast, tensors);
  DenseTensor out(output_shape(ast, tensors));

  std::map<std::string, DenseTensor> dense;
  for (const auto& t : ast.terms)
    for (const auto& f : t.factors)
      if (!dense.count(f.tensor)) dense[f.tensor] = from_levels(bound_tensor(tensors, f.tensor));

  for (const auto& term : ast.terms) {
    // loop over output vars plus this term's own reduction vars
    std::vector<std::string> loop_vars = ast.output.vars;
    for (const auto& v : ast.reduction_vars) {
      bool used = false;
      for (const auto& f : term.factors)
        if (std::find(f.vars.begin(), f.vars.end(), v) != f.vars.end()) used = true;
      if (used) loop_vars.push_back(v);
    }
    std::map<std::string, int64_t> idx;
    for (const auto& v : loop_vars) idx[v] = 0;

    std::vector<int64_t> point;
    while (true) {
      double prod = term.negate ? -1.0 : 1.0;
      for (const auto& f : term.factors) {
        point.clear();
        for (const auto& v : f.vars) point.push_back(idx[v]);
        prod *= dense[f.tensor].at(point);
      }
      point.clear();
      for (const auto& v : ast.output.vars) point.push_back(idx[v]);
      out.at(point) += prod;

      // odometer over loop_vars
      int k = static_cast<int>(loop_vars.size()) - 1;
      for (; k >= 0; --k) {
        const std::string& v = loop_vars[static_cast<size_t>(k)];
        if (++idx[v] < dims.at(v)) break;
        idx[v] = 0;
      }
      if (k < 0) break;
    }
  }
  return out;
}

}  // namespace sam
