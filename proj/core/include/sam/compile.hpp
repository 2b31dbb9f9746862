#pragma once

#include <string>
#include <vector>

#include "sam/eval.hpp"
#include "sam/graph.hpp"

namespace sam {

struct Access {
  std::string tensor;
  std::vector<std::string> vars;  // empty for scalars
  bool operator==(const Access&) const = default;
};

struct Term {
  bool negate = false;
  std::vector<Access> factors;
};

// Expressions are sums of signed products:
//   Out(vars) = term (('+'|'-') term)*,  term = factor ('*' factor)*,
//   factor = Name '(' vars ')' | Name      (a bare Name is an order-0 scalar)
struct EinsumAst {
  Access output;
  std::vector<Term> terms;
  std::vector<std::string> vars;            // all index variables, first-appearance order
  std::vector<std::string> reduction_vars;  // right-hand vars minus output vars
};

EinsumAst parse_einsum(const std::string& text);

/// Per-tensor level formats in storage order, e.g. {"B","ss"}, {"c","d"},
/// {"v","b64"}. The storage order itself must agree with the schedule;
/// transposed operands are presented pre-transposed.
struct FormatSpec {
  std::map<std::string, std::string> per_tensor;
};

struct Schedule {
  std::vector<std::string> order;  // permutation of the expression's vars
  std::vector<std::pair<std::string, std::string>> locate;  // (tensor, var)
  std::vector<std::string> skip;   // vars whose intersecter skips coordinates
};

SamGraph lower(const EinsumAst& ast, const FormatSpec& fmt, const Schedule& sched);

/// Storage mode order each operand must be bound with, given the schedule.
std::vector<int> required_mode_order(const EinsumAst& ast, const Schedule& sched,
                                     const std::string& tensor);

/// Naive dense evaluation over the full index space; the correctness oracle.
/// Reduction variables are scoped to the terms that use them.
DenseTensor reference_eval(const EinsumAst& ast, const TensorMap& tensors);

std::vector<int64_t> output_shape(const EinsumAst& ast, const TensorMap& tensors);

}  // namespace sam
