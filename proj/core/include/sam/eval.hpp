#pragma once

#include <map>

#include "sam/graph.hpp"

namespace sam {

using TensorMap = std::map<std::string, TensorStorage>;

/// Functional graph evaluation: every block applied as a pure whole-stream
/// function in topological order. Skip edges are ignored (they only affect
/// timing). Returns the assembled output tensors.
TensorMap eval_graph(const SamGraph& g, const TensorMap& inputs);

// Bind-time resolution shared with the simulator.
const TensorStorage& bound_tensor(const TensorMap& inputs, const std::string& name);
/// Resolves a scan/locate node to its storage level, checking that the bound
/// tensor's mode order and level format match the node.
const Level& bound_level(const TensorMap& inputs, const BlockConfig& cfg);
int64_t bound_dim(const TensorMap& inputs, const BlockConfig& cfg);

/// Assembles output tensors from per-writer data streams.
TensorMap assemble_outputs(const SamGraph& g, const TensorMap& inputs,
                           const std::map<int, TokenStream>& writer_streams);

}  // namespace sam
