#pragma once

#include <map>
#include <string>

#include "sam/eval.hpp"
#include "sam/graph.hpp"

namespace sam {

struct SimOptions {
  int64_t max_ticks = 2'000'000'000;
  // 0 = unbounded queues (the reference model); finite depths are for
  // experimentation only.
  int64_t queue_capacity = 0;
};

struct SimReport {
  int64_t cycles = 0;
  bool done = false;
  std::map<std::string, TokenCounts> channels;
  TensorMap outputs;
};

std::string edge_key(const Edge& e);

/// Deterministic cycle-approximate execution: global synchronous ticks, fully
/// pipelined blocks, one token per port per tick, unbounded FIFO channels.
SimReport run_graph(const SamGraph& g, const TensorMap& inputs, const SimOptions& opt = {});

/// Per-channel accounting for a finished run; idle = cycles - tokens carried.
TokenCounts channel_stats(const SimReport& report, const std::string& edge);

std::string report_to_json(const SimReport& report);

}  // namespace sam
