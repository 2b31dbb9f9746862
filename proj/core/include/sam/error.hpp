#pragma once

#include <stdexcept>
#include <string>

namespace sam {

enum class errc {
  // stream validation
  missing_done,
  trailing_tokens_after_done,
  non_monotone_fiber,
  wrong_token_kind,
  bad_nesting,
  illegal_payload,
  // storage / io
  parse_error,
  unsupported_field,
  inconsistent_order,
  shape_mismatch,
  unknown_format_letter,
  bad_permutation,
  bad_split,
  infeasible,
  // blocks
  ref_out_of_range,
  shape_misaligned,
  non_monotone_input,
  lockstep_violation,
  // graph / compile
  dot_parse_error,
  unknown_block_type,
  kind_mismatch,
  missing_input,
  syntax_error,
  repeated_index_in_access,
  unbound_output_var,
  unsupported_reducer_dim,
  format_unsupported_for_block,
  shape_inconsistent,
  // sim
  deadlock,
  unknown_edge,
};

const char* errc_name(errc c);

/// Library-wide exception carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(errc code, std::string msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace sam
