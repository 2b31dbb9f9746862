#pragma once

#include <iosfwd>
#include <string>

#include "sam/tensor.hpp"

namespace sam {

/// Reads a Matrix Market file (coordinate or array; real/integer/pattern
/// fields; general or symmetric). Result is row-major with the given level
/// formats (DCSR by default); duplicates are summed; coordinates 0-based.
TensorStorage load_matrix_market(const std::string& path, const std::string& format = "ss");
TensorStorage read_matrix_market(std::istream& in, const std::string& format,
                                 const std::string& name);
void write_matrix_market(const std::string& path, const TensorStorage& t);

/// Reads a FROSTT .tns file: one line per nonzero, 1-based coordinates then
/// the value. Order is inferred from the first line; dims from the maxima.
TensorStorage load_frostt(const std::string& path);
TensorStorage read_frostt(std::istream& in, const std::string& name);
void write_frostt(const std::string& path, const TensorStorage& t);

}  // namespace sam
