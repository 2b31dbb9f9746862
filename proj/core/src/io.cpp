#include "sam/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sam {

static std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

static std::string basename_no_ext(const std::string& path) {
  size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

TensorStorage read_matrix_market(std::istream& in, const std::string& format,
                                 const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) fail(errc::parse_error, "empty file");
  std::istringstream hs(line);
  std::string banner, object, layout, field, symmetry;
  hs >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%MatrixMarket") fail(errc::parse_error, "missing MatrixMarket banner");
  object = lower(object);
  layout = lower(layout);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix") fail(errc::parse_error, "unsupported object " + object);
  if (field == "complex") fail(errc::unsupported_field, "complex matrices are not supported");
  if (field != "real" && field != "integer" && field != "pattern")
    fail(errc::unsupported_field, "field " + field);
  bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    fail(errc::unsupported_field, "symmetry " + symmetry);

  // skip comments
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream szs(line);
  int64_t rows = 0, cols = 0, entries = 0;
  Coo coo;
  coo.order = 2;
  if (layout == "coordinate") {
    if (!(szs >> rows >> cols >> entries)) fail(errc::parse_error, "bad size line");
    coo.shape = {rows, cols};
    int64_t lineno = 0;
    while (lineno < entries) {
      if (!std::getline(in, line)) fail(errc::parse_error, "unexpected end of entries");
      if (line.empty() || line[0] == '%') continue;
      std::istringstream es(line);
      int64_t i = 0, j = 0;
      double v = 1.0;
      if (!(es >> i >> j)) fail(errc::parse_error, "bad entry at line " + std::to_string(lineno));
      if (field != "pattern" && !(es >> v))
        fail(errc::parse_error, "missing value at line " + std::to_string(lineno));
      if (i < 1 || i > rows || j < 1 || j > cols)
        fail(errc::parse_error, "index out of range at line " + std::to_string(lineno));
      coo.add({i - 1, j - 1}, v);
      if (symmetric && i != j) coo.add({j - 1, i - 1}, v);
      ++lineno;
    }
  } else if (layout == "array") {
    if (!(szs >> rows >> cols)) fail(errc::parse_error, "bad size line");
    coo.shape = {rows, cols};
    // column-major dense listing
    for (int64_t j = 0; j < cols; ++j)
      for (int64_t i = 0; i < rows; ++i) {
        double v;
        if (!(in >> v)) fail(errc::parse_error, "short array data");
        if (v != 0.0) coo.add({i, j}, v);
      }
  } else {
    fail(errc::parse_error, "unsupported layout " + layout);
  }
  return build_storage(name, std::move(coo), {0, 1}, parse_format(format));
}

TensorStorage load_matrix_market(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) fail(errc::parse_error, "cannot open " + path);
  return read_matrix_market(in, format, basename_no_ext(path));
}

void write_matrix_market(const std::string& path, const TensorStorage& t) {
  if (t.order() != 2) fail(errc::shape_mismatch, "matrix market writer needs order 2");
  std::ofstream out(path);
  if (!out) fail(errc::parse_error, "cannot open " + path + " for writing");
  Coo coo = storage_to_coo(t);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << t.shape[0] << " " << t.shape[1] << " " << coo.count() << "\n";
  for (int64_t p = 0; p < coo.count(); ++p)
    out << coo.idx[static_cast<size_t>(2 * p)] + 1 << " "
        << coo.idx[static_cast<size_t>(2 * p + 1)] + 1 << " " << coo.val[static_cast<size_t>(p)]
        << "\n";
}

TensorStorage read_frostt(std::istream& in, const std::string& name) {
  Coo coo;
  int order = -1;
  std::string line;
  int64_t lineno = 0;
  std::vector<int64_t> point;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    std::istringstream ls(line);
    std::vector<double> nums;
    double x;
    while (ls >> x) nums.push_back(x);
    if (nums.empty()) continue;
    if (order < 0) {
      order = static_cast<int>(nums.size()) - 1;
      if (order < 1) fail(errc::parse_error, "line " + std::to_string(lineno) + ": too few fields");
      coo.order = order;
      coo.shape.assign(static_cast<size_t>(order), 0);
      point.resize(static_cast<size_t>(order));
    }
    if (static_cast<int>(nums.size()) != order + 1)
      fail(errc::inconsistent_order,
           "line " + std::to_string(lineno) + ": expected " + std::to_string(order + 1) +
               " fields, got " + std::to_string(nums.size()));
    for (int m = 0; m < order; ++m) {
      int64_t c = static_cast<int64_t>(nums[static_cast<size_t>(m)]);
      if (c < 1) fail(errc::parse_error, "line " + std::to_string(lineno) + ": 1-based coords");
      point[static_cast<size_t>(m)] = c - 1;
      coo.shape[static_cast<size_t>(m)] = std::max(coo.shape[static_cast<size_t>(m)], c);
    }
    coo.add(point, nums.back());
  }
  if (order < 0) fail(errc::parse_error, "no entries");
  std::vector<int> mo(static_cast<size_t>(order));
  for (int i = 0; i < order; ++i) mo[static_cast<size_t>(i)] = i;
  std::vector<LevelFormat> fmt(static_cast<size_t>(order), LevelFormat{LevelKind::compressed, 64});
  return build_storage(name, std::move(coo), mo, fmt);
}

TensorStorage load_frostt(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::parse_error, "cannot open " + path);
  return read_frostt(in, basename_no_ext(path));
}

void write_frostt(const std::string& path, const TensorStorage& t) {
  std::ofstream out(path);
  if (!out) fail(errc::parse_error, "cannot open " + path + " for writing");
  Coo coo = storage_to_coo(t);
  for (int64_t p = 0; p < coo.count(); ++p) {
    for (int m = 0; m < coo.order; ++m)
      out << coo.idx[static_cast<size_t>(p * coo.order + m)] + 1 << " ";
    out << coo.val[static_cast<size_t>(p)] << "\n";
  }
}

}  // namespace sam
