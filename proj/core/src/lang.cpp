#include <algorithm>
#include <cctype>

#include "sam/compile.hpp"

namespace sam {

namespace {

struct Lexer {
  const std::string& s;
  size_t i = 0;

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }
  bool accept(char c) {
    skip_ws();
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      fail(errc::syntax_error, std::string("expected '") + c + "' at offset " + std::to_string(i));
  }
  std::string name() {
    skip_ws();
    size_t start = i;
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
    if (i == start) fail(errc::syntax_error, "expected a name at offset " + std::to_string(i));
    return s.substr(start, i - start);
  }
};

Access parse_access(Lexer& lx) {
  Access a;
  a.tensor = lx.name();
  if (lx.accept('(')) {
    if (!lx.accept(')')) {
      do {
        a.vars.push_back(lx.name());
      } while (lx.accept(','));
      lx.expect(')');
    }
  }
  for (size_t i = 0; i < a.vars.size(); ++i)
    for (size_t j = i + 1; j < a.vars.size(); ++j)
      if (a.vars[i] == a.vars[j])
        fail(errc::repeated_index_in_access, a.tensor + " repeats index " + a.vars[i]);
  return a;
}

}  // namespace

EinsumAst parse_einsum(const std::string& text) {
  Lexer lx{text};
  EinsumAst ast;
  ast.output = parse_access(lx);
  lx.expect('=');
  bool negate = false;
  while (true) {
    Term t;
    t.negate = negate;
    t.factors.push_back(parse_access(lx));
    while (lx.accept('*')) t.factors.push_back(parse_access(lx));
    ast.terms.push_back(std::move(t));
    if (lx.accept('+')) negate = false;
    else if (lx.accept('-')) negate = true;
    else break;
  }
  if (!lx.eof()) fail(errc::syntax_error, "trailing input at offset " + std::to_string(lx.i));

  auto note_var = [&](const std::string& v) {
    if (std::find(ast.vars.begin(), ast.vars.end(), v) == ast.vars.end()) ast.vars.push_back(v);
  };
  for (const auto& t : ast.terms)
    for (const auto& f : t.factors)
      for (const auto& v : f.vars) note_var(v);
  for (const auto& v : ast.output.vars) {
    if (std::find(ast.vars.begin(), ast.vars.end(), v) == ast.vars.end())
      fail(errc::unbound_output_var, "output index " + v + " does not appear on the right");
  }
  for (const auto& v : ast.vars)
    if (std::find(ast.output.vars.begin(), ast.output.vars.end(), v) == ast.output.vars.end())
      ast.reduction_vars.push_back(v);
  return ast;
}

}  // namespace sam
