#pragma once

#include <string>
#include <vector>

#include "reinverify/drlp/ast.hpp"

namespace reinverify::drlp {

/// Parses DRLP source. Returns a Script when every identifier resolves to a
/// concrete value, otherwise a Template listing the free parameters.
/// Segment boundaries are `@Pre` and `@Exp` lines; `#` starts a comment.
ParseResult parse(const std::string& source);

/// parse() that insists on a concrete script.
Script parse_concrete(const std::string& source);

ParseResult parse_file(const std::string& path);

/// Cartesian product over the template's iterable variables, row-major in
/// declaration order. A template without iterables yields a singleton.
std::vector<Script> expand_iterables(const Template& tmpl);

/// Substitutes a scalar for one free parameter; yields a Script once no free
/// parameters remain.
ParseResult concretize(const Template& tmpl, const std::string& var, double value);

/// Applies a batch of substitutions in one pass.
ParseResult concretize_all(const Template& tmpl,
                           const std::vector<std::pair<std::string, double>>& values);

}  // namespace reinverify::drlp
