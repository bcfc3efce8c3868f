#pragma once

#include <string>

#include "reinverify/drlp/ast.hpp"

namespace reinverify::drlp {

/// Regenerates DRLP source. Reparsing the output yields a structurally
/// identical AST (comments and blank layout are not preserved).
std::string to_source(const Script& script);
std::string to_source(const Template& tmpl);

std::string ast_json(const Script& script);
std::string ast_json(const Template& tmpl);

std::string format_number(double v);

}  // namespace reinverify::drlp
