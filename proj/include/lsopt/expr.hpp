#pragma once

#include <functional>
#include <string>

#include "lsopt/types.hpp"

namespace lsopt {

/// Compiles an arithmetic expression in the variables x and y into a callable.
/// Supports + - * / ^, parentheses, unary minus, the constant pi and the
/// functions sin, cos, tan, exp, log, sqrt, abs. Throws std::invalid_argument
/// on malformed input.
std::function<double(const Vec2&)> compile_expression(const std::string& text);

}  // namespace lsopt
