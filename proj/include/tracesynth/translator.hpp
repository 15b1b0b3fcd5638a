#pragma once

#include <string>

#include "tracesynth/querygraph.hpp"

namespace tracesynth {

/// Emits one ANSI-flavoured statement (no trailing semicolon). The scan/join
/// core becomes a single SELECT; aggregates wrap their input as derived
/// tables t1, t2, ...; a sort attaches ORDER BY to the innermost block that
/// has none, otherwise wraps.
std::string to_sql(const QueryGraph& g);

/// Inverse of to_sql for the emitted dialect subset. Anything outside it
/// raises ParseError.
QueryGraph parse_sql(const std::string& sql);

/// SQL literal for a predicate bound: integers bare, decimals with '.',
/// dates as quoted ISO-8601 strings.
std::string sql_literal(const Literal& literal);

}  // namespace tracesynth
