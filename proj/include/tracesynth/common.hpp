#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracesynth {

/// Raised for malformed input files (catalog, trace, graph, model, pool).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a well-formed input violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind { Integer, Decimal, Date, Text };

std::string_view to_string(ValueKind kind);
ValueKind value_kind_from_string(std::string_view text);

inline bool is_numeric(ValueKind kind) { return kind != ValueKind::Text; }

/// Smallest representable increment for predicate literals of this kind.
double value_step(ValueKind kind);

/// Dates are stored as days since 1970-01-01.
std::string format_date(int64_t days);
int64_t parse_date(std::string_view iso);

/// Shortest round-trip representation of a double.
std::string format_double(double value);
double parse_double(std::string_view text);
int64_t parse_int(std::string_view text);

/// Canonical text of a domain value: integers base-10, decimals with a '.'
/// separator, dates ISO-8601.
std::string format_value(ValueKind kind, double value);
double parse_value(ValueKind kind, std::string_view text);

/// Snap a real number down onto the value grid of `kind`.
double quantize_value(ValueKind kind, double value);

/// A typed literal used in range predicates.
struct Literal {
  ValueKind kind = ValueKind::Integer;
  double value = 0.0;

  bool operator==(const Literal&) const = default;
};

// Small text helpers shared by the line-oriented file formats.
std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);
std::string to_hex(uint64_t value);
uint64_t from_hex(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// FNV-1a, 64-bit.
uint64_t fnv1a64(std::string_view data);

/// key=value tokens separated by whitespace.
struct KeyValueLine {
  std::vector<std::pair<std::string, std::string>> fields;

  std::optional<std::string> get(std::string_view key) const;
  std::string require(std::string_view key) const;
  std::vector<std::string> all(std::string_view key) const;
};
KeyValueLine parse_key_values(std::string_view line);

}  // namespace tracesynth
