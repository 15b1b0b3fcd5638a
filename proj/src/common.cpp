#include "tracesynth/common.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tracesynth {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Integer:
      return "integer";
    case ValueKind::Decimal:
      return "decimal";
    case ValueKind::Date:
      return "date";
    case ValueKind::Text:
      return "text";
  }
  return "?";
}

ValueKind value_kind_from_string(std::string_view text) {
  if (text == "integer") return ValueKind::Integer;
  if (text == "decimal") return ValueKind::Decimal;
  if (text == "date") return ValueKind::Date;
  if (text == "text") return ValueKind::Text;
  throw ParseError("unknown value kind '" + std::string(text) + "'");
}

double value_step(ValueKind kind) { return kind == ValueKind::Decimal ? 0.01 : 1.0; }

std::string format_date(int64_t days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int64_t parse_date(std::string_view iso) {
  using namespace std::chrono;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw ParseError("malformed date '" + std::string(iso) + "'");
  }
  const auto y = static_cast<int>(parse_int(iso.substr(0, 4)));
  const auto m = static_cast<unsigned>(parse_int(iso.substr(5, 2)));
  const auto d = static_cast<unsigned>(parse_int(iso.substr(8, 2)));
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(iso) + "'");
  return sys_days{ymd}.time_since_epoch().count();
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw ParseError("malformed number '" + std::string(text) + "'");
  }
  return value;
}

int64_t parse_int(std::string_view text) {
  text = trim(text);
  int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw ParseError("malformed integer '" + std::string(text) + "'");
  }
  return value;
}

std::string format_value(ValueKind kind, double value) {
  switch (kind) {
    case ValueKind::Integer: {
      return std::to_string(static_cast<int64_t>(value));
    }
    case ValueKind::Decimal: {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
      if (ec != std::errc{}) throw std::runtime_error("format_value failed");
      std::string out(buf, end);
      if (out.find('.') == std::string::npos) out += ".0";
      return out;
    }
    case ValueKind::Date:
      return format_date(static_cast<int64_t>(value));
    case ValueKind::Text:
      break;
  }
  throw std::logic_error("text values have no numeric form");
}

double parse_value(ValueKind kind, std::string_view text) {
  switch (kind) {
    case ValueKind::Integer:
      return static_cast<double>(parse_int(text));
    case ValueKind::Decimal:
      return parse_double(text);
    case ValueKind::Date:
      return static_cast<double>(parse_date(text));
    case ValueKind::Text:
      break;
  }
  throw std::logic_error("text values have no numeric form");
}

double quantize_value(ValueKind kind, double value) {
  if (kind == ValueKind::Decimal) {
    // Round through the decimal text so the result equals its own parse.
    const double cents = std::floor(value * 100.0 + 1e-9);
    return parse_double(format_value(ValueKind::Decimal, cents / 100.0));
  }
  return std::floor(value + 1e-9);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

bool starts_with(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

std::string to_hex(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

uint64_t from_hex(std::string_view text) {
  uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw ParseError("malformed hash '" + std::string(text) + "'");
  }
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << contents;
}

uint64_t fnv1a64(std::string_view data) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::optional<std::string> KeyValueLine::get(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string KeyValueLine::require(std::string_view key) const {
  auto value = get(key);
  if (!value) throw ParseError("missing field '" + std::string(key) + "'");
  return *value;
}

std::vector<std::string> KeyValueLine::all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : fields) {
    if (k == key) out.push_back(v);
  }
  return out;
}

KeyValueLine parse_key_values(std::string_view line) {
  KeyValueLine out;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + token + "'");
    out.fields.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  return out;
}

}  // namespace tracesynth
