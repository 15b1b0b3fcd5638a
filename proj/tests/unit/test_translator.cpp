#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

namespace {

size_t count_of(const std::string& s, const std::string& needle) {
  size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("minimal scan") {
  GraphBuilder b;
  auto s = b.scan("customer", {"c_id"});
  CHECK(to_sql(std::move(b).build(s)) == "SELECT c_id FROM customer");
}

TEST_CASE("demo join with filter round-trips") {
  GraphBuilder b;
  auto o = b.scan("orders", {"o_custkey", "o_total"});
  auto f = b.filter(o, {le("orders", "o_total", ValueKind::Decimal, 500.25)});
  auto c = b.scan("customer", {"c_id"});
  auto j = b.join(f, c, col("orders", "o_custkey"), col("customer", "c_id"));
  const auto g = std::move(b).build(j);
  const auto sql = to_sql(g);
  CHECK(sql.find("INNER JOIN") != std::string::npos);
  CHECK(canonical_form(parse_sql(sql), false) == canonical_form(g, false));
}

TEST_CASE("two aggregates give two GROUP BY clauses at distinct depths") {
  GraphBuilder b;
  auto s = b.scan("orders", {"o_custkey", "o_id", "o_total"});
  auto a1 = b.aggregate(s, {col("orders", "o_custkey"), col("orders", "o_id")},
                        {{AggregateFunction::Kind::Count, std::nullopt}});
  auto a2 = b.aggregate(a1, {col("orders", "o_custkey")}, {{AggregateFunction::Kind::Count, std::nullopt}});
  const auto sql = to_sql(std::move(b).build(a2));
  CHECK(count_of(sql, "GROUP BY") == 2);
  const auto first = sql.find("GROUP BY");
  const auto second = sql.find("GROUP BY", first + 1);
  auto depth = [&](size_t pos) {
    return count_of(sql.substr(0, pos), "(") - count_of(sql.substr(0, pos), ")");
  };
  CHECK(depth(first) != depth(second));
}

TEST_CASE("1000 random graphs round-trip in both hash modes") {
  int failures = 0;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const auto g = sample_random_graph(star4()->catalog, {3, 2, 2, 20, 0.7, 0.5}, seed);
    const auto back = parse_sql(to_sql(g));
    if (canonical_form(back, false) != canonical_form(g, false) ||
        canonical_form(back, true) != canonical_form(g, true)) {
      ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("window functions are out of subset") {
  CHECK_THROWS_AS(parse_sql("SELECT o_id, ROW_NUMBER() OVER (ORDER BY o_id) FROM orders"), ParseError);
  CHECK_THROWS_AS(parse_sql("DELETE FROM orders"), ParseError);
}

TEST_CASE("date literals are quoted ISO strings and round-trip") {
  const double day = static_cast<double>(parse_date("1995-06-17"));
  CHECK(sql_literal({ValueKind::Date, day}) == "'1995-06-17'");
  GraphBuilder b;
  auto s = b.scan("orders", {"o_date"});
  auto f = b.filter(s, {le("orders", "o_date", ValueKind::Date, day)});
  const auto g = std::move(b).build(f);
  CHECK(to_sql(g).find("'1995-06-17'") != std::string::npos);
  CHECK(parse_sql(to_sql(g)) == parse_graph(canonical_form(g, false)));
}

TEST_CASE("emitted SQL preserves structural counts") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = sample_random_graph(star4()->catalog, {3, 2, 2, 20, 0.7, 0.5}, seed);
    CHECK(structural_counts(parse_sql(to_sql(g))) == structural_counts(g));
  }
}
