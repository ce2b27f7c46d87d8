#include "maglens/record.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace maglens;

TEST_CASE("records parse keyword and fields, skipping comments and blanks") {
  const auto recs = parse_records("# header\n\nlens id=3 radius=0.25  # trailing\n  tf points=0,0,0,1,1,1\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].keyword == "lens");
  CHECK(recs[0].line == 3);
  CHECK(recs[0].integer("id") == 3);
  CHECK(recs[0].number("radius") == 0.25);
  CHECK(recs[1].numbers("points").size() == 6);
}

TEST_CASE("malformed fields report their line") {
  try {
    parse_records("a x=1\nb nonsense\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  const auto r = parse_records("a x=abc")[0];
  CHECK_THROWS_AS(r.number("x"), FormatError);
  CHECK_THROWS_AS(r.number("missing"), FormatError);
  CHECK_THROWS_AS(r.integer("x"), FormatError);
  CHECK(r.number_or("missing", 7.0) == 7.0);
}

TEST_CASE("to_line and parse are inverse") {
  Record r;
  r.keyword = "thing";
  r.add("a", 1.5).add("b", std::string("text")).add("c", std::vector<double>{1, -2, 3.25});
  const auto back = parse_records(r.to_line());
  REQUIRE(back.size() == 1);
  CHECK(back[0].fields == r.fields);
}

TEST_CASE("numbers format to the shortest exact round-trip form") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(parse_number(format_number(v)) == v);
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(parse_number("+3") == 3.0);
  CHECK_THROWS_AS(parse_number(""), FormatError);
  CHECK_THROWS_AS(parse_number("1.0x"), FormatError);
}
