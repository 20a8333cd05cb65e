#include "catql/calculus.hpp"
#include "catql/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace catql;
using namespace catql::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Unsupported;
}

Value pair(Value a, Value b) { return Value(Tuple{std::move(a), std::move(b)}); }
std::set<Value> rows(std::vector<Value> v) { return {v.begin(), v.end()}; }

int count(const Formula& f, Formula::Kind k) {
  int n = f.kind == k ? 1 : 0;
  for (const auto& c : f.kids) n += count(*c, k);
  return n;
}

std::vector<std::string> unsafe(const char* text) {
  std::vector<std::string> out;
  for (const auto& u : check_safety(parse_calculus(text))) out.push_back(u.var);
  return out;
}

}  // namespace

TEST_CASE("parse the male-students query") {
  auto db = university();
  auto q = parse_calculus(kStudentsAttendingFemaleCourses, &db);
  CHECK(q.targets() == std::vector<std::string>{"x1", "x2"});
  CHECK(q.target_groups.size() == 1);
  CHECK(count(*q.body, Formula::Kind::ForAll) == 1);
  CHECK(count(*q.body, Formula::Kind::Exists) == 3);
  // The four equalities inside the existential block.
  const Formula* f = q.body.get();
  while (f->kind != Formula::Kind::Exists) {
    f = f->kind == Formula::Kind::And     ? f->kids.back().get()
        : f->kind == Formula::Kind::Implies ? f->kids[1].get()
                                            : f->kids[0].get();
  }
  while (f->kind == Formula::Kind::Exists) f = f->kids[0].get();
  CHECK(count(*f, Formula::Kind::Compare) == 4);
  CHECK(check_safety(q).empty());
  CHECK(to_text(*parse_calculus(to_text(q)).body) == to_text(*q.body));
}

TEST_CASE("parse errors") {
  auto db = university();
  CHECK(parse_calculus("{ x | x in Name }").targets().size() == 1);
  CHECK(code_of([] { parse_calculus("{ x | y in S }"); }) ==
        ErrorCode::UnboundVariable);
  CHECK(code_of([] { parse_calculus("{ x | x in S, y.A = 1 }"); }) ==
        ErrorCode::UnboundVariable);
  CHECK(code_of([&] { parse_calculus("{ x | x in Nowhere }", &db); }) ==
        ErrorCode::UnknownObject);
  CHECK(code_of([&] { parse_calculus("{ x | x in Student, x.Bogus = 1 }", &db); }) ==
        ErrorCode::UnknownObject);
  CHECK(code_of([] { parse_calculus("{ x | x in }"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { parse_calculus("{ x | x in S"); }) == ErrorCode::SyntaxError);
  CHECK(code_of([] { parse_calculus("{ x | x in S, isParent(x, \"1\") }"); }) ==
        ErrorCode::SyntaxError);
  try {
    parse_calculus("{ x |\n  x in S and and }");
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("safe formulae") {
  CHECK(unsafe("{ x1 | x1 in O1 }").empty());
  CHECK(unsafe("{ x1 | x1 in O1, not x1 in O2 }").empty());
  CHECK(unsafe("{ x1, x2 | x1 in S1, x2 in S2, x1.@g1.@f2 = x2 }").empty());
  CHECK(unsafe("{ x1, x2 | x1 in S1, x2 in S2, exists r in R: "
               "(r.S1 = x1 and r.S2 = x2) }")
            .empty());
  CHECK(unsafe("{ x1, x2 | x1 in S1, x2 in S2, reach[E](x1, x2), "
               "x1.Name = \"John\" }")
            .empty());
  CHECK(unsafe("{ x1, x2 | x1 in D1, x2 in D2, x1 isAncestor x2 }").empty());
}

TEST_CASE("unsafe formulae name the unsafe variable") {
  CHECK(unsafe("{ x2, x3 | x2 in S2, x3 in S3, "
               "exists x1: (x1 > x3 and x2 = 6) }") ==
        std::vector<std::string>{"x1"});
  CHECK(unsafe("{ z | z in S1, forall x1: exists x2 in S2: x1 > x2 }") ==
        std::vector<std::string>{"x1"});
  CHECK(unsafe("{ x1 | x1 in S1 or x1.A = \"a1\" }") ==
        std::vector<std::string>{"x1"});
  CHECK(unsafe("{ x | not x in S }") == std::vector<std::string>{"x"});
}

TEST_CASE("brute_eval: male students attending all female courses") {
  auto db = university();
  auto q = parse_calculus(kStudentsAttendingFemaleCourses, &db);
  auto r = brute_eval(db, q);
  CHECK(r.rows == rows({pair("s1", "A1"), pair("s5", "A4")}));
  CHECK(r.component_names() == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("brute_eval: ancestors of John") {
  auto db = family();
  auto q = parse_calculus(
      "{ x | x in Name, exists y1 in Person: exists y2 in Person: "
      "(y1.DeweyCode isAncestor y2.DeweyCode and y1.Name = x and "
      "y2.Name = \"John\") }",
      &db);
  CHECK(brute_eval(db, q).rows == rows({"Adam", "Beth"}));
}

TEST_CASE("brute_eval: people reachable from John") {
  auto db = social();
  auto q = parse_calculus(
      "{ x | x in TName, exists y1 in Source: exists y2 in Target: "
      "(reach[Edge](y1, y2) and y2.TName = x and y1.SName = \"John\") }",
      &db);
  CHECK(brute_eval(db, q).rows == rows({"John", "Mary", "Sue"}));
  auto two = parse_calculus(
      "{ x | x in Target, exists y in Source: "
      "(nhop[Edge, 1](y, x) and y.SName = \"John\") }",
      &db);
  CHECK(brute_eval(db, two).rows == rows({2}));
}

TEST_CASE("brute_eval edge cases") {
  auto db = university();
  CHECK(brute_eval(db, parse_calculus("{ x | x in Course, x = \"c1\", x = \"c2\" }"))
            .empty());
  CHECK(brute_eval(db, parse_calculus("{ x | x in Course }")).rows ==
        db.object("Course").elements);
  CHECK(brute_eval(db, parse_calculus("{ x | x in Student, not x in Course }"))
            .rows == db.object("Student").elements);
  CHECK(code_of([&] {
          brute_eval(db, parse_calculus("{ x | x in Student or x.Gender = 1 }"));
        }) == ErrorCode::UnsafeQuery);
  // Vacuous universal quantification.
  InstanceCategory empty_range = db;
  empty_range.add_object(entity("Nobody", {}));
  CHECK(brute_eval(empty_range,
                   parse_calculus("{ x | x in Course, forall y in Nobody: y = x }"))
            .rows == db.object("Course").elements);
  CHECK(code_of([&] {
          brute_eval(db, parse_calculus("{ x | x in Student, x.Gender = 3 }"));
        }) == ErrorCode::TypeMismatch);
}

TEST_CASE("brute_eval is invariant under logical rewrites") {
  auto db = university();
  const char* variants[] = {
      "{ x | x in Student, x.Gender = \"Male\", exists s in SC: s.Student = x }",
      "{ x | exists s in SC: s.Student = x, x.Gender = \"Male\", x in Student }",
      "{ x | x in Student, not not x.Gender = \"Male\", exists t in SC: t.Student = x }",
      "{ x | x in Student, not (x.Gender != \"Male\" or not exists s in SC: s.Student = x) }",
  };
  auto expected = brute_eval(db, parse_calculus(variants[0]));
  CHECK(expected.rows == rows({"s1", "s2", "s5"}));
  for (const char* v : variants) {
    CHECK(brute_eval(db, parse_calculus(v)).rows == expected.rows);
  }
}

TEST_CASE("closure oracle distances") {
  std::set<Value> e{pair("a", "b"), pair("b", "c"), pair("c", "a")};
  ClosureOracle c(e);
  CHECK(c.distance("a", "b") == 1);
  CHECK(c.distance("a", "c") == 2);
  CHECK(c.distance("a", "a") == 3);
  CHECK_FALSE(c.distance("a", "z").has_value());
}
