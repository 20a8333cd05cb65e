#include "catql/compiler.hpp"
#include "catql/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace catql;
using namespace catql::testing;

namespace {

bool contains_op(const AlgebraExpr& e, OpKind op) {
  if (e.op == op) return true;
  for (const auto& c : e.children) {
    if (contains_op(*c, op)) return true;
  }
  return false;
}

// Compiles, evaluates and compares with the brute-force evaluator.
ExtSet agree(const InstanceCategory& db, const char* text) {
  auto q = parse_calculus(text, &db);
  auto expected = brute_eval(db, q);
  auto plan = compile(db, q);
  ExtSet got = evaluate(db, plan);
  INFO(text);
  INFO(to_pretty_text(*plan));
  CHECK(got.rows == expected.rows);
  CHECK(got.component_names() == expected.component_names());
  return got;
}

}  // namespace

TEST_CASE("compile: male students attending all female courses") {
  auto db = university();
  auto plan = compile(db, kStudentsAttendingFemaleCourses);
  CHECK(plan->op == OpKind::Cat);
  CHECK(plan->labels == std::vector<std::string>{"x1", "x2"});
  CHECK(contains_op(*plan, OpKind::Divide));
  CHECK(contains_op(*plan, OpKind::Lim));
  auto r = agree(db, kStudentsAttendingFemaleCourses);
  CHECK(r.rows == std::set<Value>{Value(Tuple{"s1", "A1"}), Value(Tuple{"s5", "A4"})});
}

TEST_CASE("compile: ancestors of John") {
  auto db = family();
  const char* text =
      "{ x | x in Name, exists y1 in Person: exists y2 in Person: "
      "(y1.DeweyCode isAncestor y2.DeweyCode and y1.Name = x and "
      "y2.Name = \"John\") }";
  auto plan = compile(db, text);
  CHECK(contains_op(*plan, OpKind::GetAncestor));
  CHECK(contains_op(*plan, OpKind::Lim));
  CHECK(contains_op(*plan, OpKind::Select));
  CHECK(plan->op == OpKind::Project);
  CHECK(agree(db, text).rows == std::set<Value>{"Adam", "Beth"});
}

TEST_CASE("compile: people reachable from John") {
  auto db = social();
  const char* text =
      "{ x | x in TName, exists y1 in Source: exists y2 in Target: "
      "(reach[Edge](y1, y2) and y2.TName = x and y1.SName = \"John\") }";
  CHECK(contains_op(*compile(db, text), OpKind::GetReach));
  CHECK(agree(db, text).rows == std::set<Value>{"John", "Mary", "Sue"});
  const char* one_hop =
      "{ x | x in Target, exists y in Source: "
      "(nhop[Edge, 1](y, x) and y.SName = \"John\") }";
  CHECK(contains_op(*compile(db, one_hop), OpKind::GetNHop));
  CHECK(agree(db, one_hop).rows == std::set<Value>{2});
}

TEST_CASE("compile: single range") {
  auto db = university();
  auto plan = compile(db, "{ x | x in Course }");
  CHECK(evaluate(db, plan).rows == db.object("Course").elements);
  agree(db, "{ x | x in Student, not x in Course }");
  agree(db, "{ x | x in Student or x in Course }");
  agree(db, "{ x | x in Student, (x = \"s2\" or x = \"s3\") }");
}

TEST_CASE("compile: quantifier shapes") {
  auto db = university();
  agree(db, "{ x | x in Student, exists s in SC: s.Student = x }");
  agree(db, "{ x | x in Student, not exists s in SC: (s.Student = x and s.Course = \"c3\") }");
  agree(db, "{ c | c in Course, forall s in Student: exists r in SC: "
            "(r.Student = s and r.Course = c) }");
  agree(db, "{ c | c in Course, forall s in Student: (s.Gender = \"Male\" -> "
            "exists r in SC: (r.Student = s and r.Course = c)) }");
  agree(db, "{ s | s in Student, exists c in Course: (c = \"c3\" or "
            "exists r in SC: (r.Student = s and r.Course = c)) }");
  agree(db, "{ s, a | s in Student, a in Address, s.@address = a, "
            "forall t in Student: (t.Gender = \"Female\" or t.@address != a) }");
  agree(db, "{ r | r in SC, r.Student = \"s1\" }");
  agree(db, "{ s, r | s in Student, r in SC, r.Student = s, s.Gender = \"Female\" }");
  // A closed subformula.
  agree(db, "{ x | x in Course, forall s in Student: s.Gender = \"Male\" }");
  agree(db, "{ x | x in Course, exists s in Student: s.Gender = \"Male\" }");
}

TEST_CASE("compile: vacuous universal") {
  auto db = university();
  db.add_object(entity("Nobody", {}));
  agree(db, "{ x | x in Course, forall y in Nobody: y = x }");
  agree(db, "{ x | x in Course, x != \"c1\", forall y in Nobody: y = x }");
}

TEST_CASE("compile: tree predicates") {
  auto db = family();
  const char* preds[] = {"isParent", "isChild", "isAncestor", "isDescendant",
                         "isSibling", "isPreceding", "isFollowing",
                         "isPrecedingSibling", "isFollowingSibling"};
  for (const char* p : preds) {
    std::string pos = std::string("{ a, b | a in Person, b in Person, ") + p +
                      "(a.DeweyCode, b.DeweyCode) }";
    std::string neg = std::string("{ a, b | a in Person, b in Person, not ") + p +
                      "(a.DeweyCode, b.DeweyCode) }";
    agree(db, pos.c_str());
    agree(db, neg.c_str());
  }
}

TEST_CASE("compilation is deterministic") {
  auto db = university();
  auto a = to_pretty_text(*compile(db, kStudentsAttendingFemaleCourses));
  auto b = to_pretty_text(*compile(db, kStudentsAttendingFemaleCourses));
  CHECK(a == b);
  CHECK(to_text(*parse_algebra(a)) ==
        to_text(*compile(db, kStudentsAttendingFemaleCourses)));
}

TEST_CASE("compile rejects unsafe queries") {
  auto db = university();
  try {
    compile(db, "{ x | x in Student or x.Gender = 1 }");
    FAIL("expected UnsafeQuery");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsafeQuery);
  }
}
