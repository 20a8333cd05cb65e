#include "catql/check.hpp"
#include "doctest.h"

using namespace catql;
using namespace catql::check;

namespace {

void require(const PropertyResult& r) {
  INFO(r.name << ": " << r.first_failure);
  CHECK(r.trials > 0);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("random instances are well formed") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto db = random_instance(rng);
    CHECK(db.has_object("A"));
    CHECK(db.has_object("R"));
    CHECK(db.has_object("T") != db.has_object("E"));
    auto q = random_query(rng, db);
    CHECK(check_safety(q).empty());
  }
}

TEST_CASE("oracles on small cases") {
  std::set<Value> edges{Value(Tuple{1, 2}), Value(Tuple{2, 3})};
  auto c = warshall_closure(edges);
  CHECK(c.size() == 3);
  CHECK(c.contains({1, 3}));
  CHECK(bounded_paths(edges, 1).size() == 2);
  CHECK(bounded_paths(edges, 2) == c);

  std::set<DeweyCode> tree{DeweyCode(), DeweyCode::parse("1"), DeweyCode::parse("2"),
                           DeweyCode::parse("1.1")};
  CHECK(axis_oracle(tree, Axis::Parent).size() == 3);
  CHECK(axis_oracle(tree, Axis::Ancestor).size() == 4);
  CHECK(axis_oracle(tree, Axis::Sibling).size() == 2);
  auto pre = axis_oracle(tree, Axis::Preceding);
  CHECK(pre.contains({DeweyCode::parse("1.1"), DeweyCode::parse("2")}));
  CHECK_FALSE(pre.contains({DeweyCode::parse("1"), DeweyCode::parse("1.1")}));
}

TEST_CASE("operator oracles") {
  require(division_identity(11, 200));
  require(reach_oracle(12, 200));
  require(tree_axis_oracle(13, 200));
}

TEST_CASE("simulation and lemma properties") {
  require(algebra_simulations(21, 60));
  require(division_lemma(22, 150));
  require(reach_lemma(23, 100));
  require(limit_lemma(24, 100));
}

TEST_CASE("compiled plans agree with brute force") {
  require(compiler_equivalence(20240601, 20, 10));
}

TEST_CASE("every rewrite rule preserves results") {
  for (int r = 1; r <= 9; ++r) {
    CAPTURE(r);
    auto res = rule_soundness(r, 300 + r, 100);
    require(res);
    CHECK(res.trials >= 100);
  }
}

TEST_CASE("optimized plans agree with brute force") {
  require(optimizer_equivalence(20240602, 20, 10));
}

TEST_CASE("a broken rule is caught and named") {
  // Pushes the selection into the limit and then forgets it.
  RewriteRule mutant{3, "mutant drops the selection",
                     [](const InstanceCategory& db, const AlgebraExpr& e) -> std::optional<ExprPtr> {
                       auto r = rule3_push_select_lim(db, e);
                       if (!r) return r;
                       return e.children[0];
                     }};
  auto res = rule_soundness(mutant, 7, 100);
  CHECK(res.failures > 0);
  CHECK(res.name.find("rule 3 (mutant drops the selection)") != std::string::npos);
}

TEST_CASE("the full suite at a few trials") {
  auto all = run_all(5, 3);
  CHECK(all.size() == 18);
  for (const auto& r : all) {
    INFO(r.name << ": " << r.first_failure);
    CHECK(r.passed());
  }
  for (const auto& r : run_all(0, 3)) {
    CHECK(r.trials == 0);
    CHECK(r.passed());
  }
}
