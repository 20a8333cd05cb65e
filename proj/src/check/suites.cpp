#include <algorithm>
#include <chrono>
#include <sstream>

#include "catql/check.hpp"
#include "catql/compiler.hpp"

namespace catql::check {

PropertyResult run_property(const std::string& name, std::size_t trials,
                            const std::function<std::string(std::size_t)>& trial) {
  PropertyResult out;
  out.name = name;
  auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < trials; ++i) {
    std::string failure;
    try {
      failure = trial(i);
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    ++out.trials;
    if (!failure.empty()) {
      if (out.failures++ == 0) {
        out.first_failure = "trial " + std::to_string(i) + ": " + failure;
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  return out;
}

namespace {

std::string show(const std::set<Value>& rows) {
  std::string out = "{";
  for (const auto& r : rows) {
    if (out.size() > 1) out += ", ";
    out += r.to_literal();
  }
  return out + "}";
}

std::string differ(const std::set<Value>& got, const std::set<Value>& want) {
  if (got == want) return {};
  return "got " + show(got) + ", expected " + show(want);
}

std::set<Value> pairs(const std::set<std::pair<DeweyCode, DeweyCode>>& p) {
  std::set<Value> out;
  for (const auto& [a, b] : p) out.insert(Value(Tuple{Value(a), Value(b)}));
  return out;
}

Rng trial_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i)};
  return Rng(seq);
}

ExtSet single(std::string name, std::set<Value> rows) {
  ExtSet out;
  out.schema.columns = {Column{std::move(name), std::nullopt}};
  out.rows = std::move(rows);
  return out;
}

ExtSet edge_set(const std::set<Value>& edges) {
  ExtSet out;
  out.schema.columns = {Column{"src", std::nullopt}, Column{"dst", std::nullopt}};
  out.rows = edges;
  return out;
}

std::set<Value> brute(const InstanceCategory& db, const std::string& text) {
  return brute_eval(db, parse_calculus(text, &db)).rows;
}

}  // namespace

PropertyResult compiler_equivalence(std::uint64_t seed, std::size_t instances,
                                    std::size_t queries_per_instance) {
  return run_property(
      "compiler_equivalence", instances * queries_per_instance,
      [&](std::size_t i) -> std::string {
        std::size_t inst = i / queries_per_instance;
        Rng irng = trial_rng(seed, inst);
        InstanceCategory db = random_instance(irng);
        Rng qrng = trial_rng(seed ^ 0x9e3779b97f4a7c15ULL, i);
        CalculusQuery q = random_query(qrng, db);
        std::string text = to_text(q);
        ExtSet want = brute_eval(db, q);
        ExprPtr plan;
        try {
          plan = compile(db, q);
        } catch (const std::exception& e) {
          return text + ": compile failed: " + e.what();
        }
        ExtSet got;
        try {
          got = evaluate(db, plan);
        } catch (const std::exception& e) {
          return text + ": evaluation failed: " + e.what() + "\n" +
                 to_pretty_text(*plan);
        }
        if (got.component_names() != want.component_names()) {
          std::ostringstream os;
          os << text << ": columns differ";
          return os.str();
        }
        std::string d = differ(got.rows, want.rows);
        if (d.empty()) return {};
        return text + ": " + d + "\n" + to_pretty_text(*plan);
      });
}

PropertyResult algebra_simulations(std::uint64_t seed, std::size_t trials) {
  return run_property("algebra_simulations", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    InstanceCategory db = random_instance(rng);
    bool tree = db.has_object("T");
    using namespace plan;
    auto A = base("A");
    auto B = base("B");
    std::int64_t c = std::uniform_int_distribution<std::int64_t>(0, 5)(rng);
    std::string cs = std::to_string(c);
    std::vector<std::pair<ExprPtr, std::string>> cases = {
        {select(A, Condition{Operand::of(FunctionExpr::compose({"fa"})), CmpOp::Le,
                             Operand::literal(c)}),
         "{ x | x in A, x.@fa <= " + cs + " }"},
        {binary(OpKind::Union, A, B), "{ x | x in A or x in B }"},
        {binary(OpKind::Intersect, A, B), "{ x | x in A, x in B }"},
        {binary(OpKind::Difference, A, B), "{ x | x in A, not x in B }"},
        {binary(OpKind::Product, A, B), "{ x, y | x in A, y in B }"},
        {map(A, FunctionExpr::compose({"fa"})),
         "{ v | v in V, exists x in A: x.@fa = v }"},
        {project(base("R"), std::vector<std::string>{"ra"}),
         "{ x | x in A, exists r in R: r.@ra = x }"},
        {divide(base("R"), {"rb"}, B, {"B"}),
         "{ x | x in A, exists r in R: r.@ra = x, forall y in B: exists r in R: "
         "(r.@ra = x and r.@rb = y) }"},
        {lim(cat({base("R"), A, base("V")},
                 {CatMorphism{"f1", 0, 1, FunctionExpr::compose({"ra"})},
                  CatMorphism{"f2", 1, 2, FunctionExpr::compose({"fa"})}})),
         "{ r, a, v | r in R, a in A, v in V, r.@ra = a, a.@fa = v }"},
    };
    if (tree) {
      auto T = base("T");
      cases.push_back({plan::tree(OpKind::GetParent, T, T),
                       "{ a, b | a in T, b in T, isParent(a, b) }"});
      cases.push_back({plan::tree(OpKind::GetAncestor, T, T),
                       "{ a, b | a in T, b in T, isAncestor(a, b) }"});
      cases.push_back({plan::tree(OpKind::GetSibling, T, T),
                       "{ a, b | a in T, b in T, isSibling(a, b) }"});
      cases.push_back({plan::tree(OpKind::GetPreceding, T, T),
                       "{ a, b | a in T, b in T, isPreceding(a, b) }"});
      cases.push_back({plan::tree(OpKind::GetFollowing, T, T),
                       "{ a, b | a in T, b in T, isFollowing(a, b) }"});
    } else {
      cases.push_back({reach(A, A, base("E")),
                       "{ a, b | a in A, b in A, reach[E](a, b) }"});
      cases.push_back({nhop(A, A, base("E"), 2),
                       "{ a, b | a in A, b in A, nhop[E, 2](a, b) }"});
    }
    for (const auto& [expr, text] : cases) {
      std::string d = differ(evaluate(db, expr).rows, brute(db, text));
      if (!d.empty()) return to_text(*expr) + " vs " + text + ": " + d;
    }
    return {};
  });
}

PropertyResult division_lemma(std::uint64_t seed, std::size_t trials) {
  return run_property("division_lemma", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    ExtSet r = random_relation(rng, {"a", "b", "c"}, 30, 3);
    ExtSet s1 = random_relation(rng, {"y"}, 3, 3);
    ExtSet s2 = random_relation(rng, {"z"}, 3, 3);
    ExtSet got = eval_divide(r, {"b", "c"}, eval_binary(OpKind::Product, s1, s2),
                             {"y", "z"});
    // Nested universal quantifiers evaluated directly, over the candidates
    // that occur in R.
    std::set<Value> want;
    for (const auto& row : r.rows) {
      const Value& a = row.as_tuple()[0];
      bool all = true;
      for (const auto& y : s1.rows) {
        for (const auto& z : s2.rows) {
          if (!r.rows.contains(Value(Tuple{a, y, z}))) all = false;
        }
      }
      if (all) want.insert(a);
    }
    return differ(got.rows, want);
  });
}

PropertyResult reach_lemma(std::uint64_t seed, std::size_t trials) {
  return run_property("reach_lemma", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    InstanceCategory db;
    do {
      db = random_instance(rng);
    } while (!db.has_object("E"));
    // Sources filtered through R, targets through V; the edge object is
    // the relationship E.
    using namespace plan;
    auto S = project(base("R"), std::vector<std::string>{"ra"});
    auto T = select(base("A"), Condition{Operand::of(FunctionExpr::compose({"fa"})),
                                         CmpOp::Ge, Operand::literal(2)});
    ExtSet got = evaluate(db, reach(S, T, base("E")));
    auto closure = warshall_closure(db.object("E").elements);
    ExtSet s = evaluate(db, S), t = evaluate(db, T);
    std::set<Value> want;
    for (const auto& [x, y] : closure) {
      if (s.rows.contains(x) && t.rows.contains(y)) want.insert(Value(Tuple{x, y}));
    }
    std::string d = differ(got.rows, want);
    if (!d.empty()) return "oracle: " + d;
    return differ(got.rows,
                  brute(db, "{ x, y | x in A, y in A, exists r in R: r.@ra = x, "
                            "y.@fa >= 2, reach[E](x, y) }"));
  });
}

PropertyResult limit_lemma(std::uint64_t seed, std::size_t trials) {
  return run_property("limit_lemma", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    InstanceCategory db = random_instance(rng);
    using namespace plan;
    auto expr = lim(cat({base("R"), base("A"), base("V")},
                        {CatMorphism{"f1", 0, 1, FunctionExpr::compose({"ra"})},
                         CatMorphism{"f2", 1, 2, FunctionExpr::compose({"fa"})}}));
    ExtSet got = evaluate(db, expr);
    const auto& ra = db.morphism("ra");
    const auto& fa = db.morphism("fa");
    for (const auto& row : got.rows) {
      const auto& t = row.as_tuple();
      if (t.size() != 4) return "row " + row.to_literal() + " has wrong width";
      Value rel(Tuple{t[0], t[1]});
      if (!(ra.apply(rel) == t[2])) return "row " + row.to_literal() + " breaks ra";
      if (!(fa.apply(t[2]) == t[3])) return "row " + row.to_literal() + " breaks fa";
    }
    // Every compatible family appears.
    std::set<Value> want;
    for (const auto& rel : db.object("R").elements) {
      const Value& a = ra.apply(rel);
      want.insert(Value(Tuple{rel.as_tuple()[0], rel.as_tuple()[1], a, fa.apply(a)}));
    }
    return differ(got.rows, want);
  });
}

PropertyResult division_identity(std::uint64_t seed, std::size_t trials) {
  return run_property("division_identity", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    bool two = std::bernoulli_distribution(0.5)(rng);
    ExtSet r = two ? random_relation(rng, {"a", "b", "c"}, 25, 3)
                   : random_relation(rng, {"a", "b"}, 12, 4);
    ExtSet s = two ? random_relation(rng, {"y", "z"}, 4, 3)
                   : random_relation(rng, {"y"}, 4, 4);
    std::vector<std::string> a = two ? std::vector<std::string>{"b", "c"}
                                     : std::vector<std::string>{"b"};
    std::vector<std::string> b = two ? std::vector<std::string>{"y", "z"}
                                     : std::vector<std::string>{"y"};
    return differ(eval_divide(r, a, s, b).rows,
                  division_by_composite(r, a, s, b).rows);
  });
}

PropertyResult reach_oracle(std::uint64_t seed, std::size_t trials) {
  return run_property("reach_oracle", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    double density = std::uniform_real_distribution<double>(0.0, 3.0)(rng) / n;
    auto edges = random_digraph(rng, n, density);
    std::set<Value> nodes;
    for (std::size_t k = 0; k < n; ++k) nodes.insert(static_cast<std::int64_t>(k));
    // Random source and target subsets.
    std::set<Value> src, dst;
    for (const auto& v : nodes) {
      if (std::bernoulli_distribution(0.6)(rng)) src.insert(v);
      if (std::bernoulli_distribution(0.6)(rng)) dst.insert(v);
    }
    ExtSet s = single("s", src), t = single("t", dst), e = edge_set(edges);
    std::set<Value> closure;
    for (const auto& [a, b] : warshall_closure(edges)) {
      if (src.contains(a) && dst.contains(b)) closure.insert(Value(Tuple{a, b}));
    }
    ExtSet reach = eval_get_reach(s, t, e);
    std::string d = differ(reach.rows, closure);
    if (!d.empty()) return "reach: " + d;
    int hops = std::uniform_int_distribution<int>(1, 5)(rng);
    std::set<Value> bounded;
    for (const auto& [a, b] : bounded_paths(edges, hops)) {
      if (src.contains(a) && dst.contains(b)) bounded.insert(Value(Tuple{a, b}));
    }
    ExtSet nh = eval_get_nhop(s, t, e, hops);
    d = differ(nh.rows, bounded);
    if (!d.empty()) return "nhop " + std::to_string(hops) + ": " + d;
    ExtSet next = eval_get_nhop(s, t, e, hops + 1);
    if (!std::includes(next.rows.begin(), next.rows.end(), nh.rows.begin(), nh.rows.end())) {
      return "nhop " + std::to_string(hops) + " is not inside nhop " +
             std::to_string(hops + 1);
    }
    if (!std::includes(reach.rows.begin(), reach.rows.end(), next.rows.begin(),
                       next.rows.end())) {
      return "nhop " + std::to_string(hops + 1) + " is not inside reach";
    }
    return {};
  });
}

PropertyResult tree_axis_oracle(std::uint64_t seed, std::size_t trials) {
  return run_property("tree_axis_oracle", trials, [&](std::size_t i) -> std::string {
    Rng rng = trial_rng(seed, i);
    auto tree = random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 40)(rng));
    std::set<Value> codes(tree.begin(), tree.end());
    ExtSet d = single("d", codes);
    const std::pair<OpKind, Axis> axes[] = {
        {OpKind::GetParent, Axis::Parent},
        {OpKind::GetAncestor, Axis::Ancestor},
        {OpKind::GetSibling, Axis::Sibling},
        {OpKind::GetPreceding, Axis::Preceding},
        {OpKind::GetFollowing, Axis::Following},
    };
    for (const auto& [op, axis] : axes) {
      std::string diff = differ(eval_tree(op, d, d).rows, pairs(axis_oracle(tree, axis)));
      if (!diff.empty()) return std::string(to_string(op)) + ": " + diff;
    }
    return {};
  });
}

}  // namespace catql::check
