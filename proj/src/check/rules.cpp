#include "catql/check.hpp"
#include "catql/compiler.hpp"
#include "catql/error.hpp"
#include "catql/optimizer.hpp"

namespace catql::check {

namespace {

using namespace plan;
using F = FunctionExpr;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }
template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

Rng trial_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), 0x5eedu};
  return Rng(seq);
}

CmpOp any_op(Rng& rng) {
  return static_cast<CmpOp>(uniform(rng, 0, 5));
}

Value small_int(Rng& rng) { return static_cast<std::int64_t>(uniform(rng, 0, 5)); }
Value a_name(Rng& rng) { return "a" + std::to_string(uniform(rng, 1, 4)); }
Value b_name(Rng& rng) {
  static const std::vector<std::string> pool{"a1", "a2", "b1", "b2", "b3"};
  return pick(rng, pool);
}
Value code(Rng& rng) {
  static const std::vector<std::string> pool{"", "1", "2", "1.1", "1.2", "2.1"};
  return Value(DeweyCode::parse(pick(rng, pool)));
}

Condition cond(F fn, CmpOp op, Value v) {
  return Condition{Operand::of(std::move(fn)), op, Operand::literal(std::move(v))};
}

// A's elements, sometimes filtered first.
ExprPtr some_a(Rng& rng) {
  if (chance(rng, 0.7)) return base("A");
  return select(base("A"), cond(F::compose({"fa"}), any_op(rng), small_int(rng)));
}

ExprPtr rule1_plan(Rng& rng, const InstanceCategory& db) {
  switch (uniform(rng, 0, 4)) {
    case 0: return map(map(base("R"), F::compose({"ra"})), F::compose({"fa"}));
    case 1: return map(map(base("R"), F::at("ra")), F::compose({"fa"}));
    case 2: return map(map(some_a(rng), F::compose({"fa"})), F::identity());
    case 3:
      if (db.has_object("T")) {
        return map(map(base("R"), F::at("ra")), F::compose({"pos"}));
      }
      return map(map(base("E"), F::compose({"src"})), F::compose({"fa"}));
    default: return map(map(some_a(rng), F::path({"V"})), F::compose({"fa"}));
  }
}

ExprPtr rule2_plan(Rng& rng, const InstanceCategory&) {
  auto alias = [&](std::string c) {
    return ProjectItem{c, chance(rng, 0.3) ? "out" : ""};
  };
  switch (uniform(rng, 0, 5)) {
    case 0:
      return project(lim(cat({base("R"), base("A")},
                             {CatMorphism{"f1", 0, 1, F::compose({"ra"})}}, {"r", "a"})),
                     std::vector<ProjectItem>{alias("r.ra"), {"r.rb", ""}});
    case 1:
      return project(lim(cat({base("R"), base("A")},
                             {CatMorphism{"f1", 0, 1, F::compose({"ra"})}}, {"r", "a"})),
                     std::vector<ProjectItem>{alias("r.rb")});
    case 2:
      return project(lim(cat({some_a(rng), base("V")},
                             {CatMorphism{"f1", 0, 1, F::compose({"fa"})}}, {"a", "v"})),
                     std::vector<ProjectItem>{alias(chance(rng, 0.8) ? "a" : "v")});
    case 3:
      return project(lim(cat({some_a(rng), base("B")}, {}, {"a", "b"})),
                     std::vector<ProjectItem>{alias(chance(rng, 0.5) ? "a" : "b")});
    case 4:
      return project(
          lim(cat({base("R"), base("A"), base("V")},
                  {CatMorphism{"f1", 0, 1, F::compose({"ra"})},
                   CatMorphism{"f2", 1, 2, F::compose({"fa"})}},
                  {"r", "a", "v"})),
          std::vector<ProjectItem>{{"r.rb", ""}, alias("r.ra")});
    default:
      return project(lim(cat({base("V"), some_a(rng)}, {}, {"v", "a"})),
                     std::vector<ProjectItem>{alias("a")});
  }
}

ExprPtr rule3_plan(Rng& rng, const InstanceCategory&) {
  auto chain = lim(cat({base("R"), base("A"), base("V")},
                       {CatMorphism{"f1", 0, 1, F::compose({"ra"})},
                        CatMorphism{"f2", 1, 2, F::compose({"fa"})}},
                       {"r", "a", "v"}));
  auto pair = lim(cat({base("A"), base("V")},
                      {CatMorphism{"f1", 0, 1, F::compose({"fa"})}}, {"a", "v"}));
  auto free = lim(cat({base("A"), base("B")}, {}, {"a", "b"}));
  switch (uniform(rng, 0, 7)) {
    case 0: return select(chain, cond(F::at("r.rb"), any_op(rng), b_name(rng)));
    case 1: return select(chain, cond(F::at("a"), any_op(rng), a_name(rng)));
    case 2: return select(chain, cond(F::at("a", F::compose({"fa"})), any_op(rng), small_int(rng)));
    case 3: return select(chain, cond(F::at("v"), any_op(rng), small_int(rng)));
    case 4: return select(pair, cond(F::at("v"), any_op(rng), small_int(rng)));
    case 5: return select(pair, cond(F::at("a"), any_op(rng), a_name(rng)));
    case 6: return select(free, cond(F::at("b"), any_op(rng), b_name(rng)));
    default:
      return select(chain, Condition{Operand::of(F::at("r.ra")), CmpOp::Eq,
                                     Operand::of(F::at("a"))});
  }
}

ExprPtr rule4_plan(Rng& rng, const InstanceCategory& db) {
  if (!db.has_object("E")) return nullptr;
  ExprPtr r = chance(rng, 0.5) ? reach(some_a(rng), some_a(rng), base("E"))
                               : nhop(some_a(rng), some_a(rng), base("E"),
                                      static_cast<int>(uniform(rng, 1, 3)));
  std::string side = chance(rng, 0.5) ? "from" : "to";
  if (chance(rng, 0.5)) return select(r, cond(F::at(side), any_op(rng), a_name(rng)));
  return select(r, cond(F::at(side, F::compose({"fa"})), any_op(rng), small_int(rng)));
}

ExprPtr rule5_plan(Rng& rng, const InstanceCategory& db) {
  if (!db.has_object("T")) return nullptr;
  static const std::vector<OpKind> ops{OpKind::GetParent, OpKind::GetAncestor,
                                       OpKind::GetSibling, OpKind::GetPreceding,
                                       OpKind::GetFollowing};
  auto d = [&]() -> ExprPtr {
    if (chance(rng, 0.7)) return base("T");
    return map(some_a(rng), F::compose({"pos"}));
  };
  auto t = tree(pick(rng, ops), d(), d());
  return select(t, cond(F::at(chance(rng, 0.5) ? "from" : "to"), any_op(rng), code(rng)));
}

ExprPtr rule6_plan(Rng& rng, const InstanceCategory& db) {
  std::vector<F> fs{F::identity(), F::compose({"fa"})};
  if (db.has_object("T")) fs.push_back(F::compose({"pos"}));
  F f = pick(rng, fs);
  ExprPtr s1 = some_a(rng);
  ExprPtr s2 = chance(rng, 0.5) ? base("B") : base("V");
  if (chance(rng, 0.5)) {
    return map(binary(OpKind::Product, s1, s2), F::product(f, F::identity()));
  }
  return binary(OpKind::Product, map(s1, f), map(s2, F::identity()));
}

ExprPtr rule7_plan(Rng& rng, const InstanceCategory&) {
  auto rel = lim(cat({base("R"), base("A")},
                     {CatMorphism{"f1", 0, 1, F::compose({"ra"})}}, {"r", "a"}));
  auto pair = lim(cat({some_a(rng), base("V")},
                      {CatMorphism{"f1", 0, 1, F::compose({"fa"})}}, {"a", "v"}));
  using Items = std::vector<ProjectItem>;
  switch (uniform(rng, 0, 4)) {
    case 0: return project(rel, Items{{"r.ra", ""}, {"a", ""}});
    case 1: return project(rel, Items{{"a", "x"}, {"r.rb", ""}});
    case 2: return project(rel, Items{{"r.ra", ""}, {"r.rb", ""}, {"a", ""}});
    case 3: return project(pair, Items{{"a", ""}, {"v", ""}});
    default: return project(pair, Items{{"v", "w"}, {"a", ""}});
  }
}

ExprPtr rule8_plan(Rng& rng, const InstanceCategory& db) {
  auto pair = lim(cat({some_a(rng), base("V")},
                      {CatMorphism{"f1", 0, 1, F::compose({"fa"})}}, {"a", "v"}));
  std::vector<F> g1s{F::identity(), F::compose({"fa"})};
  if (db.has_object("T")) {
    auto tree_pair = lim(cat({some_a(rng), base("T")},
                             {CatMorphism{"f1", 0, 1, F::compose({"pos"})}}, {"a", "t"}));
    if (chance(rng, 0.4)) {
      return map(tree_pair, F::product(pick(rng, g1s), F::identity()));
    }
  }
  return map(pair, F::product(pick(rng, g1s), F::identity()));
}

ExprPtr rule9_plan(Rng& rng, const InstanceCategory& db) {
  if (!db.has_object("E")) return nullptr;
  std::vector<Condition> conds;
  for (std::size_t i = 0, n = uniform(rng, 0, 2); i < n; ++i) {
    conds.push_back(chance(rng, 0.5) ? cond(F::at("v"), any_op(rng), small_int(rng))
                                     : cond(F::at("a"), any_op(rng), a_name(rng)));
  }
  auto wrap = [&](ExprPtr e) {
    for (const auto& c : conds) e = select(e, c);
    return e;
  };
  std::vector<CatMorphism> fa{CatMorphism{"f1", 0, 1, F::compose({"fa"})}};
  if (chance(rng, 0.5)) {
    auto filtered = project(wrap(lim(cat({base("A"), base("V")}, fa, {"a", "v"}))),
                            std::vector<std::string>{"a"});
    return project(reach(filtered, some_a(rng), base("E")),
                   std::vector<std::string>{"from"});
  }
  auto sources = project(reach(base("A"), some_a(rng), base("E")),
                         std::vector<ProjectItem>{{"from", "A"}});
  return project(wrap(lim(cat({sources, base("V")}, fa, {"a", "v"}))),
                 std::vector<std::string>{"a"});
}

using PlanGen = ExprPtr (*)(Rng&, const InstanceCategory&);

PlanGen generator(int rule) {
  static const PlanGen gens[] = {rule1_plan, rule2_plan, rule3_plan,
                                 rule4_plan, rule5_plan, rule6_plan,
                                 rule7_plan, rule8_plan, rule9_plan};
  return gens[rule - 1];
}

std::string show(const ExtSet& s) {
  std::string out = "{";
  for (const auto& r : s.rows) {
    if (out.size() > 1) out += ", ";
    out += r.to_literal();
  }
  return out + "}";
}

}  // namespace

PropertyResult rule_soundness(int rule, std::uint64_t seed, std::size_t trials) {
  return rule_soundness(rewrite_rule(rule), seed, trials);
}

PropertyResult rule_soundness(const RewriteRule& r, std::uint64_t seed, std::size_t trials) {
  PropertyResult out;
  const int rule = r.id;
  PlanGen gen = generator(rule);
  std::size_t fired = 0;
  std::size_t attempt = 0;
  const std::size_t budget = trials * 60;
  out = run_property("rule " + std::to_string(rule) + " (" + r.name + ") soundness", trials,
                     [&](std::size_t) -> std::string {
                       while (attempt < budget) {
                         Rng rng = trial_rng(seed + static_cast<std::uint64_t>(rule), attempt++);
                         InstanceCategory db = random_instance(rng);
                         ExprPtr p = gen(rng, db);
                         if (!p) continue;
                         ExtSet before;
                         try {
                           before = evaluate(db, p);
                         } catch (const Error&) {
                           continue;  // not a valid plan on this instance
                         }
                         auto rewritten = r.apply(db, *p);
                         if (!rewritten) continue;
                         ++fired;
                         ExtSet after = evaluate(db, *rewritten);
                         if (after.component_names() != before.component_names()) {
                           return to_text(*p) + ": columns differ after rewrite";
                         }
                         if (after.rows != before.rows) {
                           return to_text(*p) + " => " + to_text(**rewritten) + ": " +
                                  show(before) + " vs " + show(after);
                         }
                         return {};
                       }
                       return "rule fired only " + std::to_string(fired) + " times in " +
                              std::to_string(budget) + " attempts";
                     });
  return out;
}

PropertyResult optimizer_equivalence(std::uint64_t seed, std::size_t instances,
                                     std::size_t queries_per_instance) {
  return run_property(
      "optimizer_equivalence", instances * queries_per_instance,
      [&](std::size_t i) -> std::string {
        Rng irng = trial_rng(seed, i / queries_per_instance);
        InstanceCategory db = random_instance(irng);
        Rng qrng = trial_rng(seed ^ 0xabcdefULL, i);
        CalculusQuery q = random_query(qrng, db);
        std::string text = to_text(q);
        ExtSet want = brute_eval(db, q);
        ExprPtr plan = compile(db, q);
        auto opt = optimize(db, plan);
        if (opt.cost_after > opt.cost_before) return text + ": cost went up";
        ExtSet got = evaluate(db, opt.plan);
        if (got.rows != want.rows || got.component_names() != want.component_names()) {
          return text + ": optimized plan disagrees\n" + format_trace(opt.trace) +
                 to_pretty_text(*opt.plan);
        }
        if (to_text(*replay(db, plan, opt.trace)) != to_text(*opt.plan)) {
          return text + ": replaying the trace gives another plan";
        }
        auto again = optimize(db, opt.plan);
        if (!again.trace.empty()) return text + ": a second pass still rewrites";
        return {};
      });
}

}  // namespace catql::check
