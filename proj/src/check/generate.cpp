#include <algorithm>

#include "catql/check.hpp"

namespace catql::check {

namespace {

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

// Mostly non-empty; sometimes empty so universal quantifiers go vacuous.
std::size_t object_size(Rng& rng, std::size_t max) {
  if (chance(rng, 0.08)) return 0;
  return uniform(rng, 1, max);
}

SetObject make_object(std::string name, ObjectKind kind, std::set<Value> el) {
  SetObject o;
  o.name = std::move(name);
  o.kind = kind;
  o.elements = std::move(el);
  return o;
}

void add_relationship(InstanceCategory& db, const std::string& name,
                      const std::vector<std::string>& components,
                      const std::vector<std::string>& targets,
                      std::set<Value> rows) {
  SetObject o = make_object(name, ObjectKind::Relationship, std::move(rows));
  o.arity = components.size();
  o.component_names = components;
  db.add_object(o);
  for (std::size_t i = 0; i < components.size(); ++i) {
    Morphism m;
    m.name = components[i];
    m.source = name;
    m.target = targets[i];
    m.provenance = Provenance::projection(i);
    for (const auto& t : o.elements) m.mapping.emplace(t, t.as_tuple()[i]);
    db.add_morphism(std::move(m));
  }
}

Morphism random_function(Rng& rng, std::string name, const SetObject& from,
                         const SetObject& to) {
  Morphism m;
  m.name = std::move(name);
  m.source = from.name;
  m.target = to.name;
  std::vector<Value> images(to.elements.begin(), to.elements.end());
  for (const auto& x : from.elements) m.mapping.emplace(x, pick(rng, images));
  return m;
}

std::set<Value> random_pairs(Rng& rng, const std::set<Value>& left,
                             const std::set<Value>& right, std::size_t max) {
  std::vector<Value> all;
  for (const auto& a : left) {
    for (const auto& b : right) all.push_back(Value(Tuple{a, b}));
  }
  std::shuffle(all.begin(), all.end(), rng);
  std::size_t n = all.empty() ? 0 : uniform(rng, 0, std::min(max, all.size()));
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace

std::set<DeweyCode> random_tree(Rng& rng, std::size_t nodes) {
  std::vector<DeweyCode> codes{DeweyCode()};
  std::map<DeweyCode, std::uint32_t> children;
  while (codes.size() < nodes) {
    DeweyCode parent = pick(rng, codes);
    codes.push_back(parent.child(++children[parent]));
  }
  return {codes.begin(), codes.end()};
}

std::set<Value> random_digraph(Rng& rng, std::size_t nodes, double density) {
  std::set<Value> out;
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = 0; b < nodes; ++b) {
      if (chance(rng, density)) {
        out.insert(Value(Tuple{static_cast<std::int64_t>(a),
                               static_cast<std::int64_t>(b)}));
      }
    }
  }
  return out;
}

ExtSet random_relation(Rng& rng, std::vector<std::string> columns,
                       std::size_t max_rows, int domain) {
  ExtSet out;
  for (auto& c : columns) out.schema.columns.push_back(Column{std::move(c), {}});
  std::size_t n = uniform(rng, 0, max_rows);
  std::uniform_int_distribution<int> value(1, domain);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Value> parts;
    for (std::size_t c = 0; c < out.arity(); ++c) parts.push_back(value(rng));
    out.rows.insert(make_row(std::move(parts)));
  }
  return out;
}

InstanceCategory random_instance(Rng& rng, std::size_t max_elements) {
  InstanceCategory db;
  std::set<Value> a, b, v;
  for (std::size_t i = 1, n = object_size(rng, max_elements); i <= n; ++i) {
    a.insert("a" + std::to_string(i));
  }
  std::vector<Value> pool{"a1", "a2", "a3", "b1", "b2", "b3", "b4"};
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t nb = std::min(object_size(rng, max_elements), pool.size());
  b.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(nb));
  for (std::size_t i = 1, n = uniform(rng, 1, max_elements); i <= n; ++i) {
    v.insert(static_cast<std::int64_t>(i));
  }
  db.add_object(make_object("A", ObjectKind::Entity, a));
  db.add_object(make_object("B", ObjectKind::Entity, b));
  db.add_object(make_object("V", ObjectKind::Attribute, v));
  db.add_morphism(random_function(rng, "fa", db.object("A"), db.object("V")));
  add_relationship(db, "R", {"ra", "rb"}, {"A", "B"},
                   random_pairs(rng, a, b, max_elements));
  if (chance(rng, 0.5)) {
    std::set<Value> t;
    for (const auto& c : random_tree(rng, uniform(rng, 1, max_elements))) {
      t.insert(Value(c));
    }
    db.add_object(make_object("T", ObjectKind::Entity, t));
    db.add_morphism(random_function(rng, "pos", db.object("A"), db.object("T")));
  } else {
    add_relationship(db, "E", {"src", "dst"}, {"A", "A"},
                     random_pairs(rng, a, a, max_elements));
  }
  return db;
}

// ---------------------------------------------------------------------------
// Queries

namespace {

struct Var {
  std::string name;
  std::string object;
  bool has_home = true;
};

class QueryGen {
 public:
  QueryGen(Rng& rng, const InstanceCategory& db, int quantifiers)
      : rng_(rng), db_(db), quantifiers_(quantifiers) {
    tree_ = db.has_object("T");
    objects_ = {"A", "B", "V", "R"};
    objects_.push_back(tree_ ? "T" : "E");
  }

  CalculusQuery query() {
    CalculusQuery q;
    std::vector<Var> scope;
    std::vector<FormulaPtr> parts;
    std::size_t n = chance(rng_, 0.6) ? 1 : 2;
    std::vector<std::string> group;
    for (std::size_t i = 0; i < n; ++i) {
      Var v{"t" + std::to_string(i + 1), pick(rng_, target_objects()), true};
      if (v.object == "A" && chance(rng_, 0.15)) {
        // A union range: the variable has no single home object.
        parts.push_back(formula::disj(
            {formula::range(v.name, "A"), formula::range(v.name, "B")}));
        v.has_home = false;
      } else if (v.object == "A" && chance(rng_, 0.15)) {
        parts.push_back(formula::conj(
            {formula::range(v.name, "A"),
             formula::negate(formula::range(v.name, "B"))}));
      } else {
        parts.push_back(formula::range(v.name, v.object));
      }
      group.push_back(v.name);
      scope.push_back(v);
    }
    if (n == 2 && chance(rng_, 0.5)) {
      q.target_groups.push_back(group);
    } else {
      for (const auto& g : group) q.target_groups.push_back({g});
    }
    std::size_t extra = uniform(rng_, 1, 2);
    for (std::size_t i = 0; i < extra; ++i) parts.push_back(formula(scope, 0));
    std::shuffle(parts.begin() + static_cast<std::ptrdiff_t>(n), parts.end(), rng_);
    q.body = formula::conj(std::move(parts));
    return q;
  }

 private:
  std::vector<std::string> target_objects() const {
    std::vector<std::string> out{"A", "A", "B", "V", "R"};
    if (tree_) out.push_back("T");
    return out;
  }

  FormulaPtr formula(std::vector<Var>& scope, int depth) {
    double r = std::uniform_real_distribution<double>(0, 1)(rng_);
    if (depth >= 3 || r < 0.3) return atom(scope);
    if (r < 0.38) return formula::negate(formula(scope, depth + 1));
    if (r < 0.48) {
      return formula::conj({formula(scope, depth + 1), formula(scope, depth + 1)});
    }
    if (r < 0.58) {
      return formula::disj({formula(scope, depth + 1), formula(scope, depth + 1)});
    }
    if (r < 0.63) {
      return formula::implies(formula(scope, depth + 1), formula(scope, depth + 1));
    }
    if (quantifiers_ == 0) return atom(scope);
    --quantifiers_;
    Var v{"q" + std::to_string(++counter_), pick(rng_, objects_), true};
    scope.push_back(v);
    auto body = formula(scope, depth + 1);
    // Make the body mention the new variable most of the time.
    if (chance(rng_, 0.7)) {
      body = chance(rng_, 0.5) ? formula::conj({atom(scope, true), body})
                               : formula::disj({atom(scope, true), body});
    }
    scope.pop_back();
    return chance(rng_, 0.5) ? formula::exists(v.name, v.object, body)
                             : formula::forall(v.name, v.object, body);
  }

  static CalcOperand var(const Var& v, std::vector<PathStep> path = {}) {
    return CalcOperand::variable(v.name, std::move(path));
  }
  static PathStep m(std::string name) { return {std::move(name), true}; }
  static PathStep o(std::string name) { return {std::move(name), false}; }

  CmpOp op() {
    static const std::vector<CmpOp> ops{CmpOp::Eq, CmpOp::Eq, CmpOp::Ne,
                                        CmpOp::Lt, CmpOp::Gt, CmpOp::Le,
                                        CmpOp::Ge};
    return pick(rng_, ops);
  }
  CmpOp eq_or_ne() { return chance(rng_, 0.75) ? CmpOp::Eq : CmpOp::Ne; }

  Value int_const() { return static_cast<std::int64_t>(uniform(rng_, 0, 5)); }
  Value a_const() { return "a" + std::to_string(uniform(rng_, 1, 4)); }
  Value b_const() {
    static const std::vector<std::string> pool{"a1", "a2", "b1", "b2", "b3"};
    return pick(rng_, pool);
  }

  std::vector<const Var*> of(const std::vector<Var>& scope,
                             const std::string& object, bool homed = false) {
    std::vector<const Var*> out;
    for (const auto& v : scope) {
      if (v.object == object && (!homed || v.has_home)) out.push_back(&v);
    }
    return out;
  }

  TreePred tree_pred() {
    return static_cast<TreePred>(uniform(rng_, 0, 8));
  }

  // An atom over a random variable in scope (the newest when `newest`).
  FormulaPtr atom(std::vector<Var>& scope, bool newest = false) {
    const Var& x = newest ? scope.back() : pick(rng_, scope);
    using F = FormulaPtr;
    std::vector<std::function<F()>> options;
    auto lit = [](Value v) { return CalcOperand::literal(std::move(v)); };
    const std::string& obj = x.object;
    if (obj == "A" || obj == "B") {
      options.push_back([&] {
        return formula::compare(var(x), op(), lit(obj == "A" ? a_const() : b_const()));
      });
      options.push_back([&] {
        return formula::range(x.name, chance(rng_, 0.5) ? "A" : "B");
      });
      for (const Var* y : of(scope, obj)) {
        if (y->name == x.name) continue;
        options.push_back([&, y] { return formula::compare(var(x), op(), var(*y)); });
      }
    }
    if (obj == "A" && x.has_home) {
      options.push_back([&] {
        return formula::compare(var(x, {chance(rng_, 0.5) ? m("fa") : o("V")}),
                                op(), lit(int_const()));
      });
      for (const Var* y : of(scope, "A", true)) {
        options.push_back([&, y] {
          return formula::compare(var(x, {m("fa")}), op(), var(*y, {o("V")}));
        });
        if (tree_) {
          options.push_back([&, y] {
            return formula::tree(tree_pred(), var(x, {m("pos")}), var(*y, {o("T")}));
          });
        } else {
          options.push_back([&, y] {
            if (chance(rng_, 0.5)) return formula::graph("E", 0, var(x), var(*y));
            return formula::graph("E", static_cast<int>(uniform(rng_, 1, 3)),
                                  var(x), var(*y));
          });
        }
      }
      for (const Var* v : of(scope, "V")) {
        options.push_back([&, v] {
          return chance(rng_, 0.7)
                     ? formula::compare(var(x, {m("fa")}), CmpOp::Eq, var(*v))
                     : formula::compare(var(*v), op(), var(x, {o("V")}));
        });
      }
      if (tree_) {
        for (const Var* t : of(scope, "T")) {
          options.push_back([&, t] {
            return chance(rng_, 0.5)
                       ? formula::tree(tree_pred(), var(x, {m("pos")}), var(*t))
                       : formula::compare(var(x, {m("pos")}), eq_or_ne(), var(*t));
          });
        }
      }
    }
    if (obj == "V") {
      options.push_back([&] { return formula::compare(var(x), op(), lit(int_const())); });
      for (const Var* y : of(scope, "V")) {
        if (y->name == x.name) continue;
        options.push_back([&, y] { return formula::compare(var(x), op(), var(*y)); });
      }
    }
    if (obj == "R") {
      options.push_back([&] {
        return formula::compare(var(x, {m("rb")}), eq_or_ne(), lit(b_const()));
      });
      options.push_back([&] {
        return formula::compare(var(x, {m("ra"), m("fa")}), op(), lit(int_const()));
      });
      options.push_back([&] {
        return formula::compare(var(x, {o("A"), o("V")}), op(), lit(int_const()));
      });
      for (const Var* a : of(scope, "A", true)) {
        options.push_back([&, a] {
          return chance(rng_, 0.5)
                     ? formula::compare(var(x, {o("A")}), eq_or_ne(), var(*a))
                     : formula::compare(var(*a), eq_or_ne(), var(x, {m("ra")}));
        });
      }
      for (const Var* b : of(scope, "B")) {
        options.push_back([&, b] {
          return formula::compare(var(x, {m("rb")}), eq_or_ne(), var(*b));
        });
      }
      for (const Var* r : of(scope, "R")) {
        if (r->name == x.name) continue;
        options.push_back([&, r] { return formula::compare(var(x), eq_or_ne(), var(*r)); });
      }
      options.push_back([&] { return formula::range(x.name, "R"); });
    }
    if (obj == "E") {
      for (const Var* a : of(scope, "A", true)) {
        options.push_back([&, a] {
          return formula::compare(var(x, {m(chance(rng_, 0.5) ? "src" : "dst")}),
                                  eq_or_ne(), var(*a));
        });
      }
      options.push_back([&] {
        return formula::compare(var(x, {m("src"), m("fa")}), op(), lit(int_const()));
      });
    }
    if (obj == "T") {
      options.push_back([&] {
        static const std::vector<std::string> codes{"", "1", "2", "1.1", "1.2"};
        return formula::compare(var(x), eq_or_ne(),
                                lit(Value(DeweyCode::parse(pick(rng_, codes)))));
      });
      for (const Var* t : of(scope, "T")) {
        if (t->name == x.name) continue;
        options.push_back([&, t] { return formula::tree(tree_pred(), var(x), var(*t)); });
      }
    }
    return pick(rng_, options)();
  }

  Rng& rng_;
  const InstanceCategory& db_;
  int quantifiers_;
  bool tree_ = false;
  std::vector<std::string> objects_;
  int counter_ = 0;
};

}  // namespace

CalculusQuery random_query(Rng& rng, const InstanceCategory& instance,
                           int max_quantifiers) {
  while (true) {
    CalculusQuery q =
        QueryGen(rng, instance, static_cast<int>(uniform(rng, 0, max_quantifiers)))
            .query();
    if (check_safety(q).empty()) return q;
  }
}

}  // namespace catql::check
