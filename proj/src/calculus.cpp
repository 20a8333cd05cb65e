#include "catql/calculus.hpp"

#include <algorithm>
#include <limits>

#include "catql/error.hpp"

namespace catql {

// ---------------------------------------------------------------------------
// Tree predicates

std::string_view to_string(TreePred p) {
  switch (p) {
    case TreePred::IsParent: return "isParent";
    case TreePred::IsChild: return "isChild";
    case TreePred::IsAncestor: return "isAncestor";
    case TreePred::IsDescendant: return "isDescendant";
    case TreePred::IsSibling: return "isSibling";
    case TreePred::IsPreceding: return "isPreceding";
    case TreePred::IsFollowing: return "isFollowing";
    case TreePred::IsPrecedingSibling: return "isPrecedingSibling";
    case TreePred::IsFollowingSibling: return "isFollowingSibling";
  }
  return "?";
}

std::optional<TreePred> parse_tree_pred(std::string_view name) {
  static const std::pair<std::string_view, TreePred> all[] = {
      {"isParent", TreePred::IsParent},
      {"isChild", TreePred::IsChild},
      {"isAncestor", TreePred::IsAncestor},
      {"isDescendant", TreePred::IsDescendant},
      {"isSibling", TreePred::IsSibling},
      {"isPreceding", TreePred::IsPreceding},
      {"isFollowing", TreePred::IsFollowing},
      {"isPrecedingSibling", TreePred::IsPrecedingSibling},
      {"isFollowingSibling", TreePred::IsFollowingSibling},
  };
  for (const auto& [n, p] : all) {
    if (n == name) return p;
  }
  return std::nullopt;
}

bool holds(TreePred p, const DeweyCode& a, const DeweyCode& b) {
  switch (p) {
    case TreePred::IsParent: return a.is_parent_of(b);
    case TreePred::IsChild: return b.is_parent_of(a);
    case TreePred::IsAncestor: return a.is_ancestor_of(b);
    case TreePred::IsDescendant: return b.is_ancestor_of(a);
    case TreePred::IsSibling: return a.is_sibling_of(b);
    case TreePred::IsPreceding: return a.precedes(b) && !a.is_ancestor_of(b);
    case TreePred::IsFollowing: return b.precedes(a) && !b.is_ancestor_of(a);
    case TreePred::IsPrecedingSibling: return a.is_sibling_of(b) && a.precedes(b);
    case TreePred::IsFollowingSibling: return a.is_sibling_of(b) && b.precedes(a);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Construction

namespace formula {

namespace {
std::shared_ptr<Formula> make(Formula::Kind k) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  return f;
}

FormulaPtr nary(Formula::Kind k, std::vector<FormulaPtr> parts) {
  std::vector<FormulaPtr> flat;
  for (auto& p : parts) {
    if (p->kind == k) {
      flat.insert(flat.end(), p->kids.begin(), p->kids.end());
    } else {
      flat.push_back(std::move(p));
    }
  }
  if (flat.size() == 1) return flat[0];
  auto f = make(k);
  f->kids = std::move(flat);
  return f;
}
}  // namespace

FormulaPtr range(std::string var, std::string object) {
  auto f = make(Formula::Kind::Range);
  f->var = std::move(var);
  f->object = std::move(object);
  return f;
}

FormulaPtr compare(CalcOperand lhs, CmpOp op, CalcOperand rhs) {
  auto f = make(Formula::Kind::Compare);
  f->lhs = std::move(lhs);
  f->cmp = op;
  f->rhs = std::move(rhs);
  return f;
}

FormulaPtr tree(TreePred p, CalcOperand a, CalcOperand b) {
  auto f = make(Formula::Kind::Tree);
  f->tree = p;
  f->lhs = std::move(a);
  f->rhs = std::move(b);
  return f;
}

FormulaPtr graph(std::string edges, int hops, CalcOperand a, CalcOperand b) {
  auto f = make(Formula::Kind::Graph);
  f->edges = std::move(edges);
  f->hops = hops;
  f->lhs = std::move(a);
  f->rhs = std::move(b);
  return f;
}

FormulaPtr negate(FormulaPtr inner) {
  auto f = make(Formula::Kind::Not);
  f->kids = {std::move(inner)};
  return f;
}

FormulaPtr conj(std::vector<FormulaPtr> parts) {
  return nary(Formula::Kind::And, std::move(parts));
}

FormulaPtr disj(std::vector<FormulaPtr> parts) {
  return nary(Formula::Kind::Or, std::move(parts));
}

FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  auto f = make(Formula::Kind::Implies);
  f->kids = {std::move(a), std::move(b)};
  return f;
}

FormulaPtr exists(std::string var, std::optional<std::string> range,
                  FormulaPtr body) {
  auto f = make(Formula::Kind::Exists);
  f->var = std::move(var);
  f->object = std::move(range);
  f->kids = {std::move(body)};
  return f;
}

FormulaPtr forall(std::string var, std::optional<std::string> range,
                  FormulaPtr body) {
  auto f = make(Formula::Kind::ForAll);
  f->var = std::move(var);
  f->object = std::move(range);
  f->kids = {std::move(body)};
  return f;
}

}  // namespace formula

std::vector<std::string> CalculusQuery::targets() const {
  std::vector<std::string> out;
  for (const auto& g : target_groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

// ---------------------------------------------------------------------------
// Structure queries

namespace {
void collect_free(const Formula& f, std::set<std::string>& bound,
                  std::set<std::string>& out) {
  auto use = [&](const CalcOperand& o) {
    if (o.is_var() && !bound.contains(o.var)) out.insert(o.var);
  };
  switch (f.kind) {
    case Formula::Kind::Range:
      if (!bound.contains(f.var)) out.insert(f.var);
      break;
    case Formula::Kind::Compare:
    case Formula::Kind::Tree:
    case Formula::Kind::Graph:
      use(f.lhs);
      use(f.rhs);
      break;
    case Formula::Kind::Exists:
    case Formula::Kind::ForAll: {
      bool fresh = bound.insert(f.var).second;
      collect_free(*f.kids[0], bound, out);
      if (fresh) bound.erase(f.var);
      break;
    }
    default:
      for (const auto& k : f.kids) collect_free(*k, bound, out);
  }
}
}  // namespace

std::set<std::string> free_variables(const Formula& f) {
  std::set<std::string> bound, out;
  collect_free(f, bound, out);
  return out;
}

std::vector<FormulaPtr> conjuncts(const FormulaPtr& f) {
  if (f->kind != Formula::Kind::And) return {f};
  std::vector<FormulaPtr> out;
  for (const auto& k : f->kids) {
    auto sub = conjuncts(k);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

bool is_range_formula(const Formula& f, const std::string& var) {
  switch (f.kind) {
    case Formula::Kind::Range: return f.var == var;
    case Formula::Kind::Not:
    case Formula::Kind::And:
    case Formula::Kind::Or:
      return std::all_of(f.kids.begin(), f.kids.end(), [&](const auto& k) {
        return is_range_formula(*k, var);
      });
    default: return false;
  }
}

namespace {
bool positive(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Range: return true;
    case Formula::Kind::And:
      return std::any_of(f.kids.begin(), f.kids.end(),
                         [](const auto& k) { return positive(*k); });
    case Formula::Kind::Or:
      return std::all_of(f.kids.begin(), f.kids.end(),
                         [](const auto& k) { return positive(*k); });
    default: return false;
  }
}

// The objects one of which must contain any satisfying value.
std::set<std::string> domain_objects(const Formula& f) {
  std::set<std::string> out;
  switch (f.kind) {
    case Formula::Kind::Range: out.insert(*f.object); break;
    case Formula::Kind::And:
      // Any positive child bounds the value; take the smallest description.
      for (const auto& k : f.kids) {
        if (positive(*k)) {
          auto d = domain_objects(*k);
          if (out.empty() || d.size() < out.size()) out = d;
        }
      }
      break;
    case Formula::Kind::Or:
      for (const auto& k : f.kids) {
        auto d = domain_objects(*k);
        out.insert(d.begin(), d.end());
      }
      break;
    default: break;
  }
  return out;
}

std::optional<std::string> home_of(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Range: return f.object;
    case Formula::Kind::And:
      for (const auto& k : f.kids) {
        if (positive(*k)) return home_of(*k);
      }
      return std::nullopt;
    case Formula::Kind::Or: {
      std::optional<std::string> h;
      for (const auto& k : f.kids) {
        auto kh = home_of(*k);
        if (!kh || (h && *h != *kh)) return std::nullopt;
        h = kh;
      }
      return h;
    }
    default: return std::nullopt;
  }
}
}  // namespace

bool is_positive_range(const Formula& f, const std::string& var) {
  return is_range_formula(f, var) && positive(f);
}

std::set<std::string> positive_objects(const Formula& f, const std::string& var) {
  if (!is_positive_range(f, var)) return {};
  return domain_objects(f);
}

std::map<std::string, std::string> home_objects(const CalculusQuery& q) {
  std::map<std::string, std::string> out;
  auto parts = conjuncts(q.body);
  for (const auto& v : q.targets()) {
    for (const auto& c : parts) {
      if (is_positive_range(*c, v)) {
        if (auto h = home_of(*c)) out[v] = *h;
        break;
      }
    }
  }
  return out;
}

FunctionExpr to_function(const std::vector<PathStep>& path) {
  if (path.empty()) return FunctionExpr::identity();
  std::vector<std::string> names;
  for (const auto& s : path) names.push_back(s.name);
  return path.front().morphism ? FunctionExpr::compose(std::move(names))
                               : FunctionExpr::path(std::move(names));
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string operand_text(const CalcOperand& o) {
  if (o.constant) return o.constant->to_literal();
  std::string out = o.var;
  for (const auto& s : o.path) out += (s.morphism ? ".@" : ".") + s.name;
  return out;
}

std::string unit_text(const Formula& f);

std::string child_text(const Formula& f) {
  if (f.is_term() || f.kind == Formula::Kind::Not) return to_text(f);
  return "(" + to_text(f) + ")";
}

std::string unit_text(const Formula& f) { return child_text(f); }

}  // namespace

std::string to_text(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Range: return f.var + " in " + *f.object;
    case Formula::Kind::Compare:
      return operand_text(f.lhs) + " " + std::string(to_symbol(f.cmp)) + " " +
             operand_text(f.rhs);
    case Formula::Kind::Tree:
      return std::string(to_string(f.tree)) + "(" + operand_text(f.lhs) + ", " +
             operand_text(f.rhs) + ")";
    case Formula::Kind::Graph:
      return (f.hops == 0 ? "reach[" + f.edges + "]"
                          : "nhop[" + f.edges + ", " + std::to_string(f.hops) +
                                "]") +
             "(" + operand_text(f.lhs) + ", " + operand_text(f.rhs) + ")";
    case Formula::Kind::Not: return "not " + unit_text(*f.kids[0]);
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      std::string sep = f.kind == Formula::Kind::And ? " and " : " or ";
      std::string out;
      for (std::size_t i = 0; i < f.kids.size(); ++i) {
        if (i) out += sep;
        out += child_text(*f.kids[i]);
      }
      return out;
    }
    case Formula::Kind::Implies:
      return child_text(*f.kids[0]) + " -> " + child_text(*f.kids[1]);
    case Formula::Kind::Exists:
    case Formula::Kind::ForAll: {
      std::string out = f.kind == Formula::Kind::Exists ? "exists " : "forall ";
      out += f.var;
      if (f.object) out += " in " + *f.object;
      return out + ": " + unit_text(*f.kids[0]);
    }
  }
  return "?";
}

std::string to_text(const CalculusQuery& q) {
  std::string out = "{ ";
  for (std::size_t i = 0; i < q.target_groups.size(); ++i) {
    if (i) out += ", ";
    const auto& g = q.target_groups[i];
    if (g.size() == 1) {
      out += g[0];
    } else {
      out += "(";
      for (std::size_t k = 0; k < g.size(); ++k) out += (k ? ", " : "") + g[k];
      out += ")";
    }
  }
  return out + " | " + to_text(*q.body) + " }";
}

// ---------------------------------------------------------------------------
// Safety

namespace {

class SafetyChecker {
 public:
  explicit SafetyChecker(std::vector<UnsafeVariable>& out) : out_(out) {}

  void report(const std::string& v, char rule, std::string detail) {
    for (const auto& u : out_) {
      if (u.var == v) return;
    }
    out_.push_back({v, rule, std::move(detail)});
  }

  // `ranged`: variables whose range is fixed by context.
  void walk(const Formula& f, std::set<std::string>& ranged) {
    switch (f.kind) {
      case Formula::Kind::Exists:
      case Formula::Kind::ForAll: {
        if (!f.object) {
          report(f.var, 'b',
                 "quantified variable " + f.var + " has no range");
        }
        bool fresh = ranged.insert(f.var).second;
        walk(*f.kids[0], ranged);
        if (fresh) ranged.erase(f.var);
        break;
      }
      case Formula::Kind::Or: {
        auto fv = free_variables(f);
        for (const auto& v : fv) {
          if (ranged.contains(v)) continue;
          for (const auto& k : f.kids) {
            bool ok = false;
            for (const auto& c : conjuncts(k)) {
              if (is_positive_range(*c, v)) ok = true;
            }
            if (!ok) {
              report(v, 'c',
                     "a branch of a disjunction does not range " + v);
              break;
            }
          }
        }
        for (const auto& k : f.kids) walk(*k, ranged);
        break;
      }
      case Formula::Kind::Not: {
        for (const auto& v : free_variables(f)) {
          if (!ranged.contains(v)) {
            report(v, 'd', "negation over " + v +
                               " without a positive range for it");
          }
        }
        walk(*f.kids[0], ranged);
        break;
      }
      case Formula::Kind::Implies: {
        // a -> b is (not a) or b.
        auto rewritten =
            formula::disj({formula::negate(f.kids[0]), f.kids[1]});
        walk(*rewritten, ranged);
        break;
      }
      default:
        for (const auto& k : f.kids) walk(*k, ranged);
    }
  }

 private:
  std::vector<UnsafeVariable>& out_;
};

}  // namespace

std::vector<UnsafeVariable> check_safety(const CalculusQuery& q) {
  std::vector<UnsafeVariable> out;
  SafetyChecker checker(out);
  auto parts = conjuncts(q.body);
  std::set<std::string> ranged;
  std::set<std::string> free = free_variables(*q.body);
  for (const auto& t : q.targets()) free.insert(t);
  for (const auto& v : free) {
    bool has_range = std::any_of(parts.begin(), parts.end(), [&](const auto& c) {
      return is_positive_range(*c, v);
    });
    if (has_range) {
      ranged.insert(v);
    } else {
      checker.report(v, 'a', "free variable " + v + " has no range conjunct");
    }
  }
  for (const auto& c : parts) {
    // A top-level negated range of a ranged variable is the x ∈ O1 ∧ ¬ x ∈ O2
    // pattern; the Not rule only checks that the variable is ranged.
    checker.walk(*c, ranged);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closure oracle

ClosureOracle::ClosureOracle(const std::set<Value>& edges) {
  for (const auto& e : edges) {
    const auto& t = e.as_tuple();
    index_.emplace(t[0], index_.size());
    index_.emplace(t[1], index_.size());
  }
  const std::size_t n = index_.size();
  constexpr int inf = std::numeric_limits<int>::max() / 4;
  dist_.assign(n, std::vector<int>(n, inf));
  for (const auto& e : edges) {
    const auto& t = e.as_tuple();
    dist_[index_.at(t[0])][index_.at(t[1])] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (dist_[i][k] == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        int via = dist_[i][k] + dist_[k][j];
        if (via < dist_[i][j]) dist_[i][j] = via;
      }
    }
  }
}

std::optional<int> ClosureOracle::distance(const Value& a, const Value& b) const {
  auto ia = index_.find(a);
  auto ib = index_.find(b);
  if (ia == index_.end() || ib == index_.end()) return std::nullopt;
  int d = dist_[ia->second][ib->second];
  if (d >= std::numeric_limits<int>::max() / 4) return std::nullopt;
  return d;
}

// ---------------------------------------------------------------------------
// Brute-force evaluation

namespace {

struct Binding {
  Value value;
  std::optional<std::string> home;
};

class BruteEvaluator {
 public:
  explicit BruteEvaluator(const InstanceCategory& db) : db_(db) {}

  std::map<std::string, Binding> env;

  Value value(const CalcOperand& o) {
    if (o.constant) return *o.constant;
    auto it = env.find(o.var);
    if (it == env.end()) {
      throw Error(ErrorCode::UnboundVariable, "variable " + o.var + " is unbound");
    }
    Value v = it->second.value;
    std::optional<std::string> at = it->second.home;
    for (const auto& step : o.path) {
      const Morphism* m = nullptr;
      if (step.morphism) {
        m = &db_.morphism(step.name);
        if (at && *at != m->source) {
          throw Error(ErrorCode::UnresolvablePath,
                      "morphism " + m->name + " does not start at " + *at);
        }
      } else {
        if (!at) {
          throw Error(ErrorCode::UnresolvablePath,
                      "cannot follow ." + step.name + " from " + o.var +
                          ": its range has no single object");
        }
        m = db_.find_morphism(*at, step.name);
        if (!m) {
          throw Error(ErrorCode::MissingMorphism,
                      "(" + *at + ", " + step.name + ")");
        }
      }
      v = m->apply(v);
      at = m->target;
    }
    return v;
  }

  bool eval(const Formula& f) {
    switch (f.kind) {
      case Formula::Kind::Range:
        return db_.object(*f.object).contains(value(CalcOperand::variable(f.var)));
      case Formula::Kind::Compare:
        return compare(value(f.lhs), f.cmp, value(f.rhs));
      case Formula::Kind::Tree: {
        Value a = value(f.lhs), b = value(f.rhs);
        if (a.kind() != ValueKind::Dewey || b.kind() != ValueKind::Dewey) {
          throw Error(ErrorCode::TypeMismatch,
                      std::string(to_string(f.tree)) + " needs Dewey codes");
        }
        return holds(f.tree, a.as_dewey(), b.as_dewey());
      }
      case Formula::Kind::Graph: {
        auto d = closure(f.edges).distance(value(f.lhs), value(f.rhs));
        return d && (f.hops == 0 || *d <= f.hops);
      }
      case Formula::Kind::Not: return !eval(*f.kids[0]);
      case Formula::Kind::And:
        for (const auto& k : f.kids) {
          if (!eval(*k)) return false;
        }
        return true;
      case Formula::Kind::Or:
        for (const auto& k : f.kids) {
          if (eval(*k)) return true;
        }
        return false;
      case Formula::Kind::Implies:
        return !eval(*f.kids[0]) || eval(*f.kids[1]);
      case Formula::Kind::Exists:
      case Formula::Kind::ForAll: {
        bool want = f.kind == Formula::Kind::Exists;
        const auto& range = db_.object(*f.object);
        auto saved = env.find(f.var) != env.end()
                         ? std::optional<Binding>(env.at(f.var))
                         : std::nullopt;
        bool result = !want;
        for (const auto& x : range.elements) {
          env.insert_or_assign(f.var, Binding{x, *f.object});
          if (eval(*f.kids[0]) == want) {
            result = want;
            break;
          }
        }
        if (saved) {
          env.insert_or_assign(f.var, *saved);
        } else {
          env.erase(f.var);
        }
        return result;
      }
    }
    return false;
  }

 private:
  const ClosureOracle& closure(const std::string& edges) {
    auto it = closures_.find(edges);
    if (it != closures_.end()) return it->second;
    const auto& e = db_.object(edges);
    if (e.arity != 2) {
      throw Error(ErrorCode::KindMismatch,
                  "edge object " + edges + " must have arity 2");
    }
    return closures_.emplace(edges, ClosureOracle(e.elements)).first->second;
  }

  const InstanceCategory& db_;
  std::map<std::string, ClosureOracle> closures_;
};

}  // namespace

ExtSet brute_eval(const InstanceCategory& instance, const CalculusQuery& q) {
  auto unsafe = check_safety(q);
  if (!unsafe.empty()) {
    std::string names;
    for (const auto& u : unsafe) {
      names += (names.empty() ? "" : ", ") + u.var + " (rule " + u.rule + ")";
    }
    throw Error(ErrorCode::UnsafeQuery, "unsafe variables: " + names);
  }
  const auto targets = q.targets();
  const auto homes = home_objects(q);
  const auto parts = conjuncts(q.body);

  std::vector<std::vector<Value>> domains;
  for (const auto& v : targets) {
    std::set<Value> dom;
    for (const auto& c : parts) {
      if (!is_positive_range(*c, v)) continue;
      for (const auto& o : positive_objects(*c, v)) {
        const auto& el = instance.object(o).elements;
        dom.insert(el.begin(), el.end());
      }
      break;
    }
    domains.emplace_back(dom.begin(), dom.end());
  }

  // Check each conjunct as soon as all of its free variables are assigned.
  std::vector<std::vector<FormulaPtr>> checks(targets.size());
  for (const auto& c : parts) {
    auto fv = free_variables(*c);
    std::size_t last = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (fv.contains(targets[i])) last = i;
    }
    checks[last].push_back(c);
  }

  ExtSet out;
  for (const auto& v : targets) {
    auto h = homes.find(v);
    out.schema.columns.push_back(
        Column{v, h == homes.end() ? std::nullopt
                                   : std::optional<std::string>(h->second)});
  }

  BruteEvaluator ev(instance);
  std::vector<Value> current(targets.size());
  auto assign = [&](auto&& self, std::size_t i) -> void {
    if (i == targets.size()) {
      out.rows.insert(make_row(current));
      return;
    }
    auto h = homes.find(targets[i]);
    for (const auto& x : domains[i]) {
      ev.env.insert_or_assign(
          targets[i],
          Binding{x, h == homes.end() ? std::nullopt
                                      : std::optional<std::string>(h->second)});
      current[i] = x;
      bool ok = true;
      for (const auto& c : checks[i]) {
        if (!ev.eval(*c)) {
          ok = false;
          break;
        }
      }
      if (ok) self(self, i + 1);
    }
    ev.env.erase(targets[i]);
  };
  if (!targets.empty()) assign(assign, 0);

  // A target ranging over a relationship object contributes its components
  // as separate columns, matching the flattened rows of the algebra.
  std::vector<std::size_t> widths;
  Schema flat;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto h = homes.find(targets[i]);
    const SetObject* obj =
        h == homes.end() ? nullptr : &instance.object(h->second);
    if (obj && obj->arity > 1) {
      widths.push_back(obj->arity);
      for (const auto& c : eval_base(instance, obj->name).schema.columns) {
        flat.columns.push_back(Column{targets[i] + "." + c.name, c.origin});
      }
    } else {
      widths.push_back(1);
      flat.columns.push_back(out.schema.columns[i]);
    }
  }
  if (flat.arity() == out.arity()) return out;
  ExtSet wide;
  wide.schema = std::move(flat);
  for (const auto& row : out.rows) {
    std::vector<Value> parts;
    auto values = split_row(row, targets.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (widths[i] == 1) {
        parts.push_back(values[i]);
      } else {
        const auto& t = values[i].as_tuple();
        parts.insert(parts.end(), t.begin(), t.end());
      }
    }
    wide.rows.insert(make_row(std::move(parts)));
  }
  return wide;
}

}  // namespace catql
