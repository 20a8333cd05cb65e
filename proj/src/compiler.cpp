#include "catql/compiler.hpp"

#include <algorithm>
#include <cassert>

#include "catql/error.hpp"

namespace catql {

namespace {

using FK = Formula::Kind;
using LK = Literal::Kind;

// ---------------------------------------------------------------------------
// Normalization

struct Node {
  enum class K { Lit, And, Or, Quant };
  K k = K::Lit;
  Literal lit;
  std::vector<Node> kids;
  Quantifier quant;  // Quant: one child
};

Node lit_node(Literal l) { return Node{Node::K::Lit, std::move(l), {}, {}}; }

Node nary(Node::K k, std::vector<Node> kids) {
  if (kids.size() == 1) return std::move(kids[0]);
  Node n;
  n.k = k;
  for (auto& c : kids) {
    if (c.k == k) {
      for (auto& g : c.kids) n.kids.push_back(std::move(g));
    } else {
      n.kids.push_back(std::move(c));
    }
  }
  return n;
}

Node negate(Node n) {
  switch (n.k) {
    case Node::K::Lit: n.lit.negated = !n.lit.negated; return n;
    case Node::K::And:
    case Node::K::Or: {
      std::vector<Node> kids;
      for (auto& c : n.kids) kids.push_back(negate(std::move(c)));
      return nary(n.k == Node::K::And ? Node::K::Or : Node::K::And,
                  std::move(kids));
    }
    case Node::K::Quant:
      n.quant.universal = !n.quant.universal;
      n.kids[0] = negate(std::move(n.kids[0]));
      return n;
  }
  return n;
}

int var_index(const std::string& v) { return std::stoi(v.substr(1)); }

void sort_vars(std::vector<std::string>& vars) {
  std::sort(vars.begin(), vars.end(), [](const auto& a, const auto& b) {
    return var_index(a) < var_index(b);
  });
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
}

struct VarInfo {
  std::string name;  // renamed; empty for a relationship variable
  std::optional<std::string> home;
  // Relationship variable split into components.
  std::optional<std::string> relation;
  std::vector<std::string> comps;
  std::vector<std::string> comp_homes;
};

// Component objects of a relationship object, by projection morphism.
std::vector<std::string> component_objects(const InstanceCategory& schema,
                                           const std::string& relation) {
  const auto& obj = schema.object(relation);
  std::vector<std::optional<std::string>> found(obj.arity);
  for (const auto& [name, m] : schema.morphisms()) {
    if (m.source == relation &&
        m.provenance.kind == Provenance::Kind::Projection &&
        m.provenance.component < obj.arity && !found[m.provenance.component]) {
      found[m.provenance.component] = m.target;
    }
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!found[i]) {
      throw Error(ErrorCode::Unsupported,
                  "component " + std::to_string(i) + " of " + relation +
                      " has no projection morphism");
    }
    out.push_back(*found[i]);
  }
  return out;
}

class Normalizer {
 public:
  Normalizer(const InstanceCategory& schema, NormalQuery& nq)
      : schema_(schema), nq_(nq) {}

  void run(const CalculusQuery& q) {
    auto parts = conjuncts(q.body);
    auto homes = home_objects(q);
    std::vector<bool> used(parts.size(), false);
    std::vector<Node> top;
    for (const auto& t : q.targets()) {
      std::size_t k = 0;
      while (k < parts.size() && !is_positive_range(*parts[k], t)) ++k;
      if (k == parts.size()) {
        throw Error(ErrorCode::UnsafeQuery, "target " + t + " has no range");
      }
      used[k] = true;
      auto h = homes.find(t);
      VarInfo info;
      if (h != homes.end()) info.home = h->second;
      bool relational = h != homes.end() && schema_.object(h->second).arity > 1;
      if (!relational) {
        for (const auto& o : positive_objects(*parts[k], t)) {
          if (schema_.object(o).arity > 1) {
            throw Error(ErrorCode::Unsupported,
                        "target " + t +
                            " ranges over relationship objects without a "
                            "single home object");
          }
        }
        info.name = fresh(t);
        nq_.targets.push_back(info.name);
        nq_.output_names.push_back(t);
        nq_.ranges[info.name] = parts[k];
      } else {
        if (parts[k]->kind != FK::Range) {
          throw Error(ErrorCode::Unsupported,
                      "a relationship target must be ranged by a single object");
        }
        split(info, h->second, t);
        const auto& names = schema_.object(h->second).component_names;
        for (std::size_t i = 0; i < info.comps.size(); ++i) {
          nq_.targets.push_back(info.comps[i]);
          nq_.output_names.push_back(t + "." + names[i]);
        }
        top.push_back(lit_node(tuple_literal(info)));
      }
      env_.emplace_back(t, std::move(info));
    }
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!used[k]) top.push_back(nnf(*parts[k], false));
    }
    if (top.empty()) {
      top_ = Node{Node::K::And, {}, {}, {}};
    } else {
      top_ = nary(Node::K::And, std::move(top));
    }
  }

  Node take_top() { return std::move(top_); }

 private:
  std::string fresh(const std::string& source) {
    std::string n = "x" + std::to_string(++counter_);
    nq_.original[n] = source;
    return n;
  }

  void split(VarInfo& info, const std::string& relation,
             const std::string& source) {
    info.relation = relation;
    info.home = relation;
    info.comp_homes = component_objects(schema_, relation);
    const auto& names = schema_.object(relation).component_names;
    for (std::size_t i = 0; i < info.comp_homes.size(); ++i) {
      std::string c = fresh(source + "." + names[i]);
      nq_.ranges[c] = formula::range(c, info.comp_homes[i]);
      info.comps.push_back(c);
    }
  }

  static Literal tuple_literal(const VarInfo& info) {
    Literal l;
    l.kind = LK::Tuple;
    l.object = *info.relation;
    l.vars = info.comps;
    return l;
  }

  const VarInfo& lookup(const std::string& v) const {
    for (auto it = env_.rbegin(); it != env_.rend(); ++it) {
      if (it->first == v) return it->second;
    }
    throw Error(ErrorCode::UnboundVariable, "variable " + v + " is unbound");
  }

  // nullopt: a relationship variable without a path.
  std::optional<Term> term(const CalcOperand& o) const {
    Term t;
    if (o.constant) {
      t.constant = o.constant;
      return t;
    }
    const VarInfo& info = lookup(o.var);
    std::optional<std::string> at = info.home;
    std::size_t start = 0;
    if (info.relation) {
      if (o.path.empty()) return std::nullopt;
      const auto& step = o.path[0];
      const Morphism* m = nullptr;
      if (step.morphism) {
        m = &schema_.morphism(step.name);
        if (m->source != *info.relation) {
          throw Error(ErrorCode::UnresolvablePath,
                      "morphism " + m->name + " does not start at " +
                          *info.relation);
        }
      } else {
        m = schema_.find_morphism(*info.relation, step.name);
        if (!m) {
          throw Error(ErrorCode::MissingMorphism,
                      "(" + *info.relation + ", " + step.name + ")");
        }
      }
      if (m->provenance.kind != Provenance::Kind::Projection) {
        throw Error(ErrorCode::Unsupported,
                    "a path from relationship variable " + o.var +
                        " must start with a projection");
      }
      t.var = info.comps.at(m->provenance.component);
      at = info.comp_homes.at(m->provenance.component);
      start = 1;
    } else {
      t.var = info.name;
    }
    for (std::size_t i = start; i < o.path.size(); ++i) {
      const auto& step = o.path[i];
      const Morphism* m = nullptr;
      if (step.morphism) {
        m = &schema_.morphism(step.name);
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
        m = schema_.find_morphism(*at, step.name);
        if (!m) {
          throw Error(ErrorCode::MissingMorphism,
                      "(" + *at + ", " + step.name + ")");
        }
      }
      t.morphisms.push_back(m->name);
      at = m->target;
    }
    t.codomain = at;
    return t;
  }

  Term var_term(const CalcOperand& o, const char* what) const {
    auto t = term(o);
    if (!t) {
      throw Error(ErrorCode::Unsupported,
                  std::string(what) + " over relationship variable " + o.var);
    }
    return *t;
  }

  Node nnf(const Formula& f, bool neg) {
    switch (f.kind) {
      case FK::Range: {
        const VarInfo& info = lookup(f.var);
        Literal l;
        l.negated = neg;
        if (info.relation) {
          if (*f.object != *info.relation) {
            throw Error(ErrorCode::Unsupported,
                        "membership of relationship variable " + f.var +
                            " in another object");
          }
          l = tuple_literal(info);
          l.negated = neg;
          return lit_node(std::move(l));
        }
        l.kind = LK::Member;
        l.var = info.name;
        l.object = *f.object;
        return lit_node(std::move(l));
      }
      case FK::Compare: {
        auto a = term(f.lhs);
        auto b = term(f.rhs);
        if (!a || !b) return compare_tuples(f, neg);
        Literal l;
        l.kind = LK::Compare;
        l.negated = neg;
        l.lhs = *a;
        l.rhs = *b;
        l.cmp = f.cmp;
        return lit_node(std::move(l));
      }
      case FK::Tree:
      case FK::Graph: {
        if (f.lhs.constant || f.rhs.constant) {
          throw Error(ErrorCode::Unsupported,
                      "tree and graph predicates take variables, not constants");
        }
        Literal l;
        l.kind = f.kind == FK::Tree ? LK::Tree : LK::Graph;
        l.negated = neg;
        l.lhs = var_term(f.lhs, "structural predicate");
        l.rhs = var_term(f.rhs, "structural predicate");
        l.tree = f.tree;
        l.object = f.edges;
        l.hops = f.hops;
        return lit_node(std::move(l));
      }
      case FK::Not: return nnf(*f.kids[0], !neg);
      case FK::And:
      case FK::Or: {
        std::vector<Node> kids;
        for (const auto& k : f.kids) kids.push_back(nnf(*k, neg));
        bool conj = (f.kind == FK::And) != neg;
        return nary(conj ? Node::K::And : Node::K::Or, std::move(kids));
      }
      case FK::Implies: {
        std::vector<Node> kids;
        kids.push_back(nnf(*f.kids[0], !neg));
        kids.push_back(nnf(*f.kids[1], neg));
        return nary(neg ? Node::K::And : Node::K::Or, std::move(kids));
      }
      case FK::Exists:
      case FK::ForAll: {
        if (!f.object) {
          throw Error(ErrorCode::UnsafeQuery,
                      "quantified variable " + f.var + " has no range");
        }
        bool universal = (f.kind == FK::ForAll) != neg;
        VarInfo info;
        info.home = *f.object;
        if (schema_.object(*f.object).arity > 1) {
          split(info, *f.object, f.var);
        } else {
          info.name = fresh(f.var);
          nq_.ranges[info.name] = formula::range(info.name, *f.object);
        }
        env_.emplace_back(f.var, info);
        Node body = nnf(*f.kids[0], neg);
        env_.pop_back();
        std::vector<std::string> vars =
            info.relation ? info.comps : std::vector<std::string>{info.name};
        if (info.relation) {
          Literal l = tuple_literal(info);
          l.negated = universal;
          std::vector<Node> kids;
          kids.push_back(lit_node(std::move(l)));
          kids.push_back(std::move(body));
          body = nary(universal ? Node::K::Or : Node::K::And, std::move(kids));
        }
        for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
          Node q;
          q.k = Node::K::Quant;
          q.quant = Quantifier{universal, *it};
          q.kids.push_back(std::move(body));
          body = std::move(q);
        }
        return body;
      }
    }
    throw Error(ErrorCode::Unsupported, "unknown formula");
  }

  // r = s over relationship variables compares component-wise.
  Node compare_tuples(const Formula& f, bool neg) {
    if (f.lhs.constant || f.rhs.constant || !f.lhs.path.empty() ||
        !f.rhs.path.empty() || (f.cmp != CmpOp::Eq && f.cmp != CmpOp::Ne)) {
      throw Error(ErrorCode::Unsupported,
                  "relationship variables compare only with = or != against "
                  "another relationship variable");
    }
    const VarInfo& a = lookup(f.lhs.var);
    const VarInfo& b = lookup(f.rhs.var);
    if (!a.relation || !b.relation || a.comps.size() != b.comps.size()) {
      throw Error(ErrorCode::Unsupported,
                  "comparison between " + f.lhs.var + " and " + f.rhs.var +
                      " needs two relationship variables of the same arity");
    }
    std::vector<Node> kids;
    for (std::size_t i = 0; i < a.comps.size(); ++i) {
      Literal l;
      l.kind = LK::Compare;
      l.lhs.var = a.comps[i];
      l.lhs.codomain = a.comp_homes[i];
      l.rhs.var = b.comps[i];
      l.rhs.codomain = b.comp_homes[i];
      kids.push_back(lit_node(std::move(l)));
    }
    Node n = nary(Node::K::And, std::move(kids));
    bool negate_all = (f.cmp == CmpOp::Ne) != neg;
    return negate_all ? negate(std::move(n)) : n;
  }

  const InstanceCategory& schema_;
  NormalQuery& nq_;
  std::vector<std::pair<std::string, VarInfo>> env_;
  int counter_ = 0;
  Node top_;
};

// Variables a literal mentions.
void literal_vars(const Literal& l, const std::vector<Block>& blocks,
                  std::vector<std::string>& out) {
  switch (l.kind) {
    case LK::Member: out.push_back(l.var); break;
    case LK::Compare:
    case LK::Tree:
    case LK::Graph:
      if (l.lhs.is_var()) out.push_back(l.lhs.var);
      if (l.rhs.is_var()) out.push_back(l.rhs.var);
      break;
    case LK::Tuple: out.insert(out.end(), l.vars.begin(), l.vars.end()); break;
    case LK::Block: {
      const auto& f = blocks[l.block].free;
      out.insert(out.end(), f.begin(), f.end());
      break;
    }
  }
}

void node_vars(const Node& n, const std::vector<Block>& blocks,
               std::vector<std::string>& out) {
  if (n.k == Node::K::Lit) {
    literal_vars(n.lit, blocks, out);
    return;
  }
  for (const auto& k : n.kids) node_vars(k, blocks, out);
}

std::vector<Clause> dnf(const Node& n) {
  switch (n.k) {
    case Node::K::Lit: return {{n.lit}};
    case Node::K::Or: {
      std::vector<Clause> out;
      for (const auto& k : n.kids) {
        auto sub = dnf(k);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      return out;
    }
    case Node::K::And: {
      std::vector<Clause> out{{}};
      for (const auto& k : n.kids) {
        auto sub = dnf(k);
        std::vector<Clause> next;
        for (const auto& a : out) {
          for (const auto& b : sub) {
            Clause c = a;
            c.insert(c.end(), b.begin(), b.end());
            next.push_back(std::move(c));
          }
        }
        out = std::move(next);
      }
      return out;
    }
    case Node::K::Quant: break;
  }
  throw Error(ErrorCode::Unsupported, "quantifier left inside a matrix");
}

class Puller {
 public:
  explicit Puller(std::vector<Block>& blocks) : blocks_(blocks) {}

  // Splits `n` into a quantifier prefix and a quantifier-free matrix.
  // Existentials cross conjunctions and universals cross disjunctions; any
  // other quantifier stays in a nested block.
  std::pair<std::vector<Quantifier>, Node> pull(Node n) {
    switch (n.k) {
      case Node::K::Lit: return {{}, std::move(n)};
      case Node::K::Quant: {
        auto [prefix, matrix] = pull(std::move(n.kids[0]));
        prefix.insert(prefix.begin(), n.quant);
        return {std::move(prefix), std::move(matrix)};
      }
      case Node::K::And:
      case Node::K::Or: {
        bool crosses_universal = n.k == Node::K::Or;
        std::vector<Quantifier> prefix;
        std::vector<Node> kids;
        for (auto& k : n.kids) {
          auto [p, m] = pull(std::move(k));
          std::size_t run = 0;
          while (run < p.size() && p[run].universal == crosses_universal) ++run;
          prefix.insert(prefix.end(), p.begin(), p.begin() + run);
          if (run < p.size()) {
            std::vector<Quantifier> rest(p.begin() + run, p.end());
            kids.push_back(block_literal(std::move(rest), m));
          } else {
            kids.push_back(std::move(m));
          }
        }
        if (kids.empty()) return {{}, Node{n.k, {}, {}, {}}};
        return {std::move(prefix), nary(n.k, std::move(kids))};
      }
    }
    return {{}, std::move(n)};
  }

  Node block_literal(std::vector<Quantifier> prefix, const Node& matrix) {
    Block b;
    std::vector<std::string> vars;
    node_vars(matrix, blocks_, vars);
    sort_vars(vars);
    for (const auto& v : vars) {
      bool bound = std::any_of(prefix.begin(), prefix.end(),
                               [&](const auto& q) { return q.var == v; });
      if (!bound) b.free.push_back(v);
    }
    b.prefix = std::move(prefix);
    b.clauses = dnf(matrix);
    blocks_.push_back(std::move(b));
    Literal l;
    l.kind = LK::Block;
    l.block = blocks_.size() - 1;
    return lit_node(std::move(l));
  }

 private:
  std::vector<Block>& blocks_;
};

bool is_target(const NormalQuery& nq, const std::string& v) {
  return std::find(nq.targets.begin(), nq.targets.end(), v) != nq.targets.end();
}

// ---------------------------------------------------------------------------
// Range expressions

bool positive(const Formula& f) {
  switch (f.kind) {
    case FK::Range: return true;
    case FK::And:
      return std::any_of(f.kids.begin(), f.kids.end(),
                         [](const auto& k) { return positive(*k); });
    case FK::Or:
      return std::all_of(f.kids.begin(), f.kids.end(),
                         [](const auto& k) { return positive(*k); });
    default: return false;
  }
}

ExprPtr positive_set(const Formula& f);

// The elements of `within` that satisfy `f`.
ExprPtr restrict_to(ExprPtr within, const Formula& f) {
  switch (f.kind) {
    case FK::Range:
      return plan::binary(OpKind::Intersect, within, plan::base(*f.object));
    case FK::Not: {
      const Formula& g = *f.kids[0];
      ExprPtr drop = positive(g) ? positive_set(g) : restrict_to(within, g);
      return plan::binary(OpKind::Difference, within, drop);
    }
    case FK::And:
      for (const auto& k : f.kids) within = restrict_to(within, *k);
      return within;
    case FK::Or: {
      ExprPtr out;
      for (const auto& k : f.kids) {
        auto part = restrict_to(within, *k);
        out = out ? plan::binary(OpKind::Union, out, part) : part;
      }
      return out;
    }
    default:
      throw Error(ErrorCode::Unsupported, "not a range formula: " + to_text(f));
  }
}

ExprPtr positive_set(const Formula& f) {
  switch (f.kind) {
    case FK::Range: return plan::base(*f.object);
    case FK::Or: {
      ExprPtr out;
      for (const auto& k : f.kids) {
        auto part = positive_set(*k);
        out = out ? plan::binary(OpKind::Union, out, part) : part;
      }
      return out;
    }
    case FK::And: {
      std::size_t first = 0;
      while (!positive(*f.kids[first])) ++first;
      ExprPtr out = positive_set(*f.kids[first]);
      for (std::size_t i = 0; i < f.kids.size(); ++i) {
        if (i == first) continue;
        const Formula& k = *f.kids[i];
        if (k.kind == FK::Range || (k.kind == FK::Or && positive(k))) {
          out = plan::binary(OpKind::Intersect, out, positive_set(k));
        } else {
          out = restrict_to(out, k);
        }
      }
      return out;
    }
    default:
      throw Error(ErrorCode::UnsafeQuery,
                  "range formula has no positive part: " + to_text(f));
  }
}

// ---------------------------------------------------------------------------
// Clause compilation

Operand operand(const Term& t) {
  if (t.constant) return Operand::literal(*t.constant);
  return Operand::of(FunctionExpr::at(t.var, t.function()));
}

// The morphism a positive equality contributes to the clause category:
// f: S_u -> S_w is total when S_w is all of f's codomain, and the identity
// is total between equal ranges.
std::optional<std::pair<Term, Term>> arrow_of(
    const Literal& l, const std::map<std::string, ExprPtr>& ranges) {
  if (l.kind != LK::Compare || l.negated || l.cmp != CmpOp::Eq ||
      !l.lhs.is_var() || !l.rhs.is_var() || l.lhs.var == l.rhs.var) {
    return std::nullopt;
  }
  for (int flip = 0; flip < 2; ++flip) {
    const Term& a = flip ? l.rhs : l.lhs;
    const Term& b = flip ? l.lhs : l.rhs;
    if (!b.is_bare()) continue;
    const AlgebraExpr& sb = *ranges.at(b.var);
    if (!a.morphisms.empty()) {
      if (sb.op == OpKind::Base && a.codomain && sb.object == *a.codomain) {
        return std::make_pair(a, b);
      }
    } else if (to_text(*ranges.at(a.var)) == to_text(sb)) {
      return std::make_pair(a, b);
    }
  }
  return std::nullopt;
}

struct TreeShape {
  OpKind op;
  std::optional<OpKind> also;  // intersected with a second axis
  bool swap;
};

TreeShape tree_shape(TreePred p) {
  switch (p) {
    case TreePred::IsParent: return {OpKind::GetParent, {}, false};
    case TreePred::IsChild: return {OpKind::GetParent, {}, true};
    case TreePred::IsAncestor: return {OpKind::GetAncestor, {}, false};
    case TreePred::IsDescendant: return {OpKind::GetAncestor, {}, true};
    case TreePred::IsSibling: return {OpKind::GetSibling, {}, false};
    case TreePred::IsPreceding: return {OpKind::GetPreceding, {}, false};
    case TreePred::IsFollowing: return {OpKind::GetFollowing, {}, false};
    case TreePred::IsPrecedingSibling:
      return {OpKind::GetSibling, OpKind::GetPreceding, false};
    case TreePred::IsFollowingSibling:
      return {OpKind::GetSibling, OpKind::GetFollowing, false};
  }
  return {OpKind::GetParent, {}, false};
}

// The relationship object of a tree or graph literal over the sets `a` and
// `b`, and whether its `from` column belongs to the right-hand operand.
std::pair<ExprPtr, bool> predicate_object(const Literal& l, ExprPtr a,
                                          ExprPtr b) {
  if (l.kind == LK::Graph) {
    auto e = plan::base(l.object);
    return {l.hops == 0 ? plan::reach(a, b, e) : plan::nhop(a, b, e, l.hops),
            false};
  }
  auto shape = tree_shape(l.tree);
  if (shape.swap) std::swap(a, b);
  ExprPtr p = plan::tree(shape.op, a, b);
  if (shape.also) {
    p = plan::binary(OpKind::Intersect, p, plan::tree(*shape.also, a, b));
  }
  return {p, shape.swap};
}

ExprPtr term_set(const Term& t, const std::map<std::string, ExprPtr>& ranges) {
  const auto& s = ranges.at(t.var);
  return t.morphisms.empty() ? s : plan::map(s, t.function());
}

std::vector<std::string> component_names(const InstanceCategory& schema,
                                         const std::string& relation) {
  return infer_schema(schema, *plan::base(relation)).names();
}

std::vector<std::string> block_columns(const Block& b,
                                       const std::vector<std::string>& outer) {
  if (!b.free.empty()) return b.free;
  return {outer.front()};
}

ExprPtr compile_block(const InstanceCategory& schema, const NormalQuery& nq,
                      const std::map<std::string, ExprPtr>& ranges,
                      std::size_t index, const std::vector<std::string>& free);

// Objects and morphisms of one clause category.
class CatBuilder {
 public:
  std::size_t add(ExprPtr e, std::string label) {
    objects.push_back(std::move(e));
    labels.push_back(std::move(label));
    return objects.size() - 1;
  }
  void arrow(std::size_t from, std::size_t to, FunctionExpr fn) {
    arrows.push_back(CatMorphism{"f" + std::to_string(arrows.size() + 1), from,
                                 to, std::move(fn)});
  }
  std::string label(char prefix) {
    return std::string(1, prefix) + std::to_string(++counters[prefix]);
  }
  ExprPtr lim() { return plan::lim(plan::cat(objects, arrows, labels)); }

  std::vector<ExprPtr> objects;
  std::vector<std::string> labels;
  std::vector<CatMorphism> arrows;
  std::map<char, int> counters;
};

ExprPtr rename_back(ExprPtr lim, const std::string& label,
                    const std::vector<std::string>& columns) {
  std::vector<ProjectItem> items;
  for (const auto& c : columns) {
    items.push_back({columns.size() == 1 ? label : label + "." + c, c});
  }
  return plan::project(std::move(lim), std::move(items));
}

}  // namespace

// ---------------------------------------------------------------------------
// Public steps

NormalQuery normalize(const InstanceCategory& schema, const CalculusQuery& q) {
  auto unsafe = check_safety(q);
  if (!unsafe.empty()) {
    std::string names;
    for (const auto& u : unsafe) {
      names += (names.empty() ? "" : ", ") + u.var + " (rule " + u.rule + ")";
    }
    throw Error(ErrorCode::UnsafeQuery, "unsafe variables: " + names);
  }
  NormalQuery nq;
  Normalizer norm(schema, nq);
  norm.run(q);
  Node top = norm.take_top();

  nq.blocks.emplace_back();
  Puller puller(nq.blocks);
  auto [prefix, matrix] = puller.pull(std::move(top));

  std::vector<const Literal*> conj;
  if (matrix.k == Node::K::Lit) conj.push_back(&matrix.lit);
  if (matrix.k == Node::K::And) {
    for (const auto& k : matrix.kids) {
      if (k.k == Node::K::Lit) conj.push_back(&k.lit);
    }
  }
  for (const Literal* l : conj) {
    if (l->kind == LK::Compare && !l->negated && l->cmp == CmpOp::Eq &&
        l->lhs.is_var() && l->rhs.is_var() && l->lhs.var != l->rhs.var &&
        (l->lhs.is_bare() || l->rhs.is_bare()) && is_target(nq, l->lhs.var) &&
        is_target(nq, l->rhs.var)) {
      nq.links.push_back(*l);
    }
  }

  Block& top_block = nq.blocks[0];
  top_block.free = nq.targets;
  top_block.prefix = std::move(prefix);
  top_block.clauses = dnf(matrix);
  return nq;
}

ExprPtr range_expression(const Formula& range) { return positive_set(range); }

std::map<std::string, ExprPtr> gen_ranges(const NormalQuery& nq) {
  std::map<std::string, ExprPtr> out;
  for (const auto& [v, f] : nq.ranges) out.emplace(v, range_expression(*f));
  return out;
}

std::vector<ExprPtr> gen_predicate_objects(
    const Clause& clause, const std::map<std::string, ExprPtr>& ranges) {
  std::vector<ExprPtr> out;
  for (const auto& l : clause) {
    if (l.negated) continue;
    if (l.kind == LK::Tree || l.kind == LK::Graph) {
      out.push_back(predicate_object(l, term_set(l.lhs, ranges),
                                     term_set(l.rhs, ranges))
                        .first);
    } else if (l.kind == LK::Tuple) {
      out.push_back(plan::base(l.object));
    }
  }
  return out;
}

ExprPtr build_clause_limit(const InstanceCategory& schema,
                           const NormalQuery& nq,
                           const std::map<std::string, ExprPtr>& ranges,
                           const Clause& clause,
                           const std::vector<std::string>& columns) {
  CatBuilder cat;
  std::map<std::string, std::size_t> index;
  for (const auto& v : columns) index[v] = cat.add(ranges.at(v), v);

  // The object holding a term's value, reached from its variable.
  auto term_object = [&](const Term& t) {
    if (t.morphisms.empty()) return index.at(t.var);
    std::size_t m = cat.add(term_set(t, ranges), cat.label('m'));
    cat.arrow(index.at(t.var), m, t.function());
    return m;
  };

  for (const auto& l : clause) {
    switch (l.kind) {
      case LK::Member: {
        auto op = l.negated ? OpKind::Difference : OpKind::Intersect;
        std::size_t i = cat.add(
            plan::binary(op, ranges.at(l.var), plan::base(l.object)),
            cat.label('i'));
        cat.arrow(i, index.at(l.var), FunctionExpr::identity());
        break;
      }
      case LK::Compare:
        if (auto a = arrow_of(l, ranges)) {
          cat.arrow(index.at(a->first.var), index.at(a->second.var),
                    a->first.function());
        }
        break;
      case LK::Tree:
      case LK::Graph: {
        if (l.negated) break;
        std::size_t a = term_object(l.lhs);
        std::size_t b = term_object(l.rhs);
        auto [p, swapped] =
            predicate_object(l, cat.objects[a], cat.objects[b]);
        std::size_t k = cat.add(p, cat.label('p'));
        cat.arrow(k, swapped ? b : a, FunctionExpr::at("from"));
        cat.arrow(k, swapped ? a : b, FunctionExpr::at("to"));
        break;
      }
      case LK::Tuple: {
        if (l.negated) break;
        auto names = component_names(schema, l.object);
        std::size_t k = cat.add(plan::base(l.object), cat.label('r'));
        for (std::size_t i = 0; i < l.vars.size(); ++i) {
          cat.arrow(k, index.at(l.vars[i]), FunctionExpr::at(names[i]));
        }
        break;
      }
      case LK::Block: {
        auto cols = block_columns(nq.blocks[l.block], columns);
        auto e = compile_block(schema, nq, ranges, l.block, cols);
        std::size_t k = cat.add(e, cat.label('b'));
        for (const auto& v : cols) {
          cat.arrow(k, index.at(v), FunctionExpr::at(v));
        }
        break;
      }
    }
  }
  return cat.lim();
}

ExprPtr apply_selections(ExprPtr limit, const Clause& clause,
                         const std::map<std::string, ExprPtr>& ranges) {
  for (const auto& l : clause) {
    if (l.kind != LK::Compare || arrow_of(l, ranges)) continue;
    limit = plan::select(limit, Condition{operand(l.lhs),
                                          l.negated ? complement(l.cmp) : l.cmp,
                                          operand(l.rhs)});
  }
  return limit;
}

ExprPtr apply_exclusions(const InstanceCategory& schema, ExprPtr rows,
                         const Clause& clause,
                         const std::vector<std::string>& columns,
                         const std::map<std::string, ExprPtr>& ranges) {
  for (const auto& l : clause) {
    if (!l.negated ||
        (l.kind != LK::Tree && l.kind != LK::Graph && l.kind != LK::Tuple)) {
      continue;
    }
    // Rows of `rows` for which the literal holds, via a limit that joins
    // them with the literal's relationship object.
    CatBuilder cat;
    std::size_t q = cat.add(rows, "q");
    auto column_object = [&](const Term& t) {
      std::size_t k = cat.add(term_set(t, ranges), cat.label('m'));
      cat.arrow(q, k, FunctionExpr::at(t.var, t.function()));
      return k;
    };
    if (l.kind == LK::Tuple) {
      auto names = component_names(schema, l.object);
      std::size_t r = cat.add(plan::base(l.object), cat.label('r'));
      for (std::size_t i = 0; i < l.vars.size(); ++i) {
        Term t;
        t.var = l.vars[i];
        cat.arrow(r, column_object(t), FunctionExpr::at(names[i]));
      }
    } else {
      std::size_t a = column_object(l.lhs);
      std::size_t b = column_object(l.rhs);
      auto [p, swapped] = predicate_object(l, cat.objects[a], cat.objects[b]);
      std::size_t k = cat.add(p, cat.label('p'));
      cat.arrow(k, swapped ? b : a, FunctionExpr::at("from"));
      cat.arrow(k, swapped ? a : b, FunctionExpr::at("to"));
    }
    rows = plan::binary(OpKind::Difference, rows,
                        rename_back(cat.lim(), "q", columns));
  }
  return rows;
}

ExprPtr apply_divisions(const std::vector<ExprPtr>& clauses, const Block& block,
                        const std::vector<std::string>& columns,
                        const std::map<std::string, ExprPtr>& ranges) {
  if (clauses.empty()) {
    throw Error(ErrorCode::Unsupported, "a block without clauses");
  }
  ExprPtr r = clauses[0];
  for (std::size_t i = 1; i < clauses.size(); ++i) {
    r = plan::binary(OpKind::Union, r, clauses[i]);
  }
  std::vector<std::string> cols = columns;
  bool pending = false;  // existentials dropped but not yet projected
  for (auto it = block.prefix.rbegin(); it != block.prefix.rend(); ++it) {
    assert(cols.back() == it->var);
    if (!it->universal) {
      cols.pop_back();
      pending = true;
      continue;
    }
    if (pending) {
      r = plan::project(r, cols);
      pending = false;
    }
    cols.pop_back();
    const ExprPtr& range = ranges.at(it->var);
    // R[v] ÷ S_v, plus every candidate when S_v is empty.
    CatBuilder all;
    for (const auto& c : cols) all.add(ranges.at(c), c);
    ExprPtr candidates = all.lim();
    all.add(range, it->var);
    ExprPtr nonvacuous = plan::project(all.lim(), cols);
    r = plan::binary(
        OpKind::Union, plan::divide(r, {it->var}, range, {}),
        plan::binary(OpKind::Difference, candidates, nonvacuous));
  }
  if (pending) r = plan::project(r, cols);
  return r;
}

ExprPtr project_targets(ExprPtr combined, const NormalQuery& nq) {
  // `combined` has exactly the target columns, in order.
  ExprPtr out = std::move(combined);
  if (nq.output_names != nq.targets) {
    std::vector<ProjectItem> items;
    for (std::size_t i = 0; i < nq.targets.size(); ++i) {
      items.push_back({nq.targets[i], nq.output_names[i]});
    }
    out = plan::project(std::move(out), std::move(items));
  }
  const std::size_t n = nq.targets.size();
  if (n < 2 || nq.links.empty()) return out;

  struct Edge {
    std::size_t from, to;
    FunctionExpr fn;
  };
  auto position = [&](const std::string& v) {
    return static_cast<std::size_t>(
        std::find(nq.targets.begin(), nq.targets.end(), v) - nq.targets.begin());
  };
  std::vector<Edge> edges;
  for (const auto& l : nq.links) {
    if (l.rhs.is_bare()) {
      edges.push_back({position(l.lhs.var), position(l.rhs.var), l.lhs.function()});
    } else {
      edges.push_back({position(l.rhs.var), position(l.lhs.var), l.rhs.function()});
    }
  }
  // A spanning arborescence: every row is then fixed by its root value, so
  // the limit over the projected sets gives back exactly the rows.
  for (std::size_t root = 0; root < n; ++root) {
    std::vector<bool> seen(n, false);
    seen[root] = true;
    std::vector<const Edge*> tree;
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& e : edges) {
        if (seen[e.from] && !seen[e.to]) {
          seen[e.to] = true;
          tree.push_back(&e);
          grew = true;
        }
      }
    }
    if (tree.size() + 1 != n) continue;
    CatBuilder cat;
    for (std::size_t i = 0; i < n; ++i) {
      cat.add(plan::project(out, std::vector<std::string>{nq.output_names[i]}),
              nq.output_names[i]);
    }
    for (const Edge* e : tree) cat.arrow(e->from, e->to, e->fn);
    return plan::cat(cat.objects, cat.arrows, cat.labels);
  }
  return out;
}

namespace {

ExprPtr compile_block(const InstanceCategory& schema, const NormalQuery& nq,
                      const std::map<std::string, ExprPtr>& ranges,
                      std::size_t index, const std::vector<std::string>& free) {
  const Block& block = nq.blocks[index];
  std::vector<std::string> columns = free;
  for (const auto& q : block.prefix) columns.push_back(q.var);
  std::vector<ExprPtr> results;
  for (const auto& clause : block.clauses) {
    ExprPtr r = build_clause_limit(schema, nq, ranges, clause, columns);
    r = apply_selections(r, clause, ranges);
    if (infer_schema(schema, *r).names() != columns) {
      r = plan::project(r, columns);
    }
    r = apply_exclusions(schema, r, clause, columns, ranges);
    results.push_back(std::move(r));
  }
  return apply_divisions(results, block, columns, ranges);
}

}  // namespace

ExprPtr compile(const InstanceCategory& schema, const CalculusQuery& q) {
  NormalQuery nq = normalize(schema, q);
  auto ranges = gen_ranges(nq);
  ExprPtr body = compile_block(schema, nq, ranges, 0, nq.targets);
  return project_targets(std::move(body), nq);
}

ExprPtr compile(const InstanceCategory& schema, std::string_view query_text) {
  return compile(schema, parse_calculus(query_text, &schema));
}

}  // namespace catql
