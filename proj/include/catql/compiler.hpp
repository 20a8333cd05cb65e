#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catql/algebra.hpp"
#include "catql/calculus.hpp"
#include "catql/model.hpp"

namespace catql {

// A variable with a resolved chain of morphisms, or a constant.
struct Term {
  std::optional<Value> constant;
  std::string var;
  std::vector<std::string> morphisms;    // application order
  std::optional<std::string> codomain;   // object reached, when known

  [[nodiscard]] bool is_var() const { return !constant.has_value(); }
  [[nodiscard]] bool is_bare() const { return is_var() && morphisms.empty(); }
  [[nodiscard]] FunctionExpr function() const {
    return morphisms.empty() ? FunctionExpr::identity()
                             : FunctionExpr::compose(morphisms);
  }
};

struct Literal {
  enum class Kind {
    Member,   // var in object
    Compare,  // lhs θ_M rhs
    Tree,     // θ_T(lhs, rhs)
    Graph,    // reach / nhop
    Tuple,    // (vars...) in relationship object
    Block,    // nested quantified block
  };
  Kind kind = Kind::Member;
  bool negated = false;
  std::string var;                // Member
  std::string object;             // Member, Tuple; Graph: the edge object
  Term lhs, rhs;                  // Compare, Tree, Graph
  CmpOp cmp = CmpOp::Eq;
  TreePred tree = TreePred::IsParent;
  int hops = 0;                   // Graph: 0 is unbounded
  std::vector<std::string> vars;  // Tuple
  std::size_t block = 0;          // Block: index into NormalQuery::blocks
};

using Clause = std::vector<Literal>;

struct Quantifier {
  bool universal = false;
  std::string var;
};

// Q1 v1 ... Qk vk (C1 or ... or Cm). Quantifiers that cannot be pulled out
// soundly stay behind a Block literal.
struct Block {
  std::vector<std::string> free;  // result columns; empty for a sentence
  std::vector<Quantifier> prefix;
  std::vector<Clause> clauses;    // an empty clause is true
};

struct NormalQuery {
  // Renamed target variables (x1, x2, ...) and the names shown for them.
  // A target ranging over a relationship object becomes one variable per
  // component, shown as `r.component`.
  std::vector<std::string> targets;
  std::vector<std::string> output_names;
  // Range of every variable: the defining conjunct of a target, or the
  // quantifier's object.
  std::map<std::string, FormulaPtr> ranges;
  std::map<std::string, std::string> original;  // renamed -> source name
  std::vector<Block> blocks;                    // blocks[0] is the query body
  // Positive top-level `u.f = w` conjuncts between targets, kept for the
  // final Cat.
  std::vector<Literal> links;
};

// Implications removed, negations pushed to literals, variables renamed
// apart, relationship variables split into components, quantifiers pulled
// out where sound, matrices in DNF. Throws UnsafeQuery, UnresolvablePath,
// MissingMorphism, Unsupported.
NormalQuery normalize(const InstanceCategory& schema, const CalculusQuery& q);

// Set expression per variable: x in O => O, or => union, and => intersect,
// and not => difference.
std::map<std::string, ExprPtr> gen_ranges(const NormalQuery& nq);
ExprPtr range_expression(const Formula& range);

// Relationship objects for the positive tree, graph and tuple literals of a
// clause, in literal order.
std::vector<ExprPtr> gen_predicate_objects(
    const Clause& clause, const std::map<std::string, ExprPtr>& ranges);

// Lim over the block variables, membership objects, predicate objects and
// nested blocks of one clause, with morphisms from function terms.
// `columns` are the block variables the limit must expose, in order.
ExprPtr build_clause_limit(const InstanceCategory& schema,
                           const NormalQuery& nq,
                           const std::map<std::string, ExprPtr>& ranges,
                           const Clause& clause,
                           const std::vector<std::string>& columns);

// Selections for the comparisons not turned into morphisms.
ExprPtr apply_selections(ExprPtr limit, const Clause& clause,
                         const std::map<std::string, ExprPtr>& ranges);

// Removes the rows satisfying a negated tree, graph or tuple literal.
ExprPtr apply_exclusions(const InstanceCategory& schema, ExprPtr rows,
                         const Clause& clause,
                         const std::vector<std::string>& columns,
                         const std::map<std::string, ExprPtr>& ranges);

// Union of the clause results, then quantifier elimination from the inside
// out: exists projects, forall divides (with the empty-range case kept).
ExprPtr apply_divisions(const std::vector<ExprPtr>& clauses, const Block& block,
                        const std::vector<std::string>& columns,
                        const std::map<std::string, ExprPtr>& ranges);

// Projection onto the targets under their original names; a Cat over the
// projected sets when morphisms link all targets from one root.
ExprPtr project_targets(ExprPtr combined, const NormalQuery& nq);

ExprPtr compile(const InstanceCategory& schema, const CalculusQuery& q);
ExprPtr compile(const InstanceCategory& schema, std::string_view query_text);

}  // namespace catql
