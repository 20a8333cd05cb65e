#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "catql/algebra.hpp"
#include "catql/model.hpp"
#include "catql/value.hpp"

namespace catql {

// One hop of `x.Obj` (object name) or `x.@f` (morphism name).
struct PathStep {
  std::string name;
  bool morphism = false;
  bool operator==(const PathStep&) const = default;
};

// A variable with an optional path applied, or a constant.
struct CalcOperand {
  std::optional<Value> constant;
  std::string var;
  std::vector<PathStep> path;

  static CalcOperand variable(std::string v, std::vector<PathStep> p = {}) {
    return {std::nullopt, std::move(v), std::move(p)};
  }
  static CalcOperand literal(Value v) { return {std::move(v), {}, {}}; }
  [[nodiscard]] bool is_var() const { return !constant.has_value(); }
  bool operator==(const CalcOperand&) const = default;
};

enum class TreePred {
  IsParent,
  IsChild,
  IsAncestor,
  IsDescendant,
  IsSibling,
  IsPreceding,
  IsFollowing,
  IsPrecedingSibling,
  IsFollowingSibling,
};

std::string_view to_string(TreePred p);
std::optional<TreePred> parse_tree_pred(std::string_view name);
bool holds(TreePred p, const DeweyCode& a, const DeweyCode& b);

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind {
    Range,    // var in object
    Compare,  // lhs θ_M rhs
    Tree,     // θ_T(lhs, rhs)
    Graph,    // reach[E](lhs, rhs) or nhop[E, n](lhs, rhs)
    Not,
    And,
    Or,
    Implies,
    Exists,
    ForAll,
  };

  Kind kind = Kind::Range;
  std::string var;                   // Range, quantifiers
  std::optional<std::string> object; // Range object; quantifier range
  CalcOperand lhs, rhs;
  CmpOp cmp = CmpOp::Eq;
  TreePred tree = TreePred::IsParent;
  std::string edges;  // Graph
  int hops = 0;       // Graph: 0 means unbounded reachability
  std::vector<FormulaPtr> kids;

  [[nodiscard]] bool is_term() const {
    return kind == Kind::Range || kind == Kind::Compare ||
           kind == Kind::Tree || kind == Kind::Graph;
  }
  [[nodiscard]] bool is_quantifier() const {
    return kind == Kind::Exists || kind == Kind::ForAll;
  }
};

namespace formula {
FormulaPtr range(std::string var, std::string object);
FormulaPtr compare(CalcOperand lhs, CmpOp op, CalcOperand rhs);
FormulaPtr tree(TreePred p, CalcOperand a, CalcOperand b);
FormulaPtr graph(std::string edges, int hops, CalcOperand a, CalcOperand b);
FormulaPtr negate(FormulaPtr f);
FormulaPtr conj(std::vector<FormulaPtr> parts);  // flattens; one part: itself
FormulaPtr disj(std::vector<FormulaPtr> parts);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr exists(std::string var, std::optional<std::string> range,
                  FormulaPtr body);
FormulaPtr forall(std::string var, std::optional<std::string> range,
                  FormulaPtr body);
}  // namespace formula

struct CalculusQuery {
  // Each group is one target: a single variable, or a parenthesized tuple.
  std::vector<std::vector<std::string>> target_groups;
  FormulaPtr body;

  [[nodiscard]] std::vector<std::string> targets() const;
};

std::set<std::string> free_variables(const Formula& f);
// Top-level conjuncts of `f` (flattening nested And).
std::vector<FormulaPtr> conjuncts(const FormulaPtr& f);

// A conjunct built only from range terms over `var` with and/or/not.
bool is_range_formula(const Formula& f, const std::string& var);
// The above, and every satisfying value lies in a positively named object.
bool is_positive_range(const Formula& f, const std::string& var);
// Objects named positively in a range formula of `var`.
std::set<std::string> positive_objects(const Formula& f, const std::string& var);

// Parses `{ targets | formula }`. With a schema, object and morphism names
// are checked. Throws SyntaxError, UnknownObject, UnboundVariable.
CalculusQuery parse_calculus(std::string_view text,
                             const InstanceCategory* schema = nullptr);

std::string to_text(const Formula& f);
std::string to_text(const CalculusQuery& q);

struct UnsafeVariable {
  std::string var;
  char rule;  // 'a'..'d'
  std::string detail;
};

std::vector<UnsafeVariable> check_safety(const CalculusQuery& q);

// The function expression applied by a path, starting from `home` when the
// path has object steps.
FunctionExpr to_function(const std::vector<PathStep>& path);

// All-pairs path lengths over an edge relation (Floyd-Warshall). dist(a, b)
// is the length of the shortest path with at least one edge, or nullopt.
class ClosureOracle {
 public:
  explicit ClosureOracle(const std::set<Value>& edges);
  [[nodiscard]] std::optional<int> distance(const Value& a, const Value& b) const;

 private:
  std::map<Value, std::size_t> index_;
  std::vector<std::vector<int>> dist_;
};

// Enumerates assignments of the target variables and evaluates the body
// under first-order semantics. Throws UnsafeQuery for unsafe queries. A
// target ranging over a relationship object yields one column per component,
// named `target.component`.
ExtSet brute_eval(const InstanceCategory& instance, const CalculusQuery& q);

// The object a variable's paths start from: a quantifier's range, or the
// leftmost positive object of a free variable's range conjunct. Empty when
// the range is a union.
std::map<std::string, std::string> home_objects(const CalculusQuery& q);

}  // namespace catql
