#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "catql/model.hpp"
#include "catql/value.hpp"

namespace catql {

// ---------------------------------------------------------------------------
// Result sets

struct Column {
  std::string name;
  // Object the column's values live in, when known. Path expressions
  // applied to a column start here.
  std::optional<std::string> origin;

  bool operator==(const Column&) const = default;
};

struct Schema {
  std::vector<Column> columns;
  // Object whose elements are whole rows (only for multi-column rows that
  // are elements of a relationship object).
  std::optional<std::string> row_origin;

  [[nodiscard]] std::size_t arity() const { return columns.size(); }
  [[nodiscard]] std::optional<std::size_t> index_of(
      const std::string& name) const;
  // Throws UnknownComponent.
  [[nodiscard]] std::size_t require(const std::string& name) const;
  // Origin of a whole row: the column origin for single-column rows.
  [[nodiscard]] std::optional<std::string> origin() const;
  [[nodiscard]] std::vector<std::string> names() const;
};

// A materialized set. Single-column rows are stored as the bare value;
// wider rows are tuples.
struct ExtSet {
  Schema schema;
  std::set<Value> rows;

  [[nodiscard]] std::size_t arity() const { return schema.arity(); }
  [[nodiscard]] std::size_t size() const { return rows.size(); }
  [[nodiscard]] bool empty() const { return rows.empty(); }
  [[nodiscard]] std::vector<std::string> component_names() const {
    return schema.names();
  }

  // The i-th component of a row of this set.
  [[nodiscard]] const Value& component(const Value& row, std::size_t i) const;
  [[nodiscard]] Value make_row(std::vector<Value> parts) const;
  [[nodiscard]] std::vector<Value> split(const Value& row) const;

  bool operator==(const ExtSet& other) const {
    return schema.names() == other.schema.names() && rows == other.rows;
  }
};

Value make_row(std::vector<Value> parts);
std::vector<Value> split_row(const Value& row, std::size_t arity);

// ---------------------------------------------------------------------------
// Function expressions

struct FunctionExpr {
  enum class Kind {
    Path,       // x · S1 · ... · Sn
    Compose,    // fn ∘ ... ∘ f1 over named morphisms
    Product,    // f ⊗ g on a two-column row
    Component,  // apply to one named component of the row
    Table,      // explicit mapping of whole rows; names are the output columns
  };

  Kind kind = Kind::Path;
  // Path: object names. Compose: morphism names in application order.
  std::vector<std::string> names;
  std::string component;               // Component
  std::vector<FunctionExpr> children;  // Product: 2, Component: 1
  std::vector<std::pair<Value, Value>> table;  // Table, sorted by key

  static FunctionExpr identity() { return {}; }
  static FunctionExpr path(std::vector<std::string> objects);
  static FunctionExpr compose(std::vector<std::string> morphisms_in_order);
  static FunctionExpr product(FunctionExpr f, FunctionExpr g);
  static FunctionExpr at(std::string component, FunctionExpr f = identity());
  static FunctionExpr tabulated(const std::map<Value, Value>& mapping,
                                std::vector<std::string> outputs);

  [[nodiscard]] bool is_identity() const {
    return kind == Kind::Path && names.empty();
  }
  bool operator==(const FunctionExpr&) const = default;
};

// `then(f, g)` = apply f, then g, when expressible without a table.
std::optional<FunctionExpr> then(const FunctionExpr& f, const FunctionExpr& g);

// A function expression resolved against a row schema.
struct BoundFunction {
  std::function<Value(const Value&)> apply;
  std::vector<Column> output;
};

// Throws UnresolvablePath / UnknownComponent / MissingMorphism.
BoundFunction bind(const FunctionExpr& fn, const InstanceCategory& instance,
                   const Schema& input);

// ---------------------------------------------------------------------------
// Selection conditions

struct Operand {
  std::optional<Value> constant;  // set for a literal
  FunctionExpr fn;                // otherwise applied to the row

  static Operand of(FunctionExpr f) { return {std::nullopt, std::move(f)}; }
  static Operand literal(Value v) { return {std::move(v), {}}; }
  bool operator==(const Operand&) const = default;
};

struct Condition {
  Operand left;
  CmpOp op = CmpOp::Eq;
  Operand right;
  bool operator==(const Condition&) const = default;
};

// ---------------------------------------------------------------------------
// Plans

enum class OpKind {
  Base,
  Map,
  Project,
  Select,
  Union,
  Intersect,
  Difference,
  Product,
  Divide,
  GetParent,
  GetAncestor,
  GetSibling,
  GetPreceding,
  GetFollowing,
  GetReach,
  GetNHop,
  Cat,
  Lim,
};

std::string_view to_string(OpKind op);
bool is_tree_op(OpKind op);

struct AlgebraExpr;
using ExprPtr = std::shared_ptr<const AlgebraExpr>;

struct ProjectItem {
  std::string column;
  std::string alias;  // empty: keep the name
  [[nodiscard]] const std::string& output() const {
    return alias.empty() ? column : alias;
  }
  bool operator==(const ProjectItem&) const = default;
};

struct CatMorphism {
  std::string name;
  std::size_t source = 0;
  std::size_t target = 0;
  FunctionExpr fn;
  bool operator==(const CatMorphism&) const = default;
};

struct AlgebraExpr {
  OpKind op = OpKind::Base;
  std::string object;             // Base
  std::vector<ExprPtr> children;  // inputs in positional order
  FunctionExpr fn;                // Map
  std::vector<ProjectItem> items; // Project
  Condition condition;            // Select
  std::vector<std::string> divide_left;   // Divide: A on the dividend
  std::vector<std::string> divide_right;  // Divide: B on the divisor
  int hops = 0;                           // GetNHop
  std::vector<std::string> labels;        // Cat object labels
  std::vector<CatMorphism> morphisms;     // Cat
};

namespace plan {
ExprPtr base(std::string object);
ExprPtr map(ExprPtr input, FunctionExpr fn);
ExprPtr project(ExprPtr input, std::vector<ProjectItem> items);
ExprPtr project(ExprPtr input, const std::vector<std::string>& columns);
ExprPtr select(ExprPtr input, Condition condition);
ExprPtr binary(OpKind op, ExprPtr left, ExprPtr right);
ExprPtr divide(ExprPtr dividend, std::vector<std::string> a, ExprPtr divisor,
               std::vector<std::string> b);
ExprPtr tree(OpKind op, ExprPtr d1, ExprPtr d2);
ExprPtr reach(ExprPtr s, ExprPtr t, ExprPtr e);
ExprPtr nhop(ExprPtr s, ExprPtr t, ExprPtr e, int n);
// Empty labels are filled from the object expressions.
ExprPtr cat(std::vector<ExprPtr> objects, std::vector<CatMorphism> morphisms,
            std::vector<std::string> labels = {});
ExprPtr lim(ExprPtr cat_node);
// Replace the i-th child, sharing everything else.
ExprPtr with_child(const AlgebraExpr& node, std::size_t i, ExprPtr child);
}  // namespace plan

// ---------------------------------------------------------------------------
// Evaluation

// A materialized category: sets plus morphisms whose tables were checked
// total on the (possibly filtered) sources.
struct CategoryValue {
  std::vector<std::string> labels;
  std::vector<ExtSet> objects;
  struct Arrow {
    std::string name;
    std::size_t source;
    std::size_t target;
    std::map<Value, Value> table;
  };
  std::vector<Arrow> arrows;
};

ExtSet eval_base(const InstanceCategory& instance, const std::string& object);
ExtSet eval_map(const InstanceCategory& instance, const ExtSet& s,
                const FunctionExpr& f);
ExtSet eval_project(const ExtSet& r, const std::vector<ProjectItem>& items);
ExtSet eval_select(const InstanceCategory& instance, const ExtSet& s,
                   const Condition& c);
ExtSet eval_binary(OpKind op, const ExtSet& left, const ExtSet& right);
ExtSet eval_divide(const ExtSet& r, const std::vector<std::string>& a,
                   const ExtSet& s, const std::vector<std::string>& b);
// `op` is one of the five tree operators.
ExtSet eval_tree(OpKind op, const ExtSet& d1, const ExtSet& d2);
ExtSet eval_get_reach(const ExtSet& s, const ExtSet& t, const ExtSet& e);
ExtSet eval_get_nhop(const ExtSet& s, const ExtSet& t, const ExtSet& e, int n);
CategoryValue eval_cat(const InstanceCategory& instance,
                       std::vector<std::string> labels,
                       std::vector<ExtSet> objects,
                       const std::vector<CatMorphism>& morphisms);
ExtSet eval_lim(const CategoryValue& category);

// Evaluates a whole plan. A Cat at the root is flattened through Lim.
ExtSet evaluate(const InstanceCategory& instance, const AlgebraExpr& expr);
ExtSet evaluate(const InstanceCategory& instance, const ExprPtr& expr);

// Output schema without touching data.
Schema infer_schema(const InstanceCategory& instance, const AlgebraExpr& expr);

// ---------------------------------------------------------------------------
// Text form

// One line, e.g. `map(base(OrderLine), path(Product, PName))`.
std::string to_text(const AlgebraExpr& expr);
std::string to_text(const FunctionExpr& fn);
std::string to_text(const Condition& c);
// One operator per line, two-space indentation per level.
std::string to_pretty_text(const AlgebraExpr& expr);
// Accepts both forms. Throws SyntaxError with a position.
ExprPtr parse_algebra(std::string_view text);

}  // namespace catql
