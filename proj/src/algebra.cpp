#include "catql/algebra.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <map>
#include <numeric>

#include "catql/error.hpp"

namespace catql {

// ---------------------------------------------------------------------------
// Schema / ExtSet

std::optional<std::size_t> Schema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::require(const std::string& name) const {
  if (auto i = index_of(name)) return *i;
  std::string have;
  for (const auto& c : columns) have += (have.empty() ? "" : ", ") + c.name;
  throw Error(ErrorCode::UnknownComponent,
              "no component '" + name + "' in [" + have + "]");
}

std::optional<std::string> Schema::origin() const {
  if (columns.size() == 1) return columns[0].origin;
  return row_origin;
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

Value make_row(std::vector<Value> parts) {
  if (parts.size() == 1) return std::move(parts[0]);
  return Value(Tuple(std::move(parts)));
}

std::vector<Value> split_row(const Value& row, std::size_t arity) {
  if (arity == 1) return {row};
  return row.as_tuple();
}

const Value& ExtSet::component(const Value& row, std::size_t i) const {
  if (arity() == 1) return row;
  return row.as_tuple()[i];
}

Value ExtSet::make_row(std::vector<Value> parts) const {
  return catql::make_row(std::move(parts));
}

std::vector<Value> ExtSet::split(const Value& row) const {
  return split_row(row, arity());
}

namespace {

// Repeated names get a positional suffix: a, a#2, a#3.
void uniquify(std::vector<std::string>& names) {
  std::map<std::string, int> seen;
  std::set<std::string> taken(names.begin(), names.end());
  for (auto& n : names) {
    int k = ++seen[n];
    if (k == 1) continue;
    std::string candidate;
    do {
      candidate = n + "#" + std::to_string(k++);
    } while (taken.contains(candidate));
    taken.insert(candidate);
    n = candidate;
  }
}

void uniquify(std::vector<Column>& columns) {
  std::vector<std::string> names;
  for (const auto& c : columns) names.push_back(c.name);
  uniquify(names);
  for (std::size_t i = 0; i < columns.size(); ++i) columns[i].name = names[i];
}

Schema single(const Column& c) { return Schema{{c}, std::nullopt}; }

}  // namespace

// ---------------------------------------------------------------------------
// FunctionExpr

FunctionExpr FunctionExpr::path(std::vector<std::string> objects) {
  FunctionExpr f;
  f.kind = Kind::Path;
  f.names = std::move(objects);
  return f;
}

FunctionExpr FunctionExpr::compose(std::vector<std::string> morphisms_in_order) {
  FunctionExpr f;
  f.kind = Kind::Compose;
  f.names = std::move(morphisms_in_order);
  return f;
}

FunctionExpr FunctionExpr::product(FunctionExpr f, FunctionExpr g) {
  FunctionExpr p;
  p.kind = Kind::Product;
  p.children = {std::move(f), std::move(g)};
  return p;
}

FunctionExpr FunctionExpr::at(std::string component, FunctionExpr f) {
  FunctionExpr p;
  p.kind = Kind::Component;
  p.component = std::move(component);
  p.children = {std::move(f)};
  return p;
}

FunctionExpr FunctionExpr::tabulated(const std::map<Value, Value>& mapping,
                                     std::vector<std::string> outputs) {
  FunctionExpr p;
  p.kind = Kind::Table;
  p.names = std::move(outputs);
  p.table.assign(mapping.begin(), mapping.end());
  return p;
}

std::optional<FunctionExpr> then(const FunctionExpr& f, const FunctionExpr& g) {
  using K = FunctionExpr::Kind;
  if (g.is_identity()) return f;
  if (f.is_identity()) return g;
  if (f.kind == K::Path && g.kind == K::Path) {
    auto names = f.names;
    names.insert(names.end(), g.names.begin(), g.names.end());
    return FunctionExpr::path(std::move(names));
  }
  if (f.kind == K::Compose && g.kind == K::Compose) {
    auto names = f.names;
    names.insert(names.end(), g.names.begin(), g.names.end());
    return FunctionExpr::compose(std::move(names));
  }
  if (f.kind == K::Component) {
    if (auto inner = then(f.children[0], g)) {
      return FunctionExpr::at(f.component, std::move(*inner));
    }
  }
  return std::nullopt;
}

BoundFunction bind(const FunctionExpr& fn, const InstanceCategory& instance,
                   const Schema& input) {
  using K = FunctionExpr::Kind;
  const std::size_t arity = input.arity();
  switch (fn.kind) {
    case K::Path: {
      if (fn.names.empty()) {
        return {[](const Value& v) { return v; }, input.columns};
      }
      std::size_t skip = 0;
      std::optional<std::size_t> comp;
      std::optional<std::string> start;
      if (arity > 1) {
        comp = input.index_of(fn.names[0]);
        if (comp) {
          skip = 1;
          start = input.columns[*comp].origin;
        } else {
          start = input.row_origin;
        }
      } else {
        start = input.columns[0].origin;
      }
      std::vector<std::string> hops(fn.names.begin() + skip, fn.names.end());
      if (hops.empty()) {
        std::size_t i = *comp;
        return {[i](const Value& v) { return v.as_tuple()[i]; },
                {input.columns[i]}};
      }
      if (!start) {
        throw Error(ErrorCode::UnresolvablePath,
                    "cannot apply " + to_text(fn) +
                        ": the starting object of the row is unknown");
      }
      auto m = std::make_shared<const Morphism>(
          instance.resolve_path(*start, hops));
      Column out{hops.back(), hops.back()};
      if (comp) {
        std::size_t i = *comp;
        return {[m, i](const Value& v) { return m->apply(v.as_tuple()[i]); },
                {out}};
      }
      return {[m](const Value& v) { return m->apply(v); }, {out}};
    }
    case K::Compose: {
      if (fn.names.empty()) {
        return {[](const Value& v) { return v; }, input.columns};
      }
      auto start = input.origin();
      const Morphism& first = instance.morphism(fn.names[0]);
      if (start && *start != first.source) {
        throw Error(ErrorCode::UnresolvablePath,
                    "morphism " + first.name + " starts at " + first.source +
                        ", not at " + *start);
      }
      Morphism acc = first;
      for (std::size_t i = 1; i < fn.names.size(); ++i) {
        acc = catql::compose(acc, instance.morphism(fn.names[i]));
      }
      auto m = std::make_shared<const Morphism>(std::move(acc));
      Column out{m->target, m->target};
      return {[m](const Value& v) { return m->apply(v); }, {out}};
    }
    case K::Component: {
      std::size_t i = input.require(fn.component);
      auto inner = bind(fn.children[0], instance, single(input.columns[i]));
      auto apply = inner.apply;
      if (arity == 1) return {apply, inner.output};
      return {[apply, i](const Value& v) { return apply(v.as_tuple()[i]); },
              inner.output};
    }
    case K::Table: {
      auto table = std::make_shared<const std::map<Value, Value>>(
          fn.table.begin(), fn.table.end());
      std::vector<Column> out;
      for (const auto& n : fn.names) out.push_back(Column{n, std::nullopt});
      return {[table](const Value& v) -> Value {
                auto it = table->find(v);
                if (it == table->end()) {
                  throw Error(ErrorCode::UnresolvablePath,
                              v.to_literal() + " is outside the table's domain");
                }
                return it->second;
              },
              out};
    }
    case K::Product: {
      if (arity != 2) {
        throw Error(ErrorCode::UnresolvablePath,
                    to_text(fn) + " needs a two-component row, got " +
                        std::to_string(arity));
      }
      auto f = bind(fn.children[0], instance, single(input.columns[0]));
      auto g = bind(fn.children[1], instance, single(input.columns[1]));
      if (f.output.size() != 1 || g.output.size() != 1) {
        throw Error(ErrorCode::UnresolvablePath,
                    "tensor factors must produce single values");
      }
      std::vector<Column> out{f.output[0], g.output[0]};
      uniquify(out);
      auto fa = f.apply;
      auto ga = g.apply;
      return {[fa, ga](const Value& v) {
                const auto& t = v.as_tuple();
                return Value(Tuple{fa(t[0]), ga(t[1])});
              },
              out};
    }
  }
  throw Error(ErrorCode::Unsupported, "unknown function expression");
}

// ---------------------------------------------------------------------------
// Plan construction

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::Base: return "base";
    case OpKind::Map: return "map";
    case OpKind::Project: return "project";
    case OpKind::Select: return "select";
    case OpKind::Union: return "union";
    case OpKind::Intersect: return "intersect";
    case OpKind::Difference: return "difference";
    case OpKind::Product: return "product";
    case OpKind::Divide: return "divide";
    case OpKind::GetParent: return "getParent";
    case OpKind::GetAncestor: return "getAncestor";
    case OpKind::GetSibling: return "getSibling";
    case OpKind::GetPreceding: return "getPreceding";
    case OpKind::GetFollowing: return "getFollowing";
    case OpKind::GetReach: return "getReach";
    case OpKind::GetNHop: return "getNHop";
    case OpKind::Cat: return "cat";
    case OpKind::Lim: return "lim";
  }
  return "?";
}

bool is_tree_op(OpKind op) {
  switch (op) {
    case OpKind::GetParent:
    case OpKind::GetAncestor:
    case OpKind::GetSibling:
    case OpKind::GetPreceding:
    case OpKind::GetFollowing:
      return true;
    default:
      return false;
  }
}

namespace plan {

namespace {
std::shared_ptr<AlgebraExpr> node(OpKind op, std::vector<ExprPtr> children) {
  auto n = std::make_shared<AlgebraExpr>();
  n->op = op;
  n->children = std::move(children);
  return n;
}

std::string default_label(const AlgebraExpr& e, std::size_t index) {
  switch (e.op) {
    case OpKind::Base: return e.object;
    case OpKind::Select: return default_label(*e.children[0], index);
    case OpKind::Map:
      if (e.fn.kind == FunctionExpr::Kind::Path && !e.fn.names.empty()) {
        return e.fn.names.back();
      }
      break;
    default: break;
  }
  return "s" + std::to_string(index + 1);
}
}  // namespace

ExprPtr base(std::string object) {
  auto n = node(OpKind::Base, {});
  n->object = std::move(object);
  return n;
}

ExprPtr map(ExprPtr input, FunctionExpr fn) {
  auto n = node(OpKind::Map, {std::move(input)});
  n->fn = std::move(fn);
  return n;
}

ExprPtr project(ExprPtr input, std::vector<ProjectItem> items) {
  auto n = node(OpKind::Project, {std::move(input)});
  n->items = std::move(items);
  return n;
}

ExprPtr project(ExprPtr input, const std::vector<std::string>& columns) {
  std::vector<ProjectItem> items;
  for (const auto& c : columns) items.push_back({c, ""});
  return project(std::move(input), std::move(items));
}

ExprPtr select(ExprPtr input, Condition condition) {
  auto n = node(OpKind::Select, {std::move(input)});
  n->condition = std::move(condition);
  return n;
}

ExprPtr binary(OpKind op, ExprPtr left, ExprPtr right) {
  return node(op, {std::move(left), std::move(right)});
}

ExprPtr divide(ExprPtr dividend, std::vector<std::string> a, ExprPtr divisor,
               std::vector<std::string> b) {
  auto n = node(OpKind::Divide, {std::move(dividend), std::move(divisor)});
  n->divide_left = std::move(a);
  n->divide_right = std::move(b);
  return n;
}

ExprPtr tree(OpKind op, ExprPtr d1, ExprPtr d2) {
  return node(op, {std::move(d1), std::move(d2)});
}

ExprPtr reach(ExprPtr s, ExprPtr t, ExprPtr e) {
  return node(OpKind::GetReach, {std::move(s), std::move(t), std::move(e)});
}

ExprPtr nhop(ExprPtr s, ExprPtr t, ExprPtr e, int n) {
  auto x = node(OpKind::GetNHop, {std::move(s), std::move(t), std::move(e)});
  x->hops = n;
  return x;
}

ExprPtr cat(std::vector<ExprPtr> objects, std::vector<CatMorphism> morphisms,
            std::vector<std::string> labels) {
  labels.resize(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (labels[i].empty()) labels[i] = default_label(*objects[i], i);
  }
  uniquify(labels);
  auto n = node(OpKind::Cat, std::move(objects));
  n->labels = std::move(labels);
  n->morphisms = std::move(morphisms);
  return n;
}

ExprPtr lim(ExprPtr cat_node) { return node(OpKind::Lim, {std::move(cat_node)}); }

ExprPtr with_child(const AlgebraExpr& n, std::size_t i, ExprPtr child) {
  auto copy = std::make_shared<AlgebraExpr>(n);
  copy->children.at(i) = std::move(child);
  return copy;
}

}  // namespace plan

// ---------------------------------------------------------------------------
// Operators

ExtSet eval_base(const InstanceCategory& instance, const std::string& name) {
  const SetObject& obj = instance.object(name);
  ExtSet out;
  if (obj.arity == 1) {
    out.schema.columns = {Column{name, name}};
  } else {
    for (const auto& c : obj.component_names) {
      out.schema.columns.push_back(Column{c, std::nullopt});
    }
    for (const auto& [mname, m] : instance.morphisms()) {
      if (m.source == name && m.provenance.kind == Provenance::Kind::Projection &&
          m.provenance.component < obj.arity) {
        out.schema.columns[m.provenance.component].origin = m.target;
      }
    }
    out.schema.row_origin = name;
  }
  out.rows = obj.elements;
  return out;
}

ExtSet eval_map(const InstanceCategory& instance, const ExtSet& s,
                const FunctionExpr& f) {
  ExtSet out;
  if (f.is_identity()) return s;
  auto b = bind(f, instance, s.schema);
  out.schema.columns = b.output;
  for (const auto& row : s.rows) out.rows.insert(b.apply(row));
  return out;
}

ExtSet eval_project(const ExtSet& r, const std::vector<ProjectItem>& items) {
  if (items.empty()) {
    throw Error(ErrorCode::UnknownComponent, "projection on no components");
  }
  std::vector<std::size_t> pos;
  ExtSet out;
  std::set<std::string> names;
  bool identity = items.size() == r.arity();
  for (std::size_t k = 0; k < items.size(); ++k) {
    std::size_t i = r.schema.require(items[k].column);
    pos.push_back(i);
    Column c = r.schema.columns[i];
    c.name = items[k].output();
    if (!names.insert(c.name).second) {
      throw Error(ErrorCode::NameClash,
                  "projection produces component '" + c.name + "' twice");
    }
    identity = identity && i == k && c.name == r.schema.columns[i].name;
    out.schema.columns.push_back(std::move(c));
  }
  if (identity) {
    out.schema.row_origin = r.schema.row_origin;
    out.rows = r.rows;
    return out;
  }
  for (const auto& row : r.rows) {
    std::vector<Value> parts;
    parts.reserve(pos.size());
    for (auto i : pos) parts.push_back(r.component(row, i));
    out.rows.insert(make_row(std::move(parts)));
  }
  return out;
}

ExtSet eval_select(const InstanceCategory& instance, const ExtSet& s,
                   const Condition& c) {
  ExtSet out;
  out.schema = s.schema;
  auto side = [&](const Operand& o) -> std::function<Value(const Value&)> {
    if (o.constant) {
      Value k = *o.constant;
      return [k](const Value&) { return k; };
    }
    return bind(o.fn, instance, s.schema).apply;
  };
  auto lhs = side(c.left);
  auto rhs = side(c.right);
  for (const auto& row : s.rows) {
    if (compare(lhs(row), c.op, rhs(row))) out.rows.insert(row);
  }
  return out;
}

namespace {

std::vector<ValueKind> row_kinds(const ExtSet& s) {
  std::vector<ValueKind> out;
  if (s.empty()) return out;
  for (const auto& v : s.split(*s.rows.begin())) out.push_back(v.kind());
  return out;
}

void require_compatible(OpKind op, const ExtSet& l, const ExtSet& r) {
  if (l.arity() != r.arity()) {
    throw Error(ErrorCode::UnionIncompatible,
                std::string(to_string(op)) + " of arity " +
                    std::to_string(l.arity()) + " and " +
                    std::to_string(r.arity()));
  }
  auto lk = row_kinds(l);
  auto rk = row_kinds(r);
  if (!lk.empty() && !rk.empty() && lk != rk) {
    throw Error(ErrorCode::UnionIncompatible,
                std::string(to_string(op)) + " over different component kinds");
  }
}

Schema merge_schema(const Schema& l, const Schema& r) {
  Schema out = l;
  for (std::size_t i = 0; i < out.columns.size(); ++i) {
    if (out.columns[i].origin != r.columns[i].origin) {
      out.columns[i].origin.reset();
    }
  }
  if (out.row_origin != r.row_origin) out.row_origin.reset();
  return out;
}

}  // namespace

ExtSet eval_binary(OpKind op, const ExtSet& l, const ExtSet& r) {
  ExtSet out;
  if (op == OpKind::Product) {
    out.schema.columns = l.schema.columns;
    out.schema.columns.insert(out.schema.columns.end(),
                              r.schema.columns.begin(), r.schema.columns.end());
    uniquify(out.schema.columns);
    for (const auto& a : l.rows) {
      auto left = l.split(a);
      for (const auto& b : r.rows) {
        auto parts = left;
        auto right = r.split(b);
        parts.insert(parts.end(), right.begin(), right.end());
        out.rows.insert(make_row(std::move(parts)));
      }
    }
    return out;
  }
  require_compatible(op, l, r);
  switch (op) {
    case OpKind::Union:
      out.schema = merge_schema(l.schema, r.schema);
      out.rows = l.rows;
      out.rows.insert(r.rows.begin(), r.rows.end());
      break;
    case OpKind::Intersect:
      out.schema = l.schema;
      std::set_intersection(l.rows.begin(), l.rows.end(), r.rows.begin(),
                            r.rows.end(),
                            std::inserter(out.rows, out.rows.end()));
      break;
    case OpKind::Difference:
      out.schema = l.schema;
      std::set_difference(l.rows.begin(), l.rows.end(), r.rows.begin(),
                          r.rows.end(), std::inserter(out.rows, out.rows.end()));
      break;
    default:
      throw Error(ErrorCode::Unsupported,
                  std::string(to_string(op)) + " is not a binary set operator");
  }
  return out;
}

namespace {

std::vector<std::size_t> positions_for_divide(const Schema& s,
                                              const std::vector<std::string>& names,
                                              const char* role) {
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (const auto& n : names) {
    auto i = s.index_of(n);
    if (!i) {
      throw Error(ErrorCode::ComponentMismatch,
                  std::string(role) + " has no component '" + n + "'");
    }
    if (!seen.insert(*i).second) {
      throw Error(ErrorCode::ComponentMismatch,
                  "component '" + n + "' listed twice");
    }
    out.push_back(*i);
  }
  return out;
}

// π_Ā R − π_Ā((π_Ā R × π_B S) − R), evaluated with the generic operators.
ExtSet divide_by_composite(const ExtSet& r, const std::vector<std::size_t>& abar,
                           const std::vector<std::size_t>& apos, const ExtSet& s,
                           const std::vector<std::string>& b) {
  std::vector<ProjectItem> keep;
  for (auto i : abar) keep.push_back({r.schema.columns[i].name, ""});
  ExtSet cand = eval_project(r, keep);
  std::vector<ProjectItem> bitems;
  for (const auto& n : b) bitems.push_back({n, ""});
  ExtSet divisor = eval_project(s, bitems);
  ExtSet prod = eval_binary(OpKind::Product, cand, divisor);
  // Realign the product's columns to R's layout before subtracting.
  std::vector<ProjectItem> align(r.arity());
  for (std::size_t k = 0; k < abar.size(); ++k) {
    align[abar[k]] = {prod.schema.columns[k].name, ""};
  }
  for (std::size_t k = 0; k < apos.size(); ++k) {
    align[apos[k]] = {prod.schema.columns[abar.size() + k].name, ""};
  }
  ExtSet aligned = eval_project(prod, align);
  ExtSet missing = eval_binary(OpKind::Difference, aligned, r);
  return eval_binary(OpKind::Difference, cand, eval_project(missing, [&] {
                       std::vector<ProjectItem> items;
                       for (auto i : abar) {
                         items.push_back({aligned.schema.columns[i].name, ""});
                       }
                       return items;
                     }()));
}

}  // namespace

ExtSet eval_divide(const ExtSet& r, const std::vector<std::string>& a,
                   const ExtSet& s, const std::vector<std::string>& b_in) {
  std::vector<std::string> b = b_in.empty() ? s.component_names() : b_in;
  if (a.empty()) {
    throw Error(ErrorCode::ComponentMismatch, "division on no components");
  }
  if (a.size() != b.size()) {
    throw Error(ErrorCode::ComponentMismatch,
                "division aligns " + std::to_string(a.size()) +
                    " dividend components with " + std::to_string(b.size()) +
                    " divisor components");
  }
  auto apos = positions_for_divide(r.schema, a, "dividend");
  auto bpos = positions_for_divide(s.schema, b, "divisor");
  std::vector<std::size_t> abar;
  for (std::size_t i = 0; i < r.arity(); ++i) {
    if (std::find(apos.begin(), apos.end(), i) == apos.end()) abar.push_back(i);
  }
  if (abar.empty()) {
    throw Error(ErrorCode::ComponentMismatch,
                "division would leave no components");
  }
  if (!r.empty() && !s.empty()) {
    const Value& r0 = *r.rows.begin();
    const Value& s0 = *s.rows.begin();
    for (std::size_t k = 0; k < apos.size(); ++k) {
      if (r.component(r0, apos[k]).kind() != s.component(s0, bpos[k]).kind()) {
        throw Error(ErrorCode::ComponentMismatch,
                    "components " + a[k] + " and " + b[k] +
                        " hold different kinds");
      }
    }
  }

  auto key_of = [](const ExtSet& x, const Value& row,
                   const std::vector<std::size_t>& pos) {
    std::vector<Value> parts;
    for (auto i : pos) parts.push_back(x.component(row, i));
    return make_row(std::move(parts));
  };

  std::map<Value, std::set<Value>> groups;
  for (const auto& row : r.rows) {
    groups[key_of(r, row, abar)].insert(key_of(r, row, apos));
  }
  std::set<Value> divisor;
  for (const auto& row : s.rows) divisor.insert(key_of(s, row, bpos));

  ExtSet out;
  for (auto i : abar) out.schema.columns.push_back(r.schema.columns[i]);
  for (const auto& [key, have] : groups) {
    if (std::includes(have.begin(), have.end(), divisor.begin(),
                      divisor.end())) {
      out.rows.insert(key);
    }
  }
#ifndef NDEBUG
  assert(divide_by_composite(r, abar, apos, s, b).rows == out.rows);
#else
  (void)&divide_by_composite;
#endif
  return out;
}

namespace {

void require_dewey(const ExtSet& d, const char* role, OpKind op) {
  if (d.arity() != 1) {
    throw Error(ErrorCode::KindMismatch,
                std::string(to_string(op)) + ": " + role +
                    " must be a set of Dewey codes, got arity " +
                    std::to_string(d.arity()));
  }
  for (const auto& v : d.rows) {
    if (v.kind() != ValueKind::Dewey) {
      throw Error(ErrorCode::KindMismatch,
                  std::string(to_string(op)) + ": " + role + " holds " +
                      v.to_literal() + ", not a Dewey code");
    }
  }
}

Schema pair_schema(const ExtSet& a, const ExtSet& b) {
  return Schema{{Column{"from", a.schema.origin()},
                 Column{"to", b.schema.origin()}},
                std::nullopt};
}

}  // namespace

ExtSet eval_tree(OpKind op, const ExtSet& d1, const ExtSet& d2) {
  if (!is_tree_op(op)) {
    throw Error(ErrorCode::Unsupported,
                std::string(to_string(op)) + " is not a tree operator");
  }
  require_dewey(d1, "first input", op);
  require_dewey(d2, "second input", op);
  ExtSet out;
  out.schema = pair_schema(d1, d2);
  auto emit = [&](const Value& x, const Value& y) {
    out.rows.insert(Value(Tuple{x, y}));
  };
  switch (op) {
    case OpKind::GetParent:
      for (const auto& y : d2.rows) {
        const auto& dy = y.as_dewey();
        if (dy.is_root()) continue;
        Value p(dy.parent());
        if (d1.rows.contains(p)) emit(p, y);
      }
      break;
    case OpKind::GetAncestor:
      for (const auto& y : d2.rows) {
        const auto& parts = y.as_dewey().components();
        for (std::size_t len = 0; len < parts.size(); ++len) {
          Value p(DeweyCode(std::vector<std::uint32_t>(parts.begin(),
                                                       parts.begin() + len)));
          if (d1.rows.contains(p)) emit(p, y);
        }
      }
      break;
    case OpKind::GetSibling: {
      std::map<DeweyCode, std::vector<Value>> by_parent;
      for (const auto& y : d2.rows) {
        if (!y.as_dewey().is_root()) by_parent[y.as_dewey().parent()].push_back(y);
      }
      for (const auto& x : d1.rows) {
        if (x.as_dewey().is_root()) continue;
        auto it = by_parent.find(x.as_dewey().parent());
        if (it == by_parent.end()) continue;
        for (const auto& y : it->second) {
          if (!(x == y)) emit(x, y);
        }
      }
      break;
    }
    case OpKind::GetPreceding:
      for (const auto& x : d1.rows) {
        const auto& dx = x.as_dewey();
        for (const auto& y : d2.rows) {
          if (dx.precedes(y.as_dewey()) && !dx.is_ancestor_of(y.as_dewey())) {
            emit(x, y);
          }
        }
      }
      break;
    case OpKind::GetFollowing:
      for (const auto& x : d1.rows) {
        const auto& dx = x.as_dewey();
        for (const auto& y : d2.rows) {
          const auto& dy = y.as_dewey();
          if (dy.precedes(dx) && !dy.is_ancestor_of(dx)) emit(x, y);
        }
      }
      break;
    default:
      break;
  }
  return out;
}

namespace {

void require_graph(const ExtSet& s, const ExtSet& t, const ExtSet& e,
                   OpKind op) {
  const std::string name(to_string(op));
  if (s.arity() != 1 || t.arity() != 1) {
    throw Error(ErrorCode::KindMismatch,
                name + ": source and target sets must have arity 1");
  }
  if (e.arity() != 2) {
    throw Error(ErrorCode::KindMismatch,
                name + ": the edge set must have arity 2, got " +
                    std::to_string(e.arity()));
  }
  if (e.empty()) return;
  const auto& edge = e.rows.begin()->as_tuple();
  if (!s.empty() && s.rows.begin()->kind() != edge[0].kind()) {
    throw Error(ErrorCode::KindMismatch,
                name + ": edge sources are " +
                    std::string(to_string(edge[0].kind())) +
                    " but the source set holds " +
                    std::string(to_string(s.rows.begin()->kind())));
  }
  if (!t.empty() && t.rows.begin()->kind() != edge[1].kind()) {
    throw Error(ErrorCode::KindMismatch,
                name + ": edge targets are " +
                    std::string(to_string(edge[1].kind())) +
                    " but the target set holds " +
                    std::string(to_string(t.rows.begin()->kind())));
  }
}

// Pairs (x, y) with x in S, y in T and a path of 1..limit edges (limit < 0:
// unbounded).
ExtSet bounded_reach(const ExtSet& s, const ExtSet& t, const ExtSet& e,
                     long limit) {
  std::map<Value, std::vector<Value>> adj;
  for (const auto& row : e.rows) {
    const auto& edge = row.as_tuple();
    adj[edge[0]].push_back(edge[1]);
  }
  ExtSet out;
  out.schema = pair_schema(s, t);
  for (const auto& x : s.rows) {
    std::set<Value> seen;
    std::vector<Value> frontier{x};
    for (long depth = 1; !frontier.empty() && (limit < 0 || depth <= limit);
         ++depth) {
      std::vector<Value> next;
      for (const auto& u : frontier) {
        auto it = adj.find(u);
        if (it == adj.end()) continue;
        for (const auto& v : it->second) {
          if (seen.insert(v).second) next.push_back(v);
        }
      }
      frontier = std::move(next);
    }
    for (const auto& y : seen) {
      if (t.rows.contains(y)) out.rows.insert(Value(Tuple{x, y}));
    }
  }
  return out;
}

}  // namespace

ExtSet eval_get_reach(const ExtSet& s, const ExtSet& t, const ExtSet& e) {
  require_graph(s, t, e, OpKind::GetReach);
  return bounded_reach(s, t, e, -1);
}

ExtSet eval_get_nhop(const ExtSet& s, const ExtSet& t, const ExtSet& e, int n) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidHopCount,
                "hop count must be at least 1, got " + std::to_string(n));
  }
  require_graph(s, t, e, OpKind::GetNHop);
  return bounded_reach(s, t, e, n);
}

CategoryValue eval_cat(const InstanceCategory& instance,
                       std::vector<std::string> labels,
                       std::vector<ExtSet> objects,
                       const std::vector<CatMorphism>& morphisms) {
  CategoryValue out;
  labels.resize(objects.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) labels[i] = "s" + std::to_string(i + 1);
  }
  uniquify(labels);
  out.labels = std::move(labels);
  out.objects = std::move(objects);
  for (const auto& decl : morphisms) {
    if (decl.source >= out.objects.size() || decl.target >= out.objects.size()) {
      throw Error(ErrorCode::UnresolvablePath,
                  "morphism " + decl.name + " refers to a missing object");
    }
    const ExtSet& src = out.objects[decl.source];
    const ExtSet& dst = out.objects[decl.target];
    auto b = bind(decl.fn, instance, src.schema);
    if (b.output.size() != dst.arity()) {
      throw Error(ErrorCode::PartialFunction,
                  "morphism " + decl.name + " produces " +
                      std::to_string(b.output.size()) +
                      "-component values but " + out.labels[decl.target] +
                      " has arity " + std::to_string(dst.arity()));
    }
    CategoryValue::Arrow arrow{decl.name, decl.source, decl.target, {}};
    for (const auto& x : src.rows) {
      std::optional<Value> y;
      try {
        y = b.apply(x);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::UnresolvablePath) throw;
      }
      if (!y || !dst.rows.contains(*y)) {
        throw Error(ErrorCode::PartialFunction,
                    "morphism " + decl.name + " is not total: " +
                        x.to_literal() + " has no image in " +
                        out.labels[decl.target] +
                        (y ? " (maps to " + y->to_literal() + ")" : ""));
      }
      arrow.table.emplace(x, std::move(*y));
    }
    out.arrows.push_back(std::move(arrow));
  }
  return out;
}

namespace {

Schema lim_schema(const std::vector<std::string>& labels,
                  const std::vector<ExtSet>& objects) {
  Schema s;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& cols = objects[i].schema.columns;
    if (cols.size() == 1) {
      s.columns.push_back(Column{labels[i], cols[0].origin});
    } else {
      for (const auto& c : cols) {
        s.columns.push_back(Column{labels[i] + "." + c.name, c.origin});
      }
    }
  }
  uniquify(s.columns);
  return s;
}

}  // namespace

ExtSet eval_lim(const CategoryValue& cat) {
  const std::size_t n = cat.objects.size();
  ExtSet out;
  out.schema = lim_schema(cat.labels, cat.objects);
  if (n == 0) return out;
  for (const auto& o : cat.objects) {
    if (o.empty()) return out;
  }

  using Partial = std::vector<const Value*>;
  std::vector<bool> joined(n, false);
  std::vector<bool> checked(cat.arrows.size(), false);
  std::vector<Partial> partials;

  auto smallest_unjoined = [&] {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!joined[i] &&
          (best == n || cat.objects[i].size() < cat.objects[best].size())) {
        best = i;
      }
    }
    return best;
  };

  std::size_t seed = smallest_unjoined();
  for (const auto& row : cat.objects[seed].rows) {
    Partial p(n, nullptr);
    p[seed] = &row;
    partials.push_back(std::move(p));
  }
  joined[seed] = true;

  auto filter_closed = [&] {
    for (std::size_t k = 0; k < cat.arrows.size(); ++k) {
      const auto& a = cat.arrows[k];
      if (checked[k] || !joined[a.source] || !joined[a.target]) continue;
      checked[k] = true;
      std::erase_if(partials, [&](const Partial& p) {
        return !(a.table.at(*p[a.source]) == *p[a.target]);
      });
    }
  };
  filter_closed();

  for (std::size_t step = 1; step < n && !partials.empty(); ++step) {
    std::optional<std::size_t> forward, backward;
    for (std::size_t k = 0; k < cat.arrows.size(); ++k) {
      const auto& a = cat.arrows[k];
      if (joined[a.source] && !joined[a.target] && !forward) forward = k;
      if (!joined[a.source] && joined[a.target] && !backward) backward = k;
    }
    std::vector<Partial> next;
    std::size_t added;
    if (forward) {
      const auto& a = cat.arrows[*forward];
      added = a.target;
      const auto& rows = cat.objects[added].rows;
      for (auto& p : partials) {
        auto it = rows.find(a.table.at(*p[a.source]));
        if (it == rows.end()) continue;
        p[added] = &*it;
        next.push_back(std::move(p));
      }
      checked[*forward] = true;
    } else if (backward) {
      const auto& a = cat.arrows[*backward];
      added = a.source;
      std::multimap<Value, const Value*> by_image;
      for (const auto& [x, y] : a.table) {
        by_image.emplace(y, &*cat.objects[added].rows.find(x));
      }
      for (const auto& p : partials) {
        auto [lo, hi] = by_image.equal_range(*p[a.target]);
        for (auto it = lo; it != hi; ++it) {
          Partial q = p;
          q[added] = it->second;
          next.push_back(std::move(q));
        }
      }
      checked[*backward] = true;
    } else {
      added = smallest_unjoined();
      for (const auto& p : partials) {
        for (const auto& row : cat.objects[added].rows) {
          Partial q = p;
          q[added] = &row;
          next.push_back(std::move(q));
        }
      }
    }
    partials = std::move(next);
    joined[added] = true;
    filter_closed();
  }

  for (const auto& p : partials) {
    std::vector<Value> parts;
    for (std::size_t i = 0; i < n; ++i) {
      auto pieces = cat.objects[i].split(*p[i]);
      parts.insert(parts.end(), pieces.begin(), pieces.end());
    }
    out.rows.insert(make_row(std::move(parts)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plan evaluation

namespace {

ExtSet eval_node(const InstanceCategory& inst, const AlgebraExpr& e,
                 bool schema_only);

CategoryValue eval_cat_node(const InstanceCategory& inst, const AlgebraExpr& e,
                            bool schema_only) {
  if (e.op != OpKind::Cat) {
    throw Error(ErrorCode::Unsupported, "lim expects a cat node");
  }
  if (e.children.empty()) {
    throw Error(ErrorCode::Unsupported, "cat needs at least one object");
  }
  std::vector<ExtSet> objects;
  for (const auto& c : e.children) {
    objects.push_back(eval_node(inst, *c, schema_only));
  }
  return eval_cat(inst, e.labels, std::move(objects), e.morphisms);
}

ExtSet eval_node(const InstanceCategory& inst, const AlgebraExpr& e,
                 bool schema_only) {
  auto child = [&](std::size_t i) {
    if (i >= e.children.size()) {
      throw Error(ErrorCode::Unsupported,
                  std::string(to_string(e.op)) + " is missing an input");
    }
    return eval_node(inst, *e.children[i], schema_only);
  };
  switch (e.op) {
    case OpKind::Base: {
      if (!schema_only) return eval_base(inst, e.object);
      ExtSet s = eval_base(inst, e.object);
      s.rows.clear();
      return s;
    }
    case OpKind::Map: {
      ExtSet in = child(0);
      if (schema_only && !e.fn.is_identity()) {
        ExtSet s;
        s.schema.columns = bind(e.fn, inst, in.schema).output;
        return s;
      }
      return eval_map(inst, in, e.fn);
    }
    case OpKind::Project:
      return eval_project(child(0), e.items);
    case OpKind::Select: {
      ExtSet in = child(0);
      if (schema_only) {
        if (!e.condition.left.constant) bind(e.condition.left.fn, inst, in.schema);
        if (!e.condition.right.constant) bind(e.condition.right.fn, inst, in.schema);
        return in;
      }
      return eval_select(inst, in, e.condition);
    }
    case OpKind::Union:
    case OpKind::Intersect:
    case OpKind::Difference:
    case OpKind::Product:
      return eval_binary(e.op, child(0), child(1));
    case OpKind::Divide:
      return eval_divide(child(0), e.divide_left, child(1), e.divide_right);
    case OpKind::GetParent:
    case OpKind::GetAncestor:
    case OpKind::GetSibling:
    case OpKind::GetPreceding:
    case OpKind::GetFollowing:
      return eval_tree(e.op, child(0), child(1));
    case OpKind::GetReach:
      return eval_get_reach(child(0), child(1), child(2));
    case OpKind::GetNHop:
      return eval_get_nhop(child(0), child(1), child(2), e.hops);
    case OpKind::Cat:
      return eval_lim(eval_cat_node(inst, e, schema_only));
    case OpKind::Lim:
      if (e.children.size() != 1) {
        throw Error(ErrorCode::Unsupported, "lim takes exactly one cat");
      }
      return eval_lim(eval_cat_node(inst, *e.children[0], schema_only));
  }
  throw Error(ErrorCode::Unsupported, "unknown operator");
}

}  // namespace

ExtSet evaluate(const InstanceCategory& instance, const AlgebraExpr& expr) {
  return eval_node(instance, expr, false);
}

ExtSet evaluate(const InstanceCategory& instance, const ExprPtr& expr) {
  return eval_node(instance, *expr, false);
}

Schema infer_schema(const InstanceCategory& instance, const AlgebraExpr& expr) {
  return eval_node(instance, expr, true).schema;
}

}  // namespace catql
