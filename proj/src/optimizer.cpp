#include "catql/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "catql/error.hpp"

namespace catql {

namespace {

using K = FunctionExpr::Kind;

bool is_tree(OpKind op) { return is_tree_op(op); }
bool is_graph(OpKind op) { return op == OpKind::GetReach || op == OpKind::GetNHop; }

std::optional<Schema> try_schema(const InstanceCategory& inst, const AlgebraExpr& e) {
  try {
    return infer_schema(inst, e);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Column a function reads, when it reads one named column of a wider row;
// the whole row otherwise (nullopt). Arity-1 rows have one column anyway.
std::optional<std::string> column_read(const FunctionExpr& fn, const Schema& s) {
  if (s.arity() == 1) return s.columns[0].name;
  if (fn.kind == K::Component) return fn.component;
  if (fn.kind == K::Path && !fn.names.empty() && s.index_of(fn.names[0])) {
    return fn.names[0];
  }
  return std::nullopt;
}

// The part of `fn` applied after it picks its column (identity for a bare
// column reference).
std::optional<FunctionExpr> after_column(const FunctionExpr& fn, const Schema& s) {
  if (fn.kind == K::Component) return fn.children[0];
  if (fn.kind == K::Path && s.arity() > 1 && !fn.names.empty() &&
      s.index_of(fn.names[0])) {
    return FunctionExpr::path({fn.names.begin() + 1, fn.names.end()});
  }
  if (s.arity() == 1) return fn;
  return std::nullopt;
}

// `fn` over schema `s` rewritten to read column `to` of another row.
std::optional<FunctionExpr> retarget(const FunctionExpr& fn, const Schema& s,
                                     const std::string& to) {
  auto inner = after_column(fn, s);
  if (!inner) return std::nullopt;
  return FunctionExpr::at(to, *inner);
}

struct Reads {
  bool ok = true;                 // false: some operand reads a whole wide row
  std::set<std::string> columns;  // columns read
};

Reads condition_reads(const Condition& c, const Schema& s) {
  Reads r;
  for (const Operand* o : {&c.left, &c.right}) {
    if (o->constant) continue;
    auto col = column_read(o->fn, s);
    if (!col) {
      r.ok = false;
    } else {
      r.columns.insert(*col);
    }
  }
  return r;
}

std::optional<Condition> retarget(const Condition& c, const Schema& s,
                                  const std::string& to) {
  Condition out = c;
  for (Operand* o : {&out.left, &out.right}) {
    if (o->constant) continue;
    auto f = retarget(o->fn, s, to);
    if (!f) return std::nullopt;
    o->fn = std::move(*f);
  }
  return out;
}

// A Lim node with the column layout of its output.
struct LimView {
  const AlgebraExpr* cat = nullptr;
  std::vector<Schema> inputs;
  Schema output;
  // Output column -> (object index, column of that object)
  std::map<std::string, std::pair<std::size_t, std::string>> where;
};

std::optional<LimView> view_lim(const InstanceCategory& inst, const AlgebraExpr& e) {
  if (e.op != OpKind::Lim || e.children.size() != 1 ||
      e.children[0]->op != OpKind::Cat) {
    return std::nullopt;
  }
  LimView v;
  v.cat = e.children[0].get();
  for (const auto& c : v.cat->children) {
    auto s = try_schema(inst, *c);
    if (!s) return std::nullopt;
    v.inputs.push_back(*s);
  }
  auto out = try_schema(inst, e);
  if (!out) return std::nullopt;
  v.output = *out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < v.inputs.size(); ++i) {
    for (const auto& col : v.inputs[i].columns) {
      v.where[v.output.columns.at(j++).name] = {i, col.name};
    }
  }
  return v;
}

ExprPtr rebuild_lim(const AlgebraExpr& cat, std::vector<ExprPtr> objects) {
  return plan::lim(plan::cat(std::move(objects), cat.morphisms, cat.labels));
}

bool targeted(const AlgebraExpr& cat, std::size_t i) {
  return std::any_of(cat.morphisms.begin(), cat.morphisms.end(),
                     [&](const CatMorphism& m) { return m.target == i; });
}

// The morphisms form a tree rooted at `root` that reaches every object.
bool arborescence(const AlgebraExpr& cat, std::size_t root) {
  const std::size_t n = cat.children.size();
  if (cat.morphisms.size() != n - 1) return false;
  std::vector<int> incoming(n, 0);
  for (const auto& m : cat.morphisms) {
    if (m.source >= n || m.target >= n) return false;
    ++incoming[m.target];
  }
  if (incoming[root] != 0) return false;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{root};
  seen[root] = true;
  while (!stack.empty()) {
    std::size_t u = stack.back();
    stack.pop_back();
    for (const auto& m : cat.morphisms) {
      if (m.source == u && !seen[m.target]) {
        seen[m.target] = true;
        stack.push_back(m.target);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

// Projection of `input` under the given (input column, output name) list;
// the input itself when that is a no-op.
ExprPtr project_as(const ExprPtr& input, const Schema& schema,
                   const std::vector<std::pair<std::string, std::string>>& cols) {
  bool identity = cols.size() == schema.arity();
  std::vector<ProjectItem> items;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& [from, to] = cols[k];
    if (identity && (schema.columns[k].name != from || from != to)) identity = false;
    items.push_back({from, from == to ? "" : to});
  }
  if (identity) return input;
  return plan::project(input, std::move(items));
}

bool injective_on(const InstanceCategory& inst, const ExprPtr& set,
                  const FunctionExpr& fn) {
  ExtSet s = evaluate(inst, set);
  auto b = bind(fn, inst, s.schema);
  std::set<Value> images;
  for (const auto& row : s.rows) {
    if (!images.insert(b.apply(row)).second) return false;
  }
  return true;
}

bool same_names(const InstanceCategory& inst, const AlgebraExpr& a, const AlgebraExpr& b) {
  auto sa = try_schema(inst, a);
  auto sb = try_schema(inst, b);
  return sa && sb && sa->names() == sb->names();
}

}  // namespace

// ---------------------------------------------------------------------------
// Rules

std::optional<ExprPtr> rule1_cascade_f(const InstanceCategory& inst,
                                       const AlgebraExpr& e) {
  if (e.op != OpKind::Map || e.children[0]->op != OpKind::Map) return std::nullopt;
  const auto& inner = *e.children[0];
  auto fused = then(inner.fn, e.fn);
  if (!fused) return std::nullopt;
  auto out = plan::map(inner.children[0], *fused);
  if (!same_names(inst, e, *out)) return std::nullopt;
  return out;
}

std::optional<ExprPtr> rule2_lim_pi(const InstanceCategory& inst, const AlgebraExpr& e) {
  if (e.op != OpKind::Project) return std::nullopt;
  auto lv = view_lim(inst, *e.children[0]);
  if (!lv) return std::nullopt;
  std::optional<std::size_t> obj;
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& item : e.items) {
    auto it = lv->where.find(item.column);
    if (it == lv->where.end()) return std::nullopt;
    if (obj && *obj != it->second.first) return std::nullopt;
    obj = it->second.first;
    cols.emplace_back(it->second.second, item.output());
  }
  if (!obj) return std::nullopt;
  const AlgebraExpr& cat = *lv->cat;
  if (cat.morphisms.empty()) {
    // S1 × S2 × ... projects back onto S1 only when the others are non-empty.
    for (std::size_t i = 0; i < cat.children.size(); ++i) {
      if (i != *obj && evaluate(inst, cat.children[i]).empty()) return std::nullopt;
    }
  } else if (!arborescence(cat, *obj)) {
    return std::nullopt;
  }
  return project_as(cat.children[*obj], lv->inputs[*obj], cols);
}

std::optional<ExprPtr> rule3_push_select_lim(const InstanceCategory& inst,
                                             const AlgebraExpr& e) {
  if (e.op != OpKind::Select) return std::nullopt;
  auto lv = view_lim(inst, *e.children[0]);
  if (!lv) return std::nullopt;
  // Each operand reads one column; all of them must live in one object.
  std::optional<std::size_t> obj;
  Condition pushed = e.condition;
  for (Operand* o : {&pushed.left, &pushed.right}) {
    if (o->constant) continue;
    auto col = column_read(o->fn, lv->output);
    if (!col) return std::nullopt;
    auto it = lv->where.find(*col);
    if (it == lv->where.end()) return std::nullopt;
    if (obj && *obj != it->second.first) return std::nullopt;
    obj = it->second.first;
    auto f = retarget(o->fn, lv->output, it->second.second);
    if (!f) return std::nullopt;
    o->fn = std::move(*f);
  }
  if (!obj) return std::nullopt;

  const AlgebraExpr& cat = *lv->cat;
  std::vector<ExprPtr> objects = cat.children;
  const std::size_t i = *obj;
  if (targeted(cat, i)) {
    // Re-filter every source through its morphism, so the morphisms stay
    // total on the filtered objects.
    if (lv->inputs[i].arity() != 1) return std::nullopt;
    for (const auto& m : cat.morphisms) {
      if (m.target != i) continue;
      if (m.source == i || targeted(cat, m.source)) return std::nullopt;
      Condition through = pushed;
      for (Operand* o : {&through.left, &through.right}) {
        if (o->constant) continue;
        auto f = then(m.fn, o->fn.children[0]);
        if (!f) return std::nullopt;
        o->fn = *f;
      }
      objects[m.source] = plan::select(objects[m.source], through);
    }
  }
  objects[i] = plan::select(objects[i], pushed);
  return rebuild_lim(cat, std::move(objects));
}

namespace {

// σ over a binary-input pair operator (from, to) pushed onto input 0 or 1.
std::optional<ExprPtr> push_pair(const InstanceCategory& inst, const AlgebraExpr& e,
                                 bool (*accept)(OpKind)) {
  if (e.op != OpKind::Select) return std::nullopt;
  const AlgebraExpr& pair = *e.children[0];
  if (!accept(pair.op)) return std::nullopt;
  auto out = try_schema(inst, pair);
  if (!out || out->arity() != 2) return std::nullopt;
  Reads reads = condition_reads(e.condition, *out);
  if (!reads.ok || reads.columns.size() != 1) return std::nullopt;
  auto idx = out->index_of(*reads.columns.begin());
  if (!idx) return std::nullopt;
  auto in = try_schema(inst, *pair.children[*idx]);
  if (!in || in->arity() != 1) return std::nullopt;
  auto pushed = retarget(e.condition, *out, in->columns[0].name);
  if (!pushed) return std::nullopt;
  return plan::with_child(pair, *idx, plan::select(pair.children[*idx], *pushed));
}

}  // namespace

std::optional<ExprPtr> rule4_push_select_reach(const InstanceCategory& inst,
                                               const AlgebraExpr& e) {
  return push_pair(inst, e, is_graph);
}

std::optional<ExprPtr> rule5_push_select_tree(const InstanceCategory& inst,
                                              const AlgebraExpr& e) {
  return push_pair(inst, e, is_tree);
}

std::optional<ExprPtr> rule6_product_map(const InstanceCategory& inst,
                                         const AlgebraExpr& e) {
  std::optional<ExprPtr> out;
  ExprPtr s1, s2;
  FunctionExpr f, g;
  if (e.op == OpKind::Map && e.fn.kind == K::Product &&
      e.children[0]->op == OpKind::Product) {
    s1 = e.children[0]->children[0];
    s2 = e.children[0]->children[1];
    f = e.fn.children[0];
    g = e.fn.children[1];
    out = plan::binary(OpKind::Product, plan::map(s1, f), plan::map(s2, g));
  } else if (e.op == OpKind::Product && e.children[0]->op == OpKind::Map &&
             e.children[1]->op == OpKind::Map) {
    s1 = e.children[0]->children[0];
    s2 = e.children[1]->children[0];
    f = e.children[0]->fn;
    g = e.children[1]->fn;
    out = plan::map(plan::binary(OpKind::Product, s1, s2), FunctionExpr::product(f, g));
  } else {
    return std::nullopt;
  }
  auto a = try_schema(inst, *s1);
  auto b = try_schema(inst, *s2);
  if (!a || !b || a->arity() != 1 || b->arity() != 1) return std::nullopt;
  if (!same_names(inst, e, **out)) return std::nullopt;
  try {
    if (!injective_on(inst, s1, f) || !injective_on(inst, s2, g)) return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
  return out;
}

namespace {

struct TwoObjectLim {
  LimView view;
  std::size_t src = 0, dst = 1;
  const CatMorphism* arrow = nullptr;
};

std::optional<TwoObjectLim> two_object_lim(const InstanceCategory& inst,
                                           const AlgebraExpr& e) {
  auto lv = view_lim(inst, e);
  if (!lv || lv->cat->children.size() != 2 || lv->cat->morphisms.size() != 1) {
    return std::nullopt;
  }
  TwoObjectLim t;
  t.arrow = &lv->cat->morphisms[0];
  t.src = t.arrow->source;
  t.dst = t.arrow->target;
  if (t.src == t.dst) return std::nullopt;
  t.view = std::move(*lv);
  return t;
}

}  // namespace

std::optional<ExprPtr> rule7_commute_project_lim(const InstanceCategory& inst,
                                                 const AlgebraExpr& e) {
  if (e.op != OpKind::Project) return std::nullopt;
  auto t = two_object_lim(inst, *e.children[0]);
  if (!t) return std::nullopt;
  const LimView& lv = t->view;
  // L1 and L2 in input column order, with the output name of each item.
  std::vector<std::string> l[2];
  for (const auto& item : e.items) {
    auto it = lv.where.find(item.column);
    if (it == lv.where.end()) return std::nullopt;
    auto [obj, col] = it->second;
    auto& list = l[obj];
    if (std::find(list.begin(), list.end(), col) == list.end()) list.push_back(col);
  }
  if (l[0].empty() || l[1].empty()) return std::nullopt;
  for (int k = 0; k < 2; ++k) {
    const auto& cols = lv.inputs[k].columns;
    std::sort(l[k].begin(), l[k].end(), [&](const std::string& a, const std::string& b) {
      auto pos = [&](const std::string& n) {
        return std::find_if(cols.begin(), cols.end(),
                            [&](const Column& c) { return c.name == n; }) -
               cols.begin();
      };
      return pos(a) < pos(b);
    });
  }
  const auto& l1 = l[t->src];
  const auto& l2 = l[t->dst];
  const Schema& s1 = lv.inputs[t->src];
  const Schema& s2 = lv.inputs[t->dst];

  // f2 on π_L1(R1) from f1's table, checked single-valued.
  FunctionExpr f2;
  bool keeps_all = l1.size() == s1.arity() && l2.size() == s2.arity();
  if (keeps_all) {
    f2 = t->arrow->fn;
  } else {
    const AlgebraExpr& cat = *lv.cat;
    ExtSet r1 = evaluate(inst, cat.children[t->src]);
    auto f1 = bind(t->arrow->fn, inst, r1.schema);
    ExtSet r2 = evaluate(inst, cat.children[t->dst]);
    auto pick = [](const ExtSet& s, const Value& row,
                   const std::vector<std::string>& names) {
      std::vector<Value> parts;
      for (const auto& n : names) parts.push_back(s.component(row, s.schema.require(n)));
      return make_row(std::move(parts));
    };
    std::map<Value, Value> table;
    for (const auto& row : r1.rows) {
      Value key = pick(r1, row, l1);
      Value val = pick(r2, f1.apply(row), l2);
      auto [it, fresh] = table.emplace(key, val);
      if (!fresh && !(it->second == val)) return std::nullopt;
    }
    f2 = FunctionExpr::tabulated(table, l2);
  }

  std::vector<ExprPtr> objects(2);
  for (int k = 0; k < 2; ++k) {
    std::vector<std::pair<std::string, std::string>> cols;
    for (const auto& c : l[k]) cols.emplace_back(c, c);
    objects[k] = project_as(lv.cat->children[k], lv.inputs[k], cols);
  }
  CatMorphism m = *t->arrow;
  m.fn = f2;
  auto inner = plan::lim(plan::cat(objects, {m}, lv.cat->labels));
  auto inner_schema = try_schema(inst, *inner);
  if (!inner_schema) return std::nullopt;
  // Rename back to the item order and names of the original projection.
  std::map<std::pair<std::size_t, std::string>, std::string> new_name;
  {
    std::size_t j = 0;
    for (int k = 0; k < 2; ++k) {
      for (const auto& c : l[k]) new_name[{k, c}] = inner_schema->columns.at(j++).name;
    }
  }
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& item : e.items) {
    auto [obj, col] = lv.where.at(item.column);
    cols.emplace_back(new_name.at({obj, col}), item.output());
  }
  return project_as(inner, *inner_schema, cols);
}

std::optional<ExprPtr> rule8_commute_map_lim(const InstanceCategory& inst,
                                             const AlgebraExpr& e) {
  if (e.op != OpKind::Map || e.fn.kind != K::Product) return std::nullopt;
  auto t = two_object_lim(inst, *e.children[0]);
  if (!t) return std::nullopt;
  const LimView& lv = t->view;
  if (lv.inputs[0].arity() != 1 || lv.inputs[1].arity() != 1) return std::nullopt;
  auto out_schema = try_schema(inst, e);
  if (!out_schema) return std::nullopt;
  // Each factor reads one Lim column; re-express it on its object.
  FunctionExpr g[2];
  for (int k = 0; k < 2; ++k) {
    const auto& fk = e.fn.children[k];
    Schema col{{lv.output.columns[k]}, std::nullopt};
    auto inner = after_column(fk, col);
    if (!inner) return std::nullopt;
    g[k] = *inner;
  }
  const AlgebraExpr& cat = *lv.cat;
  std::vector<ExprPtr> objects{plan::map(cat.children[0], g[0]),
                               plan::map(cat.children[1], g[1])};
  const FunctionExpr& g1 = g[t->src];
  const FunctionExpr& g2 = g[t->dst];
  FunctionExpr f2;
  if (g1.is_identity()) {
    auto composed = then(t->arrow->fn, g2);
    if (!composed) return std::nullopt;
    f2 = *composed;
  } else {
    ExtSet s1 = evaluate(inst, cat.children[t->src]);
    auto f1 = bind(t->arrow->fn, inst, s1.schema);
    auto b1 = bind(g1, inst, s1.schema);
    auto s2_schema = lv.inputs[t->dst];
    auto b2 = bind(g2, inst, s2_schema);
    std::map<Value, Value> table;
    for (const auto& x : s1.rows) {
      Value key = b1.apply(x);
      Value val = b2.apply(f1.apply(x));
      auto [it, fresh] = table.emplace(key, val);
      if (!fresh && !(it->second == val)) return std::nullopt;
    }
    auto dst_schema = try_schema(inst, *objects[t->dst]);
    if (!dst_schema) return std::nullopt;
    f2 = FunctionExpr::tabulated(table, dst_schema->names());
  }
  CatMorphism m = *t->arrow;
  m.fn = f2;
  auto out = plan::lim(plan::cat(objects, {m}, out_schema->names()));
  if (!same_names(inst, e, *out)) return std::nullopt;
  return out;
}

namespace {

// Peels a chain of selections: returns the conditions (outermost first) and
// the node below them.
std::pair<std::vector<Condition>, ExprPtr> peel_selects(ExprPtr e) {
  std::vector<Condition> conds;
  while (e->op == OpKind::Select) {
    conds.push_back(e->condition);
    e = e->children[0];
  }
  return {conds, e};
}

ExprPtr wrap_selects(ExprPtr e, const std::vector<Condition>& conds) {
  for (auto it = conds.rbegin(); it != conds.rend(); ++it) e = plan::select(e, *it);
  return e;
}

std::optional<std::string> single_column(const InstanceCategory& inst, const AlgebraExpr& e) {
  auto s = try_schema(inst, e);
  if (!s || s->arity() != 1) return std::nullopt;
  return s->columns[0].name;
}

// π_S1(getReach(π_S1 σ_C(Lim(..S1..)), T, E))
//   -> π_S1 σ_C(Lim(..π_S1 getReach(S1, T, E)..))
std::optional<ExprPtr> lim_then_reach(const InstanceCategory& inst, const AlgebraExpr& e) {
  if (e.op != OpKind::Project || e.items.size() != 1 || e.items[0].column != "from") {
    return std::nullopt;
  }
  const AlgebraExpr& reach = *e.children[0];
  if (reach.op != OpKind::GetReach) return std::nullopt;
  const AlgebraExpr& proj = *reach.children[0];
  if (proj.op != OpKind::Project || proj.items.size() != 1) return std::nullopt;
  auto [conds, lim] = peel_selects(proj.children[0]);
  auto lv = view_lim(inst, *lim);
  if (!lv) return std::nullopt;
  auto it = lv->where.find(proj.items[0].column);
  if (it == lv->where.end()) return std::nullopt;
  std::size_t k = it->second.first;
  if (lv->inputs[k].arity() != 1 || targeted(*lv->cat, k)) return std::nullopt;
  const std::string& col = lv->inputs[k].columns[0].name;

  auto sources = plan::project(
      plan::reach(lv->cat->children[k], reach.children[1], reach.children[2]),
      std::vector<ProjectItem>{{"from", col == "from" ? "" : col}});
  std::vector<ExprPtr> objects = lv->cat->children;
  objects[k] = sources;
  auto filtered = wrap_selects(rebuild_lim(*lv->cat, std::move(objects)), conds);
  std::string out = e.items[0].output();
  return plan::project(filtered, std::vector<ProjectItem>{
                                     {proj.items[0].column,
                                      proj.items[0].column == out ? "" : out}});
}

// The reverse direction.
std::optional<ExprPtr> reach_then_lim(const InstanceCategory& inst, const AlgebraExpr& e) {
  if (e.op != OpKind::Project || e.items.size() != 1) return std::nullopt;
  auto [conds, lim] = peel_selects(e.children[0]);
  auto lv = view_lim(inst, *lim);
  if (!lv) return std::nullopt;
  auto it = lv->where.find(e.items[0].column);
  if (it == lv->where.end()) return std::nullopt;
  std::size_t k = it->second.first;
  if (targeted(*lv->cat, k)) return std::nullopt;
  const AlgebraExpr& src = *lv->cat->children[k];
  if (src.op != OpKind::Project || src.items.size() != 1 ||
      src.items[0].column != "from" || src.children[0]->op != OpKind::GetReach) {
    return std::nullopt;
  }
  const AlgebraExpr& reach = *src.children[0];
  const std::string col = src.items[0].output();
  auto s1_col = single_column(inst, *reach.children[0]);
  if (!s1_col) return std::nullopt;
  ExprPtr s1 = reach.children[0];
  if (*s1_col != col) {
    s1 = plan::project(s1, std::vector<ProjectItem>{{*s1_col, col}});
  }
  std::vector<ExprPtr> objects = lv->cat->children;
  objects[k] = s1;
  auto filtered = plan::project(wrap_selects(rebuild_lim(*lv->cat, std::move(objects)), conds),
                                std::vector<std::string>{e.items[0].column});
  std::string out = e.items[0].output();
  return plan::project(plan::reach(filtered, reach.children[1], reach.children[2]),
                       std::vector<ProjectItem>{{"from", out == "from" ? "" : out}});
}

}  // namespace

std::optional<ExprPtr> rule9_commute_lim_reach(const InstanceCategory& inst,
                                               const AlgebraExpr& e) {
  std::optional<ExprPtr> out = lim_then_reach(inst, e);
  if (!out) out = reach_then_lim(inst, e);
  if (!out || !same_names(inst, e, **out)) return std::nullopt;
  return out;
}

const std::vector<RewriteRule>& rewrite_rules() {
  static const std::vector<RewriteRule> rules{
      {1, "cascade of functions", rule1_cascade_f},
      {2, "projection of a limit", rule2_lim_pi},
      {3, "selection into a limit", rule3_push_select_lim},
      {4, "selection into getReach", rule4_push_select_reach},
      {5, "selection into a tree operator", rule5_push_select_tree},
      {6, "map over a product", rule6_product_map},
      {7, "projection through a limit", rule7_commute_project_lim},
      {8, "map through a limit", rule8_commute_map_lim},
      {9, "limit and getReach", rule9_commute_lim_reach},
  };
  return rules;
}

const RewriteRule& rewrite_rule(int id) {
  const auto& rules = rewrite_rules();
  if (id < 1 || id > static_cast<int>(rules.size())) {
    throw Error(ErrorCode::Unsupported, "no rewrite rule " + std::to_string(id));
  }
  return rules[static_cast<std::size_t>(id - 1)];
}

// ---------------------------------------------------------------------------
// Cost

double estimate(const InstanceCategory& inst, const AlgebraExpr& e) {
  auto child = [&](std::size_t i) { return estimate(inst, *e.children.at(i)); };
  switch (e.op) {
    case OpKind::Base:
      return static_cast<double>(inst.object(e.object).elements.size());
    case OpKind::Map:
    case OpKind::Project:
    case OpKind::Lim:
      return child(0);
    case OpKind::Select: return 0.3 * child(0);
    case OpKind::Union: return child(0) + child(1);
    case OpKind::Intersect: return std::min(child(0), child(1));
    case OpKind::Difference: return child(0);
    case OpKind::Product: return child(0) * child(1);
    case OpKind::Divide: return 0.1 * child(0);
    case OpKind::GetParent:
    case OpKind::GetAncestor:
    case OpKind::GetSibling:
    case OpKind::GetPreceding:
    case OpKind::GetFollowing:
    case OpKind::GetReach:
    case OpKind::GetNHop:
      return 0.5 * child(0) * child(1);
    case OpKind::Cat: {
      std::vector<double> est;
      double out = 1;
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        est.push_back(child(i));
        out *= est.back();
      }
      for (const auto& m : e.morphisms) {
        if (m.target < est.size()) out /= std::max(1.0, est[m.target]);
      }
      return out;
    }
  }
  return 0;
}

std::int64_t cost(const InstanceCategory& inst, const AlgebraExpr& e) {
  auto total = static_cast<std::int64_t>(std::ceil(estimate(inst, e))) + 1;
  for (const auto& c : e.children) total += cost(inst, *c);
  return total;
}

namespace {

// Tie-break for rewrites that leave the rounded cost unchanged.
double raw_size(const InstanceCategory& inst, const AlgebraExpr& e) {
  double total = estimate(inst, e);
  for (const auto& c : e.children) total += raw_size(inst, *c);
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Driver

std::string to_string(const NodePath& path) {
  if (path.empty()) return "/";
  std::string out;
  for (auto i : path) out += "/" + std::to_string(i);
  return out;
}

const AlgebraExpr& node_at(const AlgebraExpr& root, const NodePath& path) {
  const AlgebraExpr* n = &root;
  for (auto i : path) {
    if (i >= n->children.size()) {
      throw Error(ErrorCode::Unsupported, "no node at " + to_string(path));
    }
    n = n->children[i].get();
  }
  return *n;
}

ExprPtr replace_at(const ExprPtr& root, const NodePath& path, ExprPtr node) {
  if (path.empty()) return node;
  NodePath rest(path.begin() + 1, path.end());
  if (path[0] >= root->children.size()) {
    throw Error(ErrorCode::Unsupported, "no node at " + to_string(path));
  }
  return plan::with_child(*root, path[0],
                          replace_at(root->children[path[0]], rest, std::move(node)));
}

namespace {

struct Optimizer {
  const InstanceCategory& inst;
  ExprPtr plan;
  std::int64_t current = 0;
  double current_raw = 0;
  std::vector<RewriteStep> trace;

  // Tries the rules at `path` until none lowers the cost.
  bool rewrite_here(const NodePath& path) {
    bool any = false;
    bool progress = true;
    while (progress) {
      progress = false;
      for (const auto& rule : rewrite_rules()) {
        std::optional<ExprPtr> next;
        try {
          next = rule.apply(inst, node_at(*plan, path));
        } catch (const Error&) {
          next.reset();
        }
        if (!next) continue;
        ExprPtr candidate = replace_at(plan, path, *next);
        std::int64_t c;
        double raw;
        try {
          c = cost(inst, *candidate);
          raw = raw_size(inst, *candidate);
        } catch (const Error&) {
          continue;
        }
        if (c > current || (c == current && raw >= current_raw - 1e-9)) continue;
        plan = candidate;
        current = c;
        current_raw = raw;
        trace.push_back({rule.id, path});
        any = progress = true;
        break;
      }
    }
    return any;
  }

  bool pass(NodePath& path) {
    bool any = rewrite_here(path);
    std::size_t n = node_at(*plan, path).children.size();
    for (std::size_t i = 0; i < n; ++i) {
      path.push_back(i);
      any = pass(path) || any;
      path.pop_back();
    }
    return any;
  }
};

}  // namespace

OptimizeResult optimize(const InstanceCategory& instance, const ExprPtr& plan,
                        int max_passes) {
  Optimizer opt{instance, plan, cost(instance, *plan), raw_size(instance, *plan), {}};
  OptimizeResult out;
  out.cost_before = opt.current;
  for (int i = 0; i < max_passes; ++i) {
    NodePath path;
    ++out.passes;
    if (!opt.pass(path)) break;
  }
  out.plan = opt.plan;
  out.trace = std::move(opt.trace);
  out.cost_after = opt.current;
  return out;
}

ExprPtr replay(const InstanceCategory& instance, const ExprPtr& plan,
               const std::vector<RewriteStep>& trace) {
  ExprPtr current = plan;
  for (const auto& step : trace) {
    auto next = rewrite_rule(step.rule).apply(instance, node_at(*current, step.path));
    if (!next) {
      throw Error(ErrorCode::Unsupported, "rule " + std::to_string(step.rule) +
                                              " does not apply at " +
                                              to_string(step.path));
    }
    current = replace_at(current, step.path, *next);
  }
  return current;
}

std::string format_trace(const std::vector<RewriteStep>& trace) {
  std::string out;
  for (const auto& s : trace) {
    out += "applied rule " + std::to_string(s.rule) + " at " + to_string(s.path) + "\n";
  }
  return out;
}

std::string explain_diff(const InstanceCategory& instance, const ExprPtr& plan) {
  auto r = optimize(instance, plan);
  std::ostringstream os;
  os << "-- before (cost " << r.cost_before << ")\n"
     << to_pretty_text(*plan) << "\n"
     << "-- after (cost " << r.cost_after << ")\n"
     << to_pretty_text(*r.plan) << "\n"
     << "-- trace\n";
  if (r.trace.empty()) {
    os << "no rewrites\n";
  } else {
    os << format_trace(r.trace);
  }
  return os.str();
}

}  // namespace catql
