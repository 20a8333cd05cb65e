#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catql/algebra.hpp"
#include "catql/model.hpp"

namespace catql {

// Child indices from the root; empty is the root itself.
using NodePath = std::vector<std::size_t>;

std::string to_string(const NodePath& path);  // "/", "/0/2"

struct RewriteStep {
  int rule = 0;
  NodePath path;
  bool operator==(const RewriteStep&) const = default;
};

// A rule rewrites the node it is given, or returns nullopt when the shape
// does not match or a precondition fails. Preconditions are checked on the
// instance (mapping tables, emptiness), so a rewrite is only valid there.
using RuleFn = std::function<std::optional<ExprPtr>(const InstanceCategory&,
                                                    const AlgebraExpr&)>;

struct RewriteRule {
  int id = 0;
  std::string name;
  RuleFn apply;
};

// Rules 1-9 in id order.
const std::vector<RewriteRule>& rewrite_rules();
const RewriteRule& rewrite_rule(int id);

// map(map(S, f), g) -> map(S, g . f) when the composite is expressible.
std::optional<ExprPtr> rule1_cascade_f(const InstanceCategory&, const AlgebraExpr&);
// π over the columns of one Lim object -> that object, when every other
// object hangs off it through the morphisms (or there are no morphisms and
// the other objects are non-empty).
std::optional<ExprPtr> rule2_lim_pi(const InstanceCategory&, const AlgebraExpr&);
// σ over Lim -> σ on the one Lim object the condition reads. A morphism
// target is filtered only together with every source mapping into it.
std::optional<ExprPtr> rule3_push_select_lim(const InstanceCategory&, const AlgebraExpr&);
// σ over getReach / getNHop -> σ on the source or target set.
std::optional<ExprPtr> rule4_push_select_reach(const InstanceCategory&, const AlgebraExpr&);
// σ over a tree operator -> σ on D1 or D2.
std::optional<ExprPtr> rule5_push_select_tree(const InstanceCategory&, const AlgebraExpr&);
// map(S1 × S2, f ⊗ g) <-> map(S1, f) × map(S2, g), when f and g are
// injective on the instance.
std::optional<ExprPtr> rule6_product_map(const InstanceCategory&, const AlgebraExpr&);
// π_L(Lim(R1, R2, f1)) -> Lim(π_L1 R1, π_L2 R2, f2), with f2 built from f1
// and checked single-valued.
std::optional<ExprPtr> rule7_commute_project_lim(const InstanceCategory&, const AlgebraExpr&);
// map(Lim(S1, S2, f1), g1 ⊗ g2) -> Lim(map(S1, g1), map(S2, g2), f2), with
// f2 = {g1(x) -> g2(f1(x))} checked single-valued.
std::optional<ExprPtr> rule8_commute_map_lim(const InstanceCategory&, const AlgebraExpr&);
// Swaps the Lim filter and the reach filter on a shared source object, in
// either direction.
std::optional<ExprPtr> rule9_commute_lim_reach(const InstanceCategory&, const AlgebraExpr&);

// Estimated output cardinality of a node. Base is exact; σ keeps 0.3,
// division 0.1, reach and tree operators 0.5 of |S|·|T|, Lim divides the
// product of its objects by each morphism target.
double estimate(const InstanceCategory& instance, const AlgebraExpr& expr);
// Σ over all nodes of ceil(estimate) + 1.
std::int64_t cost(const InstanceCategory& instance, const AlgebraExpr& expr);

struct OptimizeResult {
  ExprPtr plan;
  std::vector<RewriteStep> trace;
  std::int64_t cost_before = 0;
  std::int64_t cost_after = 0;
  int passes = 0;
};

// Greedy fixpoint: each pass walks the plan top-down and applies, at each
// node, the first rule whose rewrite strictly lowers the plan cost. Ties on
// the rounded cost go to the rewrite with the smaller summed estimates.
OptimizeResult optimize(const InstanceCategory& instance, const ExprPtr& plan,
                        int max_passes = 64);

// Re-applies a trace to the plan it was recorded on. Throws Unsupported
// when a step does not apply.
ExprPtr replay(const InstanceCategory& instance, const ExprPtr& plan,
               const std::vector<RewriteStep>& trace);

const AlgebraExpr& node_at(const AlgebraExpr& root, const NodePath& path);
ExprPtr replace_at(const ExprPtr& root, const NodePath& path, ExprPtr node);

// "applied rule <k> at <path>" per step.
std::string format_trace(const std::vector<RewriteStep>& trace);
// Plan before, plan after, the trace and both costs.
std::string explain_diff(const InstanceCategory& instance, const ExprPtr& plan);

}  // namespace catql
