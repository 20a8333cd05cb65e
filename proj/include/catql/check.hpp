#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "catql/algebra.hpp"
#include "catql/calculus.hpp"
#include "catql/model.hpp"
#include "catql/optimizer.hpp"

// Random generators, independent oracles and the randomized property suites
// shared by the tests, `catql check` and the acceptance runner.
namespace catql::check {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Generators

// Objects A, B (string entities), V (int attribute of A via `fa`), R over
// A x B (components ra, rb), plus either a Dewey object T with `pos: A -> T`
// or an edge relation E over A (components src, dst). At most
// `max_elements` elements per object; some objects may be empty.
InstanceCategory random_instance(Rng& rng, std::size_t max_elements = 6);

// A safe query over an instance from random_instance, with at most
// `max_quantifiers` quantifiers.
CalculusQuery random_query(Rng& rng, const InstanceCategory& instance,
                           int max_quantifiers = 2);

// A tree as a prefix-closed set of Dewey codes, `nodes` codes including ε.
std::set<DeweyCode> random_tree(Rng& rng, std::size_t nodes);

// Edge pairs over the integers 0..nodes-1.
std::set<Value> random_digraph(Rng& rng, std::size_t nodes, double density);

// A relation of the given arity over small integers.
ExtSet random_relation(Rng& rng, std::vector<std::string> columns,
                       std::size_t max_rows, int domain);

// ---------------------------------------------------------------------------
// Oracles

// Transitive closure by Warshall's algorithm: pairs joined by a path of at
// least one edge.
std::set<std::pair<Value, Value>> warshall_closure(const std::set<Value>& edges);

// Pairs (s, t) with a path of 1..n edges, by repeated relational squaring.
std::set<std::pair<Value, Value>> bounded_paths(const std::set<Value>& edges,
                                                int n);

// Axis pairs computed by walking an explicit pointer tree built from the
// codes, not by comparing code components.
enum class Axis { Parent, Ancestor, Sibling, Preceding, Following };
std::set<std::pair<DeweyCode, DeweyCode>> axis_oracle(
    const std::set<DeweyCode>& tree, Axis axis);

// π_Ā R − π_Ā((π_Ā R × π_B S) − R), evaluated with the set operators.
ExtSet division_by_composite(const ExtSet& r, const std::vector<std::string>& a,
                             const ExtSet& s, const std::vector<std::string>& b);

// ---------------------------------------------------------------------------
// Property suites

struct PropertyResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  std::string first_failure;
  double seconds = 0;
  [[nodiscard]] bool passed() const { return failures == 0; }
};

// Runs `trial(i)` for i in [0, trials); a trial returns an empty string on
// success, otherwise a description. Exceptions count as failures.
PropertyResult run_property(const std::string& name, std::size_t trials,
                            const std::function<std::string(std::size_t)>& trial);

// eval(compile(q)) == brute_eval(q) over random instances and queries.
PropertyResult compiler_equivalence(std::uint64_t seed, std::size_t instances,
                                    std::size_t queries_per_instance);

// The algebra-to-calculus simulations: each operator's output equals the
// brute-force evaluation of its calculus form.
PropertyResult algebra_simulations(std::uint64_t seed, std::size_t trials);

// Multiple universal quantifiers through a single division.
PropertyResult division_lemma(std::uint64_t seed, std::size_t trials);

// Reachability joined through a relationship object.
PropertyResult reach_lemma(std::uint64_t seed, std::size_t trials);

// Every element of a limit's projection maps into the next object.
PropertyResult limit_lemma(std::uint64_t seed, std::size_t trials);

// Fire-and-compare for one rewrite rule: random plans shaped for the rule,
// kept when the rule fires, compared with the original. `trials` counts
// firings; a rule that fires fewer times within the attempt budget fails.
PropertyResult rule_soundness(int rule, std::uint64_t seed, std::size_t trials);
// The same for any rule, using the plan shapes of `rule.id`.
PropertyResult rule_soundness(const RewriteRule& rule, std::uint64_t seed, std::size_t trials);

// Optimized compiled plans agree with brute force; the trace replays to the
// same plan, and optimizing again changes nothing.
PropertyResult optimizer_equivalence(std::uint64_t seed, std::size_t instances,
                                     std::size_t queries_per_instance);

PropertyResult division_identity(std::uint64_t seed, std::size_t trials);
PropertyResult reach_oracle(std::uint64_t seed, std::size_t trials);
PropertyResult tree_axis_oracle(std::uint64_t seed, std::size_t trials);

// Every suite above with about `trials` trials each, in a fixed order.
// Zero trials runs nothing and passes vacuously.
std::vector<PropertyResult> run_all(std::size_t trials, std::uint64_t seed);

}  // namespace catql::check
