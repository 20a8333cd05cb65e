#include "catql/check.hpp"

namespace catql::check {

std::vector<PropertyResult> run_all(std::size_t trials, std::uint64_t seed) {
  // Query suites draw 10 queries per random instance.
  const std::size_t per = std::min<std::size_t>(trials, 10);
  const std::size_t instances = per == 0 ? 0 : (trials + per - 1) / per;
  std::vector<PropertyResult> out;
  out.push_back(compiler_equivalence(seed, instances, per));
  out.push_back(algebra_simulations(seed + 1, trials));
  out.push_back(division_lemma(seed + 2, trials));
  out.push_back(reach_lemma(seed + 3, trials));
  out.push_back(limit_lemma(seed + 4, trials));
  out.push_back(division_identity(seed + 5, trials));
  out.push_back(reach_oracle(seed + 6, trials));
  out.push_back(tree_axis_oracle(seed + 7, trials));
  for (int r = 1; r <= 9; ++r) out.push_back(rule_soundness(r, seed + 10 + r, trials));
  out.push_back(optimizer_equivalence(seed + 20, instances, per));
  return out;
}

}  // namespace catql::check
