#include <algorithm>
#include <map>

#include "catql/check.hpp"

namespace catql::check {

std::set<std::pair<Value, Value>> warshall_closure(const std::set<Value>& edges) {
  std::vector<Value> nodes;
  {
    std::set<Value> seen;
    for (const auto& e : edges) {
      seen.insert(e.as_tuple()[0]);
      seen.insert(e.as_tuple()[1]);
    }
    nodes.assign(seen.begin(), seen.end());
  }
  const std::size_t n = nodes.size();
  auto index = [&](const Value& v) {
    return static_cast<std::size_t>(
        std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
  };
  std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
  for (const auto& e : edges) m[index(e.as_tuple()[0])][index(e.as_tuple()[1])] = true;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!m[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (m[k][j]) m[i][j] = true;
      }
    }
  }
  std::set<std::pair<Value, Value>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (m[i][j]) out.emplace(nodes[i], nodes[j]);
    }
  }
  return out;
}

std::set<std::pair<Value, Value>> bounded_paths(const std::set<Value>& edges,
                                                int n) {
  using Rel = std::set<std::pair<Value, Value>>;
  Rel step;
  for (const auto& e : edges) step.emplace(e.as_tuple()[0], e.as_tuple()[1]);
  auto compose = [](const Rel& a, const Rel& b) {
    std::multimap<Value, Value> by_src(b.begin(), b.end());
    Rel out;
    for (const auto& [x, y] : a) {
      auto [lo, hi] = by_src.equal_range(y);
      for (auto it = lo; it != hi; ++it) out.emplace(x, it->second);
    }
    return out;
  };
  // paths(1..k) with k doubling: P_{2k} = P_k ∪ P_k;P_k.
  Rel acc = step;
  int covered = 1;
  while (covered < n) {
    if (2 * covered <= n) {
      Rel sq = compose(acc, acc);
      acc.insert(sq.begin(), sq.end());
      covered *= 2;
    } else {
      Rel more = compose(acc, step);
      acc.insert(more.begin(), more.end());
      ++covered;
    }
  }
  return n < 1 ? Rel{} : acc;
}

namespace {

struct Node {
  DeweyCode code;
  Node* parent = nullptr;
  std::vector<Node*> children;
  std::size_t pre = 0;  // preorder number
};

}  // namespace

std::set<std::pair<DeweyCode, DeweyCode>> axis_oracle(
    const std::set<DeweyCode>& tree, Axis axis) {
  std::vector<Node> nodes(tree.size());
  std::map<DeweyCode, Node*> by_code;
  std::size_t i = 0;
  for (const auto& c : tree) {
    nodes[i].code = c;
    by_code[c] = &nodes[i++];
  }
  Node* root = nullptr;
  for (auto& n : nodes) {
    if (n.code.is_root()) {
      root = &n;
      continue;
    }
    auto it = by_code.find(n.code.parent());
    if (it == by_code.end()) continue;  // not prefix-closed: a detached node
    n.parent = it->second;
    it->second->children.push_back(&n);
  }
  // Children sorted by their last component, then a preorder walk.
  for (auto& n : nodes) {
    std::sort(n.children.begin(), n.children.end(), [](Node* a, Node* b) {
      return a->code.components().back() < b->code.components().back();
    });
  }
  std::size_t counter = 0;
  std::vector<Node*> stack;
  std::vector<Node*> roots;
  if (root != nullptr) roots.push_back(root);
  for (auto& n : nodes) {
    if (n.parent == nullptr && &n != root) roots.push_back(&n);
  }
  for (Node* r : roots) {
    stack.push_back(r);
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      n->pre = counter++;
      for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
        stack.push_back(*it);
      }
    }
  }
  auto is_ancestor = [](const Node* a, const Node* d) {
    for (const Node* p = d->parent; p != nullptr; p = p->parent) {
      if (p == a) return true;
    }
    return false;
  };

  std::set<std::pair<DeweyCode, DeweyCode>> out;
  for (auto& x : nodes) {
    for (auto& y : nodes) {
      bool hit = false;
      switch (axis) {
        case Axis::Parent: hit = y.parent == &x; break;
        case Axis::Ancestor: hit = is_ancestor(&x, &y); break;
        case Axis::Sibling:
          hit = &x != &y && x.parent != nullptr && x.parent == y.parent;
          break;
        case Axis::Preceding: hit = x.pre < y.pre && !is_ancestor(&x, &y); break;
        case Axis::Following: hit = y.pre < x.pre && !is_ancestor(&y, &x); break;
      }
      if (hit) out.emplace(x.code, y.code);
    }
  }
  return out;
}

ExtSet division_by_composite(const ExtSet& r, const std::vector<std::string>& a,
                             const ExtSet& s, const std::vector<std::string>& b) {
  std::vector<std::string> abar;
  for (const auto& c : r.component_names()) {
    if (std::find(a.begin(), a.end(), c) == a.end()) abar.push_back(c);
  }
  std::vector<std::string> ordered = abar;
  ordered.insert(ordered.end(), a.begin(), a.end());
  std::vector<ProjectItem> s_items;
  for (std::size_t i = 0; i < b.size(); ++i) s_items.push_back({b[i], a[i]});
  std::vector<ProjectItem> abar_items, r_items;
  for (const auto& c : abar) abar_items.push_back({c, ""});
  for (const auto& c : ordered) r_items.push_back({c, ""});

  ExtSet candidates = eval_project(r, abar_items);
  ExtSet all = eval_binary(OpKind::Product, candidates, eval_project(s, s_items));
  ExtSet missing = eval_binary(OpKind::Difference, all, eval_project(r, r_items));
  return eval_binary(OpKind::Difference, candidates,
                     eval_project(missing, abar_items));
}

}  // namespace catql::check
