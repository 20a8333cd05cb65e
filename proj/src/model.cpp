#include "catql/model.hpp"

#include <deque>
#include <functional>

#include "catql/error.hpp"

namespace catql {

std::string_view to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::Entity: return "entity";
    case ObjectKind::Attribute: return "attribute";
    case ObjectKind::Relationship: return "relationship";
  }
  return "?";
}

std::optional<ObjectKind> parse_object_kind(std::string_view text) {
  if (text == "entity") return ObjectKind::Entity;
  if (text == "attribute") return ObjectKind::Attribute;
  if (text == "relationship") return ObjectKind::Relationship;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// SetObject

std::optional<ValueKind> SetObject::element_kind() const {
  if (elements.empty()) return std::nullopt;
  return elements.begin()->kind();
}

void SetObject::validate() const {
  if (arity == 0) {
    throw Error(ErrorCode::TypeMismatch, "object " + name + " has arity 0");
  }
  if (kind == ObjectKind::Relationship) {
    if (component_names.size() != arity) {
      throw Error(ErrorCode::TypeMismatch,
                  "relationship " + name + " needs " + std::to_string(arity) +
                      " component names");
    }
    std::set<std::string> seen(component_names.begin(), component_names.end());
    if (seen.size() != component_names.size()) {
      throw Error(ErrorCode::TypeMismatch,
                  "duplicate component names in " + name);
    }
  } else if (arity != 1 || !component_names.empty()) {
    throw Error(ErrorCode::TypeMismatch,
                "only relationship objects may have components: " + name);
  }
  if (elements.empty()) return;
  const auto first = elements.begin();
  for (const auto& e : elements) {
    if (e.kind() != first->kind()) {
      throw Error(ErrorCode::TypeMismatch,
                  "object " + name + " mixes " +
                      std::string(to_string(first->kind())) + " and " +
                      std::string(to_string(e.kind())) + " elements");
    }
    if (kind == ObjectKind::Relationship) {
      if (!e.is_tuple() || e.as_tuple().size() != arity) {
        throw Error(ErrorCode::TypeMismatch,
                    "element " + e.to_literal() + " of " + name +
                        " is not a " + std::to_string(arity) + "-tuple");
      }
      const auto& ft = first->as_tuple();
      const auto& et = e.as_tuple();
      for (std::size_t i = 0; i < arity; ++i) {
        if (ft[i].kind() != et[i].kind()) {
          throw Error(ErrorCode::TypeMismatch,
                      "component " + component_names[i] + " of " + name +
                          " mixes kinds");
        }
      }
    } else if (e.is_tuple()) {
      throw Error(ErrorCode::TypeMismatch,
                  "tuple element in non-relationship object " + name);
    }
  }
}

// ---------------------------------------------------------------------------
// Morphism

const Value& Morphism::apply(const Value& x) const {
  auto it = mapping.find(x);
  if (it == mapping.end()) {
    throw Error(ErrorCode::UnresolvablePath,
                "morphism " + name + ": " + source + " -> " + target +
                    " is undefined on " + x.to_literal());
  }
  return it->second;
}

bool Morphism::is_identity_on(const SetObject& object) const {
  if (mapping.size() != object.elements.size()) return false;
  for (const auto& [k, v] : mapping) {
    if (!(k == v) || !object.contains(k)) return false;
  }
  return true;
}

Morphism compose(const Morphism& f, const Morphism& g) {
  if (f.target != g.source) {
    throw Error(ErrorCode::CompositionMismatch,
                "cannot compose " + f.name + ": " + f.source + " -> " +
                    f.target + " with " + g.name + ": " + g.source + " -> " +
                    g.target);
  }
  Morphism h;
  h.source = f.source;
  h.target = g.target;
  std::vector<std::string> chain;
  auto append_chain = [&chain](const Morphism& m) {
    if (m.provenance.kind == Provenance::Kind::Composite) {
      chain.insert(chain.end(), m.provenance.chain.begin(),
                   m.provenance.chain.end());
    } else {
      chain.push_back(m.name);
    }
  };
  append_chain(f);
  append_chain(g);
  h.name.clear();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) h.name += ';';
    h.name += chain[i];
  }
  h.provenance = Provenance::composite(std::move(chain));
  for (const auto& [x, y] : f.mapping) {
    h.mapping.emplace(x, g.apply(y));
  }
  return h;
}

Morphism identity_morphism(const SetObject& object) {
  Morphism id;
  id.name = "id_" + object.name;
  id.source = object.name;
  id.target = object.name;
  id.provenance = Provenance::composite({});
  for (const auto& e : object.elements) id.mapping.emplace(e, e);
  return id;
}

// ---------------------------------------------------------------------------
// InstanceCategory

struct InstanceCategory::CompositeCache {
  std::mutex mutex;
  std::map<std::pair<std::string, std::vector<std::string>>, Morphism> entries;
};

InstanceCategory::InstanceCategory()
    : cache_(std::make_unique<CompositeCache>()) {}

InstanceCategory::InstanceCategory(const InstanceCategory& other)
    : objects_(other.objects_),
      morphisms_(other.morphisms_),
      pair_index_(other.pair_index_),
      cache_(std::make_unique<CompositeCache>()) {}

InstanceCategory& InstanceCategory::operator=(const InstanceCategory& other) {
  if (this != &other) {
    objects_ = other.objects_;
    morphisms_ = other.morphisms_;
    pair_index_ = other.pair_index_;
    cache_ = std::make_unique<CompositeCache>();
  }
  return *this;
}

InstanceCategory::InstanceCategory(InstanceCategory&&) noexcept = default;
InstanceCategory& InstanceCategory::operator=(InstanceCategory&&) noexcept =
    default;
InstanceCategory::~InstanceCategory() = default;

void InstanceCategory::add_object(SetObject object) {
  if (objects_.contains(object.name) || morphisms_.contains(object.name)) {
    throw Error(ErrorCode::NameClash, "name already used: " + object.name);
  }
  object.validate();
  auto name = object.name;
  objects_.emplace(std::move(name), std::move(object));
  clear_cache();
}

void InstanceCategory::add_morphism(Morphism m) {
  if (morphisms_.contains(m.name) || objects_.contains(m.name)) {
    throw Error(ErrorCode::NameClash, "name already used: " + m.name);
  }
  const auto src = objects_.find(m.source);
  const auto dst = objects_.find(m.target);
  if (src == objects_.end() || dst == objects_.end()) {
    throw Error(ErrorCode::UnknownObject,
                "morphism " + m.name + " refers to unknown object " +
                    (src == objects_.end() ? m.source : m.target));
  }
  for (const auto& x : src->second.elements) {
    auto it = m.mapping.find(x);
    if (it == m.mapping.end()) {
      throw Error(ErrorCode::TotalityViolation,
                  "morphism " + m.name + " has no image for " + x.to_literal());
    }
    if (!dst->second.contains(it->second)) {
      throw Error(ErrorCode::TotalityViolation,
                  "morphism " + m.name + " maps " + x.to_literal() + " to " +
                      it->second.to_literal() + " outside " + m.target);
    }
  }
  if (m.mapping.size() != src->second.elements.size()) {
    throw Error(ErrorCode::TotalityViolation,
                "morphism " + m.name + " is defined outside " + m.source);
  }
  pair_index_.emplace(std::make_pair(m.source, m.target), m.name);
  auto name = m.name;
  morphisms_.emplace(std::move(name), std::move(m));
  clear_cache();
}

void InstanceCategory::clear_cache() {
  if (!cache_) {
    cache_ = std::make_unique<CompositeCache>();
    return;
  }
  std::lock_guard lock(cache_->mutex);
  cache_->entries.clear();
}

const SetObject& InstanceCategory::object(const std::string& name) const {
  auto it = objects_.find(name);
  if (it == objects_.end()) {
    throw Error(ErrorCode::UnknownObject, "no object named " + name);
  }
  return it->second;
}

const Morphism& InstanceCategory::morphism(const std::string& name) const {
  auto it = morphisms_.find(name);
  if (it == morphisms_.end()) {
    throw Error(ErrorCode::MissingMorphism, "no morphism named " + name);
  }
  return it->second;
}

const Morphism* InstanceCategory::find_morphism(
    const std::string& source, const std::string& target) const {
  auto it = pair_index_.find({source, target});
  if (it == pair_index_.end()) return nullptr;
  return &morphisms_.at(it->second);
}

Morphism InstanceCategory::resolve_path(
    const std::string& start, const std::vector<std::string>& path) const {
  const auto& start_obj = object(start);
  if (path.empty()) return identity_morphism(start_obj);
  if (path.size() == 1) {
    if (const auto* m = find_morphism(start, path.front())) return *m;
    throw Error(ErrorCode::MissingMorphism,
                "(" + start + ", " + path.front() + ")");
  }
  // Instances are shared read-only between evaluators; the cache is the only
  // mutable state and every access goes through its mutex.
  CompositeCache* cache = cache_.get();
  auto key = std::make_pair(start, path);
  if (cache != nullptr) {
    std::lock_guard lock(cache->mutex);
    if (auto it = cache->entries.find(key); it != cache->entries.end()) {
      return it->second;
    }
  }
  std::string prev = start;
  std::optional<Morphism> acc;
  for (const auto& hop : path) {
    const auto* m = find_morphism(prev, hop);
    if (m == nullptr) {
      throw Error(ErrorCode::MissingMorphism, "(" + prev + ", " + hop + ")");
    }
    acc = acc ? compose(*acc, *m) : *m;
    prev = hop;
  }
  if (cache != nullptr) {
    std::lock_guard lock(cache->mutex);
    cache->entries.emplace(key, *acc);
  }
  return *acc;
}

std::optional<std::vector<std::string>> InstanceCategory::find_path(
    const std::string& source, const std::string& target) const {
  if (source == target) return std::vector<std::string>{};
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{source};
  parent[source] = "";
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (auto it = pair_index_.lower_bound({cur, ""});
         it != pair_index_.end() && it->first.first == cur; ++it) {
      const auto& next = it->first.second;
      if (parent.contains(next)) continue;
      parent[next] = cur;
      if (next == target) {
        std::vector<std::string> out;
        for (std::string n = target; n != source; n = parent[n]) {
          out.insert(out.begin(), n);
        }
        return out;
      }
      queue.push_back(next);
    }
  }
  return std::nullopt;
}

std::vector<ThinnessViolation> InstanceCategory::check_thinness(
    ThinnessMode mode) const {
  std::vector<ThinnessViolation> out;
  std::set<std::pair<std::string, std::string>> reported;

  // (a) parallel stored morphisms
  std::map<std::pair<std::string, std::string>, std::vector<const Morphism*>>
      by_pair;
  for (const auto& [name, m] : morphisms_) {
    by_pair[{m.source, m.target}].push_back(&m);
  }
  for (const auto& [pair, ms] : by_pair) {
    if (ms.size() < 2) continue;
    ThinnessViolation v{pair.first, pair.second, std::nullopt,
                        "parallel morphisms " + ms[0]->name + " and " +
                            ms[1]->name};
    for (const auto& [x, y] : ms[0]->mapping) {
      if (!(ms[1]->apply(x) == y)) {
        v.witness = x;
        break;
      }
    }
    out.push_back(std::move(v));
    reported.insert(pair);
  }

  // (b) distinct paths between the same pair must agree pointwise
  struct Path {
    std::vector<const Morphism*> hops;
    std::vector<std::string> visited;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Path>> paths;
  const std::size_t max_len =
      mode == ThinnessMode::Bounded ? 3 : objects_.size();
  std::function<void(Path&)> extend = [&](Path& p) {
    const auto& from = p.hops.front()->source;
    const auto& to = p.hops.back()->target;
    paths[{from, to}].push_back(p);
    if (p.hops.size() >= max_len) return;
    for (const auto& [name, m] : morphisms_) {
      if (m.source != to) continue;
      if (mode == ThinnessMode::Exhaustive &&
          std::find(p.visited.begin(), p.visited.end(), m.target) !=
              p.visited.end()) {
        continue;
      }
      p.hops.push_back(&m);
      p.visited.push_back(m.target);
      extend(p);
      p.hops.pop_back();
      p.visited.pop_back();
    }
  };
  for (const auto& [name, m] : morphisms_) {
    if (mode == ThinnessMode::Exhaustive && m.source == m.target) continue;
    Path p{{&m}, {m.source, m.target}};
    extend(p);
  }

  auto fold = [](const Path& p, const Value& x) {
    Value cur = x;
    for (const auto* m : p.hops) cur = m->apply(cur);
    return cur;
  };
  auto describe = [](const Path& p) {
    std::string s;
    for (std::size_t i = 0; i < p.hops.size(); ++i) {
      if (i) s += ';';
      s += p.hops[i]->name;
    }
    return s;
  };
  for (const auto& [pair, ps] : paths) {
    if (ps.size() < 2 || reported.contains(pair)) continue;
    const auto& src = objects_.at(pair.first);
    bool found = false;
    for (std::size_t i = 1; i < ps.size() && !found; ++i) {
      for (const auto& x : src.elements) {
        if (!(fold(ps[0], x) == fold(ps[i], x))) {
          out.push_back({pair.first, pair.second, x,
                         "paths " + describe(ps[0]) + " and " +
                             describe(ps[i]) + " disagree"});
          found = true;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace catql
