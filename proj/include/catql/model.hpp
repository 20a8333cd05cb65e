#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "catql/value.hpp"

namespace catql {

enum class ObjectKind { Entity, Attribute, Relationship };

std::string_view to_string(ObjectKind kind);
std::optional<ObjectKind> parse_object_kind(std::string_view text);

// A finite set of homogeneous values. Relationship objects hold tuples of a
// fixed arity with named components.
struct SetObject {
  std::string name;
  ObjectKind kind = ObjectKind::Entity;
  std::set<Value> elements;
  std::size_t arity = 1;
  std::vector<std::string> component_names;

  // Throws TypeMismatch on mixed kinds or wrong tuple shape.
  void validate() const;
  [[nodiscard]] std::optional<ValueKind> element_kind() const;
  [[nodiscard]] bool contains(const Value& v) const {
    return elements.contains(v);
  }
};

struct Provenance {
  enum class Kind { Declared, Projection, Composite };
  Kind kind = Kind::Declared;
  std::size_t component = 0;       // Projection
  std::vector<std::string> chain;  // Composite, application order

  static Provenance declared() { return {}; }
  static Provenance projection(std::size_t i) {
    return {Kind::Projection, i, {}};
  }
  static Provenance composite(std::vector<std::string> chain) {
    return {Kind::Composite, 0, std::move(chain)};
  }
};

// A total function between two objects, stored as an explicit table.
struct Morphism {
  std::string name;
  std::string source;
  std::string target;
  std::map<Value, Value> mapping;
  Provenance provenance;

  // Throws UnresolvablePath when `x` is outside the domain.
  [[nodiscard]] const Value& apply(const Value& x) const;
  [[nodiscard]] bool is_identity_on(const SetObject& object) const;
};

// f ; g, i.e. x ↦ g(f(x)). Throws CompositionMismatch unless
// f.target == g.source.
Morphism compose(const Morphism& f, const Morphism& g);

Morphism identity_morphism(const SetObject& object);

// One witness that two morphisms (or two paths) between the same pair of
// objects disagree.
struct ThinnessViolation {
  std::string source;
  std::string target;
  std::optional<Value> witness;
  std::string detail;
};

enum class ThinnessMode {
  Bounded,     // stored paths of length <= 3
  Exhaustive,  // every simple path; only sensible for tiny schemas
};

// The loaded database: named set-objects and named total functions between
// them. Immutable once ingestion hands it out, except for the internal
// composite cache, which is guarded.
class InstanceCategory {
 public:
  InstanceCategory();
  InstanceCategory(const InstanceCategory& other);
  InstanceCategory& operator=(const InstanceCategory& other);
  InstanceCategory(InstanceCategory&&) noexcept;
  InstanceCategory& operator=(InstanceCategory&&) noexcept;
  ~InstanceCategory();

  // Throws NameClash for an existing name; validates the element set.
  void add_object(SetObject object);
  // Checks endpoints exist and the mapping is total with images inside the
  // target (TotalityViolation). Does not reject a second morphism for an
  // already-connected pair; check_thinness reports that.
  void add_morphism(Morphism morphism);

  [[nodiscard]] bool has_object(const std::string& name) const {
    return objects_.contains(name);
  }
  [[nodiscard]] const SetObject& object(const std::string& name) const;
  [[nodiscard]] const Morphism& morphism(const std::string& name) const;
  [[nodiscard]] const Morphism* find_morphism(const std::string& source,
                                              const std::string& target) const;

  [[nodiscard]] const std::map<std::string, SetObject>& objects() const {
    return objects_;
  }
  [[nodiscard]] const std::map<std::string, Morphism>& morphisms() const {
    return morphisms_;
  }
  [[nodiscard]] const std::map<std::pair<std::string, std::string>,
                               std::string>&
  pair_index() const {
    return pair_index_;
  }

  // x · S1 · ... · Sn as one composite morphism from `start`. The empty path
  // is the identity. Throws MissingMorphism naming the first absent hop.
  [[nodiscard]] Morphism resolve_path(
      const std::string& start, const std::vector<std::string>& path) const;

  // Shortest chain of stored morphisms from `source` to `target`, as the
  // object names visited after `source`.
  [[nodiscard]] std::optional<std::vector<std::string>> find_path(
      const std::string& source, const std::string& target) const;

  [[nodiscard]] std::vector<ThinnessViolation> check_thinness(
      ThinnessMode mode = ThinnessMode::Bounded) const;

 private:
  struct CompositeCache;
  void clear_cache();

  std::map<std::string, SetObject> objects_;
  std::map<std::string, Morphism> morphisms_;
  std::map<std::pair<std::string, std::string>, std::string> pair_index_;
  std::unique_ptr<CompositeCache> cache_;
};

}  // namespace catql
