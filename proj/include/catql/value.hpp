#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace catql {

// Positional label of a tree node. The root is the empty vector; the k-th
// child (1-based) of a node labelled `p` is labelled `p.k`.
class DeweyCode {
 public:
  DeweyCode() = default;
  explicit DeweyCode(std::vector<std::uint32_t> components)
      : components_(std::move(components)) {}

  // Accepts "1.2.3"; the empty string and "ε" denote the root.
  static DeweyCode parse(std::string_view text);

  [[nodiscard]] const std::vector<std::uint32_t>& components() const {
    return components_;
  }
  [[nodiscard]] std::size_t level() const { return components_.size(); }
  [[nodiscard]] bool is_root() const { return components_.empty(); }

  // Component-wise: "1.2" is a prefix of "1.2.3" but not of "1.22".
  // Every code is a prefix of itself.
  [[nodiscard]] bool is_prefix_of(const DeweyCode& other) const;
  [[nodiscard]] bool is_parent_of(const DeweyCode& other) const;
  [[nodiscard]] bool is_ancestor_of(const DeweyCode& other) const;
  [[nodiscard]] bool is_sibling_of(const DeweyCode& other) const;
  // Document order is lexicographic order on component vectors.
  [[nodiscard]] bool precedes(const DeweyCode& other) const;

  [[nodiscard]] DeweyCode parent() const;
  [[nodiscard]] DeweyCode child(std::uint32_t index) const;
  [[nodiscard]] std::string to_string() const;

  auto operator<=>(const DeweyCode&) const = default;
  bool operator==(const DeweyCode&) const = default;

 private:
  std::vector<std::uint32_t> components_;
};

enum class ValueKind { Int, Float, Text, Dewey, Tuple };

std::string_view to_string(ValueKind kind);

class Value;
using Tuple = std::vector<Value>;

// A single element of an object. Tuples only occur as elements of
// relationship objects and as rows of multi-column result sets.
class Value {
 public:
  using Storage =
      std::variant<std::int64_t, double, std::string, DeweyCode, Tuple>;

  Value() : data_(std::int64_t{0}) {}
  Value(std::int64_t v) : data_(v) {}  // NOLINT(google-explicit-constructor)
  Value(int v) : data_(std::int64_t{v}) {}  // NOLINT
  Value(double v) : data_(v) {}             // NOLINT
  Value(std::string v) : data_(std::move(v)) {}  // NOLINT
  Value(const char* v) : data_(std::string(v)) {}  // NOLINT
  Value(DeweyCode v) : data_(std::move(v)) {}      // NOLINT
  Value(Tuple v) : data_(std::move(v)) {}          // NOLINT

  [[nodiscard]] ValueKind kind() const {
    return static_cast<ValueKind>(data_.index());
  }
  [[nodiscard]] bool is_tuple() const { return kind() == ValueKind::Tuple; }

  [[nodiscard]] std::int64_t as_int() const;
  [[nodiscard]] double as_float() const;
  [[nodiscard]] const std::string& as_text() const;
  [[nodiscard]] const DeweyCode& as_dewey() const;
  [[nodiscard]] const Tuple& as_tuple() const;

  [[nodiscard]] const Storage& storage() const { return data_; }

  // Display form used in result tables: text is unquoted, the root Dewey
  // code prints as "ε", tuples print as "(a, b)".
  [[nodiscard]] std::string to_string() const;
  // Literal form accepted by the query and algebra parsers.
  [[nodiscard]] std::string to_literal() const;

  // Total order used for set storage only: kind first, then value. This is
  // not the θ_M comparison, which rejects mixed kinds.
  friend bool operator<(const Value& a, const Value& b);
  friend bool operator==(const Value& a, const Value& b);
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

 private:
  Storage data_;
};

// Classic comparison predicates (=, ≠, <, >, ≤, ≥).
enum class CmpOp { Eq, Ne, Lt, Gt, Le, Ge };

std::string_view to_string(CmpOp op);
std::string_view to_symbol(CmpOp op);
CmpOp complement(CmpOp op);
// The operator that holds for (b, a) whenever `op` holds for (a, b).
CmpOp mirror(CmpOp op);

// Throws Error(TypeMismatch) if the kinds differ. Floats compare exactly.
bool compare(const Value& lhs, CmpOp op, const Value& rhs);

}  // namespace catql
