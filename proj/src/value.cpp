#include "catql/value.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "catql/error.hpp"

namespace catql {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingMorphism: return "MissingMorphism";
    case ErrorCode::CompositionMismatch: return "CompositionMismatch";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ManifestSyntax: return "ManifestSyntax";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::DanglingEndpoint: return "DanglingEndpoint";
    case ErrorCode::ThinnessViolation: return "ThinnessViolation";
    case ErrorCode::TotalityViolation: return "TotalityViolation";
    case ErrorCode::NameClash: return "NameClash";
    case ErrorCode::UnresolvablePath: return "UnresolvablePath";
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::UnionIncompatible: return "UnionIncompatible";
    case ErrorCode::ComponentMismatch: return "ComponentMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::InvalidHopCount: return "InvalidHopCount";
    case ErrorCode::PartialFunction: return "PartialFunction";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::UnsafeQuery: return "UnsafeQuery";
    case ErrorCode::Unsupported: return "Unsupported";
  }
  return "Error";
}

// ---------------------------------------------------------------------------
// DeweyCode

DeweyCode DeweyCode::parse(std::string_view text) {
  if (text.empty() || text == "ε") return DeweyCode{};
  std::vector<std::uint32_t> parts;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto dot = text.find('.', pos);
    if (dot == std::string_view::npos) dot = text.size();
    auto piece = text.substr(pos, dot - pos);
    std::uint32_t n = 0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), n);
    if (piece.empty() || ec != std::errc{} || ptr != piece.data() + piece.size()) {
      throw Error(ErrorCode::TypeMismatch,
                  "invalid Dewey code '" + std::string(text) + "'");
    }
    parts.push_back(n);
    pos = dot + 1;
  }
  return DeweyCode(std::move(parts));
}

bool DeweyCode::is_prefix_of(const DeweyCode& other) const {
  if (components_.size() > other.components_.size()) return false;
  return std::equal(components_.begin(), components_.end(),
                    other.components_.begin());
}

bool DeweyCode::is_parent_of(const DeweyCode& other) const {
  return level() + 1 == other.level() && is_prefix_of(other);
}

bool DeweyCode::is_ancestor_of(const DeweyCode& other) const {
  return level() < other.level() && is_prefix_of(other);
}

bool DeweyCode::is_sibling_of(const DeweyCode& other) const {
  if (is_root() || other.is_root() || level() != other.level()) return false;
  if (*this == other) return false;
  return std::equal(components_.begin(), components_.end() - 1,
                    other.components_.begin());
}

bool DeweyCode::precedes(const DeweyCode& other) const {
  return components_ < other.components_;
}

DeweyCode DeweyCode::parent() const {
  if (is_root()) return {};
  return DeweyCode(
      std::vector<std::uint32_t>(components_.begin(), components_.end() - 1));
}

DeweyCode DeweyCode::child(std::uint32_t index) const {
  auto parts = components_;
  parts.push_back(index);
  return DeweyCode(std::move(parts));
}

std::string DeweyCode::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(components_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Int: return "int";
    case ValueKind::Float: return "float";
    case ValueKind::Text: return "text";
    case ValueKind::Dewey: return "dewey";
    case ValueKind::Tuple: return "tuple";
  }
  return "?";
}

namespace {

[[noreturn]] void wrong_kind(const Value& v, ValueKind wanted) {
  throw Error(ErrorCode::TypeMismatch,
              "expected " + std::string(to_string(wanted)) + " value, got " +
                  std::string(to_string(v.kind())) + " " + v.to_literal());
}

std::string format_double(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::int64_t Value::as_int() const {
  if (kind() != ValueKind::Int) wrong_kind(*this, ValueKind::Int);
  return std::get<std::int64_t>(data_);
}
double Value::as_float() const {
  if (kind() != ValueKind::Float) wrong_kind(*this, ValueKind::Float);
  return std::get<double>(data_);
}
const std::string& Value::as_text() const {
  if (kind() != ValueKind::Text) wrong_kind(*this, ValueKind::Text);
  return std::get<std::string>(data_);
}
const DeweyCode& Value::as_dewey() const {
  if (kind() != ValueKind::Dewey) wrong_kind(*this, ValueKind::Dewey);
  return std::get<DeweyCode>(data_);
}
const Tuple& Value::as_tuple() const {
  if (kind() != ValueKind::Tuple) wrong_kind(*this, ValueKind::Tuple);
  return std::get<Tuple>(data_);
}

std::string Value::to_string() const {
  switch (kind()) {
    case ValueKind::Int: return std::to_string(as_int());
    case ValueKind::Float: return format_double(as_float());
    case ValueKind::Text: return as_text();
    case ValueKind::Dewey:
      return as_dewey().is_root() ? "ε" : as_dewey().to_string();
    case ValueKind::Tuple: {
      std::string out = "(";
      const auto& t = as_tuple();
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += ", ";
        out += t[i].to_string();
      }
      return out + ")";
    }
  }
  return {};
}

std::string Value::to_literal() const {
  switch (kind()) {
    case ValueKind::Text: return quote(as_text());
    case ValueKind::Dewey: return "dewey(\"" + as_dewey().to_string() + "\")";
    case ValueKind::Tuple: {
      std::string out = "(";
      const auto& t = as_tuple();
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += ", ";
        out += t[i].to_literal();
      }
      return out + ")";
    }
    default: return to_string();
  }
}

bool operator<(const Value& a, const Value& b) {
  if (a.data_.index() != b.data_.index()) {
    return a.data_.index() < b.data_.index();
  }
  switch (a.kind()) {
    case ValueKind::Int: return a.as_int() < b.as_int();
    case ValueKind::Float: return a.as_float() < b.as_float();
    case ValueKind::Text: return a.as_text() < b.as_text();
    case ValueKind::Dewey: return a.as_dewey() < b.as_dewey();
    case ValueKind::Tuple:
      return std::lexicographical_compare(a.as_tuple().begin(),
                                          a.as_tuple().end(),
                                          b.as_tuple().begin(),
                                          b.as_tuple().end());
  }
  return false;
}

bool operator==(const Value& a, const Value& b) {
  if (a.data_.index() != b.data_.index()) return false;
  switch (a.kind()) {
    case ValueKind::Int: return a.as_int() == b.as_int();
    case ValueKind::Float: return a.as_float() == b.as_float();
    case ValueKind::Text: return a.as_text() == b.as_text();
    case ValueKind::Dewey: return a.as_dewey() == b.as_dewey();
    case ValueKind::Tuple: return a.as_tuple() == b.as_tuple();
  }
  return false;
}

// ---------------------------------------------------------------------------
// θ_M

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "eq";
    case CmpOp::Ne: return "ne";
    case CmpOp::Lt: return "lt";
    case CmpOp::Gt: return "gt";
    case CmpOp::Le: return "le";
    case CmpOp::Ge: return "ge";
  }
  return "?";
}

std::string_view to_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

CmpOp complement(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return CmpOp::Ne;
    case CmpOp::Ne: return CmpOp::Eq;
    case CmpOp::Lt: return CmpOp::Ge;
    case CmpOp::Gt: return CmpOp::Le;
    case CmpOp::Le: return CmpOp::Gt;
    case CmpOp::Ge: return CmpOp::Lt;
  }
  return op;
}

CmpOp mirror(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Gt;
    case CmpOp::Gt: return CmpOp::Lt;
    case CmpOp::Le: return CmpOp::Ge;
    case CmpOp::Ge: return CmpOp::Le;
    default: return op;
  }
}

bool compare(const Value& lhs, CmpOp op, const Value& rhs) {
  if (lhs.kind() != rhs.kind()) {
    throw Error(ErrorCode::TypeMismatch,
                "cannot compare " + std::string(to_string(lhs.kind())) + " " +
                    lhs.to_literal() + " with " +
                    std::string(to_string(rhs.kind())) + " " +
                    rhs.to_literal());
  }
  switch (op) {
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return !(lhs == rhs);
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Gt: return rhs < lhs;
    case CmpOp::Le: return !(rhs < lhs);
    case CmpOp::Ge: return !(lhs < rhs);
  }
  return false;
}

}  // namespace catql
