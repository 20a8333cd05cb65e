#include <regex>

#include "catql/algebra.hpp"
#include "catql/error.hpp"
#include "lexer.hpp"

namespace catql {

namespace {

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words{"id",     "path", "compose",
                                           "tensor", "at",   "dewey",
                                           "as",     "eq",   "ne",
                                           "lt",     "gt",   "le",
                                           "ge",     "table"};
  return words;
}

std::string name(const std::string& n) {
  static const std::regex plain("[A-Za-z_][A-Za-z0-9_]*([.#][A-Za-z0-9_]+)*");
  if (std::regex_match(n, plain)) return n;
  return "`" + n + "`";
}

std::string list(const std::vector<std::string>& names) {
  std::string out = "[";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += name(names[i]);
  }
  return out + "]";
}

std::string operand(const Operand& o) {
  return o.constant ? o.constant->to_literal() : to_text(o.fn);
}

std::string items_text(const std::vector<ProjectItem>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += name(items[i].column);
    if (!items[i].alias.empty() && items[i].alias != items[i].column) {
      out += " as " + name(items[i].alias);
    }
  }
  return out + "]";
}

std::string arrow_text(const AlgebraExpr& cat, const CatMorphism& m) {
  std::string out = name(m.name) + ": " + name(cat.labels.at(m.source)) +
                    " -> " + name(cat.labels.at(m.target));
  if (!m.fn.is_identity()) out += " = " + to_text(m.fn);
  return out;
}

// Arguments of a node that are not sub-plans, in print order.
std::vector<std::string> trailing_args(const AlgebraExpr& e) {
  switch (e.op) {
    case OpKind::Map: return {to_text(e.fn)};
    case OpKind::Project: return {items_text(e.items)};
    case OpKind::Select: return {to_text(e.condition)};
    case OpKind::GetNHop: return {std::to_string(e.hops)};
    default: return {};
  }
}

void pretty(const AlgebraExpr& e, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(depth + 1) * 2, ' ');
  if (e.op == OpKind::Base) {
    out += pad + "base(" + name(e.object) + ")";
    return;
  }
  out += pad + std::string(to_string(e.op)) + "(\n";
  if (e.op == OpKind::Cat) {
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ",\n";
      std::string sub;
      pretty(*e.children[i], depth + 1, sub);
      out += inner + name(e.labels.at(i)) + " = " + sub.substr(inner.size());
    }
    if (!e.morphisms.empty()) {
      out += ";\n";
      for (std::size_t k = 0; k < e.morphisms.size(); ++k) {
        if (k) out += ",\n";
        out += inner + arrow_text(e, e.morphisms[k]);
      }
    }
  } else if (e.op == OpKind::Divide) {
    pretty(*e.children[0], depth + 1, out);
    out += ",\n" + inner + list(e.divide_left) + ",\n";
    pretty(*e.children[1], depth + 1, out);
    if (!e.divide_right.empty()) out += ",\n" + inner + list(e.divide_right);
  } else {
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ",\n";
      pretty(*e.children[i], depth + 1, out);
    }
    for (const auto& arg : trailing_args(e)) out += ",\n" + inner + arg;
  }
  out += "\n" + pad + ")";
}

// ---------------------------------------------------------------------------
// Parser

using detail::Tok;
using detail::TokenStream;

class AlgebraParser {
 public:
  explicit AlgebraParser(std::string_view src)
      : ts_(src, detail::tokenize(src, {.dotted_idents = true})) {}

  ExprPtr parse() {
    auto e = expr();
    if (ts_.peek().kind != Tok::End) ts_.fail("unexpected trailing input");
    return e;
  }

 private:
  ExprPtr expr() {
    std::string op = ts_.ident("an operator");
    static const std::map<std::string, OpKind> binaries{
        {"union", OpKind::Union},
        {"intersect", OpKind::Intersect},
        {"difference", OpKind::Difference},
        {"product", OpKind::Product},
        {"getParent", OpKind::GetParent},
        {"getAncestor", OpKind::GetAncestor},
        {"getSibling", OpKind::GetSibling},
        {"getPreceding", OpKind::GetPreceding},
        {"getFollowing", OpKind::GetFollowing},
    };
    ts_.expect("(");
    ExprPtr out;
    if (op == "base") {
      out = plan::base(ts_.ident("an object name"));
    } else if (op == "map") {
      auto in = expr();
      ts_.expect(",");
      out = plan::map(in, fn());
    } else if (op == "project") {
      auto in = expr();
      ts_.expect(",");
      out = plan::project(in, items());
    } else if (op == "select") {
      auto in = expr();
      ts_.expect(",");
      out = plan::select(in, condition());
    } else if (auto it = binaries.find(op); it != binaries.end()) {
      auto l = expr();
      ts_.expect(",");
      auto r = expr();
      out = is_tree_op(it->second) ? plan::tree(it->second, l, r)
                                   : plan::binary(it->second, l, r);
    } else if (op == "divide") {
      auto r = expr();
      ts_.expect(",");
      auto a = names();
      ts_.expect(",");
      auto s = expr();
      std::vector<std::string> b;
      if (ts_.accept(",")) b = names();
      out = plan::divide(r, a, s, b);
    } else if (op == "getReach" || op == "getNHop") {
      auto s = expr();
      ts_.expect(",");
      auto t = expr();
      ts_.expect(",");
      auto e = expr();
      if (op == "getNHop") {
        ts_.expect(",");
        if (ts_.peek().kind != Tok::Int) ts_.fail("expected a hop count");
        int n = std::stoi(ts_.next().text);
        out = plan::nhop(s, t, e, n);
      } else {
        out = plan::reach(s, t, e);
      }
    } else if (op == "cat") {
      out = cat_body();
    } else if (op == "lim") {
      if (!ts_.accept_word("cat")) ts_.fail("lim expects cat(...)");
      ts_.expect("(");
      auto c = cat_body();
      ts_.expect(")");
      out = plan::lim(c);
    } else {
      ts_.fail("unknown operator '" + op + "'");
    }
    ts_.expect(")");
    return out;
  }

  ExprPtr cat_body() {
    std::vector<ExprPtr> objects;
    std::vector<std::string> labels;
    do {
      std::string label;
      if (ts_.peek().kind == Tok::Ident && ts_.peek(1).kind == Tok::Punct &&
          ts_.peek(1).text == "=") {
        label = ts_.next().text;
        ts_.next();
      }
      labels.push_back(label);
      objects.push_back(expr());
    } while (ts_.accept(","));
    auto node = plan::cat(objects, {}, labels);
    std::vector<CatMorphism> arrows;
    if (ts_.accept(";")) {
      auto index = [&](const std::string& l) {
        for (std::size_t i = 0; i < node->labels.size(); ++i) {
          if (node->labels[i] == l) return i;
        }
        ts_.fail("no object labelled '" + l + "' in this cat");
      };
      do {
        CatMorphism m;
        m.name = ts_.ident("a morphism name");
        ts_.expect(":");
        m.source = index(ts_.ident("a source label"));
        ts_.expect("->");
        m.target = index(ts_.ident("a target label"));
        if (ts_.accept("=")) m.fn = fn();
        arrows.push_back(std::move(m));
      } while (ts_.accept(","));
    }
    auto copy = std::make_shared<AlgebraExpr>(*node);
    copy->morphisms = std::move(arrows);
    return copy;
  }

  std::vector<std::string> names() {
    std::vector<std::string> out;
    ts_.expect("[");
    if (!ts_.at("]")) {
      do {
        out.push_back(ts_.ident("a component name"));
      } while (ts_.accept(","));
    }
    ts_.expect("]");
    return out;
  }

  std::vector<ProjectItem> items() {
    std::vector<ProjectItem> out;
    ts_.expect("[");
    do {
      ProjectItem item;
      item.column = ts_.ident("a component name");
      if (ts_.accept_word("as")) item.alias = ts_.ident("a new name");
      out.push_back(std::move(item));
    } while (ts_.accept(","));
    ts_.expect("]");
    return out;
  }

  FunctionExpr fn() {
    std::string head = ts_.ident("a function expression");
    if (head == "id") return FunctionExpr::identity();
    if (!ts_.at("(") || !reserved_words().contains(head)) {
      return FunctionExpr::at(head);
    }
    ts_.expect("(");
    FunctionExpr out;
    if (head == "path" || head == "compose") {
      std::vector<std::string> parts;
      if (!ts_.at(")")) {
        do {
          parts.push_back(ts_.ident("a name"));
        } while (ts_.accept(","));
      }
      if (head == "path") {
        out = FunctionExpr::path(std::move(parts));
      } else {
        std::reverse(parts.begin(), parts.end());
        out = FunctionExpr::compose(std::move(parts));
      }
    } else if (head == "tensor") {
      auto f = fn();
      ts_.expect(",");
      out = FunctionExpr::product(f, fn());
    } else if (head == "at") {
      std::string c = ts_.ident("a component name");
      FunctionExpr inner;
      if (ts_.accept(",")) inner = fn();
      out = FunctionExpr::at(c, inner);
    } else if (head == "table") {
      auto outputs = names();
      std::map<Value, Value> mapping;
      while (ts_.accept(",")) {
        Value k = value();
        ts_.expect("->");
        mapping[k] = value();
      }
      out = FunctionExpr::tabulated(mapping, std::move(outputs));
    } else {
      ts_.fail("'" + head + "' is not a function expression");
    }
    ts_.expect(")");
    return out;
  }

  // A literal value; tuples are parenthesized.
  Value value() {
    if (ts_.accept("(")) {
      Tuple parts;
      do {
        parts.push_back(value());
      } while (ts_.accept(","));
      ts_.expect(")");
      return Value(std::move(parts));
    }
    Operand o = operand();
    if (!o.constant) ts_.fail("expected a literal value");
    return *o.constant;
  }

  Operand operand() {
    const auto& t = ts_.peek();
    switch (t.kind) {
      case Tok::String: return Operand::literal(Value(ts_.next().text));
      case Tok::Int: return Operand::literal(Value(std::int64_t{std::stoll(ts_.next().text)}));
      case Tok::Float: return Operand::literal(Value(std::stod(ts_.next().text)));
      case Tok::Ident:
        if (t.text == "dewey" && ts_.peek(1).kind == Tok::Punct &&
            ts_.peek(1).text == "(") {
          ts_.next();
          ts_.next();
          if (ts_.peek().kind != Tok::String) ts_.fail("expected a quoted Dewey code");
          Value v(DeweyCode::parse(ts_.next().text));
          ts_.expect(")");
          return Operand::literal(std::move(v));
        }
        return Operand::of(fn());
      default:
        ts_.fail("expected an operand");
    }
  }

  Condition condition() {
    static const std::map<std::string, CmpOp> ops{
        {"eq", CmpOp::Eq}, {"ne", CmpOp::Ne}, {"lt", CmpOp::Lt},
        {"gt", CmpOp::Gt}, {"le", CmpOp::Le}, {"ge", CmpOp::Ge}};
    std::string head = ts_.ident("a comparison");
    auto it = ops.find(head);
    if (it == ops.end()) ts_.fail("unknown comparison '" + head + "'");
    Condition c;
    c.op = it->second;
    ts_.expect("(");
    c.left = operand();
    ts_.expect(",");
    c.right = operand();
    ts_.expect(")");
    return c;
  }

  TokenStream ts_;
};

}  // namespace

std::string to_text(const FunctionExpr& fn) {
  using K = FunctionExpr::Kind;
  switch (fn.kind) {
    case K::Path: {
      if (fn.names.empty()) return "id";
      std::string out = "path(";
      for (std::size_t i = 0; i < fn.names.size(); ++i) {
        if (i) out += ", ";
        out += name(fn.names[i]);
      }
      return out + ")";
    }
    case K::Compose: {
      std::string out = "compose(";
      for (std::size_t i = fn.names.size(); i-- > 0;) {
        out += name(fn.names[i]);
        if (i) out += ", ";
      }
      return out + ")";
    }
    case K::Product:
      return "tensor(" + to_text(fn.children[0]) + ", " +
             to_text(fn.children[1]) + ")";
    case K::Component:
      if (fn.children[0].is_identity()) {
        if (!reserved_words().contains(fn.component)) return name(fn.component);
        return "at(" + name(fn.component) + ")";
      }
      return "at(" + name(fn.component) + ", " + to_text(fn.children[0]) + ")";
    case K::Table: {
      std::string out = "table([";
      for (std::size_t i = 0; i < fn.names.size(); ++i) {
        if (i) out += ", ";
        out += name(fn.names[i]);
      }
      out += "]";
      for (const auto& [k, v] : fn.table) {
        out += ", " + k.to_literal() + " -> " + v.to_literal();
      }
      return out + ")";
    }
  }
  return "?";
}

std::string to_text(const Condition& c) {
  return std::string(to_string(c.op)) + "(" + operand(c.left) + ", " +
         operand(c.right) + ")";
}

std::string to_text(const AlgebraExpr& e) {
  if (e.op == OpKind::Base) return "base(" + name(e.object) + ")";
  std::string out = std::string(to_string(e.op)) + "(";
  if (e.op == OpKind::Cat) {
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ", ";
      out += name(e.labels.at(i)) + " = " + to_text(*e.children[i]);
    }
    if (!e.morphisms.empty()) {
      out += "; ";
      for (std::size_t k = 0; k < e.morphisms.size(); ++k) {
        if (k) out += ", ";
        out += arrow_text(e, e.morphisms[k]);
      }
    }
  } else if (e.op == OpKind::Divide) {
    out += to_text(*e.children[0]) + ", " + list(e.divide_left) + ", " +
           to_text(*e.children[1]);
    if (!e.divide_right.empty()) out += ", " + list(e.divide_right);
  } else {
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ", ";
      out += to_text(*e.children[i]);
    }
    for (const auto& arg : trailing_args(e)) out += ", " + arg;
  }
  return out + ")";
}

std::string to_pretty_text(const AlgebraExpr& expr) {
  std::string out;
  pretty(expr, 0, out);
  return out + "\n";
}

ExprPtr parse_algebra(std::string_view text) {
  return AlgebraParser(text).parse();
}

}  // namespace catql
