#include "catql/calculus.hpp"
#include "catql/error.hpp"
#include "lexer.hpp"

namespace catql {

namespace {

using detail::Tok;
using detail::TokenStream;

const std::set<std::string>& keywords() {
  static const std::set<std::string> k{"not",  "and",    "or",    "in",
                                       "forall", "exists", "reach", "nhop",
                                       "dewey"};
  return k;
}

class CalculusParser {
 public:
  explicit CalculusParser(std::string_view src)
      : ts_(src, detail::tokenize(src, {.dotted_idents = false, .at_names = true})) {}

  CalculusQuery parse() {
    CalculusQuery q;
    ts_.expect("{");
    std::set<std::string> seen;
    do {
      std::vector<std::string> group;
      if (ts_.accept("(")) {
        do {
          group.push_back(variable());
        } while (ts_.accept(","));
        ts_.expect(")");
      } else {
        group.push_back(variable());
      }
      for (const auto& v : group) {
        if (!seen.insert(v).second) ts_.fail("target " + v + " listed twice");
      }
      q.target_groups.push_back(std::move(group));
    } while (ts_.accept(","));
    ts_.expect("|");
    q.body = formula();
    ts_.expect("}");
    if (ts_.peek().kind != Tok::End) ts_.fail("unexpected input after the query");
    return q;
  }

 private:
  std::string variable() {
    if (ts_.peek().kind != Tok::Ident || ts_.peek().text.starts_with("@") ||
        keywords().contains(ts_.peek().text)) {
      ts_.fail("expected a variable");
    }
    return ts_.next().text;
  }

  FormulaPtr formula() {
    auto lhs = disjunction();
    if (ts_.accept("->")) return formula::implies(lhs, formula());
    return lhs;
  }

  FormulaPtr disjunction() {
    std::vector<FormulaPtr> parts{conjunction()};
    while (ts_.accept_word("or")) parts.push_back(conjunction());
    return formula::disj(std::move(parts));
  }

  FormulaPtr conjunction() {
    std::vector<FormulaPtr> parts{unit()};
    while (ts_.accept(",") || ts_.accept_word("and")) parts.push_back(unit());
    return formula::conj(std::move(parts));
  }

  FormulaPtr unit() {
    if (ts_.accept_word("not")) return formula::negate(unit());
    if (ts_.at_word("forall") || ts_.at_word("exists")) return quantifier();
    if (ts_.accept("(")) {
      auto f = formula();
      ts_.expect(")");
      return f;
    }
    return term();
  }

  FormulaPtr quantifier() {
    bool all = ts_.next().text == "forall";
    // exists y2, y3 in SC, y4 in Course: body
    std::vector<std::pair<std::string, std::optional<std::string>>> vars;
    std::size_t pending = 0;
    while (true) {
      vars.emplace_back(variable(), std::nullopt);
      ++pending;
      if (ts_.accept_word("in")) {
        std::string obj = ts_.ident("an object name");
        for (std::size_t i = vars.size() - pending; i < vars.size(); ++i) {
          vars[i].second = obj;
        }
        pending = 0;
      }
      if (ts_.accept(",")) continue;
      if (pending && !ts_.at(":")) ts_.fail("expected 'in' or ':'");
      ts_.expect(":");
      break;
    }
    auto body = unit();
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
      body = all ? formula::forall(it->first, it->second, body)
                 : formula::exists(it->first, it->second, body);
    }
    return body;
  }

  FormulaPtr term() {
    const auto& t = ts_.peek();
    if (t.kind == Tok::Ident) {
      if (auto p = parse_tree_pred(t.text); p && ts_.peek(1).kind == Tok::Punct &&
                                            ts_.peek(1).text == "(") {
        ts_.next();
        ts_.expect("(");
        auto a = operand();
        ts_.expect(",");
        auto b = operand();
        ts_.expect(")");
        check_structural(a, b);
        return formula::tree(*p, a, b);
      }
      if (t.text == "reach" || t.text == "nhop") {
        bool bounded = ts_.next().text == "nhop";
        ts_.expect("[");
        std::string edges = ts_.ident("an edge object");
        int hops = 0;
        if (bounded) {
          ts_.expect(",");
          if (ts_.peek().kind != Tok::Int) ts_.fail("expected a hop count");
          hops = std::stoi(ts_.next().text);
          if (hops < 1) {
            throw Error(ErrorCode::InvalidHopCount,
                        "hop count must be at least 1");
          }
        }
        ts_.expect("]");
        ts_.expect("(");
        auto a = operand();
        ts_.expect(",");
        auto b = operand();
        ts_.expect(")");
        check_structural(a, b);
        return formula::graph(edges, hops, a, b);
      }
    }
    auto lhs = operand();
    if (ts_.accept_word("in")) {
      if (!lhs.is_var() || !lhs.path.empty()) {
        ts_.fail("only a plain variable can be ranged");
      }
      return formula::range(lhs.var, ts_.ident("an object name"));
    }
    if (ts_.peek().kind == Tok::Ident) {
      if (auto p = parse_tree_pred(ts_.peek().text)) {
        ts_.next();
        auto rhs = operand();
        check_structural(lhs, rhs);
        return formula::tree(*p, lhs, rhs);
      }
    }
    static const std::map<std::string, CmpOp> ops{
        {"=", CmpOp::Eq}, {"!=", CmpOp::Ne}, {"<", CmpOp::Lt},
        {">", CmpOp::Gt}, {"<=", CmpOp::Le}, {">=", CmpOp::Ge}};
    if (ts_.peek().kind != Tok::Punct || !ops.contains(ts_.peek().text)) {
      ts_.fail("expected a comparison, 'in' or a tree predicate");
    }
    CmpOp op = ops.at(ts_.next().text);
    auto rhs = operand();
    return formula::compare(lhs, op, rhs);
  }

  void check_structural(const CalcOperand& a, const CalcOperand& b) {
    if (!a.is_var() || !b.is_var()) {
      ts_.fail("tree and graph predicates take variables, not constants");
    }
  }

  CalcOperand operand() {
    const auto& t = ts_.peek();
    switch (t.kind) {
      case Tok::String: return CalcOperand::literal(Value(ts_.next().text));
      case Tok::Int:
        return CalcOperand::literal(Value(std::int64_t{std::stoll(ts_.next().text)}));
      case Tok::Float: return CalcOperand::literal(Value(std::stod(ts_.next().text)));
      case Tok::Ident: {
        if (t.text == "dewey") {
          ts_.next();
          ts_.expect("(");
          if (ts_.peek().kind != Tok::String) ts_.fail("expected a quoted Dewey code");
          Value v(DeweyCode::parse(ts_.next().text));
          ts_.expect(")");
          return CalcOperand::literal(std::move(v));
        }
        std::string var = variable();
        std::vector<PathStep> path;
        while (ts_.accept(".")) {
          if (ts_.peek().kind != Tok::Ident) ts_.fail("expected a path step");
          std::string step = ts_.next().text;
          bool morphism = step.starts_with("@");
          if (morphism) step.erase(0, 1);
          if (!path.empty() && path.back().morphism != morphism) {
            ts_.fail("a path uses either object names or @morphism names, not both");
          }
          path.push_back({step, morphism});
        }
        return CalcOperand::variable(std::move(var), std::move(path));
      }
      default:
        ts_.fail("expected a variable or a constant");
    }
  }

  TokenStream ts_;
};

void check_names(const Formula& f, const InstanceCategory& db) {
  auto object = [&](const std::string& n) {
    if (!db.has_object(n)) {
      throw Error(ErrorCode::UnknownObject, "no object named " + n);
    }
  };
  auto operand = [&](const CalcOperand& o) {
    for (const auto& s : o.path) {
      if (s.morphism) {
        if (!db.morphisms().contains(s.name)) {
          throw Error(ErrorCode::UnknownObject, "no morphism named " + s.name);
        }
      } else {
        object(s.name);
      }
    }
  };
  switch (f.kind) {
    case Formula::Kind::Range: object(*f.object); break;
    case Formula::Kind::Graph:
      object(f.edges);
      [[fallthrough]];
    case Formula::Kind::Compare:
    case Formula::Kind::Tree:
      operand(f.lhs);
      operand(f.rhs);
      break;
    case Formula::Kind::Exists:
    case Formula::Kind::ForAll:
      if (f.object) object(*f.object);
      [[fallthrough]];
    default:
      for (const auto& k : f.kids) check_names(*k, db);
  }
}

}  // namespace

CalculusQuery parse_calculus(std::string_view text,
                             const InstanceCategory* schema) {
  CalculusQuery q = CalculusParser(text).parse();
  auto free = free_variables(*q.body);
  for (const auto& t : q.targets()) {
    if (!free.contains(t)) {
      throw Error(ErrorCode::UnboundVariable,
                  "target " + t + " does not occur free in the body");
    }
  }
  auto targets = q.targets();
  for (const auto& v : free) {
    if (std::find(targets.begin(), targets.end(), v) == targets.end()) {
      throw Error(ErrorCode::UnboundVariable,
                  "variable " + v + " is neither a target nor quantified");
    }
  }
  if (schema) check_names(*q.body, *schema);
  return q;
}

}  // namespace catql
