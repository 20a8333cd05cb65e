#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "catql/error.hpp"

namespace catql::detail {

enum class Tok {
  Ident,   // also `@name` when at_names is on (text keeps the '@')
  String,  // text holds the unescaped contents
  Int,
  Float,
  Punct,   // ( ) [ ] { } , ; : . | = != < > <= >= ->
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t offset = 0;
};

struct LexOptions {
  // Algebra column names such as `x1.student` or `Name#2` are single words.
  bool dotted_idents = false;
  bool at_names = false;
};

std::vector<Token> tokenize(std::string_view src, LexOptions options);

// "line L, column C" for a byte offset.
std::string describe_position(std::string_view src, std::size_t offset);

class TokenStream {
 public:
  TokenStream(std::string_view src, std::vector<Token> tokens)
      : src_(src), tokens_(std::move(tokens)) {}

  [[nodiscard]] const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < tokens_.size() ? tokens_[i] : tokens_.back();
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }
  [[nodiscard]] bool at(std::string_view punct) const {
    return peek().kind == Tok::Punct && peek().text == punct;
  }
  [[nodiscard]] bool at_word(std::string_view word) const {
    return peek().kind == Tok::Ident && peek().text == word;
  }
  bool accept(std::string_view punct) {
    if (!at(punct)) return false;
    next();
    return true;
  }
  bool accept_word(std::string_view word) {
    if (!at_word(word)) return false;
    next();
    return true;
  }
  void expect(std::string_view punct) {
    if (!accept(punct)) fail("expected '" + std::string(punct) + "'");
  }
  std::string ident(std::string_view what = "identifier") {
    if (peek().kind != Tok::Ident) fail("expected " + std::string(what));
    return next().text;
  }
  [[noreturn]] void fail(const std::string& message) const {
    const Token& t = peek();
    std::string found =
        t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorCode::SyntaxError, message + " at " +
                                            describe_position(src_, t.offset) +
                                            ", found " + found);
  }
  [[nodiscard]] std::string_view source() const { return src_; }

 private:
  std::string_view src_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace catql::detail
