#include "lexer.hpp"

#include <cctype>

namespace catql::detail {

namespace {

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

std::string describe_position(std::string_view src, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::vector<Token> tokenize(std::string_view src, LexOptions opt) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](std::size_t at, const std::string& msg) {
    throw Error(ErrorCode::SyntaxError,
                msg + " at " + describe_position(src, at));
  };
  while (i < src.size()) {
    unsigned char c = src[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '#' && (i + 1 >= src.size() || src[i + 1] == ' ' ||
                     src[i + 1] == '#' || src[i + 1] == '\t')) {
      // Comment to end of line.
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    std::size_t start = i;
    if (ident_start(c) || (opt.at_names && c == '@') || c == '`') {
      std::string text;
      if (c == '`') {
        ++i;
        while (i < src.size() && src[i] != '`') text += src[i++];
        if (i >= src.size()) fail(start, "unterminated quoted name");
        ++i;
      } else {
        if (c == '@') text += src[i++];
        if (i >= src.size() || !ident_start(src[i])) {
          fail(start, "expected a name after '@'");
        }
        while (i < src.size()) {
          unsigned char d = src[i];
          if (ident_char(d)) {
            text += src[i++];
          } else if (opt.dotted_idents && (d == '#' || d == '.') &&
                     i + 1 < src.size() &&
                     ident_char(static_cast<unsigned char>(src[i + 1]))) {
            text += src[i++];
          } else {
            break;
          }
        }
      }
      out.push_back({Tok::Ident, std::move(text), start});
      continue;
    }
    if (std::isdigit(c) ||
        (c == '-' && i + 1 < src.size() && std::isdigit(
                                                 static_cast<unsigned char>(src[i + 1])))) {
      std::string text(1, src[i++]);
      bool is_float = false;
      while (i < src.size()) {
        unsigned char d = src[i];
        if (std::isdigit(d)) {
          text += src[i++];
        } else if (d == '.' && !is_float && i + 1 < src.size() &&
                   std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
          is_float = true;
          text += src[i++];
        } else if ((d == 'e' || d == 'E') && i + 1 < src.size() &&
                   (std::isdigit(static_cast<unsigned char>(src[i + 1])) ||
                    src[i + 1] == '-' || src[i + 1] == '+')) {
          is_float = true;
          text += src[i++];
          if (src[i] == '-' || src[i] == '+') text += src[i++];
        } else {
          break;
        }
      }
      out.push_back({is_float ? Tok::Float : Tok::Int, std::move(text), start});
      continue;
    }
    if (c == '"' || c == '\'') {
      char quote = src[i++];
      std::string text;
      while (i < src.size() && src[i] != quote) {
        if (src[i] == '\\' && i + 1 < src.size()) ++i;
        text += src[i++];
      }
      if (i >= src.size()) fail(start, "unterminated string");
      ++i;
      out.push_back({Tok::String, std::move(text), start});
      continue;
    }
    static const std::string_view two[] = {"!=", "<=", ">=", "->", "<>"};
    bool matched = false;
    for (auto p : two) {
      if (src.substr(i, 2) == p) {
        out.push_back({Tok::Punct, p == "<>" ? "!=" : std::string(p), start});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("()[]{},;:.|=<>").find(static_cast<char>(c)) !=
        std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, static_cast<char>(c)), start});
      ++i;
      continue;
    }
    fail(start, std::string("unexpected character '") + static_cast<char>(c) +
                    "'");
  }
  out.push_back({Tok::End, "", src.size()});
  return out;
}

}  // namespace catql::detail
