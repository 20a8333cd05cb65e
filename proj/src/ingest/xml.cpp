#include <map>
#include <set>

#include "catql/ingest.hpp"
#include "io.hpp"

namespace catql::ingest {

namespace {

class XmlParser {
 public:
  XmlParser(std::string_view text, std::string origin)
      : s_(text), origin_(std::move(origin)) {}

  XmlElement document() {
    if (s_.substr(pos_).starts_with("\xEF\xBB\xBF")) pos_ += 3;
    misc(true);
    if (eof() || peek() != '<') malformed("expected the root element");
    XmlElement root = element();
    misc(false);
    if (!eof()) malformed("content after the root element");
    return root;
  }

 private:
  std::string_view s_;
  std::string origin_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;

  [[noreturn]] void malformed(const std::string& msg) const {
    throw Error(ErrorCode::MalformedXml, where() + ": " + msg);
  }
  [[noreturn]] void unsupported(const std::string& what) const {
    throw Error(ErrorCode::UnsupportedFeature, where() + ": " + what);
  }
  [[nodiscard]] std::string where() const {
    std::string p = std::to_string(line_) + ":" + std::to_string(col_);
    return origin_.empty() ? p : origin_ + ":" + p;
  }

  [[nodiscard]] bool eof() const { return pos_ >= s_.size(); }
  [[nodiscard]] char peek() const { return s_[pos_]; }
  [[nodiscard]] bool ahead(std::string_view t) const { return s_.substr(pos_).starts_with(t); }
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && !eof(); ++i) {
      if (s_[pos_++] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }
  void skip_space() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }
  void skip_past(std::string_view end, const char* what) {
    auto at = s_.find(end, pos_);
    if (at == std::string_view::npos) malformed(std::string("unterminated ") + what);
    advance(at + end.size() - pos_);
  }

  // Whitespace, comments and (in the prolog) the XML declaration.
  void misc(bool prolog) {
    for (;;) {
      skip_space();
      if (ahead("<!--")) {
        skip_past("-->", "comment");
      } else if (ahead("<?xml") && prolog && pos_ <= 3) {
        skip_past("?>", "declaration");
      } else if (ahead("<?")) {
        unsupported("processing instruction");
      } else if (ahead("<!DOCTYPE")) {
        unsupported("DOCTYPE");
      } else {
        return;
      }
    }
  }

  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':' || static_cast<unsigned char>(c) >= 0x80;
  }

  std::string name() {
    std::size_t start = pos_;
    if (eof() || !(std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_' ||
                   static_cast<unsigned char>(peek()) >= 0x80)) {
      malformed("expected a name");
    }
    while (!eof() && name_char(peek())) advance();
    std::string n(s_.substr(start, pos_ - start));
    if (n.find(':') != std::string::npos) unsupported("namespace prefix in '" + n + "'");
    return n;
  }

  void entity(std::string& out) {
    auto semi = s_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 12) malformed("bad entity reference");
    std::string_view ref = s_.substr(pos_ + 1, semi - pos_ - 1);
    static const std::map<std::string_view, char> named = {
        {"lt", '<'}, {"gt", '>'}, {"amp", '&'}, {"quot", '"'}, {"apos", '\''}};
    if (auto it = named.find(ref); it != named.end()) {
      out += it->second;
    } else if (ref.size() > 1 && ref[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = ref[1] == 'x' ? std::stoul(std::string(ref.substr(2)), nullptr, 16)
                           : std::stoul(std::string(ref.substr(1)));
      } catch (const std::exception&) {
        malformed("bad character reference");
      }
      // UTF-8 encode
      if (cp < 0x80) {
        out += static_cast<char>(cp);
      } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      }
    } else {
      malformed("unknown entity &" + std::string(ref) + ";");
    }
    advance(semi + 1 - pos_);
  }

  XmlElement element() {
    XmlElement e;
    e.line = line_;
    e.column = col_;
    advance();  // '<'
    e.tag = name();
    skip_space();
    if (!eof() && peek() != '>' && peek() != '/') unsupported("attributes on <" + e.tag + ">");
    if (ahead("/>")) {
      advance(2);
      return e;
    }
    if (eof() || peek() != '>') malformed("expected '>'");
    advance();

    std::string text;
    bool has_text = false;
    for (;;) {
      if (eof()) malformed("unclosed <" + e.tag + ">");
      if (ahead("</")) {
        advance(2);
        std::string closing = name();
        if (closing != e.tag) malformed("</" + closing + "> closes <" + e.tag + ">");
        skip_space();
        if (eof() || peek() != '>') malformed("expected '>'");
        advance();
        break;
      }
      if (ahead("<!--")) {
        skip_past("-->", "comment");
      } else if (ahead("<![CDATA[")) {
        unsupported("CDATA");
      } else if (ahead("<?")) {
        unsupported("processing instruction");
      } else if (ahead("<!")) {
        unsupported("markup declaration");
      } else if (peek() == '<') {
        e.children.push_back(element());
      } else if (peek() == '&') {
        entity(text);
        has_text = true;
      } else {
        if (!std::isspace(static_cast<unsigned char>(peek()))) has_text = true;
        text += peek();
        advance();
      }
      if (has_text && !e.children.empty()) unsupported("mixed content in <" + e.tag + ">");
    }
    if (has_text) {
      auto b = text.find_first_not_of(" \t\r\n");
      auto last = text.find_last_not_of(" \t\r\n");
      e.text = b == std::string::npos ? "" : text.substr(b, last - b + 1);
    }
    return e;
  }
};

void number(const XmlElement& e, const DeweyCode& code,
            std::vector<std::pair<DeweyCode, const XmlElement*>>& out) {
  out.emplace_back(code, &e);
  for (std::size_t i = 0; i < e.children.size(); ++i) {
    number(e.children[i], code.child(static_cast<std::uint32_t>(i + 1)), out);
  }
}

}  // namespace

XmlElement parse_xml(std::string_view text) { return XmlParser(text, "").document(); }

std::vector<std::pair<DeweyCode, const XmlElement*>> number_nodes(const XmlElement& root) {
  std::vector<std::pair<DeweyCode, const XmlElement*>> out;
  number(root, DeweyCode{}, out);
  return out;
}

Part load_xml_text(std::string_view text, const SourceDecl& decl, const std::string& origin) {
  XmlElement root = XmlParser(text, origin).document();
  auto nodes = number_nodes(root);

  Part part;
  part.origin = origin;
  std::map<std::string, std::string> object_of;  // tag -> object
  std::map<std::string, SetObject> objects;      // by name, in this document
  std::vector<std::string> order;
  auto object = [&](const std::string& name, ObjectKind kind) -> SetObject& {
    auto [it, fresh] = objects.try_emplace(name);
    if (fresh) {
      it->second.name = name;
      it->second.kind = kind;
      order.push_back(name);
    } else if (it->second.kind != kind) {
      throw Error(ErrorCode::NameClash, origin + ": " + name + " used as two kinds of object");
    }
    return it->second;
  };

  for (const auto& [tag, obj] : decl.tags) {
    if (!object_of.emplace(tag, obj).second) {
      throw Error(ErrorCode::NameClash, origin + ": tag " + tag + " mapped twice");
    }
    object(obj, ObjectKind::Entity);
  }
  object(decl.dewey, ObjectKind::Attribute);

  std::map<std::string, Morphism> dewey_maps;  // by tag object
  std::vector<Morphism> text_maps(decl.text.size());
  for (std::size_t j = 0; j < decl.text.size(); ++j) {
    const auto& f = decl.text[j];
    if (!object_of.contains(f.tag)) {
      throw Error(ErrorCode::ManifestSyntax,
                  origin + ": text field on undeclared tag " + f.tag);
    }
    object(f.object, ObjectKind::Attribute);
    text_maps[j].name = detail::lower(f.object);
    text_maps[j].source = object_of[f.tag];
    text_maps[j].target = f.object;
  }

  for (const auto& [code, node] : nodes) {
    auto it = object_of.find(node->tag);
    if (it == object_of.end()) continue;
    const std::string& obj = it->second;
    Value id(code);
    objects[obj].elements.insert(id);
    objects[decl.dewey].elements.insert(id);
    auto& dm = dewey_maps[obj];
    dm.name = "dewey";
    dm.source = obj;
    dm.target = decl.dewey;
    dm.mapping.emplace(id, id);

    // Text-only children with a unique tag become fields.
    std::map<std::string, int> seen;
    for (const auto& c : node->children) ++seen[c.tag];
    auto& rec = part.fields[obj][id];
    for (const auto& c : node->children) {
      if (c.children.empty() && seen[c.tag] == 1) rec[c.tag] = c.text;
    }

    for (std::size_t j = 0; j < decl.text.size(); ++j) {
      const auto& f = decl.text[j];
      if (f.tag != node->tag) continue;
      const XmlElement* hit = nullptr;
      for (const auto& c : node->children) {
        if (c.tag != f.field) continue;
        if (hit) {
          throw Error(ErrorCode::TypeMismatch, origin + ":" + std::to_string(c.line) +
                                                   ": <" + f.tag + "> has more than one <" +
                                                   f.field + ">");
        }
        if (!c.children.empty()) {
          throw Error(ErrorCode::TypeMismatch, origin + ":" + std::to_string(c.line) +
                                                   ": <" + f.field + "> must hold text only");
        }
        hit = &c;
      }
      if (!hit) {
        throw Error(ErrorCode::TotalityViolation,
                    origin + ":" + std::to_string(node->line) + ": <" + f.tag + "> at " +
                        code.to_string() + " has no <" + f.field + ">");
      }
      Value v;
      try {
        v = parse_value(hit->text, f.kind);
      } catch (const Error& e) {
        throw Error(ErrorCode::TypeMismatch,
                    origin + ":" + std::to_string(hit->line) + ": " + e.what());
      }
      objects[f.object].elements.insert(v);
      text_maps[j].mapping.emplace(id, std::move(v));
    }
  }

  for (const auto& name : order) part.objects.push_back(std::move(objects[name]));
  std::set<std::string> done;
  for (const auto& [tag, obj] : decl.tags) {
    if (!done.insert(obj).second) continue;
    Morphism m = dewey_maps.contains(obj) ? std::move(dewey_maps[obj])
                                          : Morphism{"dewey", obj, decl.dewey, {}, {}};
    part.morphisms.push_back({std::move(m), "@key"});
  }
  for (std::size_t j = 0; j < decl.text.size(); ++j) {
    part.morphisms.push_back({std::move(text_maps[j]), decl.text[j].field});
  }
  return part;
}

Part load_xml(const std::filesystem::path& path, const SourceDecl& decl) {
  return load_xml_text(detail::read_file(path), decl, path.string());
}

}  // namespace catql::ingest
