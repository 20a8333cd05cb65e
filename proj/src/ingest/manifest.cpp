#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "catql/error.hpp"
#include "catql/ingest.hpp"

namespace catql::ingest {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ManifestSyntax, "line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Whitespace-separated words; double quotes group a word with spaces.
std::vector<std::string> words(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::string w;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      if (line[i] == '"') {
        auto end = line.find('"', i + 1);
        if (end == std::string_view::npos) fail(lineno, "unterminated quote");
        w += line.substr(i + 1, end - i - 1);
        i = end + 1;
      } else {
        w += line[i++];
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

ValueKind column_kind(const std::string& k, std::size_t line) {
  if (k == "int") return ValueKind::Int;
  if (k == "float") return ValueKind::Float;
  if (k == "text") return ValueKind::Text;
  fail(line, "unknown column kind '" + k + "' (int, float or text)");
}

ColumnDecl column(const std::string& text, std::size_t line) {
  auto parts = split(text, ':');
  if (parts.empty() || parts[0].empty() || parts.size() > 2) {
    fail(line, "bad column '" + text + "'");
  }
  ColumnDecl c{parts[0], ValueKind::Text};
  if (parts.size() == 2) c.kind = column_kind(parts[1], line);
  return c;
}

std::vector<std::string> list(const std::string& v) {
  if (v.empty()) return {};
  return split(v, ',');
}

// key=value options after the path.
std::map<std::string, std::string> options(const std::vector<std::string>& w,
                                           std::size_t from, std::size_t line,
                                           std::initializer_list<const char*> allowed) {
  std::map<std::string, std::string> out;
  for (std::size_t i = from; i < w.size(); ++i) {
    auto eq = w[i].find('=');
    if (eq == std::string::npos) fail(line, "expected key=value, got '" + w[i] + "'");
    std::string k = w[i].substr(0, eq);
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(line, "unknown option '" + k + "'");
    if (out.contains(k)) fail(line, "option '" + k + "' given twice");
    out[k] = w[i].substr(eq + 1);
  }
  return out;
}

const std::string& need(const std::map<std::string, std::string>& opts,
                        const std::string& k, std::size_t line) {
  auto it = opts.find(k);
  if (it == opts.end() || it->second.empty()) fail(line, "missing " + k + "=");
  return it->second;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

SchemaManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  SchemaManifest m;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto w = words(raw, lineno);
    if (w.empty()) continue;
    const std::string& head = w[0];

    if (head == "object") {
      if (w.size() != 3) fail(lineno, "expected: object <name> kind=<kind>");
      auto opts = options(w, 2, lineno, {"kind"});
      auto kind = parse_object_kind(need(opts, "kind", lineno));
      if (!kind) fail(lineno, "unknown object kind '" + opts["kind"] + "'");
      m.objects.push_back({w[1], *kind, lineno});
    } else if (head == "csv") {
      if (w.size() < 2) fail(lineno, "expected: csv <path> ...");
      auto opts = options(w, 2, lineno, {"key", "object", "columns"});
      SourceDecl d;
      d.type = SourceType::Csv;
      d.path = resolve(w[1], base_dir);
      d.line = lineno;
      d.object = need(opts, "object", lineno);
      for (const auto& k : split(need(opts, "key", lineno), '+')) {
        d.key.push_back(column(k, lineno));
      }
      for (const auto& c : list(opts["columns"])) d.columns.push_back(column(c, lineno));
      m.sources.push_back(std::move(d));
    } else if (head == "xml") {
      if (w.size() < 2) fail(lineno, "expected: xml <path> ...");
      auto opts = options(w, 2, lineno, {"tags", "text", "dewey"});
      SourceDecl d;
      d.type = SourceType::Xml;
      d.path = resolve(w[1], base_dir);
      d.line = lineno;
      for (const auto& t : list(need(opts, "tags", lineno))) {
        auto p = split(t, ':');
        if (p.size() != 2 || p[0].empty() || p[1].empty()) {
          fail(lineno, "bad tag mapping '" + t + "'");
        }
        d.tags.emplace_back(p[0], p[1]);
      }
      for (const auto& t : list(opts["text"])) {
        auto p = split(t, ':');
        if (p.size() < 2 || p.size() > 3) fail(lineno, "bad text mapping '" + t + "'");
        auto dot = p[0].find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == p[0].size()) {
          fail(lineno, "text mapping needs <tag>.<field>: '" + t + "'");
        }
        TextFieldDecl f{p[0].substr(0, dot), p[0].substr(dot + 1), p[1], ValueKind::Text};
        if (p.size() == 3) f.kind = column_kind(p[2], lineno);
        d.text.push_back(std::move(f));
      }
      if (opts.contains("dewey")) d.dewey = need(opts, "dewey", lineno);
      m.sources.push_back(std::move(d));
    } else if (head == "edges") {
      if (w.size() < 2) fail(lineno, "expected: edges <path> ...");
      auto opts = options(w, 2, lineno, {"object", "source", "target"});
      SourceDecl d;
      d.type = SourceType::Edges;
      d.path = resolve(w[1], base_dir);
      d.line = lineno;
      d.object = need(opts, "object", lineno);
      d.source = need(opts, "source", lineno);
      d.target = need(opts, "target", lineno);
      m.sources.push_back(std::move(d));
    } else if (head == "morphism") {
      // morphism <name>: <src> -> <dst> via <x>, the colon may stand alone
      std::vector<std::string> t(w.begin() + 1, w.end());
      if (!t.empty() && t[0].size() > 1 && t[0].back() == ':') {
        t[0].pop_back();
        t.insert(t.begin() + 1, ":");
      }
      if (t.size() != 7 || t[1] != ":" || t[3] != "->" || t[5] != "via") {
        fail(lineno, "expected: morphism <name>: <src> -> <dst> via <column|key|parent>");
      }
      MorphismDecl d{t[0], t[2], t[4], Derivation::Column, {}, lineno};
      if (t[6] == "key") {
        d.via = Derivation::Key;
      } else if (t[6] == "parent") {
        d.via = Derivation::Parent;
      } else {
        d.column = t[6];
      }
      m.morphisms.push_back(std::move(d));
    } else {
      fail(lineno, "unknown declaration '" + head + "'");
    }
  }

  std::set<std::string> names;
  for (const auto& o : m.objects) {
    if (!names.insert(o.name).second) fail(o.line, "object " + o.name + " declared twice");
  }
  names.clear();
  for (const auto& d : m.morphisms) {
    if (!names.insert(d.name).second) fail(d.line, "morphism " + d.name + " declared twice");
  }
  return m;
}

SchemaManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

}  // namespace catql::ingest
