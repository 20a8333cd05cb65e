#include <charconv>
#include <map>

#include "catql/ingest.hpp"
#include "io.hpp"

namespace catql::ingest {

using detail::at;

Value parse_value(std::string_view raw, ValueKind kind) {
  if (raw.empty()) throw Error(ErrorCode::TypeMismatch, "empty value (NULLs are not allowed)");
  switch (kind) {
    case ValueKind::Int: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc() || p != raw.data() + raw.size()) {
        throw Error(ErrorCode::TypeMismatch, "'" + std::string(raw) + "' is not an int");
      }
      return v;
    }
    case ValueKind::Float: {
      double v = 0;
      auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc() || p != raw.data() + raw.size()) {
        throw Error(ErrorCode::TypeMismatch, "'" + std::string(raw) + "' is not a float");
      }
      return v;
    }
    case ValueKind::Text:
      return std::string(raw);
    case ValueKind::Dewey:
      return DeweyCode::parse(raw);
    case ValueKind::Tuple:
      break;
  }
  throw Error(ErrorCode::TypeMismatch, "tuples cannot be parsed from one field");
}

CsvTable parse_csv(std::string_view text, const std::string& origin) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool quoted = false;       // inside quotes
  bool was_quoted = false;   // current field started with a quote
  bool any = false;          // current record has content

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    if (any) {
      end_field();
      records.emplace_back(record_line, std::move(record));
    }
    record.clear();
    field.clear();
    any = false;
    was_quoted = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (!any) record_line = line;
    switch (c) {
      case '"':
        if (!field.empty() || was_quoted) {
          throw Error(ErrorCode::TypeMismatch,
                      at(origin, line) + ": stray quote inside an unquoted field");
        }
        quoted = was_quoted = any = true;
        break;
      case ',':
        any = true;
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (was_quoted) {
          throw Error(ErrorCode::TypeMismatch,
                      at(origin, line) + ": text after a closing quote");
        }
        any = true;
        field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::TypeMismatch, at(origin, line) + ": unterminated quote");
  end_record();

  if (records.empty()) throw Error(ErrorCode::MissingColumn, origin + ": header row required");
  CsvTable t;
  t.header = std::move(records.front().second);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].second.size() != t.header.size()) {
      throw Error(ErrorCode::TypeMismatch,
                  at(origin, records[i].first) + ": " +
                      std::to_string(records[i].second.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

Part load_csv_text(std::string_view text, const SourceDecl& decl, const std::string& origin) {
  CsvTable t = parse_csv(text, origin);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (!index.emplace(t.header[i], i).second) {
      throw Error(ErrorCode::NameClash, origin + ": column " + t.header[i] + " appears twice");
    }
  }
  auto col = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw Error(ErrorCode::MissingColumn, origin + ": no column " + name);
    }
    return it->second;
  };
  if (decl.key.empty()) throw Error(ErrorCode::MissingColumn, origin + ": no key column");

  std::vector<std::size_t> key_at;
  for (const auto& k : decl.key) key_at.push_back(col(k.name));
  std::vector<std::size_t> col_at;
  for (const auto& c : decl.columns) col_at.push_back(col(c.name));

  const bool relationship = decl.key.size() > 1;
  Part part;
  part.origin = origin;
  SetObject main;
  main.name = decl.object;
  main.kind = relationship ? ObjectKind::Relationship : ObjectKind::Entity;
  if (relationship) {
    main.arity = decl.key.size();
    for (const auto& k : decl.key) main.component_names.push_back(k.name);
  }
  std::vector<SetObject> attrs(decl.columns.size());
  std::vector<Morphism> maps(decl.columns.size());
  for (std::size_t j = 0; j < decl.columns.size(); ++j) {
    attrs[j].name = decl.columns[j].name;
    attrs[j].kind = ObjectKind::Attribute;
    maps[j].name = detail::lower(decl.columns[j].name);
    maps[j].source = decl.object;
    maps[j].target = decl.columns[j].name;
  }

  auto& records = part.fields[decl.object];
  for (const auto& [line, row] : t.rows) {
    auto parse = [&](std::size_t i, ValueKind kind) {
      try {
        return parse_value(row[i], kind);
      } catch (const Error& e) {
        throw Error(ErrorCode::TypeMismatch,
                    at(origin, line) + ", column " + t.header[i] + ": " + e.what());
      }
    };
    Value key;
    if (relationship) {
      Tuple parts;
      for (std::size_t k = 0; k < key_at.size(); ++k) {
        parts.push_back(parse(key_at[k], decl.key[k].kind));
      }
      key = Value(std::move(parts));
    } else {
      key = parse(key_at[0], decl.key[0].kind);
    }
    if (!main.elements.insert(key).second) {
      throw Error(ErrorCode::DuplicateKey,
                  at(origin, line) + ": key " + key.to_string() + " already seen");
    }
    for (std::size_t j = 0; j < col_at.size(); ++j) {
      Value v = parse(col_at[j], decl.columns[j].kind);
      attrs[j].elements.insert(v);
      maps[j].mapping.emplace(key, std::move(v));
    }
    auto& rec = records[key];
    for (std::size_t i = 0; i < row.size(); ++i) rec[t.header[i]] = row[i];
  }

  part.objects.push_back(std::move(main));
  for (std::size_t j = 0; j < attrs.size(); ++j) {
    part.objects.push_back(std::move(attrs[j]));
    part.morphisms.push_back({std::move(maps[j]), decl.columns[j].name});
  }
  return part;
}

Part load_csv(const std::filesystem::path& path, const SourceDecl& decl) {
  return load_csv_text(detail::read_file(path), decl, path.string());
}

}  // namespace catql::ingest
