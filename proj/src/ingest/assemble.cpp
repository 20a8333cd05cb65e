#include <charconv>
#include <future>
#include <set>

#include "catql/ingest.hpp"
#include "io.hpp"

namespace catql::ingest {

namespace {

struct Entry {
  Morphism morphism;
  std::string field;
  std::string origin;
  bool named = false;  // fixed by a declaration
};

std::string field_of(const MorphismDecl& d) {
  switch (d.via) {
    case Derivation::Key: return "@key";
    case Derivation::Parent: return "@parent";
    case Derivation::Column: return d.column;
  }
  return d.column;
}

std::string_view via_text(Derivation via) {
  switch (via) {
    case Derivation::Key: return "key";
    case Derivation::Parent: return "parent";
    case Derivation::Column: return "column";
  }
  return "column";
}

std::string line_of(const MorphismDecl& d) {
  return "manifest line " + std::to_string(d.line) + ", morphism " + d.name;
}

// Reads `raw` as an element of `object`, following the kind of its
// existing elements (text when it has none).
Value coerce(const std::string& raw, const SetObject& object) {
  auto kind = object.element_kind().value_or(ValueKind::Text);
  if (kind == ValueKind::Tuple) {
    throw Error(ErrorCode::TypeMismatch,
                "cannot read '" + raw + "' as an element of relationship " + object.name);
  }
  return parse_value(raw, kind);
}

Value coerce(const Value& v, const SetObject& object) {
  auto kind = object.element_kind();
  if (!kind || *kind == v.kind()) return v;
  return coerce(v.to_string(), object);
}

}  // namespace

InstanceCategory assemble(std::vector<Part> parts, const SchemaManifest& manifest) {
  std::map<std::string, const ObjectDecl*> declared;
  for (const auto& o : manifest.objects) declared[o.name] = &o;

  // Objects
  std::map<std::string, SetObject> objects;
  std::map<std::string, std::string> produced_by;
  for (auto& part : parts) {
    for (auto& o : part.objects) {
      auto d = declared.find(o.name);
      if (d != declared.end() && d->second->kind != o.kind) {
        throw Error(ErrorCode::ManifestSyntax,
                    "manifest line " + std::to_string(d->second->line) + ": " + o.name +
                        " is declared " + std::string(to_string(d->second->kind)) +
                        " but " + part.origin + " loads it as " +
                        std::string(to_string(o.kind)));
      }
      auto [it, fresh] = objects.try_emplace(o.name, o);
      if (fresh) {
        produced_by[o.name] = part.origin;
        continue;
      }
      if (d == declared.end()) {
        throw Error(ErrorCode::NameClash, "object " + o.name + " comes from both " +
                                              produced_by[o.name] + " and " + part.origin +
                                              "; declare it with `object` to share it");
      }
      if (it->second.arity != o.arity || it->second.kind != o.kind) {
        throw Error(ErrorCode::TypeMismatch, "shared object " + o.name + " has two shapes");
      }
      it->second.elements.insert(o.elements.begin(), o.elements.end());
    }
  }
  std::set<std::string> filled;  // declared attributes no source produces
  for (const auto& o : manifest.objects) {
    if (objects.contains(o.name)) continue;
    SetObject empty;
    empty.name = o.name;
    empty.kind = o.kind;
    objects.emplace(o.name, std::move(empty));
    if (o.kind == ObjectKind::Attribute) filled.insert(o.name);
  }
  auto object = [&](const std::string& name, const std::string& context) -> SetObject& {
    auto it = objects.find(name);
    if (it == objects.end()) {
      throw Error(ErrorCode::ManifestSyntax, context + ": unknown object " + name);
    }
    return it->second;
  };

  std::vector<Entry> entries;
  for (auto& part : parts) {
    for (auto& pm : part.morphisms) {
      entries.push_back({std::move(pm.morphism), std::move(pm.field), part.origin, false});
    }
  }

  // Edges
  for (auto& part : parts) {
    if (part.edge_source.empty()) continue;
    const std::string& edge_name = part.objects.at(0).name;
    const SetObject& from = object(part.edge_source, part.origin);
    const SetObject& to = object(part.edge_target, part.origin);
    Morphism src{"source", edge_name, from.name, {}, Provenance::projection(0)};
    Morphism dst{"target", edge_name, to.name, {}, Provenance::projection(1)};
    std::set<Value> rows;
    for (const auto& e : part.edges) {
      Value a;
      Value b;
      try {
        a = coerce(e.source, from);
        b = coerce(e.target, to);
      } catch (const Error&) {
        throw Error(ErrorCode::DanglingEndpoint,
                    detail::at(part.origin, e.line) + ": endpoint is not a node id");
      }
      if (!from.contains(a) || !to.contains(b)) {
        const auto& bad = from.contains(a) ? e.target : e.source;
        throw Error(ErrorCode::DanglingEndpoint,
                    detail::at(part.origin, e.line) + ": unknown node " + bad + " in " +
                        (from.contains(a) ? to.name : from.name));
      }
      Value row(Tuple{a, b});
      rows.insert(row);
      src.mapping.emplace(row, a);
      dst.mapping.emplace(row, b);
    }
    objects[edge_name].elements.insert(rows.begin(), rows.end());
    entries.push_back({std::move(src), "source", part.origin, false});
    entries.push_back({std::move(dst), "target", part.origin, false});
  }

  // Raw fields of every element, merged over parts.
  std::map<std::string, std::map<Value, std::map<std::string, std::string>>> fields;
  for (auto& part : parts) {
    for (auto& [obj, recs] : part.fields) {
      for (auto& [x, rec] : recs) fields[obj][x].insert(rec.begin(), rec.end());
    }
  }

  // Declared morphisms: rename a loader morphism, or build one.
  for (const auto& d : manifest.morphisms) {
    const std::string f = field_of(d);
    auto hit = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) {
      return !e.named && e.morphism.source == d.source && e.morphism.target == d.target &&
             e.field == f;
    });
    if (hit != entries.end()) {
      hit->morphism.name = d.name;
      hit->named = true;
      continue;
    }
    const SetObject& src = object(d.source, line_of(d));
    SetObject& dst = object(d.target, line_of(d));
    const bool fill = filled.contains(d.target);
    Morphism m{d.name, d.source, d.target, {}, Provenance::declared()};
    std::optional<std::size_t> component;
    if (d.via == Derivation::Column && src.kind == ObjectKind::Relationship) {
      for (std::size_t i = 0; i < src.component_names.size(); ++i) {
        if (src.component_names[i] == d.column) component = i;
      }
      if (component) m.provenance = Provenance::projection(*component);
    }
    auto recs = fields.find(d.source);
    if (d.via == Derivation::Column && !component && !src.elements.empty()) {
      bool any = false;
      if (recs != fields.end()) {
        for (const auto& [x, rec] : recs->second) any = any || rec.contains(d.column);
      }
      if (!any) {
        throw Error(ErrorCode::MissingColumn,
                    line_of(d) + ": " + d.source + " has no field " + d.column);
      }
    }
    std::vector<std::pair<Value, Value>> images;
    for (const auto& x : src.elements) {
      Value y;
      try {
        switch (d.via) {
          case Derivation::Key:
            y = x;
            break;
          case Derivation::Parent:
            if (x.kind() != ValueKind::Dewey) {
              throw Error(ErrorCode::TypeMismatch, d.source + " is not a tree node object");
            }
            if (x.as_dewey().is_root()) {
              throw Error(ErrorCode::TotalityViolation, "the root has no parent");
            }
            y = Value(x.as_dewey().parent());
            break;
          case Derivation::Column:
            if (component) {
              y = x.as_tuple().at(*component);
            } else {
              const std::map<std::string, std::string>* rec = nullptr;
              if (recs != fields.end()) {
                auto r = recs->second.find(x);
                if (r != recs->second.end()) rec = &r->second;
              }
              if (!rec || !rec->contains(d.column)) {
                throw Error(ErrorCode::TotalityViolation, "no " + d.column + " field");
              }
              y = fill ? Value(rec->at(d.column)) : coerce(rec->at(d.column), dst);
            }
            break;
        }
        if (!fill) y = coerce(y, dst);
      } catch (const Error& e) {
        throw Error(e.code(), line_of(d) + " (via " + std::string(via_text(d.via)) +
                                  "): element " + x.to_string() + ": " + e.what());
      }
      images.emplace_back(x, std::move(y));
    }
    for (auto& [x, y] : images) {
      if (fill) dst.elements.insert(y);
      m.mapping.emplace(x, std::move(y));
    }
    entries.push_back({std::move(m), f, "manifest", true});
  }

  // Remaining loader morphisms keep their suggested names where free.
  // Objects and morphisms share one namespace.
  std::set<std::string> used;
  for (const auto& [name, o] : objects) used.insert(name);
  for (const auto& d : manifest.morphisms) used.insert(d.name);
  for (auto& e : entries) {
    if (e.named) continue;
    std::string base = e.morphism.name;
    std::string name = base;
    if (used.contains(name)) name = detail::lower(e.morphism.source) + "_" + base;
    for (int k = 2; used.contains(name); ++k) {
      name = detail::lower(e.morphism.source) + "_" + base + "_" + std::to_string(k);
    }
    e.morphism.name = name;
    used.insert(name);
  }

  InstanceCategory out;
  for (auto& [name, o] : objects) {
    try {
      out.add_object(std::move(o));
    } catch (const Error& e) {
      throw Error(e.code(), std::string("object ") + name + ": " + e.what());
    }
  }
  for (auto& e : entries) {
    std::string name = e.morphism.name;
    try {
      out.add_morphism(std::move(e.morphism));
    } catch (const Error& err) {
      throw Error(err.code(), "morphism " + name + " (" + e.origin + "): " + err.what());
    }
  }
  auto violations = out.check_thinness();
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string msg = v.source + " -> " + v.target + ": " + v.detail;
    if (v.witness) msg += ", witness " + v.witness->to_string();
    throw Error(ErrorCode::ThinnessViolation, msg);
  }
  return out;
}

InstanceCategory load(const SchemaManifest& manifest) {
  std::vector<std::future<Part>> jobs;
  for (const auto& decl : manifest.sources) {
    jobs.push_back(std::async(std::launch::async, [&decl] {
      switch (decl.type) {
        case SourceType::Csv: return load_csv(decl.path, decl);
        case SourceType::Xml: return load_xml(decl.path, decl);
        case SourceType::Edges: return load_edges(decl.path, decl);
      }
      return Part{};
    }));
  }
  std::vector<Part> parts;
  parts.reserve(jobs.size());
  // Every job is joined before the first error is rethrown.
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      parts.push_back(j.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return assemble(std::move(parts), manifest);
}

InstanceCategory load_manifest(const std::filesystem::path& path) {
  return load(read_manifest(path));
}

std::string summary(const InstanceCategory& instance) {
  std::string out = std::to_string(instance.objects().size()) + " objects, " +
                    std::to_string(instance.morphisms().size()) + " morphisms\n";
  for (const auto& [name, o] : instance.objects()) {
    out += "object " + name + " " + std::string(to_string(o.kind)) + " " +
           std::to_string(o.elements.size()) + "\n";
  }
  for (const auto& [name, m] : instance.morphisms()) {
    out += "morphism " + name + ": " + m.source + " -> " + m.target + "\n";
  }
  return out;
}

namespace {

std::string csv_field(const Value& v) {
  std::string s;
  if (v.kind() == ValueKind::Float) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v.as_float());
    s.assign(buf, p);
  } else if (v.kind() == ValueKind::Text) {
    s = v.as_text();
  } else {
    s = v.to_string();
  }
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string dump_csv(const InstanceCategory& instance, const std::string& name) {
  const SetObject& o = instance.object(name);
  std::vector<const Morphism*> cols;
  for (const auto& [mname, m] : instance.morphisms()) {
    if (m.source == name && instance.object(m.target).kind == ObjectKind::Attribute) {
      cols.push_back(&m);
    }
  }
  std::vector<std::string> header;
  if (o.kind == ObjectKind::Relationship) {
    header = o.component_names;
  } else {
    header.push_back(name);
  }
  for (const auto* m : cols) header.push_back(m->target);

  auto line = [](const std::vector<std::string>& fs) {
    std::string s;
    for (std::size_t i = 0; i < fs.size(); ++i) s += (i ? "," : "") + fs[i];
    return s + "\n";
  };
  std::vector<std::string> hs;
  for (const auto& h : header) hs.push_back(csv_field(Value(h)));
  std::string out = line(hs);
  for (const auto& x : o.elements) {
    std::vector<std::string> fs;
    if (o.kind == ObjectKind::Relationship) {
      for (const auto& c : x.as_tuple()) fs.push_back(csv_field(c));
    } else {
      fs.push_back(csv_field(x));
    }
    for (const auto* m : cols) fs.push_back(csv_field(m->apply(x)));
    out += line(fs);
  }
  return out;
}

}  // namespace catql::ingest
