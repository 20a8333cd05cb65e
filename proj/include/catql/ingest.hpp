#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "catql/model.hpp"

namespace catql::ingest {

// ---------------------------------------------------------------------------
// Manifest

struct ColumnDecl {
  std::string name;
  ValueKind kind = ValueKind::Text;  // Int, Float or Text
};

struct ObjectDecl {
  std::string name;
  ObjectKind kind = ObjectKind::Entity;
  std::size_t line = 0;
};

enum class SourceType { Csv, Xml, Edges };

struct TextFieldDecl {
  std::string tag;
  std::string field;   // child element holding the text
  std::string object;  // attribute object receiving the values
  ValueKind kind = ValueKind::Text;
};

struct SourceDecl {
  SourceType type = SourceType::Csv;
  std::filesystem::path path;  // resolved against the manifest directory
  std::size_t line = 0;

  // csv and edges
  std::string object;
  // csv: one key column for an entity, several for a relationship
  std::vector<ColumnDecl> key;
  std::vector<ColumnDecl> columns;

  // xml
  std::vector<std::pair<std::string, std::string>> tags;  // tag -> object
  std::vector<TextFieldDecl> text;
  std::string dewey = "DeweyCode";

  // edges
  std::string source;
  std::string target;
};

enum class Derivation { Column, Key, Parent };

struct MorphismDecl {
  std::string name;
  std::string source;
  std::string target;
  Derivation via = Derivation::Column;
  std::string column;  // Column only
  std::size_t line = 0;
};

struct SchemaManifest {
  std::vector<ObjectDecl> objects;
  std::vector<SourceDecl> sources;
  std::vector<MorphismDecl> morphisms;
};

// One declaration per line, `#` starts a comment:
//   object <name> kind=<entity|attribute|relationship>
//   csv <path> key=<col[:kind]>[+<col[:kind]>...] object=<name> columns=<col:kind,...>
//   xml <path> tags=<tag:object,...> text=<tag.field:object[:kind],...> [dewey=<name>]
//   edges <path> object=<name> source=<obj> target=<obj>
//   morphism <name>: <src> -> <dst> via <column|key|parent>
// Relative paths are taken from `base_dir`. Throws ManifestSyntax.
SchemaManifest parse_manifest(std::string_view text,
                              const std::filesystem::path& base_dir = {});
// Throws Io when the file cannot be read.
SchemaManifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sources

// A morphism produced by a loader, remembering the field it was read from
// ("@key" for the element itself) so that a manifest declaration can rename
// it. `name` is only a suggestion until assembly.
struct PartMorphism {
  Morphism morphism;
  std::string field;
};

struct PendingEdge {
  std::size_t line = 0;
  std::string source;
  std::string target;
};

// The output of one loader before assembly.
struct Part {
  std::string origin;
  std::vector<SetObject> objects;
  std::vector<PartMorphism> morphisms;
  // object -> element -> field -> raw text, for declared morphisms
  std::map<std::string, std::map<Value, std::map<std::string, std::string>>> fields;
  // edges: endpoints are resolved against the other sources
  std::vector<PendingEdge> edges;
  std::string edge_source;
  std::string edge_target;
};

// Parses one value of an Int, Float or Text column. Empty text is a NULL and
// is rejected. Throws TypeMismatch.
Value parse_value(std::string_view raw, ValueKind kind);

// RFC 4180 subset: comma delimiter, double-quoted fields with "" escapes,
// header row required. Returns the header and the data rows, each with the
// line it starts on.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};
CsvTable parse_csv(std::string_view text, const std::string& origin = "csv");

Part load_csv_text(std::string_view text, const SourceDecl& decl,
                   const std::string& origin = "csv");
Part load_csv(const std::filesystem::path& path, const SourceDecl& decl);

// Elements and text only. Attributes, namespaces, CDATA, DOCTYPE and mixed
// content raise UnsupportedFeature; anything else malformed raises
// MalformedXml with a line:column position.
struct XmlElement {
  std::string tag;
  std::string text;  // trimmed; only for elements without children
  std::vector<XmlElement> children;
  std::size_t line = 0;
  std::size_t column = 0;
};
XmlElement parse_xml(std::string_view text);

// Dewey code of every element in document order.
std::vector<std::pair<DeweyCode, const XmlElement*>> number_nodes(const XmlElement& root);

Part load_xml_text(std::string_view text, const SourceDecl& decl,
                   const std::string& origin = "xml");
Part load_xml(const std::filesystem::path& path, const SourceDecl& decl);

// Two tab-separated columns per line, no header. Blank lines are skipped.
Part load_edges_text(std::string_view text, const SourceDecl& decl,
                     const std::string& origin = "edges");
Part load_edges(const std::filesystem::path& path, const SourceDecl& decl);

// ---------------------------------------------------------------------------
// Assembly

// Merges the parts, resolves edge endpoints, materializes declared
// morphisms, names the rest, and checks totality and thinness. Objects may
// be shared between parts only when the manifest declares them.
InstanceCategory assemble(std::vector<Part> parts, const SchemaManifest& manifest);

// Loads every source (in parallel) and assembles them.
InstanceCategory load(const SchemaManifest& manifest);
InstanceCategory load_manifest(const std::filesystem::path& path);

// "<n> objects, <m> morphisms" followed by one line per object and morphism.
std::string summary(const InstanceCategory& instance);

// An object as CSV: a key column named after the object (or the component
// names of a relationship), then one column per outgoing morphism to an
// attribute object, named after that attribute. Rows are sorted.
std::string dump_csv(const InstanceCategory& instance, const std::string& object);

}  // namespace catql::ingest
