#include <sstream>

#include "catql/ingest.hpp"
#include "io.hpp"

namespace catql::ingest {

Part load_edges_text(std::string_view text, const SourceDecl& decl, const std::string& origin) {
  Part part;
  part.origin = origin;
  part.edge_source = decl.source;
  part.edge_target = decl.target;
  SetObject edge;
  edge.name = decl.object;
  edge.kind = ObjectKind::Relationship;
  edge.arity = 2;
  edge.component_names = {"source", "target"};
  part.objects.push_back(std::move(edge));

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorCode::TypeMismatch,
                  detail::at(origin, lineno) + ": expected two tab-separated columns");
    }
    part.edges.push_back({lineno, line.substr(0, tab), line.substr(tab + 1)});
  }
  return part;
}

Part load_edges(const std::filesystem::path& path, const SourceDecl& decl) {
  return load_edges_text(detail::read_file(path), decl, path.string());
}

}  // namespace catql::ingest
