#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>

#include "catql/error.hpp"
#include "catql/ingest.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace catql;
using namespace catql::ingest;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Unsupported;
}

// A scratch directory holding the files of one test.
struct Scratch {
  std::filesystem::path dir;
  Scratch() {
    static int n = 0;
    dir = std::filesystem::temp_directory_path() /
          ("catql_ingest_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    std::filesystem::create_directories(dir);
  }
  ~Scratch() { std::filesystem::remove_all(dir); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name, std::ios::binary) << text;
    return dir / name;
  }
  InstanceCategory load(const std::string& manifest) const {
    return ingest::load(parse_manifest(manifest, dir));
  }
};

SourceDecl csv_decl(std::string object, std::vector<ColumnDecl> key,
                    std::vector<ColumnDecl> columns) {
  SourceDecl d;
  d.object = std::move(object);
  d.key = std::move(key);
  d.columns = std::move(columns);
  return d;
}

std::set<Value> values(std::initializer_list<Value> v) { return v; }

std::filesystem::path samples() {
  return std::filesystem::path(CATQL_SOURCE_DIR) / "data" / "samples";
}

// Objects and morphism tables equal, morphisms matched by endpoints.
void same_instance(const InstanceCategory& a, const InstanceCategory& b) {
  REQUIRE(a.objects().size() == b.objects().size());
  for (const auto& [name, o] : a.objects()) {
    REQUIRE(b.has_object(name));
    CHECK(b.object(name).kind == o.kind);
    CHECK(b.object(name).elements == o.elements);
  }
  REQUIRE(a.morphisms().size() == b.morphisms().size());
  for (const auto& [name, m] : a.morphisms()) {
    const Morphism* other = b.find_morphism(m.source, m.target);
    REQUIRE_MESSAGE(other, m.source << " -> " << m.target);
    CHECK(other->mapping == m.mapping);
  }
}

}  // namespace

TEST_CASE("manifest declarations") {
  auto m = parse_manifest(
      "# comment\n"
      "object Shared kind=attribute\n"
      "csv data/c.csv key=ID:int object=Customer columns=ID:int,CName:text,CreditLimit:float\n"
      "xml o.xml tags=Order:Order,Item:Product text=Item.PName:PName  # trailing\n"
      "edges k.tsv object=Knows source=Customer target=Friend\n"
      "morphism buyer: Order -> Customer via CustID\n"
      "morphism up : Product -> Order via parent\n",
      "/base");
  REQUIRE(m.objects.size() == 1);
  CHECK(m.objects[0].kind == ObjectKind::Attribute);
  REQUIRE(m.sources.size() == 3);
  CHECK(m.sources[0].path == std::filesystem::path("/base/data/c.csv"));
  CHECK(m.sources[0].key[0].kind == ValueKind::Int);
  CHECK(m.sources[0].columns.size() == 3);
  CHECK(m.sources[0].columns[2].kind == ValueKind::Float);
  CHECK(m.sources[1].tags.size() == 2);
  CHECK(m.sources[1].text[0].field == "PName");
  CHECK(m.sources[1].dewey == "DeweyCode");
  CHECK(m.sources[2].target == "Friend");
  REQUIRE(m.morphisms.size() == 2);
  CHECK(m.morphisms[0].via == Derivation::Column);
  CHECK(m.morphisms[0].column == "CustID");
  CHECK(m.morphisms[1].name == "up");
  CHECK(m.morphisms[1].via == Derivation::Parent);

  for (const char* bad : {"table x.csv", "csv x.csv object=A", "object A kind=thing",
                          "csv x.csv key=a object=A columns=b:date",
                          "morphism f A -> B via key", "object A kind=entity\nobject A kind=entity",
                          "edges e.tsv object=E source=A", "xml x.xml tags=A"}) {
    CAPTURE(bad);
    CHECK(code_of([&] { parse_manifest(bad); }) == ErrorCode::ManifestSyntax);
  }
  CHECK(code_of([] { read_manifest("/nonexistent/manifest"); }) == ErrorCode::Io);
}

TEST_CASE("csv: a customer table") {
  auto part = load_csv_text("ID,CName,CreditLimit\n1,Mary,5000\n2,\"Smith, John\",3000.5\n",
                            csv_decl("Customer", {{"ID", ValueKind::Int}},
                                     {{"ID", ValueKind::Int},
                                      {"CName", ValueKind::Text},
                                      {"CreditLimit", ValueKind::Float}}));
  InstanceCategory db = assemble({part}, {});
  for (const char* o : {"Customer", "ID", "CName", "CreditLimit"}) CHECK(db.has_object(o));
  CHECK(db.object("Customer").kind == ObjectKind::Entity);
  CHECK(db.object("Customer").elements == values({1, 2}));
  CHECK(db.object("CName").elements == values({"Mary", "Smith, John"}));
  CHECK(db.object("CreditLimit").elements == values({5000.0, 3000.5}));
  REQUIRE(db.find_morphism("Customer", "CName"));
  CHECK(db.find_morphism("Customer", "CName")->apply(2) == Value("Smith, John"));
  CHECK(db.find_morphism("Customer", "ID")->apply(1) == Value(1));
  CHECK(db.find_morphism("Customer", "CreditLimit")->name == "creditlimit");
}

TEST_CASE("csv: header only gives empty objects") {
  auto part = load_csv_text("ID,CName\n", csv_decl("Customer", {{"ID", ValueKind::Int}},
                                                   {{"CName", ValueKind::Text}}));
  InstanceCategory db = assemble({part}, {});
  CHECK(db.object("Customer").elements.empty());
  CHECK(db.object("CName").elements.empty());
  CHECK(db.find_morphism("Customer", "CName")->mapping.empty());
}

TEST_CASE("csv: errors") {
  auto decl = csv_decl("C", {{"ID", ValueKind::Int}}, {{"Name", ValueKind::Text}});
  CHECK(code_of([&] { load_csv_text("ID,Name\n1,a\n1,b\n", decl); }) == ErrorCode::DuplicateKey);
  CHECK(code_of([&] { load_csv_text("ID,Nom\n1,a\n", decl); }) == ErrorCode::MissingColumn);
  CHECK(code_of([&] { load_csv_text("", decl); }) == ErrorCode::MissingColumn);
  CHECK(code_of([&] { load_csv_text("ID,Name\nx,a\n", decl); }) == ErrorCode::TypeMismatch);
  CHECK(code_of([&] { load_csv_text("ID,Name\n1,\n", decl); }) == ErrorCode::TypeMismatch);
  CHECK(code_of([&] { load_csv_text("ID,Name\n1,a,b\n", decl); }) == ErrorCode::TypeMismatch);
  CHECK(code_of([&] { load_csv_text("ID,Name\n1,\"a\n", decl); }) == ErrorCode::TypeMismatch);
  try {
    load_csv_text("ID,Name\n1,a\n\n2,b\n2,c\n", decl, "people.csv");
    FAIL("expected DuplicateKey");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("people.csv:5") != std::string::npos);
  }
}

TEST_CASE("csv: quoting and line endings") {
  auto t = parse_csv("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",z\r\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].second == std::vector<std::string>{"x,1", "say \"hi\""});
  CHECK(t.rows[1].second[0] == "multi\nline");
  CHECK(t.rows[1].first == 3);
}

TEST_CASE("csv: a composite key makes a relationship") {
  auto part = load_csv_text("student,course,grade\ns1,c1,4\ns1,c2,3\n",
                            csv_decl("SC", {{"student"}, {"course"}}, {{"grade", ValueKind::Int}}));
  InstanceCategory db = assemble({part}, {});
  const auto& sc = db.object("SC");
  CHECK(sc.kind == ObjectKind::Relationship);
  CHECK(sc.component_names == std::vector<std::string>{"student", "course"});
  CHECK(sc.contains(Value(Tuple{"s1", "c2"})));
  CHECK(db.find_morphism("SC", "grade")->apply(Value(Tuple{"s1", "c1"})) == Value(4));
}

TEST_CASE("xml: Dewey codes") {
  SourceDecl d;
  d.tags = {{"Order", "Order"}, {"Item", "Item"}};
  InstanceCategory db = assemble({load_xml_text("<Order><Item/><Item/></Order>", d)}, {});
  CHECK(db.object("Order").elements == values({DeweyCode::parse("")}));
  CHECK(db.object("Item").elements ==
        values({DeweyCode::parse("1"), DeweyCode::parse("2")}));
  CHECK(db.object("DeweyCode").elements.size() == 3);
  CHECK(db.find_morphism("Item", "DeweyCode")->apply(DeweyCode::parse("2")) ==
        Value(DeweyCode::parse("2")));

  SourceDecl single;
  single.tags = {{"a", "A"}};
  db = assemble({load_xml_text("<?xml version=\"1.0\"?>\n<!-- hi --><a>text</a>", single)}, {});
  CHECK(db.object("A").elements == values({DeweyCode{}}));

  CHECK(DeweyCode::parse("1.2.3.4").parent() == DeweyCode::parse("1.2.3"));
}

TEST_CASE("xml: text fields and untracked tags") {
  SourceDecl d;
  d.tags = {{"Item", "Product"}};
  d.text = {{"Item", "PName", "PName", ValueKind::Text}, {"Item", "Qty", "Qty", ValueKind::Int}};
  auto part = load_xml_text(
      "<Order><OID>7</OID><Item><PName>Pen &amp; ink</PName><Qty>2</Qty></Item>"
      "<Item><Qty> 5 </Qty><PName>Lamp</PName></Item></Order>",
      d);
  InstanceCategory db = assemble({part}, {});
  CHECK(db.object("Product").elements ==
        values({DeweyCode::parse("2"), DeweyCode::parse("3")}));
  CHECK(db.find_morphism("Product", "PName")->apply(DeweyCode::parse("2")) ==
        Value("Pen & ink"));
  CHECK(db.find_morphism("Product", "Qty")->apply(DeweyCode::parse("3")) == Value(5));

  CHECK(code_of([&] { load_xml_text("<Order><Item><Qty>1</Qty></Item></Order>", d); }) ==
        ErrorCode::TotalityViolation);
  CHECK(code_of([&] {
          load_xml_text("<Order><Item><PName>a</PName><PName>b</PName><Qty>1</Qty></Item></Order>", d);
        }) == ErrorCode::TypeMismatch);
}

TEST_CASE("xml: unsupported and malformed input") {
  CHECK(code_of([] { parse_xml("<a id=\"1\"/>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<x:a/>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<a>text<b/></a>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<a><b/>tail</a>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<a><![CDATA[x]]></a>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<!DOCTYPE a><a/>"); }) == ErrorCode::UnsupportedFeature);
  CHECK(code_of([] { parse_xml("<a><b></a>"); }) == ErrorCode::MalformedXml);
  CHECK(code_of([] { parse_xml("<a>"); }) == ErrorCode::MalformedXml);
  CHECK(code_of([] { parse_xml("<a/><b/>"); }) == ErrorCode::MalformedXml);
  CHECK(code_of([] { parse_xml("<a>&bogus;</a>"); }) == ErrorCode::MalformedXml);
  CHECK(code_of([] { parse_xml(""); }) == ErrorCode::MalformedXml);
  try {
    parse_xml("<a>\n  <b>\n</a>");
    FAIL("expected MalformedXml");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("3:") != std::string::npos);
  }
}

TEST_CASE("xml: Dewey parents agree with a tree walk") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    // Random tree as a parent array; node 0 is the root.
    std::size_t n = 1 + rng() % 40;
    std::vector<std::size_t> parent(n, 0);
    std::vector<std::vector<std::size_t>> kids(n);
    for (std::size_t i = 1; i < n; ++i) {
      parent[i] = rng() % i;
      kids[parent[i]].push_back(i);
    }
    std::string xml;
    std::function<void(std::size_t)> emit = [&](std::size_t v) {
      xml += "<n" + std::to_string(v) + ">";
      for (auto c : kids[v]) emit(c);
      xml += "</n" + std::to_string(v) + ">";
    };
    emit(0);
    XmlElement root = parse_xml(xml);
    auto numbered = number_nodes(root);
    REQUIRE(numbered.size() == n);
    std::map<std::size_t, DeweyCode> code;
    std::set<DeweyCode> distinct;
    for (const auto& [c, e] : numbered) {
      code[std::stoul(e->tag.substr(1))] = c;
      distinct.insert(c);
    }
    CHECK(distinct.size() == n);
    CHECK(code[0].is_root());
    std::multiset<DeweyCode> stripped;
    std::multiset<DeweyCode> walked;
    for (std::size_t i = 1; i < n; ++i) {
      stripped.insert(code[i].parent());
      walked.insert(code[parent[i]]);
      CHECK(code[i].parent() == code[parent[i]]);
      // 1-based position among siblings
      auto pos = std::find(kids[parent[i]].begin(), kids[parent[i]].end(), i) -
                 kids[parent[i]].begin() + 1;
      CHECK(code[i].components().back() == static_cast<std::uint32_t>(pos));
    }
    CHECK(stripped == walked);
  }
}

TEST_CASE("edges") {
  SourceDecl d;
  d.object = "Edge";
  d.source = "Source";
  d.target = "Target";
  SourceDecl nodes = csv_decl("Source", {{"id"}}, {});
  SourceDecl tnodes = csv_decl("Target", {{"id"}}, {});
  auto s = load_csv_text("id\na\nb\nc\n", nodes);
  auto t = load_csv_text("id\na\nb\nc\n", tnodes);
  InstanceCategory db = assemble({s, t, load_edges_text("a\tb\nb\tc\n\n", d)}, {});
  CHECK(db.object("Edge").elements == values({Tuple{"a", "b"}, Tuple{"b", "c"}}));
  const Morphism* p1 = db.find_morphism("Edge", "Source");
  REQUIRE(p1);
  CHECK(p1->provenance.kind == Provenance::Kind::Projection);
  CHECK(p1->apply(Value(Tuple{"a", "b"})) == Value("a"));
  CHECK(p1->apply(Value(Tuple{"b", "c"})) == Value("b"));

  db = assemble({s, t, load_edges_text("", d)}, {});
  CHECK(db.object("Edge").elements.empty());
  CHECK(db.find_morphism("Edge", "Target")->mapping.empty());

  CHECK(code_of([&] { assemble({s, t, load_edges_text("a\tz\n", d)}, {}); }) ==
        ErrorCode::DanglingEndpoint);
  CHECK(code_of([&] { load_edges_text("a b\n", d); }) == ErrorCode::TypeMismatch);
}

TEST_CASE("assemble: the e-commerce bundle") {
  InstanceCategory db = load_manifest(samples() / "ecommerce" / "manifest.catql");
  for (const char* o : {"Customer", "Knows", "Order", "Product", "ID", "CName", "PName"}) {
    CHECK(db.has_object(o));
  }
  CHECK(db.object("Knows").kind == ObjectKind::Relationship);
  const Morphism* buyer = db.find_morphism("Order", "Customer");
  REQUIRE(buyer);
  CHECK(buyer->apply(DeweyCode::parse("3")) == Value(4));
  CHECK(db.check_thinness().empty());
  CHECK(summary(db).rfind("12 objects, 11 morphisms\n", 0) == 0);
}

TEST_CASE("assemble: one csv part is the csv itself") {
  Scratch s;
  s.write("c.csv", "ID,CName\n1,Mary\n2,John\n");
  auto decl = csv_decl("Customer", {{"ID", ValueKind::Int}}, {{"CName", ValueKind::Text}});
  decl.path = s.dir / "c.csv";
  auto part = load_csv(decl.path, decl);
  InstanceCategory db = s.load("csv c.csv key=ID:int object=Customer columns=CName:text\n");
  REQUIRE(db.objects().size() == part.objects.size());
  for (const auto& o : part.objects) CHECK(db.object(o.name).elements == o.elements);
  REQUIRE(db.morphisms().size() == part.morphisms.size());
  for (const auto& pm : part.morphisms) {
    CHECK(db.morphism(pm.morphism.name).mapping == pm.morphism.mapping);
  }
}

TEST_CASE("assemble: violations") {
  Scratch s;
  s.write("c.csv", "ID,CName\n1,Mary\n2,John\n");
  s.write("o.csv", "OID,Cust\n10,1\n11,3\n");
  s.write("k.tsv", "1\t2\n");
  s.write("n.csv", "ID,CName\n5,Ann\n");
  CHECK(code_of([&] {
          s.load("csv c.csv key=ID:int object=Customer columns=CName\n"
                 "csv o.csv key=OID:int object=Order\n"
                 "morphism buyer: Order -> Customer via Cust\n");
        }) == ErrorCode::TotalityViolation);
  CHECK(code_of([&] {
          s.load("csv c.csv key=ID:int object=Customer columns=CName\n"
                 "csv o.csv key=OID:int object=Order\n"
                 "morphism buyer: Order -> Customer via Nope\n");
        }) == ErrorCode::MissingColumn);
  CHECK(code_of([&] {
          s.load("csv c.csv key=ID:int object=Customer columns=CName\n"
                 "edges k.tsv object=Knows source=Customer target=Customer\n");
        }) == ErrorCode::ThinnessViolation);
  CHECK(code_of([&] {
          s.load("csv c.csv key=ID:int object=Customer columns=CName\n"
                 "csv n.csv key=ID:int object=New columns=CName\n");
        }) == ErrorCode::NameClash);
  CHECK(code_of([&] {
          s.load("csv c.csv key=ID:int object=Customer columns=CName\n"
                 "morphism f: Customer -> Ghost via key\n");
        }) == ErrorCode::ManifestSyntax);
  CHECK(code_of([&] { s.load("csv missing.csv key=ID object=X\n"); }) == ErrorCode::Io);

  // Declared sharing merges the attribute.
  InstanceCategory db = s.load(
      "object CName kind=attribute\n"
      "csv c.csv key=ID:int object=Customer columns=CName\n"
      "csv n.csv key=ID:int object=New columns=CName\n");
  CHECK(db.object("CName").elements == values({"Ann", "John", "Mary"}));
  CHECK(db.find_morphism("New", "CName")->name == "new_cname");
}

TEST_CASE("assemble: parent links") {
  Scratch s;
  s.write("o.xml", "<Orders><Order><Item/><Item/></Order><Order><Item/></Order></Orders>");
  // With one shared code attribute, Item -> Order -> DeweyCode and
  // Item -> DeweyCode disagree.
  CHECK(code_of([&] {
          s.load("xml o.xml tags=Order:Order,Item:Item\n"
                 "morphism of: Item -> Order via parent\n");
        }) == ErrorCode::ThinnessViolation);
  InstanceCategory db = s.load(
      "xml o.xml tags=Order:Order dewey=OrderCode\n"
      "xml o.xml tags=Item:Item dewey=ItemCode\n"
      "morphism of: Item -> Order via parent\n");
  const Morphism& of = db.morphism("of");
  CHECK(of.apply(DeweyCode::parse("1.2")) == Value(DeweyCode::parse("1")));
  CHECK(of.apply(DeweyCode::parse("2.1")) == Value(DeweyCode::parse("2")));
  CHECK(code_of([&] {
          s.load("xml o.xml tags=Orders:Root dewey=RootCode\n"
                 "xml o.xml tags=Order:Order dewey=OrderCode\n"
                 "morphism up: Root -> Order via parent\n");
        }) == ErrorCode::TotalityViolation);
}

TEST_CASE("dump and reload a csv relation") {
  Scratch s;
  s.write("c.csv", "ID,CName,CreditLimit\n1,\"Smith, J\",0.1\n2,\"say \"\"hi\"\"\",3e+20\n3,Ann,-2.5\n");
  const std::string decl = " key=ID:int object=Customer columns=CName:text,CreditLimit:float\n";
  InstanceCategory a = s.load("csv c.csv" + decl);
  s.write("d.csv", dump_csv(a, "Customer"));
  InstanceCategory b = s.load("csv d.csv key=Customer:int object=Customer columns=CName:text,CreditLimit:float\n");
  same_instance(a, b);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::string csv = "K,T,F,I\n";
    int rows = static_cast<int>(rng() % 8);
    for (int r = 0; r < rows; ++r) {
      std::string t;
      for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) t += "ab,\" \n"[rng() % 6];
      std::string q;
      for (char c : t) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      std::uniform_real_distribution<double> u(-1e6, 1e6);
      char f[64];
      auto end = std::to_chars(f, f + 64, u(rng)).ptr;
      csv += std::to_string(r) + ",\"" + q + "\"," + std::string(f, end) + "," +
             std::to_string(static_cast<std::int64_t>(rng())) + "\n";
    }
    s.write("r.csv", csv);
    InstanceCategory x = s.load("csv r.csv key=K:int object=R columns=T:text,F:float,I:int\n");
    s.write("r2.csv", dump_csv(x, "R"));
    InstanceCategory y = s.load("csv r2.csv key=R:int object=R columns=T:text,F:float,I:int\n");
    same_instance(x, y);
  }
}

TEST_CASE("bundled samples match the test fixtures") {
  same_instance(load_manifest(samples() / "university" / "manifest.catql"),
                catql::testing::university());
  same_instance(load_manifest(samples() / "social" / "manifest.catql"),
                catql::testing::social());
  InstanceCategory family = load_manifest(samples() / "family" / "manifest.catql");
  CHECK(family.object("Name").elements ==
        catql::testing::family().object("Name").elements);
  CHECK(family.object("Person").elements.size() == 6);
}
