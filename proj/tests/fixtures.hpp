#pragma once

#include <string>
#include <vector>

#include "catql/model.hpp"

namespace catql::testing {

inline SetObject entity(std::string name, std::vector<Value> elements,
                        ObjectKind kind = ObjectKind::Entity) {
  SetObject o;
  o.name = std::move(name);
  o.kind = kind;
  o.elements = {elements.begin(), elements.end()};
  return o;
}

inline SetObject attribute(std::string name, std::vector<Value> elements) {
  return entity(std::move(name), std::move(elements), ObjectKind::Attribute);
}

inline SetObject relationship(std::string name,
                              std::vector<std::string> components,
                              std::vector<Tuple> rows) {
  SetObject o;
  o.name = std::move(name);
  o.kind = ObjectKind::Relationship;
  o.arity = components.size();
  o.component_names = std::move(components);
  for (auto& r : rows) o.elements.insert(Value(std::move(r)));
  return o;
}

inline Morphism morphism(std::string name, std::string source,
                         std::string target,
                         std::vector<std::pair<Value, Value>> pairs) {
  Morphism m;
  m.name = std::move(name);
  m.source = std::move(source);
  m.target = std::move(target);
  for (auto& [x, y] : pairs) m.mapping.emplace(x, y);
  return m;
}

// Adds the component projections of a relationship object.
inline void add_projections(InstanceCategory& db, const std::string& rel,
                            const std::vector<std::string>& targets) {
  const SetObject& o = db.object(rel);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Morphism m;
    m.name = o.component_names[i];
    m.source = rel;
    m.target = targets[i];
    m.provenance = Provenance::projection(i);
    for (const auto& t : o.elements) m.mapping.emplace(t, t.as_tuple()[i]);
    db.add_morphism(std::move(m));
  }
}

// Students, their gender and address, and the courses they attend.
// Female students s3, s4 attend c1 and c2 between them; male students s1
// and s5 attend both, s2 only c1.
inline InstanceCategory university() {
  InstanceCategory db;
  db.add_object(entity("Student", {"s1", "s2", "s3", "s4", "s5"}));
  db.add_object(attribute("Gender", {"Female", "Male"}));
  db.add_object(attribute("Address", {"A1", "A2", "A3", "A4"}));
  db.add_object(entity("Course", {"c1", "c2", "c3"}));
  db.add_object(relationship("SC", {"student", "course"},
                             {{"s1", "c1"}, {"s1", "c2"}, {"s1", "c3"},
                              {"s2", "c1"}, {"s3", "c1"}, {"s3", "c2"},
                              {"s4", "c2"}, {"s5", "c1"}, {"s5", "c2"}}));
  db.add_morphism(morphism("gender", "Student", "Gender",
                           {{"s1", "Male"}, {"s2", "Male"}, {"s3", "Female"},
                            {"s4", "Female"}, {"s5", "Male"}}));
  db.add_morphism(morphism("address", "Student", "Address",
                           {{"s1", "A1"}, {"s2", "A2"}, {"s3", "A3"},
                            {"s4", "A1"}, {"s5", "A4"}}));
  add_projections(db, "SC", {"Student", "Course"});
  return db;
}

}  // namespace catql::testing

namespace catql::testing {

// Adam (ε) has children Beth (1) and Dan (2); Beth has John (1.1) and
// Carl (1.2); John has Eve (1.1.1).
inline InstanceCategory family() {
  InstanceCategory db;
  std::vector<std::pair<std::string, std::string>> people = {
      {"", "Adam"}, {"1", "Beth"},    {"2", "Dan"},
      {"1.1", "John"}, {"1.2", "Carl"}, {"1.1.1", "Eve"}};
  SetObject person = entity("Person", {});
  SetObject dewey = attribute("DeweyCode", {});
  SetObject name = attribute("Name", {});
  Morphism to_dewey = morphism("dewey", "Person", "DeweyCode", {});
  Morphism to_name = morphism("name", "Person", "Name", {});
  for (const auto& [code, n] : people) {
    Value d(DeweyCode::parse(code));
    person.elements.insert(d);
    dewey.elements.insert(d);
    name.elements.insert(Value(n));
    to_dewey.mapping.emplace(d, d);
    to_name.mapping.emplace(d, Value(n));
  }
  db.add_object(person);
  db.add_object(dewey);
  db.add_object(name);
  db.add_morphism(to_dewey);
  db.add_morphism(to_name);
  return db;
}

// People 1..5 with edges 1->2->3, 3->1, 4->5. Source and Target are two
// copies of the people with their own name attributes, so that the
// schema stays thin.
inline InstanceCategory social() {
  InstanceCategory db;
  std::vector<std::pair<int, std::string>> people = {
      {1, "John"}, {2, "Mary"}, {3, "Sue"}, {4, "Tom"}, {5, "Ann"}};
  SetObject source = entity("Source", {});
  SetObject target = entity("Target", {});
  SetObject sname = attribute("SName", {});
  SetObject tname = attribute("TName", {});
  Morphism sn = morphism("sname", "Source", "SName", {});
  Morphism tn = morphism("tname", "Target", "TName", {});
  for (const auto& [id, n] : people) {
    source.elements.insert(id);
    target.elements.insert(id);
    sname.elements.insert(n);
    tname.elements.insert(n);
    sn.mapping.emplace(id, n);
    tn.mapping.emplace(id, n);
  }
  db.add_object(source);
  db.add_object(target);
  db.add_object(sname);
  db.add_object(tname);
  db.add_morphism(sn);
  db.add_morphism(tn);
  db.add_object(relationship("Edge", {"source", "target"},
                             {{1, 2}, {2, 3}, {3, 1}, {4, 5}}));
  add_projections(db, "Edge", {"Source", "Target"});
  return db;
}

inline const char* kStudentsAttendingFemaleCourses =
    "{ (x1, x2) | x1 in Student, x2 in Address, x1.@address = x2, "
    "x1.Gender = \"Male\", "
    "forall y1 in Student: (y1.Gender = \"Female\" -> "
    "exists y2, y3 in SC, y4 in Course: "
    "(y2.Student = x1 and y3.Student = y1 and y2.Course = y4 and "
    "y3.Course = y4)) }";

}  // namespace catql::testing
