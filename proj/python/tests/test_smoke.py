from pathlib import Path

import pytest

import catql

SAMPLES = Path(__file__).resolve().parents[2] / "data" / "samples"


@pytest.fixture(scope="module")
def university():
    return catql.Database.load(SAMPLES / "university" / "manifest.catql")


def test_load(university):
    assert "Student" in university.objects()
    assert ("student", "SC", "Student") in university.morphisms()
    assert university.elements("Course") == ["c1", "c2", "c3"]
    assert university.summary().startswith("5 objects, 4 morphisms")


def test_calculus_query(university):
    text = (SAMPLES / "queries" / "male_students.cq").read_text()
    r = catql.query(university, text, oracle=True)
    assert r.columns == ["x1", "x2"]
    assert r.rows == [("s1", "A1"), ("s5", "A4")]
    assert catql.query(university, text, optimize=False).rows == r.rows


def test_algebra_query(university):
    r = catql.query(university, (SAMPLES / "queries" / "division.alg").read_text())
    assert [row[0] for row in r.rows] == ["A1", "A4"]


def test_graph_and_tree():
    social = catql.Database.load(SAMPLES / "social" / "manifest.catql")
    r = catql.query(social, (SAMPLES / "queries" / "recursive_friends.cq").read_text(), oracle=True)
    assert [row[0] for row in r.rows] == ["John", "Mary", "Sue"]
    family = catql.Database.load(SAMPLES / "family" / "manifest.catql")
    r = catql.query(family, (SAMPLES / "queries" / "ancestors_of_john.cq").read_text())
    assert [row[0] for row in r.rows] == ["Adam", "Beth"]


def test_explain(university):
    text = (SAMPLES / "queries" / "male_students.cq").read_text()
    plan = catql.explain(university, text)
    assert plan == (SAMPLES / "queries" / "male_students.plan").read_text()
    assert "applied rule" in catql.explain(university, text, diff=True)


def test_errors(university):
    with pytest.raises(catql.CatqlError) as e:
        catql.query(university, '{ x | x in Student or x.Gender = "Male" }')
    assert e.value.code == "UnsafeQuery"
    with pytest.raises(catql.CatqlError) as e:
        catql.Database.load(SAMPLES / "missing.catql")
    assert e.value.code == "IoError"
    var, rule, _ = catql.unsafe_variables("{ x | not x in S }")[0]
    assert var == "x" and rule in ("a", "b", "c", "d")
    assert catql.unsafe_variables("{ x | x in S }") == []


def test_manifest_text(tmp_path):
    (tmp_path / "a.csv").write_text("id,Name\n1,Ann\n2,Bo\n")
    db = catql.Database.from_manifest_text(
        "csv a.csv key=id:int object=A columns=Name:text\n", tmp_path)
    assert db.elements("A") == [1, 2]
    assert catql.query(db, "{ n | n in Name }").rows == [("Ann",), ("Bo",)]


def test_check():
    results = catql.check(trials=2, seed=5)
    assert len(results) == 18
    assert all(failures == 0 for _, _, failures in results)
