"""End-to-end tests for the catql command line.

Usage: test_cli.py <path to catql> <source dir>
"""

import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

CATQL = None
SAMPLES = None
QUERIES = None


def manifest(name):
    return str(SAMPLES / name / "manifest.catql")


def catql(*args, env=None, cwd=None, stdin=None):
    full_env = {k: v for k, v in os.environ.items()
                if k not in ("CATQL_MANIFEST", "CATQL_SEED")}
    if env:
        full_env.update(env)
    return subprocess.run([CATQL, *args], capture_output=True, text=True,
                          env=full_env, cwd=cwd, input=stdin, timeout=120)


GOLDEN = [
    ("male_students", "university"),
    ("ancestors_of_john", "family"),
    ("reachable_from_john", "social"),
    ("both_genders", "university"),
    ("division", "university"),
    ("recursive_friends", "social"),
]


class GoldenQueries(unittest.TestCase):
    def test_calculus_with_oracle(self):
        for name, sample in GOLDEN:
            with self.subTest(name):
                r = catql("-m", manifest(sample), "run", "--oracle",
                          str(QUERIES / f"{name}.cq"))
                self.assertEqual(r.returncode, 0, r.stderr)
                self.assertEqual(r.stdout, (QUERIES / f"{name}.tsv").read_text())

    def test_algebra_forms(self):
        for name, sample in GOLDEN:
            alg = QUERIES / f"{name}.alg"
            if not alg.exists():
                continue
            with self.subTest(name):
                r = catql("-m", manifest(sample), "run", "--algebra", str(alg))
                self.assertEqual(r.returncode, 0, r.stderr)
                expected = (QUERIES / f"{name}.tsv").read_text().splitlines()[1:]
                self.assertEqual(r.stdout.splitlines()[1:], expected)

    def test_unoptimized_plans_agree(self):
        for name, sample in GOLDEN:
            with self.subTest(name):
                r = catql("-m", manifest(sample), "run", "--no-opt",
                          str(QUERIES / f"{name}.cq"))
                self.assertEqual(r.returncode, 0, r.stderr)
                self.assertEqual(r.stdout, (QUERIES / f"{name}.tsv").read_text())

    def test_output_is_deterministic(self):
        runs = {catql("-m", manifest("university"), "run",
                      str(QUERIES / "male_students.cq")).stdout for _ in range(3)}
        self.assertEqual(len(runs), 1)


class Run(unittest.TestCase):
    def test_inline_text_and_stdin(self):
        q = '{ x | x in Course }'
        inline = catql("-m", manifest("university"), "run", q)
        piped = catql("-m", manifest("university"), "run", "-", stdin=q)
        self.assertEqual(inline.returncode, 0, inline.stderr)
        self.assertEqual(inline.stdout, "x\nc1\nc2\nc3\n")
        self.assertEqual(piped.stdout, inline.stdout)

    def test_empty_result_prints_header_only(self):
        r = catql("-m", manifest("university"), "run",
                  '{ x | x in Student, x.Gender = "Other" }')
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(r.stdout, "x\n")

    def test_unsafe_query(self):
        r = catql("-m", manifest("university"), "run",
                  '{ x | x in Student or x.Gender = "Male" }')
        self.assertEqual(r.returncode, 4)
        self.assertIn("unsafe variable x", r.stderr)
        self.assertEqual(r.stdout, "")

    def test_syntax_error(self):
        r = catql("-m", manifest("university"), "run", "{ x | x in }")
        self.assertEqual(r.returncode, 1)
        self.assertTrue(r.stderr.startswith("catql: "))

    def test_missing_manifest(self):
        with tempfile.TemporaryDirectory() as d:
            r = catql("run", "{ x | x in Course }", cwd=d)
            self.assertEqual(r.returncode, 2)
            r = catql("-m", str(Path(d) / "nope.catql"), "run", "{ x | x in A }")
            self.assertEqual(r.returncode, 2)

    def test_manifest_from_environment(self):
        with tempfile.TemporaryDirectory() as d:
            r = catql("run", "{ x | x in Course }", cwd=d,
                      env={"CATQL_MANIFEST": manifest("university")})
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertEqual(r.stdout, "x\nc1\nc2\nc3\n")


class Load(unittest.TestCase):
    def test_load_records_the_session(self):
        with tempfile.TemporaryDirectory() as d:
            r = catql("load", manifest("ecommerce"), cwd=d)
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertTrue(r.stdout.startswith("12 objects, 11 morphisms\n"))
            r = catql("run", "{ n | n in CName }", cwd=d)
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertEqual(r.stdout.splitlines()[0], "n")

    def write(self, d, files):
        for name, text in files.items():
            (Path(d) / name).write_text(text)
        return str(Path(d) / "manifest.catql")

    def test_thinness_violation(self):
        with tempfile.TemporaryDirectory() as d:
            m = self.write(d, {
                # Both edge projections land in Person.
                "manifest.catql": (
                    "csv p.csv key=id:int object=Person\n"
                    "edges k.tsv object=Knows source=Person target=Person\n"),
                "p.csv": "id\n1\n2\n",
                "k.tsv": "1\t2\n",
            })
            r = catql("load", m, cwd=d)
            self.assertEqual(r.returncode, 3, r.stdout + r.stderr)
            self.assertIn("ThinnessViolation", r.stderr)

    def test_data_model_errors(self):
        cases = {
            "DuplicateKey": ("csv a.csv key=id object=A\n", "id\n1\n1\n"),
            "MissingColumn": ("csv a.csv key=id object=A columns=X:text\n", "id\n1\n"),
            "TypeMismatch": ("csv a.csv key=id:int object=A\n", "id\none\n"),
        }
        for code, (m, csv) in cases.items():
            with self.subTest(code), tempfile.TemporaryDirectory() as d:
                path = self.write(d, {"manifest.catql": m, "a.csv": csv})
                r = catql("load", path, cwd=d)
                self.assertEqual(r.returncode, 3, r.stderr)
                self.assertIn(code, r.stderr)

    def test_unsupported_xml(self):
        with tempfile.TemporaryDirectory() as d:
            path = self.write(d, {
                "manifest.catql": "xml t.xml tags=P:P\n",
                "t.xml": '<P id="1"></P>\n',
            })
            r = catql("load", path, cwd=d)
            self.assertEqual(r.returncode, 3)
            self.assertIn("UnsupportedFeature", r.stderr)

    def test_dump(self):
        r = catql("-m", manifest("university"), "dump", "Student")
        self.assertEqual(r.returncode, 0, r.stderr)
        lines = r.stdout.splitlines()
        self.assertEqual(lines[0], "Student,Address,Gender")
        self.assertEqual(len(lines), 6)


class Explain(unittest.TestCase):
    def test_golden_plan(self):
        r = catql("-m", manifest("university"), "explain",
                  str(QUERIES / "male_students.cq"))
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(r.stdout, (QUERIES / "male_students.plan").read_text())
        for node in ("divide(", "union(", "lim(", "select(", "project(", "cat("):
            self.assertIn(node, r.stdout)

    def test_diff(self):
        r = catql("-m", manifest("university"), "explain", "--diff",
                  str(QUERIES / "male_students.cq"))
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertIn("applied rule", r.stdout)


class Check(unittest.TestCase):
    def test_passes_and_is_deterministic(self):
        a = catql("check", "--trials", "3", "--seed", "7")
        b = catql("check", "--trials", "3", "--seed", "7")
        self.assertEqual(a.returncode, 0, a.stdout)
        self.assertEqual(a.stdout, b.stdout)
        lines = a.stdout.splitlines()
        self.assertEqual(lines[0], "seed 7, 3 trials")
        self.assertEqual(len(lines), 19)
        self.assertTrue(all(l.startswith("PASS ") for l in lines[1:]))

    def test_seed_from_environment(self):
        r = catql("check", "--trials", "2", env={"CATQL_SEED": "99"})
        self.assertEqual(r.returncode, 0, r.stdout)
        self.assertTrue(r.stdout.startswith("seed 99, 2 trials\n"))
        r = catql("check", "--trials", "2", env={"CATQL_SEED": "many"})
        self.assertEqual(r.returncode, 1)

    def test_zero_trials_warns(self):
        r = catql("check", "--trials", "0")
        self.assertEqual(r.returncode, 0)
        self.assertIn("warning", r.stderr)

    def test_timings_only_when_verbose(self):
        r = catql("check", "--trials", "1")
        self.assertEqual(r.stderr, "")
        r = catql("check", "--trials", "1", "-v")
        self.assertIn(" s\n", r.stderr)


class Oracle(unittest.TestCase):
    def test_oracle_needs_calculus(self):
        r = catql("-m", manifest("university"), "run", "--algebra", "--oracle",
                  "base(Course)")
        self.assertEqual(r.returncode, 1)


if __name__ == "__main__":
    CATQL = os.path.abspath(sys.argv.pop(1))
    source = Path(sys.argv.pop(1)).resolve()
    SAMPLES = source / "data" / "samples"
    QUERIES = SAMPLES / "queries"
    unittest.main(verbosity=2)
