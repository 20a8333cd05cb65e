// catql: load multi-model data, run and explain calculus or algebra queries,
// and run the randomized checks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "catql/algebra.hpp"
#include "catql/calculus.hpp"
#include "catql/check.hpp"
#include "catql/compiler.hpp"
#include "catql/error.hpp"
#include "catql/ingest.hpp"
#include "catql/optimizer.hpp"

namespace fs = std::filesystem;
using namespace catql;

namespace {

constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kIo = 2;
constexpr int kDataModel = 3;
constexpr int kUnsafe = 4;
constexpr int kOracleMismatch = 5;

constexpr const char* kSessionFile = ".catql-session";

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return kIo;
    case ErrorCode::MissingMorphism:
    case ErrorCode::CompositionMismatch:
    case ErrorCode::DuplicateKey:
    case ErrorCode::MissingColumn:
    case ErrorCode::TypeMismatch:
    case ErrorCode::MalformedXml:
    case ErrorCode::UnsupportedFeature:
    case ErrorCode::DanglingEndpoint:
    case ErrorCode::ThinnessViolation:
    case ErrorCode::TotalityViolation:
    case ErrorCode::NameClash:
      return kDataModel;
    case ErrorCode::UnsafeQuery:
      return kUnsafe;
    default:
      return kOther;
  }
}

struct Options {
  std::string manifest;
  std::string query;
  bool algebra = false;
  bool calculus = false;
  bool no_opt = false;
  bool oracle = false;
  bool diff = false;
  std::size_t trials = 100;
  std::uint64_t seed = 20240601;
  bool verbose = false;
  std::string object;
};

// --manifest, then CATQL_MANIFEST, then the path recorded by `catql load`.
fs::path manifest_path(const Options& o) {
  if (!o.manifest.empty()) return o.manifest;
  if (const char* env = std::getenv("CATQL_MANIFEST"); env && *env) return env;
  std::ifstream in(kSessionFile);
  std::string path;
  if (in && std::getline(in, path) && !path.empty()) return path;
  throw Error(ErrorCode::Io,
              "no manifest: pass --manifest, set CATQL_MANIFEST or run `catql load` first");
}

InstanceCategory load_instance(const Options& o) {
  return ingest::load_manifest(manifest_path(o));
}

// A query argument is a file when one exists by that name, `-` for stdin,
// and query text otherwise.
std::string query_text(const std::string& arg) {
  std::ostringstream ss;
  if (arg == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) {
    std::ifstream in(arg, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + arg);
    ss << in.rdbuf();
    return ss.str();
  }
  return arg;
}

bool is_calculus(const Options& o, const std::string& text) {
  if (o.algebra) return false;
  if (o.calculus) return true;
  std::size_t pos = 0;
  while (true) {
    pos = text.find_first_not_of(" \t\r\n", pos);
    if (pos == std::string::npos) return false;
    if (text[pos] != '#') return text[pos] == '{';
    pos = text.find('\n', pos);
    if (pos == std::string::npos) return false;
  }
}

std::string tsv_field(const Value& v) {
  std::string out;
  for (char c : v.to_string()) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

void print_table(const ExtSet& result) {
  auto names = result.component_names();
  for (std::size_t i = 0; i < names.size(); ++i) std::cout << (i ? "\t" : "") << names[i];
  std::cout << "\n";
  // std::set keeps rows in lexicographic component order.
  for (const auto& row : result.rows) {
    auto parts = split_row(row, result.arity());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::cout << (i ? "\t" : "") << tsv_field(parts[i]);
    }
    std::cout << "\n";
  }
}

// Parses and safety-checks a calculus query; unsafe variables go to stderr.
CalculusQuery checked_query(const InstanceCategory& db, const std::string& text) {
  CalculusQuery q = parse_calculus(text, &db);
  auto unsafe = check_safety(q);
  if (!unsafe.empty()) {
    std::string vars;
    for (const auto& u : unsafe) {
      std::cerr << "unsafe variable " << u.var << " (rule " << u.rule << "): " << u.detail
                << "\n";
      vars += (vars.empty() ? "" : ", ") + u.var;
    }
    throw Error(ErrorCode::UnsafeQuery, "unsafe variables: " + vars);
  }
  return q;
}

int cmd_load(const Options& o) {
  fs::path path = manifest_path(o);
  InstanceCategory db = ingest::load_manifest(path);
  std::cout << ingest::summary(db);
  std::ofstream(kSessionFile) << fs::absolute(path).string() << "\n";
  return kOk;
}

int cmd_run(const Options& o) {
  InstanceCategory db = load_instance(o);
  std::string text = query_text(o.query);
  ExprPtr plan;
  std::optional<CalculusQuery> q;
  if (is_calculus(o, text)) {
    q = checked_query(db, text);
    plan = compile(db, *q);
  } else {
    if (o.oracle) throw Error(ErrorCode::Unsupported, "--oracle needs a calculus query");
    plan = parse_algebra(text);
  }
  if (!o.no_opt) plan = optimize(db, plan).plan;
  ExtSet result = evaluate(db, plan);
  if (o.oracle) {
    ExtSet expected = brute_eval(db, *q);
    if (expected.rows != result.rows) {
      std::cerr << "oracle mismatch: plan gives " << result.size() << " rows, brute force "
                << expected.size() << "\n";
      for (const auto& r : result.rows) {
        if (!expected.rows.contains(r)) std::cerr << "  extra   " << r.to_string() << "\n";
      }
      for (const auto& r : expected.rows) {
        if (!result.rows.contains(r)) std::cerr << "  missing " << r.to_string() << "\n";
      }
      return kOracleMismatch;
    }
  }
  print_table(result);
  return kOk;
}

int cmd_explain(const Options& o) {
  InstanceCategory db = load_instance(o);
  std::string text = query_text(o.query);
  ExprPtr plan = is_calculus(o, text) ? compile(db, checked_query(db, text)) : parse_algebra(text);
  if (o.diff) {
    std::cout << explain_diff(db, plan);
  } else {
    std::cout << to_pretty_text(*plan);
  }
  return kOk;
}

int cmd_check(const Options& o) {
  std::uint64_t seed = o.seed;
  if (const char* env = std::getenv("CATQL_SEED"); env && *env) {
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Unsupported, std::string("CATQL_SEED is not a number: ") + env);
    }
  }
  if (o.trials == 0) std::cerr << "warning: --trials 0 checks nothing\n";
  std::cout << "seed " << seed << ", " << o.trials << " trials\n";
  bool ok = true;
  for (const auto& r : check::run_all(o.trials, seed)) {
    ok = ok && r.passed();
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " (" << r.trials << " trials)";
    if (!r.passed()) std::cout << ": " << r.failures << " failures; " << r.first_failure;
    std::cout << "\n";
    if (o.verbose) std::cerr << r.name << ": " << r.seconds << " s\n";
  }
  return ok ? kOk : kOther;
}

int cmd_dump(const Options& o) {
  InstanceCategory db = load_instance(o);
  if (!db.has_object(o.object)) throw Error(ErrorCode::UnknownObject, o.object);
  std::cout << ingest::dump_csv(db, o.object);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catql: categorical queries over relational, tree and graph data"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-m,--manifest", o.manifest, "Schema manifest (default: CATQL_MANIFEST or the last `load`)");

  auto* load = app.add_subcommand("load", "Load a manifest, validate it and print a summary");
  load->add_option("manifest", o.manifest, "Schema manifest")->required();

  auto* run = app.add_subcommand("run", "Evaluate a query and print a TSV table");
  run->add_option("query", o.query, "Query text, a file holding it, or - for stdin")->required();
  auto* alg = run->add_flag("--algebra", o.algebra, "Read the query as an algebra plan");
  run->add_flag("--calculus", o.calculus, "Read the query as calculus")->excludes(alg);
  run->add_flag("--no-opt", o.no_opt, "Skip the rewrite optimizer");
  run->add_flag("--oracle", o.oracle, "Also evaluate by brute force and compare (small data only)");

  auto* explain = app.add_subcommand("explain", "Print the compiled plan");
  explain->add_option("query", o.query, "Query text, a file holding it, or - for stdin")->required();
  auto* ealg = explain->add_flag("--algebra", o.algebra, "Read the query as an algebra plan");
  explain->add_flag("--calculus", o.calculus, "Read the query as calculus")->excludes(ealg);
  explain->add_flag("--diff", o.diff, "Show the plan before and after optimization with the trace");

  auto* check = app.add_subcommand("check", "Run the randomized equivalence and soundness suites");
  check->add_option("--trials", o.trials, "Trials per property")->capture_default_str();
  check->add_option("--seed", o.seed, "Random seed (CATQL_SEED overrides)")->capture_default_str();
  check->add_flag("-v,--verbose", o.verbose, "Print timings to stderr");

  auto* dump = app.add_subcommand("dump", "Print an object as CSV");
  dump->add_option("object", o.object, "Object name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kOther;
  }

  try {
    if (*load) return cmd_load(o);
    if (*run) return cmd_run(o);
    if (*explain) return cmd_explain(o);
    if (*check) return cmd_check(o);
    if (*dump) return cmd_dump(o);
  } catch (const Error& e) {
    std::cerr << "catql: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "catql: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
