#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "dfrt/report.hpp"
#include "dfrt/typing.hpp"

// Command line front end: parse and analyze programs, report verdicts and
// inferred type maps, optionally cross-check against the concrete oracle.
// Exit codes: 0 all SAFE, 1 some UNSAFE, 2 tool/config error (including
// soundness violations found by --oracle).

namespace fs = std::filesystem;
using namespace dfrt;

namespace {

struct Options {
  std::vector<std::string> inputs;
  std::string domain = "poly";
  std::string quals_file;
  int ctx = 1;
  std::string widening = "thresholds";
  std::string thresholds = "auto";
  int depth_cap = 20;
  int max_iters = 500;
  int fuel = 1000;
  bool dump_types = false;
  bool dump_concrete = false;
  std::string format = "text";
  bool oracle = false;
};

std::string slurp(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

AnalysisConfig make_config(const Options &o) {
  AnalysisConfig cfg;
  if (o.domain == "pred") {
    cfg.domain = DomainKind::Pred;
    if (o.quals_file.empty())
      throw std::runtime_error("--quals FILE is required with --domain pred");
    cfg.qualifiers = parse_qualifier_file(slurp(o.quals_file));
  } else if (o.domain == "oct") {
    cfg.domain = DomainKind::Oct;
  } else if (o.domain == "poly") {
    cfg.domain = DomainKind::Poly;
  } else {
    throw std::runtime_error("unknown domain " + o.domain);
  }
  if (!o.quals_file.empty() && cfg.domain != DomainKind::Pred)
    throw std::runtime_error("--quals only applies to --domain pred");
  cfg.k = o.ctx;
  cfg.widening = o.widening == "plain" ? WideningMode::Plain
                                       : WideningMode::Thresholds;
  if (o.thresholds != "auto" && cfg.widening == WideningMode::Thresholds)
    cfg.threshold_templates = parse_qualifier_file(slurp(o.thresholds));
  cfg.depth_cap = o.depth_cap;
  cfg.max_iters = o.max_iters;
  return cfg;
}

struct Outcome {
  int exit_code = 0;  // worst seen
  bool expected_ok = true;
};

int run_one(const std::string &path, const std::string &source,
            const Options &o, std::ostream &out, std::string *verdict_out) {
  ExprPtr prog;
  try {
    prog = parse_program(source);
  } catch (const ParseError &pe) {
    std::cerr << path << ":" << pe.line << ":" << pe.col
              << ": parse error: " << pe.what() << "\n";
    return 2;
  }
  AnalysisConfig cfg = make_config(o);
  Analyzer an(prog, cfg);
  auto t0 = std::chrono::steady_clock::now();
  AnalysisResult res = an.analyze();
  double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  Verdict v = check_safety(res.map, an);
  v.diverged_diag = !res.converged;

  RunReport rep;
  rep.program = path;
  rep.config = cfg;
  rep.verdict = v;
  rep.iterations = res.iterations;
  rep.converged = res.converged;
  rep.seconds = dt;

  if (o.format == "json") {
    out << report_to_json(rep, o.dump_types ? res.map : TypeMap{}, an)
        << "\n";
  } else {
    out << report_to_text(rep, o.dump_types ? res.map : TypeMap{}, an);
  }
  if (verdict_out) *verdict_out = v.safe ? "SAFE" : "UNSAFE";

  int code = v.safe ? 0 : 1;
  if (!res.converged) {
    std::cerr << path << ": analysis did not converge within --max-iters "
              << cfg.max_iters << " (diagnostics failure)\n";
    code = 2;
  }

  if (o.oracle || o.dump_concrete) {
    NodeArena carena;
    ConcreteResult cres = run_concrete(prog, carena, o.fuel);
    if (o.dump_concrete)
      out << execmap_to_json(cres.map, carena) << "\n";
    if (o.oracle) {
      GammaDiag diag;
      bool member = gamma_member(cres.map, carena, prog, res.map, an, &diag);
      if (!member) {
        std::cerr << path << ": SOUNDNESS VIOLATION: concrete run not in "
                  << "concretization of the inferred map: " << diag.message
                  << "\n";
        code = 2;
      } else {
        out << "  oracle: concrete run (" << (cres.diverged ? "fuel-cut"
                                                            : "fixpoint")
            << ", " << cres.iterations << " iterations, "
            << diag.checked_nodes << " nodes) is covered by the type map\n";
      }
    }
  }
  return code;
}

int run_batch(const std::string &dir, const Options &o) {
  fs::path root(dir);
  fs::path progs = fs::exists(root / "programs") ? root / "programs" : root;
  std::map<std::string, std::string> expected;
  for (auto name : {"expected.json", "../expected.json"}) {
    fs::path mf = progs / name;
    if (fs::exists(mf)) {
      auto j = nlohmann::json::parse(slurp(mf.string()));
      for (auto &[k, val] : j.items()) expected[k] = val.get<std::string>();
      break;
    }
  }
  struct Row {
    int succ = 0, total = 0;
    double seconds = 0;
  };
  std::map<std::string, Row> rows;
  int worst = 0;
  std::vector<fs::path> files;
  for (auto &e : fs::recursive_directory_iterator(progs))
    if (e.is_regular_file() && e.path().extension() == ".ml")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (auto &f : files) {
    std::string rel = fs::relative(f, progs).string();
    std::string cat = fs::relative(f, progs).has_parent_path()
                          ? fs::relative(f, progs).begin()->string()
                          : "all";
    auto t0 = std::chrono::steady_clock::now();
    std::string verdict;
    std::ostringstream sink;
    int code = 2;
    try {
      code = run_one(rel, slurp(f.string()), o, sink, &verdict);
    } catch (const std::exception &ex) {
      std::cerr << rel << ": " << ex.what() << "\n";
    }
    double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    Row &r = rows[cat];
    r.total++;
    r.seconds += dt;
    bool succ;
    auto it = expected.find(rel);
    if (it != expected.end() && it->second != "DIVERGE-OK")
      succ = verdict == it->second;
    else
      succ = code != 2;
    if (succ) r.succ++;
    std::cout << rel << ": " << (verdict.empty() ? "ERROR" : verdict)
              << (it != expected.end()
                      ? (succ ? " (expected)" : " (MISMATCH, expected " +
                                                    it->second + ")")
                      : "")
              << "\n";
    if (!succ && code < 2) code = 2;
    worst = std::max(worst, code);
  }
  std::cout << "\ncategory    succ  total  seconds\n";
  for (auto &[cat, r] : rows) {
    printf("%-10s  %4d  %5d  %7.2f\n", cat.c_str(), r.succ, r.total,
           r.seconds);
  }
  return worst;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{
      "data flow refinement type inference: analyzes mini-ML programs "
      "against a pluggable relational refinement domain"};
  Options o;
  app.add_option("inputs", o.inputs, "program file(s) or a corpus directory")
      ->required();
  app.add_option("--domain", o.domain, "refinement domain: pred|oct|poly")
      ->check(CLI::IsMember({"pred", "oct", "poly"}));
  app.add_option("--quals", o.quals_file,
                 "qualifier templates file (pred domain)");
  app.add_option("--ctx", o.ctx, "context sensitivity k >= 0")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--widening", o.widening, "plain|thresholds")
      ->check(CLI::IsMember({"plain", "thresholds"}));
  app.add_option("--thresholds", o.thresholds,
                 "threshold templates file, or 'auto'");
  app.add_option("--depth-cap", o.depth_cap, "table nesting depth cap");
  app.add_option("--max-iters", o.max_iters, "widened iteration budget");
  app.add_option("--fuel", o.fuel, "concrete oracle iteration budget");
  app.add_flag("--dump-types", o.dump_types, "print the full type map");
  app.add_flag("--dump-concrete", o.dump_concrete,
               "print the concrete execution map as JSON");
  app.add_option("--format", o.format, "text|json")
      ->check(CLI::IsMember({"text", "json"}));
  app.add_flag("--oracle", o.oracle,
               "also run the concrete semantics and check membership");
  CLI11_PARSE(app, argc, argv);

  int worst = 0;
  try {
    for (auto &input : o.inputs) {
      if (fs::is_directory(input)) {
        worst = std::max(worst, run_batch(input, o));
      } else {
        worst = std::max(
            worst, run_one(input, slurp(input), o, std::cout, nullptr));
      }
    }
  } catch (const std::exception &ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return worst;
}
