#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>

#include "liftedq/bench.hpp"
#include "liftedq/errors.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/ljtkc.hpp"
#include "liftedq/parser.hpp"

using namespace liftedq;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// a model argument is either a file path or a generator spec like "gex:100"
Model load_model(const std::string& arg) {
  static const std::regex spec("(gex|gexp|gl|glp):([0-9]+)");
  std::smatch mm;
  if (std::regex_match(arg, mm, spec))
    return gen_model(family_from_string(mm[1]), std::stoi(mm[2]));
  return parse_model(slurp(arg));
}

std::vector<EvidenceItem> load_evidence(const std::string& path,
                                        const Model& m) {
  if (path.empty()) return {};
  return parse_evidence_file(slurp(path), m);
}

std::string term_name(const Prv& t) {
  std::string s = t.relation + "(";
  for (std::size_t i = 0; i < t.params.size(); ++i)
    s += (i ? "," : "") + t.params[i].name;
  return s + ")";
}

void print_marginals(const Query& q, const Distribution& d) {
  std::cout << std::setprecision(12);
  for (std::size_t v = 0; v < d.probs.size(); ++v)
    std::cout << term_name(q.terms[0]) << ',' << d.label(v) << ','
              << d.probs[v] << '\n';
}

int cmd_parse(const std::string& model_arg) {
  std::cout << print_model(load_model(model_arg));
  return 0;
}

int cmd_validate(const std::string& model_arg) {
  Model m = load_model(model_arg);
  std::cout << "domains " << m.domain_order.size() << ", relations "
            << m.relation_order.size() << ", parfactors "
            << m.parfactors.size() << ", gr_size " << gr_size(m) << "\n";
  return 0;
}

int cmd_ground(const std::string& model_arg, const std::string& evidence_arg) {
  Model m = load_model(model_arg);
  GroundFactorGraph g = ground_model(m, load_evidence(evidence_arg, m));
  std::size_t entries = 0;
  for (const auto& f : g.factors) entries += f.table.size();
  std::cout << "randvars " << g.var_names.size() << ", factors "
            << g.factors.size() << ", table entries " << entries << "\n";
  return 0;
}

int cmd_jtree(const std::string& model_arg, bool dump) {
  Model m = load_model(model_arg);
  FOJtree j = construct_fojtree(m);
  PropertyReport rep = verify_properties(j, m);
  std::cout << "parclusters " << j.nodes.size() << ", edges "
            << j.edges.size() << ", properties "
            << (rep.ok() ? "ok" : "violated") << "\n";
  if (dump) {
    for (const auto& node : j.nodes) {
      std::cout << "parcluster " << node.id << ":";
      for (const auto& rel : node.relations) std::cout << ' ' << rel;
      std::cout << " | " << node.local_model.size() << " parfactors\n";
    }
    for (const auto& [a, b] : j.edges) {
      std::cout << "separator " << a << "-" << b << ":";
      for (const auto& rel : j.separator(a, b)) std::cout << ' ' << rel;
      std::cout << "\n";
    }
  }
  return rep.ok() ? 0 : 3;
}

int cmd_compile(const std::string& model_arg, bool dump) {
  Model m = load_model(model_arg);
  WfomcProblem p = reduce_to_wfomc(m, m.parfactors);
  Circuit c = compile(p);
  validate_circuit(c, p);
  std::cout << "clauses " << p.clauses.size() << ", predicates "
            << p.preds.size() << ", circuit nodes " << c.size() << "\n";
  if (dump) std::cout << c.dump();
  return 0;
}

int cmd_query(const std::string& engine, const std::string& model_arg,
              const std::string& queries_arg, const std::string& evidence_arg,
              const std::string& justdiff) {
  Model m = load_model(model_arg);
  std::vector<Query> queries = parse_query_file(slurp(queries_arg), m);
  std::vector<EvidenceItem> evidence = load_evidence(evidence_arg, m);
  LveOptions lopts;
  if (justdiff == "ground") lopts.justdiff = JustDiff::Ground;

  if (engine == "jt") {
    auto ds = jt_answer(m, queries, evidence);
    for (std::size_t i = 0; i < queries.size(); ++i)
      print_marginals(queries[i], ds[i]);
  } else if (engine == "ve") {
    GroundFactorGraph g = ground_model(m, evidence);
    for (const auto& q : queries) print_marginals(q, ve_marginal(g, q));
  } else if (engine == "lve") {
    for (const auto& q : queries)
      print_marginals(q, lve_answer(m, q, evidence, lopts));
  } else if (engine == "ljt") {
    FOJtree j = construct_fojtree(m);
    if (!evidence.empty()) enter_evidence(j, evidence, lopts);
    pass_messages(j, lopts);
    for (const auto& q : queries) print_marginals(q, ljt_answer(j, q, lopts));
  } else if (engine == "fokc") {
    for (const auto& q : queries)
      print_marginals(q, fokc_answer(m, q, evidence));
  } else if (engine == "ljtkc") {
    PreparedModel prep = ljtkc_precompute(m, evidence, lopts);
    for (const auto& q : queries) print_marginals(q, ljtkc_answer(prep, q));
  } else {
    std::cerr << "unknown engine '" << engine << "'\n";
    return 1;
  }
  return 0;
}

int cmd_check(const std::string& model_arg, const std::string& queries_arg,
              const std::string& evidence_arg) {
  Model m = load_model(model_arg);
  std::vector<Query> queries = queries_arg.empty()
                                   ? bench_queries(m, 0)
                                   : parse_query_file(slurp(queries_arg), m);
  CrossCheck r = cross_engine_check(m, queries, load_evidence(evidence_arg, m));
  std::cout << "reference: " << r.reference << "\n"
            << std::setprecision(3) << std::scientific;
  for (const auto& [engine, diff] : r.max_diff)
    std::cout << engine << ": max deviation " << diff << "\n";
  for (const auto& [engine, what] : r.failures)
    std::cout << engine << ": failed (" << what << ")\n";
  bool ok = r.failures.empty() && r.overall < 1e-9;
  std::cout << (ok ? "agreement within 1e-9\n" : "DISAGREEMENT\n");
  return ok ? 0 : 3;
}

int cmd_bench(const BenchConfig& cfg, const std::string& output,
              const std::string& plot) {
  std::vector<BenchRow> rows = run_bench(cfg);
  std::string csv = bench_csv(rows);
  if (output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(output);
    if (!out) throw ValidationError("cannot write '" + output + "'");
    out << csv;
  }
  if (!plot.empty()) {
    std::ofstream out(plot);
    if (!out) throw ValidationError("cannot write '" + plot + "'");
    out << bench_plot(rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lifted probabilistic inference over parfactor models"};
  app.require_subcommand(1);

  std::string model_arg, queries_arg, evidence_arg, engine = "ljtkc";
  std::string justdiff = "count", output, plot;
  bool dump = false;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("model", model_arg,
                    "model file, or generator spec like gex:100")
        ->required();
  };
  add_model(app.add_subcommand("parse", "parse and reprint a model"));
  add_model(app.add_subcommand("validate", "parse and print model statistics"));
  auto* sc_ground =
      app.add_subcommand("ground", "ground the model, print graph statistics");
  add_model(sc_ground);
  sc_ground->add_option("--evidence", evidence_arg, "evidence file");
  auto* sc_jtree =
      app.add_subcommand("jtree", "build the first-order junction tree");
  add_model(sc_jtree);
  sc_jtree->add_flag("--dump", dump, "print parclusters and separators");
  auto* sc_compile =
      app.add_subcommand("compile", "compile the model to a counting circuit");
  add_model(sc_compile);
  sc_compile->add_flag("--dump", dump, "print the circuit");

  auto* sc_query = app.add_subcommand("query", "answer marginal queries");
  sc_query->add_option("--engine", engine, "jt|ve|lve|ljt|fokc|ljtkc")
      ->required();
  sc_query->add_option("--model", model_arg, "model file or generator spec")
      ->required();
  sc_query->add_option("--queries", queries_arg, "query file")->required();
  sc_query->add_option("--evidence", evidence_arg, "evidence file");
  sc_query->add_option("--lve-justdiff", justdiff,
                       "pairwise-difference policy: ground|count");

  auto* sc_check =
      app.add_subcommand("check", "cross-check all engines on one model");
  sc_check->add_option("--model", model_arg, "model file or generator spec")
      ->required();
  sc_check->add_option("--queries", queries_arg,
                       "query file (default: one per relation)");
  sc_check->add_option("--evidence", evidence_arg, "evidence file");

  BenchConfig cfg;
  std::string family = "gex";
  auto* sc_bench = app.add_subcommand("bench", "run the scaling benchmark");
  sc_bench->add_option("--family", family, "gex|gexp|gl|glp");
  sc_bench->add_option("--sizes", cfg.sizes, "domain sizes")
      ->required()
      ->delimiter(',');
  sc_bench->add_option("--engines", cfg.engines, "engines to run")
      ->delimiter(',');
  sc_bench->add_option("--reps", cfg.reps, "repetitions per cell");
  sc_bench->add_option("--seed", cfg.seed, "query grounding seed");
  sc_bench->add_option("--output", output, "CSV output path (default stdout)");
  sc_bench->add_option("--plot", plot, "gnuplot data output path");
  sc_bench->add_flag("--concurrent", cfg.concurrent,
                     "run benchmark cells in parallel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("parse")) return cmd_parse(model_arg);
    if (app.got_subcommand("validate")) return cmd_validate(model_arg);
    if (app.got_subcommand("ground")) return cmd_ground(model_arg, evidence_arg);
    if (app.got_subcommand("jtree")) return cmd_jtree(model_arg, dump);
    if (app.got_subcommand("compile")) return cmd_compile(model_arg, dump);
    if (app.got_subcommand("query"))
      return cmd_query(engine, model_arg, queries_arg, evidence_arg, justdiff);
    if (app.got_subcommand("check"))
      return cmd_check(model_arg, queries_arg, evidence_arg);
    if (app.got_subcommand("bench")) {
      cfg.family = family_from_string(family);
      return cmd_bench(cfg, output, plot);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const GuardError& e) {
    std::cerr << "guard tripped: " << e.what() << "\n";
    return 4;
  } catch (const InferenceError& e) {
    std::cerr << "inference error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
