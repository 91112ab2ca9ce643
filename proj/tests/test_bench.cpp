#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "liftedq/bench.hpp"
#include "liftedq/errors.hpp"
#include "liftedq/parser.hpp"

using namespace liftedq;

TEST_CASE("query grounding is seeded and in-range") {
  Model m = gen_model(Family::Gex, 5);
  auto a = bench_queries(m, 7);
  auto b = bench_queries(m, 7);
  auto c = bench_queries(m, 8);
  REQUIRE(a.size() == 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].terms[0].relation == m.relation_order[i]);
    CHECK(a[i].terms[0].str() == b[i].terms[0].str());
    if (a[i].terms[0].str() != c[i].terms[0].str()) differs = true;
  }
  CHECK(differs);
  // the friendship query never relates a person to themselves
  const auto& f = a[1].terms[0];
  CHECK(f.params[0].name != f.params[1].name);
}

TEST_CASE("small cells verify against the oracle, large jt cells guard") {
  BenchConfig cfg;
  cfg.sizes = {2};
  cfg.reps = 2;
  auto rows = run_bench(cfg);
  CHECK(rows.size() == 6 * 4);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.verified);
    CHECK(r.gr_size == 12);
  }

  cfg.sizes = {1000};
  cfg.engines = {"jt"};
  cfg.reps = 1;
  auto big = run_bench(cfg);
  REQUIRE(big.size() == 4);
  for (const auto& r : big) CHECK(r.status == "guard");
}

TEST_CASE("counters are deterministic for a fixed seed") {
  BenchConfig cfg;
  cfg.sizes = {3};
  cfg.engines = {"lve", "ljtkc"};
  cfg.reps = 1;
  cfg.seed = 42;
  auto a = run_bench(cfg);
  auto b = run_bench(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].query == b[i].query);
    CHECK(a[i].lve_ops == b[i].lve_ops);
    CHECK(a[i].circuit_nodes == b[i].circuit_nodes);
    CHECK(a[i].eval_ops == b[i].eval_ops);
  }
}

TEST_CASE("csv and plot output carry every row") {
  BenchConfig cfg;
  cfg.sizes = {2, 3};
  cfg.engines = {"ljtkc"};
  cfg.reps = 1;
  auto rows = run_bench(cfg);
  std::string csv = bench_csv(rows);
  CHECK(csv.find("family,n,gr_size,engine,query,median_ms,mean_ms,lve_ops,"
                 "circuit_nodes,eval_ops,status,verified") == 0);
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == rows.size() + 1);
  std::string plot = bench_plot(rows);
  CHECK(plot.find("# ljtkc") != std::string::npos);
}

TEST_CASE("concurrent cells produce the same counters") {
  BenchConfig cfg;
  cfg.sizes = {2, 3};
  cfg.engines = {"ljtkc", "lve"};
  cfg.reps = 1;
  auto seq = run_bench(cfg);
  cfg.concurrent = true;
  auto par = run_bench(cfg);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].query == par[i].query);
    CHECK(seq[i].lve_ops == par[i].lve_ops);
    CHECK(seq[i].eval_ops == par[i].eval_ops);
  }
}

TEST_CASE("invalid configs are rejected") {
  BenchConfig cfg;
  CHECK_THROWS_AS(run_bench(cfg), ValidationError);
  cfg.sizes = {0};
  CHECK_THROWS_AS(run_bench(cfg), ValidationError);
  cfg.sizes = {2};
  cfg.reps = 0;
  CHECK_THROWS_AS(run_bench(cfg), ValidationError);
}

TEST_CASE("evidence files parse labels against the model") {
  Model m = gen_model(Family::Gex, 3);
  auto ev = parse_evidence_file(
      "// observations\nSmokes(p2)=false\nFriends(p1,p2)=true\n", m);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].prv.relation == "Smokes");
  CHECK(ev[0].value == 1);
  CHECK(ev[1].prv.relation == "Friends");
  CHECK(ev[1].value == 0);
  CHECK_THROWS_AS(parse_evidence_file("Smokes(p2)=maybe\n", m),
                  ValidationError);
  CHECK_THROWS_AS(parse_evidence_file("Smokes(p2)\n", m), ParseError);
}
