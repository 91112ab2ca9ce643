#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liftedq/errors.hpp"
#include "liftedq/generators.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/ljtkc.hpp"

using namespace liftedq;

namespace {

Weight partition_sum(const GroundFactorGraph& g) {
  auto rad = g.radices();
  std::size_t states = table_size(rad);
  Weight z = Weight::zero();
  std::vector<int> t, sub;
  for (std::size_t s = 0; s < states; ++s) {
    index_to_tuple(rad, s, t);
    Weight w = Weight::one();
    for (const auto& f : g.factors) {
      std::vector<int> frad;
      sub.clear();
      for (int v : f.vars) {
        frad.push_back(rad[std::size_t(v)]);
        sub.push_back(t[std::size_t(v)]);
      }
      w *= f.table[tuple_to_index(frad, sub)];
    }
    z += w;
  }
  return z;
}

Query qterm(const Model& m, const std::string& rel,
            const std::vector<std::string>& consts) {
  Prv p;
  p.relation = rel;
  for (const auto& c : consts) p.params.push_back(constant(c));
  p.range = m.relation(rel).range;
  Query q;
  q.terms.push_back(p);
  return q;
}

EvidenceItem obs(const Model& m, const std::string& rel,
                 const std::vector<std::string>& consts, int value) {
  EvidenceItem e;
  e.prv.relation = rel;
  for (const auto& c : consts) e.prv.params.push_back(constant(c));
  e.prv.range = m.relation(rel).range;
  e.value = value;
  return e;
}

// one single-ground-term query per relation
std::vector<Query> per_relation_queries(const Model& m) {
  std::vector<Query> qs;
  for (const auto& rel : m.relation_order) {
    const auto& sig = m.relations.at(rel);
    std::vector<std::string> consts;
    for (const auto& dom : sig.param_domains) {
      const auto& cs = m.domains.at(dom).constants;
      consts.push_back(consts.empty() ? cs.front() : cs.back());
    }
    qs.push_back(qterm(m, rel, consts));
  }
  return qs;
}

std::int64_t total_nodes(const PreparedModel& prep) {
  std::int64_t total = 0;
  for (const auto& u : prep.units) total += std::int64_t(u.circuit.size());
  return total;
}

}  // namespace

TEST_CASE("every parcluster count equals the partition function") {
  for (Family f : {Family::Gex, Family::Gexp}) {
    for (int n : {2, 3}) {
      Model m = gen_model(f, n);
      Weight z = partition_sum(ground_model(m, {}));
      PreparedModel prep = ljtkc_precompute(m);
      REQUIRE(!prep.units.empty());
      for (const auto& u : prep.units) {
        REQUIRE(u.compiled);
        CHECK(std::abs(u.denominator.log() - z.log()) < 1e-9);
      }
    }
  }
}

TEST_CASE("answers match brute marginals") {
  for (Family f : {Family::Gex, Family::Gexp}) {
    Model m = gen_model(f, 3);
    auto queries = per_relation_queries(m);
    for (const auto& evidence :
         {std::vector<EvidenceItem>{}, gex_example_evidence(m)}) {
      GroundFactorGraph g = ground_model(m, evidence);
      PreparedModel prep = ljtkc_precompute(m, evidence);
      for (const auto& q : queries) {
        Distribution ref = brute_marginal(g, q);
        Distribution got = ljtkc_answer(prep, q);
        CHECK(got.max_abs_diff(ref) < 1e-9);
      }
    }
  }
}

TEST_CASE("observed terms get a point distribution") {
  Model m = gen_model(Family::Gex, 3);
  auto evidence = {obs(m, "Smokes", {"p2"}, 1)};
  PreparedModel prep = ljtkc_precompute(m, evidence);
  Distribution d = ljtkc_answer(prep, qterm(m, "Smokes", {"p2"}));
  CHECK(d.probs[0] == 0.0);
  CHECK(d.probs[1] == 1.0);
}

TEST_CASE("one denominator compile per parcluster") {
  Model m = gen_model(Family::Gex, 3);
  PreparedModel prep = ljtkc_precompute(m, {}, {}, {}, /*on_demand=*/true);
  for (const auto& u : prep.units) CHECK_FALSE(u.compiled);

  // repeated queries at one parcluster compile its denominator exactly once
  Query q = qterm(m, "Smokes", {"p1"});
  ljtkc_answer(prep, q);
  int compiled = 0;
  for (const auto& u : prep.units) compiled += u.compiled ? 1 : 0;
  CHECK(compiled == 1);
  std::int64_t denom_ops = prep.precompute_stats.ops;
  CHECK(denom_ops > 0);
  ljtkc_answer(prep, qterm(m, "Smokes", {"p2"}));
  ljtkc_answer(prep, q);
  CHECK(prep.precompute_stats.ops == denom_ops);
  CHECK(prep.denominator_reuses == 3);
}

TEST_CASE("parcluster choice does not change the answer") {
  Model m = gen_model(Family::Gex, 3);
  auto evidence = gex_example_evidence(m);
  PreparedModel prep = ljtkc_precompute(m, evidence);
  Query q = qterm(m, "Smokes", {"p1"});
  std::vector<int> covering;
  for (const auto& node : prep.tree.nodes)
    if (node.covers("Smokes")) covering.push_back(node.id);
  REQUIRE(covering.size() > 1);
  Distribution first = ljtkc_answer(prep, q, covering[0]);
  for (std::size_t i = 1; i < covering.size(); ++i)
    CHECK(ljtkc_answer(prep, q, covering[i]).max_abs_diff(first) < 1e-9);

  CHECK_THROWS_AS(ljtkc_answer(prep, q, 999), InferenceError);
}

TEST_CASE("numerators sum to the denominator") {
  Model m = gen_model(Family::Gex, 3);
  auto evidence = gex_example_evidence(m);
  PreparedModel prep = ljtkc_precompute(m, evidence);
  Prv term = qterm(m, "Smokes", {"p1"}).terms[0];
  for (const auto& u : prep.units) {
    if (!prep.tree.nodes[std::size_t(u.parcluster)].covers("Smokes")) continue;
    Weight total = Weight::zero();
    for (int v = 0; v < int(term.range.size()); ++v) {
      WfomcProblem num = u.problem;
      add_observation(num, term, v);
      total += wfomc_eval(compile(num), num);
    }
    CHECK(std::abs(total.log() - u.denominator.log()) < 1e-9);
  }
}

TEST_CASE("counters stay constant as the domain grows") {
  std::map<std::string, std::int64_t> msg_counts;
  std::int64_t nodes = 0;
  std::vector<std::int64_t> denom_ops, query_ops;
  bool first = true;
  for (int n : {10, 100, 1000}) {
    Model m = gen_model(Family::Gex, n);
    PreparedModel prep = ljtkc_precompute(m);
    ljtkc_answer(prep, qterm(m, "Smokes", {"p1"}));
    denom_ops.push_back(prep.precompute_stats.ops);
    query_ops.push_back(prep.query_stats.ops);
    if (first) {
      msg_counts = prep.tree.message_trace.counts();
      nodes = total_nodes(prep);
      first = false;
      CHECK(!msg_counts.empty());
      CHECK(nodes > 0);
    } else {
      CHECK(prep.tree.message_trace.counts() == msg_counts);
      CHECK(total_nodes(prep) == nodes);
    }
  }
  // evaluation cost grows at most linearly in the domain size (count sums)
  CHECK(denom_ops[2] <= 15 * denom_ops[1]);
  CHECK(query_ops[2] <= 15 * query_ops[1]);
}

TEST_CASE("message passing never grounds a logvar") {
  Model m = gen_model(Family::Gex, 6);
  PreparedModel prep = ljtkc_precompute(m);
  CHECK_FALSE(prep.tree.message_trace.mentions("ground_logvar"));

  // the grounding fallback in variable elimination does, and scales with n
  LveOptions gopts;
  gopts.justdiff = JustDiff::Ground;
  LveTrace t6, t9;
  lve_answer(m, qterm(m, "Smokes", {"p1"}), {}, gopts, &t6);
  CHECK(t6.mentions("ground_logvar"));
  Model m9 = gen_model(Family::Gex, 9);
  lve_answer(m9, qterm(m9, "Smokes", {"p1"}), {}, gopts, &t9);
  CHECK(t9.counts().at("ground_logvar") >= t6.counts().at("ground_logvar"));
}

TEST_CASE("all engines agree on the ground reference") {
  Model m = gen_model(Family::Gex, 3);
  auto queries = per_relation_queries(m);
  for (const auto& evidence :
       {std::vector<EvidenceItem>{}, gex_example_evidence(m)}) {
    CrossCheck r = cross_engine_check(m, queries, evidence);
    CHECK(r.reference == "brute");
    CHECK(r.failures.empty());
    CHECK(r.max_diff.size() == 6);
    CHECK(r.overall < 1e-9);
  }
}

TEST_CASE("impossible evidence raises a zero probability error") {
  // R is forced true by its only factor; observing it false kills every state
  Model m;
  DomainSpec d;
  d.name = "d";
  d.constants = {"c1", "c2"};
  m.domains["d"] = d;
  m.domain_order.push_back("d");
  RelationSig sig;
  sig.param_domains = {"d"};
  sig.range = {"true", "false"};
  m.relations["R"] = sig;
  m.relation_order.push_back("R");
  Parfactor g;
  g.name = "g";
  g.constraint = Constraint::top({"X"}, {"d"});
  Prv p;
  p.relation = "R";
  p.params = {logvar("X")};
  p.range = sig.range;
  g.args.push_back(Arg{p, ""});
  g.table = {Weight::from_value(2.0), Weight::zero()};
  m.parfactors.push_back(g);

  CHECK_THROWS_AS(ljtkc_precompute(m, {obs(m, "R", {"c1"}, 1)}),
                  ZeroProbabilityError);
}
