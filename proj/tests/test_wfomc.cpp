#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "liftedq/errors.hpp"
#include "liftedq/generators.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/wfomc.hpp"

using namespace liftedq;

namespace {

WfomcProblem base(int n, const std::string& dom = "d") {
  WfomcProblem p;
  DomainSpec d;
  d.name = dom;
  for (int i = 1; i <= n; ++i) d.constants.push_back("e" + std::to_string(i));
  p.domains[dom] = d;
  p.domain_order.push_back(dom);
  return p;
}

void unary(WfomcProblem& p, const std::string& pred, double wt, double wf,
           const std::string& dom = "d") {
  p.preds[pred] = {dom};
  p.w_true[pred] = Weight::from_value(wt);
  p.w_false[pred] = Weight::from_value(wf);
}

void binary(WfomcProblem& p, const std::string& pred, double wt, double wf,
            const std::string& dom = "d") {
  p.preds[pred] = {dom, dom};
  p.w_true[pred] = Weight::from_value(wt);
  p.w_false[pred] = Weight::from_value(wf);
}

WLiteral lit(bool pos, const std::string& pred,
             const std::vector<Term>& params) {
  WLiteral l;
  l.positive = pos;
  l.pred = pred;
  l.params = params;
  return l;
}

WClause clause(Constraint c, std::vector<WLiteral> lits) {
  WClause cl;
  cl.constraint = std::move(c);
  cl.literals = std::move(lits);
  return cl;
}

Constraint over(std::vector<std::string> lvs, std::vector<std::string> doms) {
  return Constraint::top(std::move(lvs), std::move(doms));
}

// brute count, compile, validate, evaluate, compare
Circuit check(const WfomcProblem& p, double tol = 1e-9) {
  Weight ref = wfomc_brute(p);
  Circuit c = compile(p);
  validate_circuit(c, p);
  Weight got = wfomc_eval(c, p);
  if (ref.is_zero()) {
    CHECK(got.is_zero());
  } else {
    REQUIRE(!got.is_zero());
    CHECK(std::abs(got.log() - ref.log()) < tol);
  }
  return c;
}

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

}  // namespace

TEST_CASE("free predicates multiply out") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  check(p);  // (2+3)^3
  Circuit c = compile(p);
  CHECK(std::abs(wfomc_eval(c, p).log() - 3 * std::log(5.0)) < 1e-9);
}

TEST_CASE("positive unit clause") {
  auto p = base(4);
  unary(p, "S", 2.0, 3.0);
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(true, "S", {logvar("X")})}));
  Circuit c = check(p);
  CHECK(std::abs(wfomc_eval(c, p).log() - 4 * std::log(2.0)) < 1e-9);
}

TEST_CASE("negative unit clause") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(false, "S", {logvar("X")})}));
  check(p);
}

TEST_CASE("disjunction of two unary predicates") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  unary(p, "A", 1.5, 0.5);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(true, "S", {logvar("X")}),
                              lit(true, "A", {logvar("X")})}));
  check(p);
}

TEST_CASE("implication chain over one variable") {
  auto p = base(4);
  unary(p, "S", 2.0, 3.0);
  unary(p, "A", 1.5, 0.5);
  unary(p, "B", 1.1, 0.9);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(false, "S", {logvar("X")}),
                              lit(true, "A", {logvar("X")})}));
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(false, "A", {logvar("X")}),
                              lit(true, "B", {logvar("X")})}));
  check(p);
}

TEST_CASE("at most one false smoker") {
  auto p = base(3);
  unary(p, "S", 1.0, 1.0);
  Constraint c = over({"X", "Y"}, {"d", "d"});
  c.diffs.push_back({0, 1});
  p.clauses.push_back(clause(c, {lit(true, "S", {logvar("X")}),
                                 lit(true, "S", {logvar("Y")})}));
  Circuit cc = check(p);
  CHECK(std::abs(wfomc_eval(cc, p).log() - std::log(4.0)) < 1e-9);
  CHECK(cc.dump().find("countdisj") != std::string::npos);
}

TEST_CASE("at most one false, weighted") {
  auto p = base(4);
  unary(p, "S", 2.0, 0.7);
  Constraint c = over({"X", "Y"}, {"d", "d"});
  c.diffs.push_back({0, 1});
  p.clauses.push_back(clause(c, {lit(true, "S", {logvar("X")}),
                                 lit(true, "S", {logvar("Y")})}));
  check(p);
}

TEST_CASE("free binary predicate") {
  auto p = base(2);
  binary(p, "F", 2.0, 1.0);
  check(p);  // (2+1)^4
}

TEST_CASE("binary forced by a unary guard") {
  auto p = base(3);
  binary(p, "F", 2.0, 1.0);
  unary(p, "S", 1.2, 0.8);
  p.clauses.push_back(clause(over({"X", "Y"}, {"d", "d"}),
                             {lit(true, "F", {logvar("X"), logvar("Y")}),
                              lit(true, "S", {logvar("X")})}));
  check(p);
}

TEST_CASE("binary with both endpoints guarded") {
  auto p = base(3);
  binary(p, "F", 2.0, 1.0);
  unary(p, "S", 1.2, 0.8);
  Constraint c = over({"X", "Y"}, {"d", "d"});
  c.diffs.push_back({0, 1});
  p.clauses.push_back(clause(c, {lit(false, "F", {logvar("X"), logvar("Y")}),
                                 lit(true, "S", {logvar("X")}),
                                 lit(true, "S", {logvar("Y")})}));
  check(p);
}

TEST_CASE("symmetry clause needs constant naming") {
  auto p = base(3);
  binary(p, "F", 2.0, 1.0);
  p.clauses.push_back(clause(over({"X", "Y"}, {"d", "d"}),
                             {lit(false, "F", {logvar("X"), logvar("Y")}),
                              lit(true, "F", {logvar("Y"), logvar("X")})}));
  check(p);
}

TEST_CASE("diagonal atoms") {
  auto p = base(3);
  binary(p, "F", 2.0, 1.0);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(true, "F", {logvar("X"), logvar("X")})}));
  check(p);
}

TEST_CASE("observation on one constant") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  unary(p, "A", 1.5, 0.5);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(true, "S", {logvar("X")}),
                              lit(true, "A", {logvar("X")})}));
  Prv t;
  t.relation = "S";
  t.params = {constant("e2")};
  add_observation(p, t, 1);
  check(p);
}

TEST_CASE("constant inside a clause") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  unary(p, "A", 1.5, 0.5);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(true, "S", {constant("e1")}),
                              lit(true, "A", {logvar("X")})}));
  check(p);
}

TEST_CASE("restricted allowed set") {
  auto p = base(4);
  unary(p, "S", 2.0, 3.0);
  Constraint c = over({"X"}, {"d"});
  c.allowed[0].full = false;
  c.allowed[0].ids = {0, 2};
  p.clauses.push_back(clause(c, {lit(true, "S", {logvar("X")})}));
  check(p);
}

TEST_CASE("cofinite allowed set stays lifted") {
  auto p = base(5);
  unary(p, "S", 2.0, 3.0);
  Constraint c = over({"X"}, {"d"});
  c.allowed[0].full = false;
  c.allowed[0].ids = {1, 2, 3, 4};
  p.clauses.push_back(clause(c, {lit(true, "S", {logvar("X")})}));
  Circuit cc = check(p);
  // one named constant, independent of the domain size
  int singles = 0;
  for (const auto& cell : cc.cells)
    if (cell.kind == Cell::Singleton) ++singles;
  CHECK(singles == 1);
}

TEST_CASE("count-weight table alone") {
  auto p = base(4);
  unary(p, "S", 1.3, 0.6);
  WfomcProblem::HistFactor h;
  h.pred = "S";
  h.constraint = over({"Y"}, {"d"});
  for (int k = 0; k <= 4; ++k)
    h.table.push_back(Weight::from_value(1.0 + 0.5 * k));
  p.hist_factors.push_back(h);
  check(p);
}

TEST_CASE("count-weight table with a forcing clause") {
  auto p = base(3);
  unary(p, "S", 1.3, 0.6);
  WfomcProblem::HistFactor h;
  h.pred = "S";
  h.constraint = over({"Y"}, {"d"});
  for (int k = 0; k <= 3; ++k)
    h.table.push_back(Weight::from_value(2.0 - 0.4 * k));
  p.hist_factors.push_back(h);
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(true, "S", {logvar("X")})}));
  Circuit c = check(p);
  CHECK(std::abs(wfomc_eval(c, p).log() -
                 (std::log(0.8) + 3 * std::log(1.3))) < 1e-9);
}

TEST_CASE("count-weight table interacting with another predicate") {
  auto p = base(3);
  unary(p, "S", 1.3, 0.6);
  unary(p, "A", 1.1, 0.9);
  WfomcProblem::HistFactor h;
  h.pred = "S";
  h.constraint = over({"Y"}, {"d"});
  for (int k = 0; k <= 3; ++k)
    h.table.push_back(Weight::from_value(1.0 + 0.25 * k * k));
  p.hist_factors.push_back(h);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(false, "S", {logvar("X")}),
                              lit(true, "A", {logvar("X")})}));
  check(p);
}

TEST_CASE("count-weight table over a subset") {
  auto p = base(4);
  unary(p, "S", 1.3, 0.6);
  WfomcProblem::HistFactor h;
  h.pred = "S";
  h.constraint = over({"Y"}, {"d"});
  h.constraint.allowed[0].full = false;
  h.constraint.allowed[0].ids = {1, 2, 3};
  for (int k = 0; k <= 3; ++k)
    h.table.push_back(Weight::from_value(1.5 - 0.3 * k));
  p.hist_factors.push_back(h);
  check(p);
}

TEST_CASE("two count-weight tables on one predicate") {
  auto p = base(3);
  unary(p, "S", 1.3, 0.6);
  for (int rep = 0; rep < 2; ++rep) {
    WfomcProblem::HistFactor h;
    h.pred = "S";
    h.constraint = over({"Y"}, {"d"});
    for (int k = 0; k <= 3; ++k)
      h.table.push_back(Weight::from_value(1.0 + 0.2 * (k + rep)));
    p.hist_factors.push_back(h);
  }
  check(p);
}

TEST_CASE("nullary predicate") {
  auto p = base(2);
  p.preds["P"] = {};
  p.w_true["P"] = Weight::from_value(2.5);
  p.w_false["P"] = Weight::from_value(1.0);
  unary(p, "S", 1.2, 0.8);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(false, "P", {}),
                              lit(true, "S", {logvar("X")})}));
  check(p);
}

TEST_CASE("independent components over two domains") {
  auto p = base(3);
  DomainSpec d2;
  d2.name = "d2";
  d2.constants = {"u1", "u2"};
  p.domains["d2"] = d2;
  p.domain_order.push_back("d2");
  unary(p, "S", 2.0, 3.0);
  unary(p, "B", 1.5, 0.5, "d2");
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(true, "S", {logvar("X")})}));
  p.clauses.push_back(clause(over({"Y"}, {"d2"}), {lit(false, "B", {logvar("Y")})}));
  check(p);
}

TEST_CASE("contradictory units") {
  auto p = base(2);
  unary(p, "S", 2.0, 3.0);
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(true, "S", {logvar("X")})}));
  p.clauses.push_back(clause(over({"X"}, {"d"}), {lit(false, "S", {logvar("X")})}));
  Weight ref = wfomc_brute(p);
  CHECK(ref.is_zero());
  Circuit c = compile(p);
  CHECK(wfomc_eval(c, p).is_zero());
}

TEST_CASE("cross binary constraint between two unaries") {
  auto p = base(3);
  unary(p, "S", 1.2, 0.8);
  unary(p, "A", 1.5, 0.5);
  binary(p, "F", 2.0, 1.0);
  Constraint c = over({"X", "Y"}, {"d", "d"});
  c.diffs.push_back({0, 1});
  p.clauses.push_back(clause(c, {lit(false, "F", {logvar("X"), logvar("Y")}),
                                 lit(false, "S", {logvar("X")}),
                                 lit(true, "A", {logvar("Y")})}));
  check(p);
}

TEST_CASE("arity three is rejected") {
  auto p = base(2);
  p.preds["T"] = {"d", "d", "d"};
  CHECK_THROWS_AS(compile(p), GuardError);
}

TEST_CASE("node count does not depend on the domain size") {
  auto build = [](int n) {
    auto p = base(n);
    unary(p, "S", 2.0, 0.7);
    unary(p, "A", 1.5, 0.5);
    binary(p, "F", 2.0, 1.0);
    Constraint c = over({"X", "Y"}, {"d", "d"});
    c.diffs.push_back({0, 1});
    p.clauses.push_back(clause(c, {lit(true, "S", {logvar("X")}),
                                   lit(true, "S", {logvar("Y")})}));
    p.clauses.push_back(clause(over({"X", "Y"}, {"d", "d"}),
                               {lit(true, "F", {logvar("X"), logvar("Y")}),
                                lit(true, "S", {logvar("X")})}));
    p.clauses.push_back(clause(over({"X"}, {"d"}),
                               {lit(false, "S", {logvar("X")}),
                                lit(true, "A", {logvar("X")})}));
    return p;
  };
  auto p3 = build(3);
  Circuit c3 = check(p3);
  auto p60 = build(60);
  Circuit c60 = compile(p60);
  validate_circuit(c60, p60);
  CHECK(c3.size() == c60.size());
  CHECK(c3.cells.size() == c60.cells.size());
}

TEST_CASE("reduction of the example model matches its partition sum") {
  for (int n : {2, 3}) {
    Model m = gen_model(Family::Gex, n);
    WfomcProblem p = reduce_to_wfomc(m, m.parfactors);
    Weight z = partition_sum(ground_model(m, {}));
    Circuit c = compile(p);
    validate_circuit(c, p);
    CHECK(std::abs(wfomc_eval(c, p).log() - z.log()) < 1e-9);
  }
}

TEST_CASE("reduction with evidence matches the conditioned partition sum") {
  Model m = gen_model(Family::Gex, 3);
  auto ev = gex_example_evidence(m);
  WfomcProblem p = reduce_to_wfomc(m, m.parfactors, ev);
  Weight z = partition_sum(ground_model(m, ev));
  Circuit c = compile(p);
  validate_circuit(c, p);
  CHECK(std::abs(wfomc_eval(c, p).log() - z.log()) < 1e-9);
}

TEST_CASE("reduction node count does not depend on the domain size") {
  Model m4 = gen_model(Family::Gex, 4);
  Model m9 = gen_model(Family::Gex, 9);
  Circuit c4 = compile(reduce_to_wfomc(m4, m4.parfactors));
  Circuit c9 = compile(reduce_to_wfomc(m9, m9.parfactors));
  CHECK(c4.size() == c9.size());
}

TEST_CASE("query answers match the oracle") {
  Model m = gen_model(Family::Gex, 2);
  auto ev = gex_example_evidence(m);
  for (const auto& rel : m.relation_order) {
    std::vector<std::string> consts;
    for (const auto& d : m.relation(rel).param_domains)
      consts.push_back(m.domain(d).constants[0]);
    if (consts.size() == 2) consts[1] = m.domain("person").constants[1];
    Query q = qterm(m, rel, consts);
    Distribution ref = brute_marginal(ground_model(m, {}), q);
    Distribution got = fokc_answer(m, q);
    CHECK(got.max_abs_diff(ref) < 1e-9);
    Distribution refe = brute_marginal(ground_model(m, ev), q);
    Distribution gote = fokc_answer(m, q, ev);
    CHECK(gote.max_abs_diff(refe) < 1e-9);
  }
}

TEST_CASE("numerators sum to the denominator") {
  Model m = gen_model(Family::Gex, 3);
  auto ev = gex_example_evidence(m);
  WfomcProblem den = reduce_to_wfomc(m, m.parfactors, ev);
  Circuit cd = compile(den);
  Weight z = wfomc_eval(cd, den);
  Prv t;
  t.relation = "Smokes";
  t.params = {constant(m.domain("person").constants[0])};
  Weight total = Weight::zero();
  for (int v = 0; v < 2; ++v) {
    WfomcProblem num = den;
    add_observation(num, t, v);
    Circuit cn = compile(num);
    validate_circuit(cn, num);
    total += wfomc_eval(cn, num);
  }
  CHECK(std::abs(total.log() - z.log()) < 1e-9);
}

TEST_CASE("validator flags a broken circuit") {
  auto p = base(3);
  unary(p, "S", 2.0, 3.0);
  unary(p, "A", 1.5, 0.5);
  p.clauses.push_back(clause(over({"X"}, {"d"}),
                             {lit(true, "S", {logvar("X")}),
                              lit(true, "A", {logvar("X")})}));
  Circuit c = compile(p);
  validate_circuit(c, p);
  // drop a leaf: some atoms are no longer accounted for
  Circuit broken = c;
  for (auto& n : broken.nodes)
    if (n.kind == CNode::And && n.children.size() > 1) {
      n.children.pop_back();
      break;
    }
  CHECK_THROWS_AS(validate_circuit(broken, p), InferenceError);
}
