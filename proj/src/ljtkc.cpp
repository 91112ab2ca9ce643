#include "liftedq/ljtkc.hpp"

#include <cmath>
#include <functional>

#include "liftedq/errors.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/lve.hpp"

namespace liftedq {

namespace {

void ensure_compiled(PreparedModel& prep, ParclusterKc& u) {
  if (u.compiled) return;
  u.circuit = compile(u.problem, prep.copts);
  u.denominator = wfomc_eval(u.circuit, u.problem, &prep.precompute_stats);
  u.compiled = true;
  if (u.denominator.is_zero())
    throw ZeroProbabilityError("evidence admits no state at parcluster " +
                               std::to_string(u.parcluster));
}

}  // namespace

PreparedModel ljtkc_precompute(const Model& m,
                               const std::vector<EvidenceItem>& evidence,
                               const LveOptions& lve_opts,
                               const CompileOptions& copts, bool on_demand) {
  PreparedModel prep;
  prep.copts = copts;
  prep.tree = construct_fojtree(m);
  if (!evidence.empty()) enter_evidence(prep.tree, evidence, lve_opts);
  pass_messages(prep.tree, lve_opts);

  for (const auto& node : prep.tree.nodes) {
    ParclusterKc u;
    u.parcluster = node.id;
    std::vector<Parfactor> pfs = node.local_model;
    for (const auto& [from, msg] : node.inbox)
      for (const auto& g : msg) pfs.push_back(g);
    u.problem = reduce_to_wfomc(prep.tree.model, pfs);
    // covered relations without a factor are still queryable free atoms
    for (const auto& rel : node.relations) {
      if (u.problem.preds.count(rel)) continue;
      const RelationSig& sig = m.relation(rel);
      if (sig.range.size() == 2) u.problem.preds[rel] = sig.param_domains;
    }
    prep.units.push_back(std::move(u));
    if (!on_demand) ensure_compiled(prep, prep.units.back());
  }
  return prep;
}

Distribution ljtkc_answer(PreparedModel& prep, const Query& q,
                          int force_parcluster) {
  if (q.terms.size() != 1)
    throw InferenceError(
        "conjunctive queries are not supported; ask one term at a time");
  const Prv& term = q.terms[0];
  if (!term.is_ground()) throw InferenceError("query term must be ground");
  const Model& m = prep.tree.model;
  auto range = term.range.empty() ? m.relation(term.relation).range
                                  : term.range;

  int value = 0;
  if (evidence_covers(m, prep.tree.evidence, term, &value)) {
    Distribution d;
    d.ranges = {range};
    d.probs.assign(range.size(), 0.0);
    d.probs[std::size_t(value)] = 1.0;
    return d;
  }

  int pick = -1;
  if (force_parcluster >= 0) {
    if (force_parcluster >= int(prep.units.size()) ||
        !prep.tree.nodes[std::size_t(force_parcluster)].covers(term.relation))
      throw InferenceError("parcluster " + std::to_string(force_parcluster) +
                           " does not cover " + term.relation);
    pick = force_parcluster;
  } else {
    for (const auto& node : prep.tree.nodes)
      if (node.covers(term.relation)) {
        pick = node.id;
        break;
      }
    if (pick < 0)
      throw InferenceError("no parcluster covers " + term.relation);
  }

  ParclusterKc& u = prep.units[std::size_t(pick)];
  ensure_compiled(prep, u);
  std::vector<Weight> nums;
  bool any = false;
  for (int v = 0; v < int(range.size()); ++v) {
    WfomcProblem num = u.problem;
    add_observation(num, term, v);
    Circuit c = compile(num, prep.copts);
    nums.push_back(wfomc_eval(c, num, &prep.query_stats));
    any = any || !nums.back().is_zero();
  }
  ++prep.denominator_reuses;
  if (!any) throw ZeroProbabilityError("query term admits no state");
  return Distribution::normalized({range}, nums);
}

CrossCheck cross_engine_check(const Model& m, const std::vector<Query>& queries,
                              const std::vector<EvidenceItem>& evidence) {
  CrossCheck out;
  GroundFactorGraph g = ground_model(m, evidence);
  std::int64_t states = 1;
  bool brute_ok = true;
  for (int r : g.radices()) {
    states *= r;
    if (states > (std::int64_t(1) << 22)) {
      brute_ok = false;
      break;
    }
  }
  out.reference = brute_ok ? "brute" : "ve";
  std::vector<Distribution> refs;
  for (const auto& q : queries)
    refs.push_back(brute_ok ? brute_marginal(g, q) : ve_marginal(g, q));

  auto run = [&](const std::string& name,
                 const std::function<Distribution(const Query&, std::size_t)>&
                     engine) {
    double worst = 0.0;
    try {
      for (std::size_t i = 0; i < queries.size(); ++i)
        worst = std::max(worst, engine(queries[i], i).max_abs_diff(refs[i]));
      out.max_diff[name] = worst;
      out.overall = std::max(out.overall, worst);
    } catch (const std::exception& ex) {
      out.failures[name] = ex.what();
    }
  };

  run("ve", [&](const Query& q, std::size_t) { return ve_marginal(g, q); });
  try {
    auto jts = jt_answer(m, queries, evidence);
    run("jt", [&](const Query&, std::size_t i) { return jts[i]; });
  } catch (const std::exception& ex) {
    out.failures["jt"] = ex.what();
  }
  run("lve",
      [&](const Query& q, std::size_t) { return lve_answer(m, q, evidence); });
  try {
    FOJtree j = construct_fojtree(m);
    if (!evidence.empty()) enter_evidence(j, evidence);
    pass_messages(j);
    run("ljt", [&](const Query& q, std::size_t) { return ljt_answer(j, q); });
  } catch (const std::exception& ex) {
    out.failures["ljt"] = ex.what();
  }
  run("fokc",
      [&](const Query& q, std::size_t) { return fokc_answer(m, q, evidence); });
  try {
    PreparedModel prep = ljtkc_precompute(m, evidence);
    run("ljtkc",
        [&](const Query& q, std::size_t) { return ljtkc_answer(prep, q); });
  } catch (const std::exception& ex) {
    out.failures["ljtkc"] = ex.what();
  }
  return out;
}

}  // namespace liftedq
