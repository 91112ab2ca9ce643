#pragma once

#include <map>
#include <string>
#include <vector>

#include "liftedq/fojtree.hpp"
#include "liftedq/wfomc.hpp"

namespace liftedq {

// One parcluster's compiled state: the counting problem over its local model
// plus all inbound messages, the circuit, and the evaluated count. The count
// doubles as the query denominator and is computed once.
struct ParclusterKc {
  int parcluster = 0;
  WfomcProblem problem;
  Circuit circuit;
  Weight denominator;
  bool compiled = false;
};

struct PreparedModel {
  FOJtree tree;
  std::vector<ParclusterKc> units;
  CompileOptions copts;

  EvalStats precompute_stats;  // denominator evaluations
  EvalStats query_stats;       // numerator evaluations, cumulative
  std::int64_t denominator_reuses = 0;
};

// Builds the tree, enters evidence, passes messages, then reduces every
// parcluster; circuits compile eagerly unless `on_demand` defers them to the
// first query. Throws ZeroProbabilityError when the evidence admits no state.
PreparedModel ljtkc_precompute(const Model& m,
                               const std::vector<EvidenceItem>& evidence = {},
                               const LveOptions& lve_opts = {},
                               const CompileOptions& copts = {},
                               bool on_demand = false);

// Single ground term; numerators come from the covering parcluster's problem
// with the term observed, the denominator is the cached count.
// `force_parcluster` overrides the default lowest-id covering choice.
Distribution ljtkc_answer(PreparedModel& prep, const Query& q,
                          int force_parcluster = -1);

// Runs every engine on every query and reports the worst deviation from the
// ground reference (full enumeration when feasible, variable elimination
// otherwise). Engines that throw are listed under failures instead.
struct CrossCheck {
  std::string reference;
  std::map<std::string, double> max_diff;      // engine -> worst deviation
  std::map<std::string, std::string> failures; // engine -> error text
  double overall = 0.0;                        // max over engines that ran
};

CrossCheck cross_engine_check(const Model& m, const std::vector<Query>& queries,
                              const std::vector<EvidenceItem>& evidence = {});

}  // namespace liftedq
