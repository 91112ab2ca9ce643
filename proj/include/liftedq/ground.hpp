#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "liftedq/model.hpp"

namespace liftedq {

struct GroundFactor {
  std::vector<int> vars;  // indices into the graph's randvar list
  std::vector<Weight> table;
};

struct GroundFactorGraph {
  std::vector<std::string> var_names;
  std::vector<std::vector<std::string>> var_ranges;
  std::map<std::string, int> var_index;
  std::vector<GroundFactor> factors;

  int var(const std::string& name) const;  // throws if unknown
  std::vector<int> radices() const;
};

struct OracleLimits {
  std::int64_t max_states = std::int64_t(1) << 26;  // brute-force guard
  std::int64_t max_table = std::int64_t(1) << 22;   // ve/jt factor guard
  std::int64_t max_order_work = std::int64_t(1) << 27;  // min-fill scan guard
};

// Grounds every parfactor; evidence is applied by zeroing inconsistent rows,
// preserving the normalisation semantics of conditionals.
GroundFactorGraph ground_model(const Model& m,
                               const std::vector<EvidenceItem>& evidence);

// Exact marginal by full joint enumeration.
Distribution brute_marginal(const GroundFactorGraph& g, const Query& q,
                            const OracleLimits& limits = {});

// Propositional variable elimination; empty order means min-fill with
// lexicographic tie-break.
Distribution ve_marginal(const GroundFactorGraph& g, const Query& q,
                         const std::vector<std::string>& order = {},
                         const OracleLimits& limits = {});

// Propositional junction tree: ground, build a jtree, two-pass messages,
// then answer each query from a covering clique.
std::vector<Distribution> jt_answer(const Model& m,
                                    const std::vector<Query>& queries,
                                    const std::vector<EvidenceItem>& evidence,
                                    const OracleLimits& limits = {});

std::string ground_key(const Prv& term);  // "Rel(c1,...)" for a ground PRV

}  // namespace liftedq
