#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "liftedq/model.hpp"

namespace liftedq {

// -- Weighted first-order model counting problems ----------------------------

struct WLiteral {
  bool positive = true;
  std::string pred;
  std::vector<Term> params;  // logvars of the clause constraint, or constants
};

// Universally quantified disjunction; the constraint ranges over the logvars
// the literals use.
struct WClause {
  Constraint constraint;
  std::vector<WLiteral> literals;
};

struct WfomcProblem {
  DomainTable domains;
  std::vector<std::string> domain_order;
  std::map<std::string, std::vector<std::string>> preds;  // per-position domains
  std::vector<WClause> clauses;
  std::map<std::string, Weight> w_true, w_false;  // default 1

  // Symmetric weight on the number of true atoms of a unary predicate over a
  // constrained subset of its domain; table[k] applies when exactly k of the
  // admitted atoms are true.
  struct HistFactor {
    std::string pred;
    Constraint constraint;  // one logvar
    std::vector<Weight> table;
  };
  std::vector<HistFactor> hist_factors;

  Weight wt(const std::string& p) const;
  Weight wf(const std::string& p) const;
};

// Row-wise reduction: every table row of every parfactor gets a parameter
// predicate weighted by the row value, tied to the row's literals by two-sided
// clauses. Single counting-argument parfactors become histogram factors;
// anything else non-plain is grounded first. Evidence becomes ground unit
// clauses. The weighted model count of the result equals the ground product's
// partition sum.
WfomcProblem reduce_to_wfomc(const Model& m, const std::vector<Parfactor>& pfs,
                             const std::vector<EvidenceItem>& evidence = {});

// Adds a ground unit clause fixing `term` to range value `value`.
void add_observation(WfomcProblem& p, const Prv& term, int value);

// Exhaustive weighted model count; guarded by the interpretation count.
Weight wfomc_brute(const WfomcProblem& p, std::int64_t max_states = 1 << 20);

// -- Circuits ----------------------------------------------------------------

// Compile-time slice of a domain. Root and Singleton sizes are known;
// CountTrue/CountFalse sizes come from the count variable bound by the
// enclosing counting node. Indiv is the one-element stand-in a set
// conjunction introduces for its decomposed cell.
struct Cell {
  enum Kind { Root, Singleton, CountTrue, CountFalse, Indiv } kind = Root;
  std::string domain;
  int constant = -1;         // Singleton
  std::vector<int> excluded; // Root: constants carved out into singletons
  int parent = -1;           // CountTrue/CountFalse/Indiv
  int count_var = -1;        // CountTrue/CountFalse
};

// Product of falling factorials of cell sizes: for each factor, s*(s-1)*...
// with `take` terms. An empty list means 1.
struct Mult {
  struct Factor {
    int cell;
    int take = 1;
  };
  std::vector<Factor> factors;
};

struct CNode {
  enum Kind {
    Leaf,       // w_T(pred)^mult or w_F(pred)^mult
    FreeLeaf,   // (w_T + w_F)^mult, smoothing for unconstrained atoms
    HistLeaf,   // table[sum of bound count vars + fixed]
    Contra,     // 0 when mult > 0, else 1
    And,
    Or,         // two-way split on `atom_key`; children tagged true, false
    SetConj,    // children[0] ^ mult
    CountDisj   // sum_k C(cell size, k) * children[0] with count_var = k
  } kind = And;

  std::string pred;
  bool positive = true;
  Mult mult;
  std::vector<Weight> table;       // HistLeaf
  std::vector<int> count_vars;     // HistLeaf
  int fixed = 0;                   // HistLeaf
  std::vector<int> children;
  std::string atom_key;            // Or
  int cell = -1;                   // CountDisj
  int count_var = -1;              // CountDisj
};

struct Circuit {
  std::vector<Cell> cells;
  std::vector<CNode> nodes;
  int root = -1;
  int num_count_vars = 0;

  std::size_t size() const { return nodes.size(); }
  std::string dump() const;  // indented text, stable across runs
};

struct CompileOptions {
  std::int64_t node_budget = std::int64_t(1) << 20;
};

// First-order d-DNNF compilation. Rules in priority order: unit propagation,
// independent components, lifted decomposition (unary and pair), atom
// counting on unary predicates, ground two-way split, singleton carving
// fallback. Throws GuardError when the node budget runs out or no rule
// applies.
Circuit compile(const WfomcProblem& p, const CompileOptions& opts = {});

// Structural validation: conjunctions decomposable (pairwise disjoint atom
// footprints), disjunctions deterministic and smooth, root accounts for every
// ground atom. Throws InferenceError with a witness on failure.
void validate_circuit(const Circuit& c, const WfomcProblem& p);

struct EvalStats {
  std::int64_t ops = 0;  // arithmetic operations performed
};

Weight wfomc_eval(const Circuit& c, const WfomcProblem& p,
                  EvalStats* stats = nullptr);

// -- Query answering ---------------------------------------------------------

// Ratio of weighted counts: numerator per range value adds a unit observation
// of the single query term; denominator carries the evidence only.
Distribution fokc_answer(const Model& m, const Query& q,
                         const std::vector<EvidenceItem>& evidence = {},
                         const CompileOptions& opts = {},
                         EvalStats* stats = nullptr);

}  // namespace liftedq
