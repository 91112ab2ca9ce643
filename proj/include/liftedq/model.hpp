#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "liftedq/errors.hpp"
#include "liftedq/weight.hpp"

namespace liftedq {

struct DomainSpec {
  std::string name;
  std::vector<std::string> constants;  // pairwise distinct, size >= 1
  int size() const { return int(constants.size()); }
  int index_of(const std::string& c) const;  // -1 if absent
};

using DomainTable = std::map<std::string, DomainSpec>;

// A PRV parameter: either a logvar or a constant of the declared domain.
struct Term {
  bool is_constant = false;
  std::string name;  // logvar name or constant text

  bool operator==(const Term& o) const = default;
  auto operator<=>(const Term& o) const = default;
};

inline Term logvar(std::string n) { return Term{false, std::move(n)}; }
inline Term constant(std::string n) { return Term{true, std::move(n)}; }

// Parameterised randvar. Range values are arbitrary strings, boolean by
// default; all occurrences of a relation share arity and range model-wide.
struct Prv {
  std::string relation;
  std::vector<Term> params;
  std::vector<std::string> range;

  bool is_ground() const {
    for (const auto& t : params)
      if (!t.is_constant) return false;
    return true;
  }
  std::vector<std::string> logvars() const {
    std::vector<std::string> out;
    for (const auto& t : params)
      if (!t.is_constant) out.push_back(t.name);
    return out;
  }
  bool operator==(const Prv& o) const = default;
  auto operator<=>(const Prv& o) const = default;
  std::string str() const;
};

// Constraint over a logvar sequence. Stored symbolically as a product of
// per-logvar allowed sets plus pairwise-inequality edges whenever that form
// is exact; arbitrary tuple sets fall back to an explicit listing.
struct Constraint {
  struct VarSet {
    bool full = true;            // whole domain
    std::vector<int> ids;        // sorted constant ids, used when !full
    bool operator==(const VarSet& o) const = default;
  };

  std::vector<std::string> logvars;
  std::vector<std::string> domains;  // parallel to logvars
  std::vector<VarSet> allowed;       // parallel; product form
  std::vector<std::pair<int, int>> diffs;  // i<j, logvar indices, same domain
  bool explicit_form = false;
  std::vector<std::vector<int>> tuples;  // rows of constant ids, explicit form

  bool is_top() const {
    if (explicit_form) return false;
    if (!diffs.empty()) return false;
    for (const auto& a : allowed)
      if (!a.full) return false;
    return true;
  }
  int index_of(const std::string& lv) const;
  bool has_logvar(const std::string& lv) const { return index_of(lv) >= 0; }

  static Constraint top(std::vector<std::string> lvs,
                        std::vector<std::string> doms);
};

// -- Constraint algebra ------------------------------------------------------

// All admitted tuples, in lexicographic constant-id order. Guarded.
std::vector<std::vector<int>> expand_tuples(const Constraint& c,
                                            const DomainTable& doms,
                                            std::int64_t guard = 1 << 22);

// Number of admitted tuples.
std::int64_t tuple_count(const Constraint& c, const DomainTable& doms);

// Keep only the named logvars; distinct sub-tuples.
Constraint project(const Constraint& c, const std::vector<std::string>& keep,
                   const DomainTable& doms);

// Intersection of expanded tuple sets over the union of logvars.
Constraint conjoin(const Constraint& a, const Constraint& b,
                   const DomainTable& doms);

// Restrict one logvar to the given constant ids.
Constraint restrict_var(const Constraint& c, const std::string& lv,
                        const std::vector<int>& ids, const DomainTable& doms);

// Number of groundings of the non-target logvars per fixed assignment of the
// target logvars. Throws NonUniformCountError when not uniform.
std::int64_t count_per_instance(const Constraint& c,
                                const std::vector<std::string>& targets,
                                const DomainTable& doms);

// Semantic equality of admitted tuple sets (logvars matched by name).
bool same_constraint(const Constraint& a, const Constraint& b,
                     const DomainTable& doms);

// Try to recognise an explicit tuple listing as product-plus-inequalities.
std::optional<Constraint> recognize_product_form(const Constraint& c,
                                                 const DomainTable& doms);

// Whether the tuple of constant ids is admitted.
bool admits(const Constraint& c, const std::vector<int>& tuple);

// -- Parfactors --------------------------------------------------------------

// One parfactor argument: a PRV, or a counting randvar over `counted_logvar`
// of the PRV (histogram-valued; multinomial semantics).
struct Arg {
  Prv prv;
  std::string counted_logvar;  // empty for a plain PRV argument
  bool is_crv() const { return !counted_logvar.empty(); }
  bool operator==(const Arg& o) const = default;
};

struct Parfactor {
  std::string name;
  Constraint constraint;  // over free and counted logvars together
  std::vector<Arg> args;
  std::vector<Weight> table;  // mixed radix over arg ranges, arg 0 leading

  std::vector<std::string> counted_logvars() const;
  std::vector<std::string> free_logvars() const;
  bool has_arg_relation(const std::string& rel) const;
};

struct RelationSig {
  std::vector<std::string> param_domains;
  std::vector<std::string> range;
};

struct EvidenceItem {
  Prv prv;                // params are logvars or constants
  Constraint constraint;  // over the prv's logvars
  int value;              // index into the prv's range
};

struct Model {
  DomainTable domains;
  std::vector<std::string> domain_order;  // declaration order, for printing
  std::map<std::string, RelationSig> relations;
  std::vector<std::string> relation_order;
  std::vector<Parfactor> parfactors;
  std::vector<EvidenceItem> evidence;

  const DomainSpec& domain(const std::string& name) const;
  const RelationSig& relation(const std::string& name) const;

  // Structural validation per the model invariants; throws ValidationError.
  void validate() const;
};

struct Query {
  std::vector<Prv> terms;  // ground PRVs
};

// Marginal (or small joint) distribution; probs indexed mixed-radix over the
// terms' ranges, term 0 leading. Sums to 1 within 1e-9.
struct Distribution {
  std::vector<std::vector<std::string>> ranges;
  std::vector<double> probs;

  static Distribution normalized(
      const std::vector<std::vector<std::string>>& ranges,
      const std::vector<Weight>& weights);
  std::string label(std::size_t idx) const;
  double max_abs_diff(const Distribution& o) const;
};

// -- Grounding ---------------------------------------------------------------

// Range sizes of a parfactor's arguments (CRV args get histogram counts).
std::vector<int> arg_range_sizes(const Model& m, const Parfactor& g);

// Per-instance grounding count of a counted logvar.
std::int64_t crv_instance_count(const Model& m, const Parfactor& g,
                                const std::string& counted_lv);

// Number of ground factors a parfactor induces (tuples of its free logvars).
std::int64_t gr_instance_count(const Model& m, const Parfactor& g);

// Ground randvars of a constrained PRV, as "Rel(c1,...)" keys.
std::vector<std::string> gr_instances(const Prv& prv, const Constraint& c,
                                      const DomainTable& doms);

// Sum of gr_instance_count over all parfactors.
std::int64_t gr_size(const Model& m);

// Mixed-radix helpers shared by tables everywhere.
std::size_t table_size(const std::vector<int>& radices);
std::size_t tuple_to_index(const std::vector<int>& radices,
                           const std::vector<int>& tuple);
void index_to_tuple(const std::vector<int>& radices, std::size_t idx,
                    std::vector<int>& tuple);

std::string ground_name(const std::string& relation,
                        const std::vector<std::string>& constants);

}  // namespace liftedq
