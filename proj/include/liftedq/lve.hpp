#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "liftedq/model.hpp"

namespace liftedq {

// How to eliminate a class that occurs twice in one parfactor under an
// inequality (the "pairwise different" pattern): ground the pair logvar, or
// convert the pair jointly into one counting argument.
enum class JustDiff { Ground, Count };

struct LveOptions {
  JustDiff justdiff = JustDiff::Count;
  std::int64_t table_guard = std::int64_t(1) << 22;
};

struct OpRecord {
  std::string op;
  std::string parfactor;
  std::string target;
  std::int64_t cost = 0;
};

struct LveTrace {
  std::vector<OpRecord> records;

  std::map<std::string, std::int64_t> counts() const;
  std::int64_t total_cost() const;
  bool mentions(const std::string& op) const;
  std::string str() const;  // one "op,parfactor,target,cost" line per record
};

// -- Operators ---------------------------------------------------------------
// All operators preserve the product of ground factors they represent; each
// throws InferenceError when its precondition fails.

// Sums an argument out of a parfactor. The argument (with its counted logvar,
// if any) must cover every free logvar; counting arguments are weighted by the
// multinomial of their histogram.
Parfactor op_sum_out(const Model& m, const Parfactor& g, std::size_t arg);

// Multiplies aligned parfactors into one. Inputs must share logvar names
// where they share randvars; each input's projection onto its own logvars must
// survive the conjunction unchanged, and its table enters with a 1/k exponent
// where k is its per-instance multiplicity in the result.
Parfactor op_multiply(const Model& m, const std::vector<Parfactor>& gs);

// Splits on a logvar's membership in an id set; empty parts are omitted.
std::vector<Parfactor> op_split(const Model& m, const Parfactor& g,
                                const std::string& lv,
                                const std::vector<int>& ids);

// Turns the single argument containing `lv` into a counting argument. The
// logvar must appear in exactly one argument and be count-normalised.
Parfactor op_count_convert(const Model& m, const Parfactor& g,
                           const std::string& lv);

// Splits the constraint so `lv` has a uniform per-instance count w.r.t. the
// remaining logvars.
std::vector<Parfactor> op_count_normalise(const Model& m, const Parfactor& g,
                                          const std::string& lv);

// Pulls one constant out of a counting argument, leaving a plain argument for
// it next to the shrunk counting argument.
Parfactor op_expand(const Model& m, const Parfactor& g, std::size_t arg,
                    int constant_id);

// Replaces a logvar by each of its admitted constants.
std::vector<Parfactor> op_ground_logvar(const Model& m, const Parfactor& g,
                                        const std::string& lv);

// Absorbs ground evidence covering argument `arg` entirely: the argument is
// dropped and the table restricted to the observed value.
Parfactor op_absorb(const Model& m, const Parfactor& g, std::size_t arg,
                    int value);

// Replaces two arguments A(..,X,..), A(..,Y,..) under X != Y by one counting
// argument over X; the pair table is folded with exponents
// h(v)h(w) - [v==w] h(v).
Parfactor op_joint_count_convert(const Model& m, const Parfactor& g);

// -- Engine ------------------------------------------------------------------

class LveEngine {
 public:
  LveEngine(const Model& m, LveOptions opts = {});

  void set_parfactors(std::vector<Parfactor> pfs);
  const std::vector<Parfactor>& parfactors() const { return pfs_; }
  const LveTrace& trace() const { return trace_; }

  // Splits parfactors until every pair of argument classes of the same
  // relation is either identical or disjoint, also relative to the anchors.
  void shatter(const std::vector<Prv>& anchors);

  // Shatters against the evidence and absorbs it.
  void absorb_all(const std::vector<EvidenceItem>& evidence);

  // Eliminates every class whose instances avoid the keep relations and the
  // keep terms.
  void eliminate_all_except(const std::set<std::string>& keep_relations,
                            const std::vector<Prv>& keep_terms = {});

  // Joint of the (ground) query terms from the current parfactors; all other
  // classes must already be eliminated.
  Distribution extract(const Query& q) const;

 private:
  struct ClassInfo;
  friend struct LveEngineDetail;

  const Model& m_;
  LveOptions opts_;
  std::vector<Parfactor> pfs_;
  LveTrace trace_;
  int fresh_ = 0;

  std::string fresh_name(const std::string& base);
  void drop_empty();
  bool shatter_step(const std::vector<Prv>& anchors);
  bool try_eliminate(const std::string& key);
  void record(const std::string& op, const std::string& pf,
              const std::string& target, std::int64_t cost);
};

// Full pipeline: shatter on query and evidence, absorb, eliminate, extract.
Distribution lve_answer(const Model& m, const Query& q,
                        const std::vector<EvidenceItem>& evidence,
                        const LveOptions& opts = {},
                        LveTrace* trace = nullptr);

// A query term that is itself observed gets a point distribution.
bool evidence_covers(const Model& m,
                     const std::vector<EvidenceItem>& evidence, const Prv& term,
                     int* value);

}  // namespace liftedq
