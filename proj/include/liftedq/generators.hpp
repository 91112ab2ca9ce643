#pragma once

#include <string>

#include "liftedq/model.hpp"

namespace liftedq {

// Benchmark model families. gex is the smokers model (six parfactors, one
// person domain, friendship with X != Y); gexp gives Y an own same-size
// domain, dropping the inequality. gl extends gex by eight PRVs over two
// extra domains into twenty parfactors; glp is gl without the inequality.
enum class Family { Gex, Gexp, Gl, Glp };

Family family_from_string(const std::string& s);
std::string family_name(Family f);

// Deterministic model with fixed potential tables; n is the domain size.
Model gen_model(Family f, int n);

// Stock evidence for gex-style models at n >= 3: one observed friendship
// plus one observed smoker (constants p2, p3).
std::vector<EvidenceItem> gex_example_evidence(const Model& m);

}  // namespace liftedq
