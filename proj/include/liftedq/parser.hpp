#pragma once

#include <string>
#include <vector>

#include "liftedq/model.hpp"

namespace liftedq {

// Parses the textual model language. Throws ParseError with line/column on
// syntax errors and ValidationError on semantic ones; the returned model has
// been validated.
Model parse_model(const std::string& text);

// Canonical text form; parse(print_model(m)) is structurally equal to m.
std::string print_model(const Model& m);

// One ground query term per line, e.g. "Cancer(eve)". Blank lines and //
// comments ignored.
std::vector<Query> parse_query_file(const std::string& text, const Model& m);

// Parses a single ground term like "Cancer(eve)" against the model.
Prv parse_ground_term(const std::string& text, const Model& m);

// One observation per line, e.g. "Smokes(bob)=false". The right-hand side is
// a range label. Blank lines and // comments ignored.
std::vector<EvidenceItem> parse_evidence_file(const std::string& text,
                                              const Model& m);

}  // namespace liftedq
