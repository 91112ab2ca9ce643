#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "liftedq/lve.hpp"
#include "liftedq/model.hpp"

namespace liftedq {

// A cluster of PRV classes with the slice of the model assigned to it.
// Classes are whole relations: each relation has one domain signature, so
// Smokes(X) and Smokes(Y) over the one person domain are the same class.
struct Parcluster {
  int id = 0;
  std::vector<std::string> relations;  // sorted class names
  std::vector<Parfactor> local_model;
  std::map<int, std::vector<Parfactor>> inbox;  // neighbour id -> message

  bool covers(const std::string& relation) const;
};

struct FOJtree {
  Model model;
  std::vector<Parcluster> nodes;
  std::vector<std::pair<int, int>> edges;  // id pairs, first < second
  std::map<std::pair<int, int>, std::vector<std::string>> separators;
  int center = 0;
  bool messages_passed = false;
  std::vector<EvidenceItem> evidence;  // entered so far
  LveTrace message_trace;

  std::vector<int> neighbours(int id) const;
  const std::vector<std::string>& separator(int a, int b) const;
};

FOJtree construct_fojtree(const Model& m);

// One verdict per tree property, with a witness string on failure.
struct PropertyCheck {
  bool pass = true;
  std::string witness;
};
struct PropertyReport {
  PropertyCheck coverage;              // every cluster class occurs in the model
  PropertyCheck partition;             // local models partition the parfactors
  PropertyCheck running_intersection;  // per-class subtree connectivity
  bool ok() const {
    return coverage.pass && partition.pass && running_intersection.pass;
  }
};

PropertyReport verify_properties(const FOJtree& j, const Model& m);

// Absorbs each evidence item into every local model that mentions its
// relation; other local models are untouched.
void enter_evidence(FOJtree& j, const std::vector<EvidenceItem>& evidence,
                    const LveOptions& opts = {});

// Two passes, inward to the centre and back out. Each message eliminates all
// non-separator classes from the sender's local model plus the messages from
// its other neighbours.
void pass_messages(FOJtree& j, const LveOptions& opts = {});

// Answers from the smallest covering subtree's local models plus the messages
// entering it from outside.
Distribution ljt_answer(const FOJtree& j, const Query& q,
                        const LveOptions& opts = {}, LveTrace* trace = nullptr);

// Answer computed at one fixed parcluster from its local model and full inbox;
// the query terms must be covered by that parcluster.
Distribution parcluster_answer(const FOJtree& j, int id, const Query& q,
                               const LveOptions& opts = {});

// Text form: one line per parcluster and per edge.
std::string dump_tree(const FOJtree& j);

}  // namespace liftedq
