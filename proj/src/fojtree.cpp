#include "liftedq/fojtree.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "liftedq/errors.hpp"

namespace liftedq {

namespace {

std::set<std::string> parfactor_relations(const Parfactor& g) {
  std::set<std::string> out;
  for (const auto& a : g.args) out.insert(a.prv.relation);
  return out;
}

bool subset(const std::vector<std::string>& a,
            const std::vector<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Unweighted BFS distances over the tree edges.
std::vector<int> bfs_dist(const FOJtree& j, int start) {
  std::vector<int> dist(j.nodes.size(), -1);
  std::vector<int> queue = {start};
  dist[start] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h)
    for (int n : j.neighbours(queue[h]))
      if (dist[n] < 0) {
        dist[n] = dist[queue[h]] + 1;
        queue.push_back(n);
      }
  return dist;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

// Canonical logvar letters for printing a class as a PRV.
std::string pos_letter(std::size_t i) {
  static const char* letters = "XYZUVW";
  if (i < 6) return std::string(1, letters[i]);
  return "X" + std::to_string(i);
}

std::string class_str(const Model& m, const std::string& rel) {
  const RelationSig& sig = m.relation(rel);
  if (sig.param_domains.empty()) return rel;
  std::string out = rel + "(";
  for (std::size_t i = 0; i < sig.param_domains.size(); ++i) {
    if (i) out += ",";
    out += pos_letter(i);
  }
  return out + ")";
}

std::vector<Parfactor> collect_submodel(const FOJtree& j,
                                        const std::set<int>& ids) {
  std::vector<Parfactor> out;
  for (int id : ids) {
    const Parcluster& c = j.nodes[id];
    for (const auto& g : c.local_model) out.push_back(g);
    for (const auto& [from, msg] : c.inbox)
      if (!ids.count(from))
        for (const auto& g : msg) out.push_back(g);
  }
  return out;
}

Distribution answer_on(const FOJtree& j, std::vector<Parfactor> pfs,
                       const Query& q, const LveOptions& opts,
                       LveTrace* trace) {
  Model sub = j.model;
  sub.parfactors = std::move(pfs);
  sub.evidence.clear();
  return lve_answer(sub, q, j.evidence, opts, trace);
}

}  // namespace

bool Parcluster::covers(const std::string& relation) const {
  return std::binary_search(relations.begin(), relations.end(), relation);
}

std::vector<int> FOJtree::neighbours(int id) const {
  std::vector<int> out;
  for (auto [a, b] : edges) {
    if (a == id) out.push_back(b);
    if (b == id) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string>& FOJtree::separator(int a, int b) const {
  return separators.at({std::min(a, b), std::max(a, b)});
}

FOJtree construct_fojtree(const Model& m) {
  FOJtree j;
  j.model = m;

  // moral graph over the relations the parfactors mention
  std::vector<std::string> verts;
  for (const auto& r : m.relation_order)
    for (const auto& g : m.parfactors)
      if (g.has_arg_relation(r)) {
        verts.push_back(r);
        break;
      }
  std::sort(verts.begin(), verts.end());
  auto vid = [&](const std::string& r) {
    return int(std::lower_bound(verts.begin(), verts.end(), r) - verts.begin());
  };
  std::vector<std::set<int>> adj(verts.size());
  for (const auto& g : m.parfactors) {
    auto rels = parfactor_relations(g);
    for (const auto& a : rels)
      for (const auto& b : rels)
        if (a != b) adj[vid(a)].insert(vid(b));
  }

  // min-fill elimination; each elimination yields a candidate cluster
  std::vector<bool> gone(verts.size(), false);
  std::vector<std::vector<std::string>> clusters;
  for (std::size_t step = 0; step < verts.size(); ++step) {
    int best = -1;
    long best_fill = -1;
    for (std::size_t v = 0; v < verts.size(); ++v) {
      if (gone[v]) continue;
      long fill = 0;
      std::vector<int> nbs(adj[v].begin(), adj[v].end());
      for (std::size_t a = 0; a < nbs.size(); ++a)
        for (std::size_t b = a + 1; b < nbs.size(); ++b)
          if (!adj[nbs[a]].count(nbs[b])) ++fill;
      if (best < 0 || fill < best_fill) {
        best = int(v);
        best_fill = fill;
      }
    }
    std::vector<std::string> cluster = {verts[best]};
    for (int n : adj[best]) cluster.push_back(verts[n]);
    std::sort(cluster.begin(), cluster.end());
    clusters.push_back(cluster);
    std::vector<int> nbs(adj[best].begin(), adj[best].end());
    for (std::size_t a = 0; a < nbs.size(); ++a)
      for (std::size_t b = a + 1; b < nbs.size(); ++b) {
        adj[nbs[a]].insert(nbs[b]);
        adj[nbs[b]].insert(nbs[a]);
      }
    for (int n : nbs) adj[n].erase(best);
    adj[best].clear();
    gone[best] = true;
  }

  // keep maximal clusters only, in first-seen order
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    bool maximal = true;
    for (std::size_t k = 0; k < clusters.size() && maximal; ++k) {
      if (k == i || !subset(clusters[i], clusters[k])) continue;
      if (clusters[i] != clusters[k] || k < i) maximal = false;
    }
    if (!maximal) continue;
    Parcluster c;
    c.id = int(j.nodes.size());
    c.relations = clusters[i];
    j.nodes.push_back(std::move(c));
  }

  // maximum spanning tree on separator sizes
  struct Cand {
    std::size_t w;
    int a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < j.nodes.size(); ++a)
    for (std::size_t b = a + 1; b < j.nodes.size(); ++b) {
      std::vector<std::string> inter;
      std::set_intersection(j.nodes[a].relations.begin(),
                            j.nodes[a].relations.end(),
                            j.nodes[b].relations.begin(),
                            j.nodes[b].relations.end(),
                            std::back_inserter(inter));
      if (!inter.empty()) cands.push_back({inter.size(), int(a), int(b)});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.w != y.w) return x.w > y.w;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  UnionFind uf(int(j.nodes.size()));
  for (const auto& c : cands)
    if (uf.unite(c.a, c.b)) j.edges.emplace_back(c.a, c.b);
  // disconnected models still get one tree, with empty separators
  for (std::size_t b = 1; b < j.nodes.size(); ++b)
    if (uf.unite(0, int(b))) j.edges.emplace_back(0, int(b));
  std::sort(j.edges.begin(), j.edges.end());
  for (auto [a, b] : j.edges) {
    std::vector<std::string> inter;
    std::set_intersection(j.nodes[a].relations.begin(),
                          j.nodes[a].relations.end(),
                          j.nodes[b].relations.begin(),
                          j.nodes[b].relations.end(),
                          std::back_inserter(inter));
    j.separators[{a, b}] = inter;
  }

  // each parfactor goes to the first parcluster covering it
  for (const auto& g : m.parfactors) {
    auto rset = parfactor_relations(g);
    std::vector<std::string> rels(rset.begin(), rset.end());
    bool placed = false;
    for (auto& c : j.nodes) {
      if (!subset(rels, c.relations)) continue;
      c.local_model.push_back(g);
      placed = true;
      break;
    }
    if (!placed)
      throw InferenceError("tree construction left parfactor " + g.name +
                           " unassigned");
  }

  // centre: minimum eccentricity, lowest id on ties
  int best = 0, best_ecc = -1;
  for (std::size_t v = 0; v < j.nodes.size(); ++v) {
    auto dist = bfs_dist(j, int(v));
    int ecc = *std::max_element(dist.begin(), dist.end());
    if (best_ecc < 0 || ecc < best_ecc) {
      best = int(v);
      best_ecc = ecc;
    }
  }
  j.center = best;
  return j;
}

PropertyReport verify_properties(const FOJtree& j, const Model& m) {
  PropertyReport rep;

  std::set<std::string> model_rels;
  for (const auto& g : m.parfactors)
    for (const auto& r : parfactor_relations(g)) model_rels.insert(r);
  for (const auto& c : j.nodes)
    for (const auto& r : c.relations)
      if (!model_rels.count(r) && rep.coverage.pass) {
        rep.coverage.pass = false;
        rep.coverage.witness =
            "parcluster " + std::to_string(c.id) + " holds " + r;
      }

  std::map<std::string, int> seen;
  for (const auto& c : j.nodes)
    for (const auto& g : c.local_model) {
      ++seen[g.name];
      auto rset = parfactor_relations(g);
      std::vector<std::string> rels(rset.begin(), rset.end());
      if (!subset(rels, c.relations) && rep.partition.pass) {
        rep.partition.pass = false;
        rep.partition.witness = g.name;
      }
    }
  for (const auto& g : m.parfactors)
    if (seen[g.name] != 1 && rep.partition.pass) {
      rep.partition.pass = false;
      rep.partition.witness = g.name;
    }

  for (const auto& r : model_rels) {
    std::set<int> holders;
    for (const auto& c : j.nodes)
      if (c.covers(r)) holders.insert(c.id);
    if (holders.empty()) continue;
    // BFS restricted to holders
    std::set<int> reached = {*holders.begin()};
    std::vector<int> queue = {*holders.begin()};
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (int n : j.neighbours(queue[h]))
        if (holders.count(n) && !reached.count(n)) {
          reached.insert(n);
          queue.push_back(n);
        }
    if (reached.size() != holders.size() && rep.running_intersection.pass) {
      rep.running_intersection.pass = false;
      rep.running_intersection.witness = r;
    }
  }
  return rep;
}

void enter_evidence(FOJtree& j, const std::vector<EvidenceItem>& evidence,
                    const LveOptions& opts) {
  for (const auto& ev : evidence)
    if (!j.model.relations.count(ev.prv.relation))
      throw ValidationError("evidence over unknown randvar " +
                            ev.prv.relation);
  for (auto& c : j.nodes) {
    std::vector<EvidenceItem> local;
    for (const auto& ev : evidence) {
      bool mentioned = false;
      for (const auto& g : c.local_model)
        if (g.has_arg_relation(ev.prv.relation)) mentioned = true;
      if (mentioned) local.push_back(ev);
    }
    if (local.empty()) continue;
    LveEngine e(j.model, opts);
    e.set_parfactors(c.local_model);
    e.absorb_all(local);
    c.local_model = e.parfactors();
  }
  for (const auto& ev : evidence) j.evidence.push_back(ev);
}

namespace {

void send_message(FOJtree& j, int src, int dst, const LveOptions& opts) {
  std::vector<Parfactor> pfs = j.nodes[src].local_model;
  for (const auto& [from, msg] : j.nodes[src].inbox)
    if (from != dst)
      for (const auto& g : msg) pfs.push_back(g);
  const auto& sep = j.separator(src, dst);
  LveEngine e(j.model, opts);
  e.set_parfactors(std::move(pfs));
  e.eliminate_all_except(std::set<std::string>(sep.begin(), sep.end()));
  for (const auto& g : e.parfactors())
    for (const auto& a : g.args)
      if (!std::binary_search(sep.begin(), sep.end(), a.prv.relation))
        throw InferenceError("message from " + std::to_string(src) + " to " +
                             std::to_string(dst) +
                             " mentions non-separator class " +
                             a.prv.relation);
  j.nodes[dst].inbox[src] = e.parfactors();
  for (const auto& r : e.trace().records)
    j.message_trace.records.push_back(r);
}

}  // namespace

void pass_messages(FOJtree& j, const LveOptions& opts) {
  std::vector<int> parent(j.nodes.size(), -1);
  std::vector<int> order = {j.center};
  parent[j.center] = j.center;
  for (std::size_t h = 0; h < order.size(); ++h)
    for (int n : j.neighbours(order[h]))
      if (parent[n] < 0) {
        parent[n] = order[h];
        order.push_back(n);
      }
  for (std::size_t i = order.size(); i-- > 0;)
    if (order[i] != j.center) send_message(j, order[i], parent[order[i]], opts);
  for (int n : order)
    if (n != j.center) send_message(j, parent[n], n, opts);
  j.messages_passed = true;
}

Distribution ljt_answer(const FOJtree& j, const Query& q,
                        const LveOptions& opts, LveTrace* trace) {
  if (!j.messages_passed)
    throw InferenceError("messages have not been passed");
  // terminals: lowest-id covering parcluster per query relation
  std::vector<int> terminals;
  for (const auto& t : q.terms) {
    int found = -1;
    for (const auto& c : j.nodes)
      if (c.covers(t.relation)) {
        found = c.id;
        break;
      }
    if (found < 0)
      throw InferenceError("query term " + t.str() +
                           " is not covered by any parcluster");
    terminals.push_back(found);
  }
  // subtree: union of the tree paths from each terminal to the first
  std::set<int> ids;
  if (!terminals.empty()) {
    std::vector<int> parent(j.nodes.size(), -1);
    std::vector<int> order = {terminals[0]};
    parent[terminals[0]] = terminals[0];
    for (std::size_t h = 0; h < order.size(); ++h)
      for (int n : j.neighbours(order[h]))
        if (parent[n] < 0) {
          parent[n] = order[h];
          order.push_back(n);
        }
    for (int t : terminals)
      for (int v = t; !ids.count(v); v = parent[v]) ids.insert(v);
  }
  return answer_on(j, collect_submodel(j, ids), q, opts, trace);
}

Distribution parcluster_answer(const FOJtree& j, int id, const Query& q,
                               const LveOptions& opts) {
  if (!j.messages_passed)
    throw InferenceError("messages have not been passed");
  for (const auto& t : q.terms)
    if (!j.nodes.at(id).covers(t.relation))
      throw InferenceError("parcluster " + std::to_string(id) +
                           " does not cover " + t.str());
  return answer_on(j, collect_submodel(j, {id}), q, opts, nullptr);
}

std::string dump_tree(const FOJtree& j) {
  std::ostringstream os;
  for (const auto& c : j.nodes) {
    os << "parcluster " << c.id << ":";
    for (const auto& r : c.relations) os << " " << class_str(j.model, r);
    os << " |";
    for (const auto& g : c.local_model) os << " " << g.name;
    os << "\n";
  }
  for (auto [a, b] : j.edges) {
    os << "edge " << a << " -- " << b << ":";
    for (const auto& r : j.separator(a, b))
      os << " " << class_str(j.model, r);
    os << "\n";
  }
  os << "center " << j.center << "\n";
  return os.str();
}

}  // namespace liftedq
