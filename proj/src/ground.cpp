#include "liftedq/ground.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace liftedq {

namespace {

int register_var(GroundFactorGraph& g, const std::string& name,
                 const std::vector<std::string>& range) {
  auto it = g.var_index.find(name);
  if (it != g.var_index.end()) return it->second;
  int id = int(g.var_names.size());
  g.var_names.push_back(name);
  g.var_ranges.push_back(range);
  g.var_index[name] = id;
  return id;
}

std::vector<int> factor_radices(const GroundFactorGraph& g,
                                const GroundFactor& f) {
  std::vector<int> r;
  for (int v : f.vars) r.push_back(int(g.var_ranges[v].size()));
  return r;
}

// Multiplies factors into one over the union of their variables.
GroundFactor multiply_factors(const GroundFactorGraph& g,
                              const std::vector<const GroundFactor*>& fs,
                              std::int64_t max_table) {
  GroundFactor out;
  for (const auto* f : fs)
    for (int v : f->vars)
      if (std::find(out.vars.begin(), out.vars.end(), v) == out.vars.end())
        out.vars.push_back(v);
  std::sort(out.vars.begin(), out.vars.end());
  auto radices = factor_radices(g, out);
  std::int64_t size = std::int64_t(table_size(radices));
  if (size > max_table)
    throw GuardError("factor table of " + std::to_string(size) +
                     " entries exceeds the guard");
  out.table.assign(std::size_t(size), Weight::one());
  std::vector<int> tuple;
  for (std::size_t idx = 0; idx < out.table.size(); ++idx) {
    index_to_tuple(radices, idx, tuple);
    Weight w = Weight::one();
    for (const auto* f : fs) {
      std::vector<int> sub;
      for (int v : f->vars) {
        auto pos = std::lower_bound(out.vars.begin(), out.vars.end(), v);
        sub.push_back(tuple[pos - out.vars.begin()]);
      }
      w *= f->table[tuple_to_index(factor_radices(g, *f), sub)];
    }
    out.table[idx] = w;
  }
  return out;
}

GroundFactor sum_out_var(const GroundFactorGraph& g, const GroundFactor& f,
                         int var) {
  GroundFactor out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (f.vars[i] == var)
      pos = i;
    else
      out.vars.push_back(f.vars[i]);
  }
  auto in_rad = factor_radices(g, f);
  auto out_rad = factor_radices(g, out);
  out.table.assign(table_size(out_rad), Weight::zero());
  std::vector<int> tuple;
  for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
    index_to_tuple(in_rad, idx, tuple);
    std::vector<int> sub;
    for (std::size_t i = 0; i < tuple.size(); ++i)
      if (i != pos) sub.push_back(tuple[i]);
    out.table[tuple_to_index(out_rad, sub)] += f.table[idx];
  }
  return out;
}

// min-fill elimination order over an interaction graph; the work budget
// bounds the quadratic scan so oversized graphs fail fast instead of hanging
std::vector<int> min_fill_order(const GroundFactorGraph& g,
                                std::vector<std::set<int>> adj,
                                const std::set<int>& keep,
                                std::int64_t work_budget) {
  std::vector<int> order;
  std::set<int> remaining;
  for (std::size_t v = 0; v < adj.size(); ++v)
    if (!keep.count(int(v))) remaining.insert(int(v));
  std::int64_t work = 0;
  while (!remaining.empty()) {
    int best = -1;
    std::int64_t best_fill = -1;
    for (int v : remaining) {
      std::int64_t fill = 0;
      std::vector<int> nbrs(adj[v].begin(), adj[v].end());
      work += std::int64_t(nbrs.size()) * std::int64_t(nbrs.size()) / 2;
      if (work > work_budget)
        throw GuardError("elimination ordering exceeds the work guard");
      for (std::size_t i = 0; i < nbrs.size(); ++i)
        for (std::size_t j = i + 1; j < nbrs.size(); ++j)
          if (!adj[nbrs[i]].count(nbrs[j])) ++fill;
      if (best < 0 || fill < best_fill ||
          (fill == best_fill && g.var_names[v] < g.var_names[best])) {
        best = v;
        best_fill = fill;
      }
    }
    order.push_back(best);
    std::vector<int> nbrs(adj[best].begin(), adj[best].end());
    for (std::size_t i = 0; i < nbrs.size(); ++i)
      for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
        adj[nbrs[i]].insert(nbrs[j]);
        adj[nbrs[j]].insert(nbrs[i]);
      }
    for (int u : nbrs) adj[u].erase(best);
    adj[best].clear();
    remaining.erase(best);
  }
  return order;
}

std::vector<std::set<int>> interaction_graph(const GroundFactorGraph& g) {
  std::vector<std::set<int>> adj(g.var_names.size());
  for (const auto& f : g.factors)
    for (std::size_t i = 0; i < f.vars.size(); ++i)
      for (std::size_t j = i + 1; j < f.vars.size(); ++j) {
        adj[f.vars[i]].insert(f.vars[j]);
        adj[f.vars[j]].insert(f.vars[i]);
      }
  return adj;
}

}  // namespace

int GroundFactorGraph::var(const std::string& name) const {
  auto it = var_index.find(name);
  if (it == var_index.end())
    throw InferenceError("unknown ground randvar " + name);
  return it->second;
}

std::vector<int> GroundFactorGraph::radices() const {
  std::vector<int> r;
  for (const auto& range : var_ranges) r.push_back(int(range.size()));
  return r;
}

std::string ground_key(const Prv& term) {
  std::vector<std::string> consts;
  for (const auto& p : term.params) {
    if (!p.is_constant)
      throw InferenceError("query term " + term.str() + " is not ground");
    consts.push_back(p.name);
  }
  return ground_name(term.relation, consts);
}

GroundFactorGraph ground_model(const Model& m,
                               const std::vector<EvidenceItem>& evidence) {
  GroundFactorGraph g;
  for (const auto& pf : m.parfactors) {
    auto counted = pf.counted_logvars();
    // each counting randvar ranges over a set fixed by the free logvars; a
    // difference between two counted logvars has no such reading
    for (const auto& [i, j] : pf.constraint.diffs) {
      bool ci = std::find(counted.begin(), counted.end(),
                          pf.constraint.logvars[std::size_t(i)]) !=
                counted.end();
      bool cj = std::find(counted.begin(), counted.end(),
                          pf.constraint.logvars[std::size_t(j)]) !=
                counted.end();
      if (ci && cj)
        throw InferenceError(
            "grounding does not support a difference between two counting "
            "randvars");
    }
    auto tuples = expand_tuples(pf.constraint, m.domains);
    auto free = pf.free_logvars();
    std::vector<int> free_idx, counted_idx;
    for (const auto& lv : free) free_idx.push_back(pf.constraint.index_of(lv));
    for (const auto& lv : counted)
      counted_idx.push_back(pf.constraint.index_of(lv));

    // group tuples by the free-logvar projection
    std::map<std::vector<int>, std::vector<std::vector<int>>> groups;
    for (const auto& t : tuples) {
      std::vector<int> key;
      for (int i : free_idx) key.push_back(t[i]);
      groups[key].push_back(t);
    }

    for (const auto& [key, group] : groups) {
      auto const_of = [&](const Term& p, const std::vector<int>& tuple) {
        if (p.is_constant) return p.name;
        int ci = pf.constraint.index_of(p.name);
        return m.domain(pf.constraint.domains[ci]).constants[tuple[ci]];
      };
      GroundFactor f;
      std::vector<std::vector<int>> arg_slots;  // graph var ids per arg
      for (const auto& a : pf.args) {
        std::vector<int> slots;
        if (!a.is_crv()) {
          std::vector<std::string> consts;
          for (const auto& p : a.prv.params)
            consts.push_back(const_of(p, group.front()));
          slots.push_back(register_var(
              g, ground_name(a.prv.relation, consts), a.prv.range));
        } else {
          // one ground randvar per admitted value of the counted logvar
          std::set<std::string> seen;
          for (const auto& t : group) {
            std::vector<std::string> consts;
            for (const auto& p : a.prv.params) consts.push_back(const_of(p, t));
            std::string name = ground_name(a.prv.relation, consts);
            if (seen.insert(name).second)
              slots.push_back(register_var(g, name, a.prv.range));
          }
        }
        arg_slots.push_back(std::move(slots));
      }
      bool has_crv = !counted.empty();
      if (!has_crv) {
        for (const auto& s : arg_slots) f.vars.push_back(s.front());
        f.table = pf.table;
      } else {
        for (const auto& s : arg_slots)
          for (int v : s) f.vars.push_back(v);
        auto radices = factor_radices(g, f);
        auto pf_radices = arg_range_sizes(m, pf);
        int r = int(pf.args[0].prv.range.size());
        f.table.assign(table_size(radices), Weight::zero());
        std::vector<int> tuple;
        for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
          index_to_tuple(radices, idx, tuple);
          std::vector<int> pf_tuple;
          std::size_t off = 0;
          for (std::size_t ai = 0; ai < pf.args.size(); ++ai) {
            if (!pf.args[ai].is_crv()) {
              pf_tuple.push_back(tuple[off]);
              off += 1;
            } else {
              r = int(pf.args[ai].prv.range.size());
              std::vector<int> hist(r, 0);
              for (std::size_t k = 0; k < arg_slots[ai].size(); ++k)
                ++hist[tuple[off + k]];
              off += arg_slots[ai].size();
              std::vector<std::vector<int>> hists;
              enumerate_histograms(int(arg_slots[ai].size()), r, hists);
              auto hit = std::find(hists.begin(), hists.end(), hist);
              pf_tuple.push_back(int(hit - hists.begin()));
            }
          }
          f.table[idx] = pf.table[tuple_to_index(pf_radices, pf_tuple)];
        }
      }
      g.factors.push_back(std::move(f));
    }
  }

  // evidence: zero out inconsistent rows
  for (const auto& ev : evidence) {
    for (const auto& name : gr_instances(ev.prv, ev.constraint, m.domains)) {
      auto it = g.var_index.find(name);
      if (it == g.var_index.end())
        throw InferenceError("evidence references unknown ground randvar " +
                             name);
      int var = it->second;
      for (auto& f : g.factors) {
        auto pos = std::find(f.vars.begin(), f.vars.end(), var);
        if (pos == f.vars.end()) continue;
        std::size_t vi = std::size_t(pos - f.vars.begin());
        auto radices = factor_radices(g, f);
        std::vector<int> tuple;
        for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
          index_to_tuple(radices, idx, tuple);
          if (tuple[vi] != ev.value) f.table[idx] = Weight::zero();
        }
      }
    }
  }
  return g;
}

Distribution brute_marginal(const GroundFactorGraph& g, const Query& q,
                            const OracleLimits& limits) {
  std::vector<int> qvars;
  std::vector<std::vector<std::string>> qranges;
  for (const auto& t : q.terms) {
    qvars.push_back(g.var(ground_key(t)));
    qranges.push_back(g.var_ranges[qvars.back()]);
  }
  auto radices = g.radices();
  std::int64_t states = 1;
  for (int r : radices) {
    states *= r;
    if (states > limits.max_states)
      throw GuardError("joint state space exceeds the brute-force guard");
  }
  std::vector<int> qradices;
  for (const auto& r : qranges) qradices.push_back(int(r.size()));
  std::vector<Weight> acc(table_size(qradices), Weight::zero());
  std::vector<int> state(radices.size(), 0);
  std::vector<int> qtuple(qvars.size());
  for (std::int64_t s = 0; s < states; ++s) {
    Weight w = Weight::one();
    for (const auto& f : g.factors) {
      std::vector<int> sub;
      for (int v : f.vars) sub.push_back(state[v]);
      w *= f.table[tuple_to_index(factor_radices(g, f), sub)];
      if (w.is_zero()) break;
    }
    if (!w.is_zero()) {
      for (std::size_t i = 0; i < qvars.size(); ++i)
        qtuple[i] = state[qvars[i]];
      acc[tuple_to_index(qradices, qtuple)] += w;
    }
    // increment mixed-radix state
    for (std::size_t i = radices.size(); i-- > 0;) {
      if (++state[i] < radices[i]) break;
      state[i] = 0;
    }
  }
  return Distribution::normalized(qranges, acc);
}

Distribution ve_marginal(const GroundFactorGraph& g, const Query& q,
                         const std::vector<std::string>& order,
                         const OracleLimits& limits) {
  std::vector<int> qvars;
  std::vector<std::vector<std::string>> qranges;
  for (const auto& t : q.terms) {
    qvars.push_back(g.var(ground_key(t)));
    qranges.push_back(g.var_ranges[qvars.back()]);
  }
  std::vector<int> elim;
  if (!order.empty()) {
    for (const auto& name : order) elim.push_back(g.var(name));
  } else {
    std::set<int> keep(qvars.begin(), qvars.end());
    elim = min_fill_order(g, interaction_graph(g), keep, limits.max_order_work);
  }

  std::vector<GroundFactor> work = g.factors;
  for (int v : elim) {
    if (std::find(qvars.begin(), qvars.end(), v) != qvars.end()) continue;
    std::vector<const GroundFactor*> touching;
    std::vector<GroundFactor> rest;
    for (auto& f : work) {
      if (std::find(f.vars.begin(), f.vars.end(), v) != f.vars.end())
        touching.push_back(&f);
      else
        rest.push_back(f);
    }
    if (touching.empty()) continue;
    GroundFactor merged = multiply_factors(g, touching, limits.max_table);
    rest.push_back(sum_out_var(g, merged, v));
    work = std::move(rest);
  }
  std::vector<const GroundFactor*> final_ptrs;
  for (auto& f : work) final_ptrs.push_back(&f);
  GroundFactor joint = multiply_factors(g, final_ptrs, limits.max_table);

  // marginalise any leftover non-query vars, then order columns per query
  for (int v : std::vector<int>(joint.vars)) {
    if (std::find(qvars.begin(), qvars.end(), v) == qvars.end())
      joint = sum_out_var(g, joint, v);
  }
  std::vector<int> qradices;
  for (const auto& r : qranges) qradices.push_back(int(r.size()));
  std::vector<Weight> acc(table_size(qradices), Weight::zero());
  auto jrad = factor_radices(g, joint);
  std::vector<int> tuple, qtuple(qvars.size());
  for (std::size_t idx = 0; idx < joint.table.size(); ++idx) {
    index_to_tuple(jrad, idx, tuple);
    for (std::size_t i = 0; i < qvars.size(); ++i) {
      auto pos =
          std::find(joint.vars.begin(), joint.vars.end(), qvars[i]);
      qtuple[i] = tuple[pos - joint.vars.begin()];
    }
    acc[tuple_to_index(qradices, qtuple)] += joint.table[idx];
  }
  return Distribution::normalized(qranges, acc);
}

std::vector<Distribution> jt_answer(const Model& m,
                                    const std::vector<Query>& queries,
                                    const std::vector<EvidenceItem>& evidence,
                                    const OracleLimits& limits) {
  GroundFactorGraph g = ground_model(m, evidence);
  auto adj = interaction_graph(g);
  auto order = min_fill_order(g, adj, {}, limits.max_order_work);

  // elimination cliques
  std::vector<std::set<int>> cliques;
  {
    auto work = adj;
    for (int v : order) {
      std::set<int> clique = work[v];
      clique.insert(v);
      std::vector<int> nbrs(work[v].begin(), work[v].end());
      for (std::size_t i = 0; i < nbrs.size(); ++i)
        for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
          work[nbrs[i]].insert(nbrs[j]);
          work[nbrs[j]].insert(nbrs[i]);
        }
      for (int u : nbrs) work[u].erase(v);
      work[v].clear();
      cliques.push_back(std::move(clique));
    }
    // keep maximal cliques only
    std::vector<std::set<int>> maximal;
    for (std::size_t i = 0; i < cliques.size(); ++i) {
      bool subsumed = false;
      for (std::size_t j = 0; j < cliques.size(); ++j)
        if (i != j &&
            std::includes(cliques[j].begin(), cliques[j].end(),
                          cliques[i].begin(), cliques[i].end()) &&
            (cliques[j].size() > cliques[i].size() || j < i))
          subsumed = true;
      if (!subsumed) maximal.push_back(cliques[i]);
    }
    cliques = std::move(maximal);
  }
  if (cliques.empty()) cliques.push_back({});

  for (const auto& c : cliques) {
    std::int64_t size = 1;
    for (int v : c) size *= std::int64_t(g.var_ranges[v].size());
    if (size > limits.max_table)
      throw GuardError("jtree clique exceeds the guard");
  }

  // maximum spanning tree on separator sizes (Kruskal, deterministic)
  int n = int(cliques.size());
  std::vector<std::tuple<int, int, int>> edges;  // (-sepsize, i, j)
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      std::vector<int> inter;
      std::set_intersection(cliques[i].begin(), cliques[i].end(),
                            cliques[j].begin(), cliques[j].end(),
                            std::back_inserter(inter));
      edges.emplace_back(-int(inter.size()), i, j);
    }
  std::sort(edges.begin(), edges.end());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::vector<int>> nbs(n);
  for (auto [w, i, j] : edges) {
    if (find(i) == find(j)) continue;
    parent[find(i)] = find(j);
    nbs[i].push_back(j);
    nbs[j].push_back(i);
  }

  // assign each factor to the first covering clique
  std::vector<std::vector<const GroundFactor*>> assigned(n);
  for (const auto& f : g.factors) {
    bool placed = false;
    for (int i = 0; i < n && !placed; ++i) {
      bool covers = true;
      for (int v : f.vars)
        if (!cliques[i].count(v)) covers = false;
      if (covers) {
        assigned[i].push_back(&f);
        placed = true;
      }
    }
    if (!placed) throw InferenceError("factor not covered by any clique");
  }

  // two-pass sum-product: collect to root 0, then distribute
  std::vector<std::map<int, GroundFactor>> inbox(n);
  auto message = [&](int i, int j) {
    std::vector<GroundFactor> own;
    std::vector<const GroundFactor*> parts = assigned[i];
    for (const auto& [src, msg] : inbox[i])
      if (src != j) parts.push_back(&msg);
    GroundFactor belief = multiply_factors(g, parts, limits.max_table);
    std::vector<int> sep;
    std::set_intersection(cliques[i].begin(), cliques[i].end(),
                          cliques[j].begin(), cliques[j].end(),
                          std::back_inserter(sep));
    for (int v : std::vector<int>(belief.vars))
      if (!std::binary_search(sep.begin(), sep.end(), v))
        belief = sum_out_var(g, belief, v);
    return belief;
  };
  // inward (post-order), outward (pre-order)
  std::vector<int> po;
  std::vector<std::pair<int, int>> stack{{0, -1}};
  std::vector<int> par(n, -1);
  while (!stack.empty()) {
    auto [u, p] = stack.back();
    stack.pop_back();
    po.push_back(u);
    par[u] = p;
    for (int v : nbs[u])
      if (v != p) stack.emplace_back(v, u);
  }
  for (auto it = po.rbegin(); it != po.rend(); ++it)
    if (par[*it] >= 0) inbox[par[*it]].emplace(*it, message(*it, par[*it]));
  for (int u : po)
    for (int v : nbs[u])
      if (v != par[u]) inbox[v].emplace(u, message(u, v));

  std::vector<Distribution> out;
  for (const auto& q : queries) {
    std::vector<int> qvars;
    std::vector<std::vector<std::string>> qranges;
    for (const auto& t : q.terms) {
      qvars.push_back(g.var(ground_key(t)));
      qranges.push_back(g.var_ranges[qvars.back()]);
    }
    int home = -1;
    for (int i = 0; i < n && home < 0; ++i) {
      bool covers = true;
      for (int v : qvars)
        if (!cliques[i].count(v)) covers = false;
      if (covers) home = i;
    }
    if (home < 0)
      throw InferenceError("query not covered by a single clique");
    std::vector<const GroundFactor*> parts = assigned[home];
    for (const auto& [src, msg] : inbox[home]) parts.push_back(&msg);
    GroundFactor belief = multiply_factors(g, parts, limits.max_table);
    for (int v : std::vector<int>(belief.vars))
      if (std::find(qvars.begin(), qvars.end(), v) == qvars.end())
        belief = sum_out_var(g, belief, v);
    std::vector<int> qradices;
    for (const auto& r : qranges) qradices.push_back(int(r.size()));
    std::vector<Weight> acc(table_size(qradices), Weight::zero());
    auto brad = factor_radices(g, belief);
    std::vector<int> tuple, qtuple(qvars.size());
    for (std::size_t idx = 0; idx < belief.table.size(); ++idx) {
      index_to_tuple(brad, idx, tuple);
      for (std::size_t i = 0; i < qvars.size(); ++i) {
        auto pos =
            std::find(belief.vars.begin(), belief.vars.end(), qvars[i]);
        qtuple[i] = tuple[pos - belief.vars.begin()];
      }
      acc[tuple_to_index(qradices, qtuple)] += belief.table[idx];
    }
    out.push_back(Distribution::normalized(qranges, acc));
  }
  return out;
}

}  // namespace liftedq
