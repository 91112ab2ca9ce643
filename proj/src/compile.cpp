#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "liftedq/errors.hpp"
#include "liftedq/wfomc.hpp"

namespace liftedq {

namespace {

// Raised when no rule applies but naming one more constant of a domain would
// open up the ground rules; compilation restarts with the constant carved out.
struct CarveRequest {
  std::string domain;
  int id;
};

struct CLit {
  bool pos = true;
  std::string pred;
  std::vector<int> vars;
};

struct CClause {
  std::vector<int> var_cell;                // cell id per clause variable
  std::set<std::pair<int, int>> diffs;      // kept only for same-cell pairs
  std::vector<CLit> lits;
};

struct CHist {
  std::string pred;
  std::vector<Weight> table;
  std::vector<int> cells_left;
  std::vector<int> count_vars;
  std::int64_t fixed = 0;
};

struct Pend {
  std::string pred;
  std::vector<int> cells;
  char diag = ' ';  // 'D' distinct pair, 'E' equal pair
};

struct Theory {
  std::vector<CClause> clauses;
  std::vector<CHist> hists;
  std::map<std::string, Pend> pending;  // atom sets not yet accounted for
};

std::string akey(const std::string& pred, const std::vector<int>& cells,
                 char diag) {
  std::string out = pred + "|";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(cells[i]);
  }
  if (diag != ' ') out += diag;
  return out;
}

struct Compiler {
  const WfomcProblem& p;
  const CompileOptions& opts;
  Circuit c;
  std::map<std::string, std::set<int>> named;
  std::map<std::pair<std::string, int>, int> singles;
  std::map<std::string, int> root_of;

  Compiler(const WfomcProblem& prob, const CompileOptions& o)
      : p(prob), opts(o) {}

  int new_cell(Cell cell) {
    c.cells.push_back(std::move(cell));
    return int(c.cells.size()) - 1;
  }

  int new_node(CNode n) {
    if (std::int64_t(c.nodes.size()) >= opts.node_budget)
      throw GuardError("circuit node budget exceeded");
    c.nodes.push_back(std::move(n));
    return int(c.nodes.size()) - 1;
  }

  bool small(int cell) const {
    auto k = c.cells[std::size_t(cell)].kind;
    return k == Cell::Singleton || k == Cell::Indiv;
  }
  bool generic(int cell) const { return !small(cell); }

  std::int64_t numeric_size(int cell) const {
    const Cell& cc = c.cells[std::size_t(cell)];
    switch (cc.kind) {
      case Cell::Singleton:
      case Cell::Indiv:
        return 1;
      case Cell::Root:
        return p.domains.at(cc.domain).size() -
               std::int64_t(cc.excluded.size());
      default:
        throw GuardError("a counted slice cannot be resolved to a fixed size");
    }
  }

  Mult pend_mult(const Pend& pe) const {
    Mult m;
    if (pe.diag == 'D') {
      m.factors.push_back({pe.cells[0], 2});
    } else if (pe.diag == 'E') {
      m.factors.push_back({pe.cells[0], 1});
    } else {
      for (int cell : pe.cells) m.factors.push_back({cell, 1});
    }
    return m;
  }

  std::pair<std::vector<int>, char> lit_parts(const CClause& cl,
                                              const CLit& l) const {
    std::vector<int> cells;
    for (int v : l.vars) cells.push_back(cl.var_cell[std::size_t(v)]);
    char diag = ' ';
    if (l.vars.size() == 2) {
      if (l.vars[0] == l.vars[1])
        diag = 'E';
      else if (cells[0] == cells[1])
        diag = 'D';
    }
    return {cells, diag};
  }

  std::string lit_key(const CClause& cl, const CLit& l) const {
    auto [cells, diag] = lit_parts(cl, l);
    return akey(l.pred, cells, diag);
  }

  // -- construction ----------------------------------------------------------

  void name_varset(const std::string& dom, const Constraint::VarSet& vs) {
    if (vs.full) return;
    int n = p.domains.at(dom).size();
    if (std::int64_t(vs.ids.size()) * 2 <= n) {
      named[dom].insert(vs.ids.begin(), vs.ids.end());
    } else {
      std::set<int> listed(vs.ids.begin(), vs.ids.end());
      for (int i = 0; i < n; ++i)
        if (!listed.count(i)) named[dom].insert(i);
    }
  }

  void collect_names() {
    for (const auto& [dom, spec] : p.domains) named[dom];
    for (const auto& cl : p.clauses) {
      const Constraint& ct = cl.constraint;
      if (ct.explicit_form) {
        for (const auto& t : ct.tuples)
          for (std::size_t i = 0; i < t.size(); ++i)
            named[ct.domains[i]].insert(t[i]);
      } else {
        for (std::size_t i = 0; i < ct.logvars.size(); ++i)
          name_varset(ct.domains[i], ct.allowed[i]);
      }
      for (const auto& l : cl.literals)
        for (std::size_t i = 0; i < l.params.size(); ++i)
          if (l.params[i].is_constant) {
            const std::string& dom = p.preds.at(l.pred)[i];
            int id = p.domains.at(dom).index_of(l.params[i].name);
            if (id < 0)
              throw InferenceError("unknown constant " + l.params[i].name);
            named[dom].insert(id);
          }
    }
    for (const auto& h : p.hist_factors)
      name_varset(h.constraint.domains[0], h.constraint.allowed[0]);
  }

  void build_cells() {
    for (const auto& [dom, ids] : named) {
      for (int id : ids) {
        Cell s;
        s.kind = Cell::Singleton;
        s.domain = dom;
        s.constant = id;
        singles[{dom, id}] = new_cell(s);
      }
      Cell r;
      r.kind = Cell::Root;
      r.domain = dom;
      r.excluded.assign(ids.begin(), ids.end());
      root_of[dom] = new_cell(r);
    }
  }

  // Candidate cells admitted by an allowed set: the compatible singletons,
  // plus the root when it lies inside the set and is non-empty.
  std::vector<int> var_cells(const std::string& dom,
                             const Constraint::VarSet& vs) const {
    std::vector<int> out;
    const auto& nm = named.at(dom);
    int n = p.domains.at(dom).size();
    bool root_ok = true;
    if (vs.full) {
      for (int id : nm) out.push_back(singles.at({dom, id}));
    } else {
      std::set<int> listed(vs.ids.begin(), vs.ids.end());
      for (int id : nm)
        if (listed.count(id)) out.push_back(singles.at({dom, id}));
      for (int i = 0; i < n && root_ok; ++i)
        if (!nm.count(i) && !listed.count(i)) root_ok = false;
    }
    if (root_ok && std::int64_t(nm.size()) < n)
      out.push_back(root_of.at(dom));
    return out;
  }

  static void merge_vars(CClause& cl, int u, int v) {
    // v := u, drop v, shift indices above v
    for (auto& l : cl.lits)
      for (auto& x : l.vars) {
        if (x == v) x = u;
        if (x > v) --x;
      }
    std::set<std::pair<int, int>> nd;
    for (auto [a, b] : cl.diffs) {
      if (a == v) a = u;
      if (b == v) b = u;
      if (a > v) --a;
      if (b > v) --b;
      if (a != b) nd.insert({std::min(a, b), std::max(a, b)});
    }
    cl.diffs = std::move(nd);
    cl.var_cell.erase(cl.var_cell.begin() + v);
  }

  void finish_clause(CClause cl, Theory& th) {
    // merge variables denoting the same single element
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t u = 0; u < cl.var_cell.size() && !again; ++u)
        for (std::size_t v = u + 1; v < cl.var_cell.size() && !again; ++v)
          if (cl.var_cell[u] == cl.var_cell[v] && small(cl.var_cell[u])) {
            if (cl.diffs.count({int(u), int(v)})) return;  // inadmissible
            merge_vars(cl, int(u), int(v));
            again = true;
          }
    }
    // make same-cell pairs pairwise distinct or merged
    for (std::size_t u = 0; u < cl.var_cell.size(); ++u)
      for (std::size_t v = u + 1; v < cl.var_cell.size(); ++v)
        if (cl.var_cell[u] == cl.var_cell[v] && generic(cl.var_cell[u]) &&
            !cl.diffs.count({int(u), int(v)})) {
          CClause with = cl;
          with.diffs.insert({int(u), int(v)});
          finish_clause(std::move(with), th);
          CClause merged = cl;
          merge_vars(merged, int(u), int(v));
          finish_clause(std::move(merged), th);
          return;
        }
    // literal cleanup
    std::vector<CLit> lits;
    for (const auto& l : cl.lits) {
      bool dup = false, taut = false;
      for (const auto& o : lits) {
        if (o.pred == l.pred && o.vars == l.vars) {
          if (o.pos == l.pos)
            dup = true;
          else
            taut = true;
        }
      }
      if (taut) return;  // always satisfied
      if (!dup) lits.push_back(l);
    }
    cl.lits = std::move(lits);
    th.clauses.push_back(std::move(cl));
  }

  void convert_clause(const WClause& wc, Theory& th) {
    const Constraint& ct = wc.constraint;
    std::vector<std::vector<int>> assigns;  // cell per constraint logvar
    if (ct.explicit_form) {
      for (const auto& t : expand_tuples(ct, p.domains)) {
        std::vector<int> a;
        for (std::size_t i = 0; i < t.size(); ++i)
          a.push_back(singles.at({ct.domains[i], t[i]}));
        assigns.push_back(std::move(a));
      }
    } else {
      std::vector<std::vector<int>> cand;
      for (std::size_t i = 0; i < ct.logvars.size(); ++i)
        cand.push_back(var_cells(ct.domains[i], ct.allowed[i]));
      assigns.push_back({});
      std::vector<std::vector<int>> next;
      for (const auto& cs : cand) {
        next.clear();
        for (const auto& a : assigns)
          for (int cell : cs) {
            next.push_back(a);
            next.back().push_back(cell);
          }
        assigns = next;
        if (std::int64_t(assigns.size()) > opts.node_budget)
          throw GuardError("clause grounding exceeds the node budget");
      }
    }
    for (const auto& a : assigns) {
      CClause cl;
      cl.var_cell = a;
      bool ok = true;
      if (!ct.explicit_form) {
        for (auto [i, j] : ct.diffs) {
          if (a[std::size_t(i)] != a[std::size_t(j)]) continue;  // disjoint
          if (small(a[std::size_t(i)])) {
            ok = false;  // the same element cannot differ from itself
            break;
          }
          cl.diffs.insert({i, j});
        }
      }
      if (!ok) continue;
      for (const auto& l : wc.literals) {
        CLit cl2;
        cl2.pos = l.positive;
        cl2.pred = l.pred;
        for (std::size_t i = 0; i < l.params.size(); ++i) {
          if (l.params[i].is_constant) {
            const std::string& dom = p.preds.at(l.pred)[i];
            int id = p.domains.at(dom).index_of(l.params[i].name);
            int cell = singles.at({dom, id});
            int v = -1;
            for (std::size_t k = 0; k < cl.var_cell.size(); ++k)
              if (cl.var_cell[k] == cell) {
                v = int(k);
                break;
              }
            if (v < 0) {
              v = int(cl.var_cell.size());
              cl.var_cell.push_back(cell);
            }
            cl2.vars.push_back(v);
          } else {
            cl2.vars.push_back(ct.index_of(l.params[i].name));
          }
        }
        cl.lits.push_back(std::move(cl2));
      }
      finish_clause(std::move(cl), th);
    }
  }

  std::vector<int> partition(const std::string& dom) const {
    std::vector<int> out;
    for (int id : named.at(dom)) out.push_back(singles.at({dom, id}));
    out.push_back(root_of.at(dom));
    return out;
  }

  void build_pending(Theory& th) const {
    for (const auto& [pred, doms] : p.preds) {
      if (doms.size() > 2)
        throw GuardError("predicates of arity above two are not compilable");
      if (doms.empty()) {
        th.pending[akey(pred, {}, ' ')] = Pend{pred, {}, ' '};
        continue;
      }
      if (doms.size() == 1) {
        for (int cell : partition(doms[0]))
          th.pending[akey(pred, {cell}, ' ')] = Pend{pred, {cell}, ' '};
        continue;
      }
      for (int a : partition(doms[0]))
        for (int b : partition(doms[1])) {
          if (a != b) {
            th.pending[akey(pred, {a, b}, ' ')] = Pend{pred, {a, b}, ' '};
          } else if (small(a)) {
            th.pending[akey(pred, {a, b}, 'E')] = Pend{pred, {a, b}, 'E'};
          } else {
            th.pending[akey(pred, {a, b}, 'D')] = Pend{pred, {a, b}, 'D'};
            th.pending[akey(pred, {a, b}, 'E')] = Pend{pred, {a, b}, 'E'};
          }
        }
    }
  }

  // -- node helpers ----------------------------------------------------------

  int make_and(std::vector<int> children) {
    if (children.size() == 1) return children[0];
    CNode n;
    n.kind = CNode::And;
    n.children = std::move(children);
    return new_node(std::move(n));
  }

  int leaf(const std::string& pred, bool pos, const Pend& pe) {
    CNode n;
    n.kind = CNode::Leaf;
    n.pred = pred;
    n.positive = pos;
    n.mult = pend_mult(pe);
    n.atom_key = akey(pe.pred, pe.cells, pe.diag);
    return new_node(std::move(n));
  }

  int free_leaf(const Pend& pe) {
    CNode n;
    n.kind = CNode::FreeLeaf;
    n.pred = pe.pred;
    n.mult = pend_mult(pe);
    n.atom_key = akey(pe.pred, pe.cells, pe.diag);
    return new_node(std::move(n));
  }

  int contra(const CClause& cl) {
    CNode n;
    n.kind = CNode::Contra;
    // group the clause variables per cell; shattering keeps same-cell groups
    // pairwise distinct, so a falling factorial is the exact instance count
    std::map<int, int> per_cell;
    for (int cell : cl.var_cell) ++per_cell[cell];
    for (auto [cell, k] : per_cell) n.mult.factors.push_back({cell, k});
    return new_node(std::move(n));
  }

  int hist_leaf(const CHist& h) {
    CNode n;
    n.kind = CNode::HistLeaf;
    n.pred = h.pred;
    n.table = h.table;
    n.count_vars = h.count_vars;
    n.fixed = int(h.fixed);
    return new_node(std::move(n));
  }

  // -- rule engine -----------------------------------------------------------

  int compile_theory(Theory th) {
    std::vector<int> conj;
    // unit propagation, factoring out emptied clauses as hard constraints
    while (true) {
      bool progressed = false;
      for (auto it = th.clauses.begin(); it != th.clauses.end();) {
        if (it->lits.empty()) {
          conj.push_back(contra(*it));
          it = th.clauses.erase(it);
          progressed = true;
        } else {
          ++it;
        }
      }
      int ui = -1;
      for (std::size_t i = 0; i < th.clauses.size(); ++i) {
        const CClause& cand = th.clauses[i];
        if (cand.lits.size() != 1) continue;
        // a variable outside the literal over a possibly-empty slice guards
        // the clause; it only asserts the literal when the slice is inhabited
        bool guarded = false;
        for (std::size_t v = 0; v < cand.var_cell.size(); ++v) {
          auto kind = c.cells[std::size_t(cand.var_cell[v])].kind;
          if (kind != Cell::CountTrue && kind != Cell::CountFalse) continue;
          if (std::find(cand.lits[0].vars.begin(), cand.lits[0].vars.end(),
                        int(v)) == cand.lits[0].vars.end())
            guarded = true;
        }
        if (guarded) continue;
        ui = int(i);
        break;
      }
      if (ui >= 0) {
        CClause cl = th.clauses[std::size_t(ui)];
        const CLit& l = cl.lits[0];
        auto [cells, diag] = lit_parts(cl, l);
        std::string k = akey(l.pred, cells, diag);
        auto pit = th.pending.find(k);
        if (pit == th.pending.end())
          throw InferenceError("internal: unit over consumed atoms " + k);
        conj.push_back(leaf(l.pred, l.pos, pit->second));
        for (auto& h : th.hists) {
          if (h.pred != l.pred || cells.size() != 1) continue;
          auto cit =
              std::find(h.cells_left.begin(), h.cells_left.end(), cells[0]);
          if (cit == h.cells_left.end()) continue;
          h.cells_left.erase(cit);
          if (l.pos) h.fixed += numeric_size(cells[0]);
        }
        th.pending.erase(pit);
        bool pos = l.pos;
        for (auto it = th.clauses.begin(); it != th.clauses.end();) {
          bool drop = false;
          for (std::size_t j = 0; j < it->lits.size();) {
            if (it->lits[j].pred == l.pred && lit_key(*it, it->lits[j]) == k) {
              if (it->lits[j].pos == pos) {
                drop = true;
                break;
              }
              it->lits.erase(it->lits.begin() + std::ptrdiff_t(j));
            } else {
              ++j;
            }
          }
          if (drop)
            it = th.clauses.erase(it);
          else
            ++it;
        }
        progressed = true;
      }
      if (!progressed) break;
    }
    for (auto it = th.hists.begin(); it != th.hists.end();) {
      if (it->cells_left.empty()) {
        conj.push_back(hist_leaf(*it));
        it = th.hists.erase(it);
      } else {
        ++it;
      }
    }

    if (th.clauses.empty() && th.hists.empty()) {
      for (const auto& [k, pe] : th.pending) conj.push_back(free_leaf(pe));
      return make_and(std::move(conj));
    }

    // independent components over atom-set keys
    std::map<std::string, std::string> par;
    std::function<std::string(const std::string&)> find =
        [&](const std::string& x) -> std::string {
      auto it = par.find(x);
      if (it == par.end()) {
        par[x] = x;
        return x;
      }
      if (it->second == x) return x;
      return it->second = find(it->second);
    };
    auto unite = [&](const std::string& a, const std::string& b) {
      par[find(a)] = find(b);
    };
    auto clause_keys = [&](const CClause& cl) {
      std::vector<std::string> ks;
      for (const auto& l : cl.lits) ks.push_back(lit_key(cl, l));
      return ks;
    };
    for (const auto& cl : th.clauses) {
      auto ks = clause_keys(cl);
      for (std::size_t i = 1; i < ks.size(); ++i) unite(ks[0], ks[i]);
      find(ks[0]);
    }
    for (const auto& h : th.hists) {
      std::vector<std::string> ks;
      for (int cell : h.cells_left) ks.push_back(akey(h.pred, {cell}, ' '));
      for (std::size_t i = 1; i < ks.size(); ++i) unite(ks[0], ks[i]);
      find(ks[0]);
    }
    std::map<std::string, Theory> groups;
    for (const auto& cl : th.clauses)
      groups[find(clause_keys(cl)[0])].clauses.push_back(cl);
    for (const auto& h : th.hists)
      groups[find(akey(h.pred, {h.cells_left[0]}, ' '))].hists.push_back(h);
    for (const auto& [k, pe] : th.pending) {
      if (par.count(k)) {
        auto git = groups.find(find(k));
        if (git != groups.end()) {
          git->second.pending[k] = pe;
          continue;
        }
      }
      conj.push_back(free_leaf(pe));
    }
    if (groups.size() > 1) {
      for (auto& [k, sub] : groups)
        conj.push_back(compile_theory(std::move(sub)));
      return make_and(std::move(conj));
    }
    conj.push_back(compile_core(groups.begin()->second));
    return make_and(std::move(conj));
  }

  // Rewrites every pending key after a cell substitution.
  static void remap_pending(Theory& th,
                            const std::function<Pend(const Pend&)>& f) {
    std::map<std::string, Pend> np;
    for (const auto& [k, pe] : th.pending) {
      Pend q = f(pe);
      np[akey(q.pred, q.cells, q.diag)] = q;
    }
    th.pending = std::move(np);
  }

  int try_unary_decomposition(Theory& th) {
    if (!th.hists.empty()) return -1;
    std::set<int> cells;
    for (const auto& cl : th.clauses)
      for (int cell : cl.var_cell) cells.insert(cell);
    for (int cc : cells) {
      if (!generic(cc)) continue;
      bool ok = true;
      for (const auto& cl : th.clauses) {
        int u = -1, count = 0;
        for (std::size_t v = 0; v < cl.var_cell.size(); ++v)
          if (cl.var_cell[v] == cc) {
            u = int(v);
            ++count;
          }
        if (count != 1) {
          ok = false;
          break;
        }
        for (const auto& l : cl.lits)
          if (std::find(l.vars.begin(), l.vars.end(), u) == l.vars.end()) {
            ok = false;
            break;
          }
        if (!ok) break;
      }
      if (!ok) continue;
      Cell ind;
      ind.kind = Cell::Indiv;
      ind.domain = c.cells[std::size_t(cc)].domain;
      ind.parent = cc;
      int iota = new_cell(ind);
      Theory th2 = th;
      for (auto& cl : th2.clauses)
        for (auto& cell : cl.var_cell)
          if (cell == cc) cell = iota;
      remap_pending(th2, [&](const Pend& pe) {
        Pend q = pe;
        for (auto& cell : q.cells)
          if (cell == cc) cell = iota;
        return q;
      });
      int child = compile_theory(std::move(th2));
      CNode n;
      n.kind = CNode::SetConj;
      n.mult.factors.push_back({cc, 1});
      n.children = {child};
      return new_node(std::move(n));
    }
    return -1;
  }

  int try_pair_decomposition(Theory& th) {
    if (!th.hists.empty() || th.clauses.empty()) return -1;
    for (const auto& cl : th.clauses)
      if (cl.var_cell.size() != 2) return -1;
    int a = th.clauses[0].var_cell[0], b = th.clauses[0].var_cell[1];
    if (a > b) std::swap(a, b);
    if (!generic(a) || !generic(b)) return -1;
    // orientation: which variable plays the first role in each clause
    std::vector<int> uvar(th.clauses.size());
    std::map<std::string, std::vector<bool>> pattern;  // same-cell only
    for (std::size_t i = 0; i < th.clauses.size(); ++i) {
      const CClause& cl = th.clauses[i];
      int x = cl.var_cell[0], y = cl.var_cell[1];
      if (std::min(x, y) != a || std::max(x, y) != b) return -1;
      if (a != b) {
        uvar[i] = cl.var_cell[0] == a ? 0 : 1;
      } else {
        if (!cl.diffs.count({0, 1})) return -1;
        uvar[i] = cl.lits[0].vars[0];
      }
      int u = uvar[i], v = 1 - u;
      for (const auto& l : cl.lits) {
        bool has_u = false, has_v = false;
        for (int x2 : l.vars) (x2 == u ? has_u : has_v) = true;
        if (!has_u || !has_v) return -1;
        if (a == b) {
          std::vector<bool> pat;
          for (int x2 : l.vars) pat.push_back(x2 == u);
          auto it = pattern.find(l.pred);
          if (it == pattern.end())
            pattern[l.pred] = pat;
          else if (it->second != pat)
            return -1;
        }
      }
    }
    Cell ca, cb;
    ca.kind = cb.kind = Cell::Indiv;
    ca.domain = c.cells[std::size_t(a)].domain;
    cb.domain = c.cells[std::size_t(b)].domain;
    ca.parent = a;
    cb.parent = b;
    int ia = new_cell(ca), ib = new_cell(cb);
    Theory th2 = th;
    for (std::size_t i = 0; i < th2.clauses.size(); ++i) {
      CClause& cl = th2.clauses[i];
      cl.var_cell[std::size_t(uvar[i])] = ia;
      cl.var_cell[std::size_t(1 - uvar[i])] = ib;
      cl.diffs.clear();
    }
    remap_pending(th2, [&](const Pend& pe) {
      Pend q = pe;
      if (q.diag == 'D') {
        q.cells = {ia, ib};
        q.diag = ' ';
        return q;
      }
      for (std::size_t i = 0; i < q.cells.size(); ++i)
        q.cells[i] = q.cells[i] == a ? ia : ib;
      return q;
    });
    int child = compile_theory(std::move(th2));
    CNode n;
    n.kind = CNode::SetConj;
    if (a == b)
      n.mult.factors.push_back({a, 2});
    else
      n.mult.factors = {{a, 1}, {b, 1}};
    n.children = {child};
    return new_node(std::move(n));
  }

  int count_atoms(Theory& th, const std::string& pred, int cc) {
    int kv = c.num_count_vars++;
    Cell t, f;
    t.kind = Cell::CountTrue;
    f.kind = Cell::CountFalse;
    t.domain = f.domain = c.cells[std::size_t(cc)].domain;
    t.parent = f.parent = cc;
    t.count_var = f.count_var = kv;
    int T = new_cell(t), F = new_cell(f);

    Theory th2;
    th2.hists = th.hists;
    for (auto& h : th2.hists) {
      auto cit = std::find(h.cells_left.begin(), h.cells_left.end(), cc);
      if (cit == h.cells_left.end()) continue;
      h.cells_left.erase(cit);
      if (h.pred == pred) {
        h.count_vars.push_back(kv);
      } else {
        h.cells_left.push_back(T);
        h.cells_left.push_back(F);
      }
    }
    for (const auto& cl : th.clauses) {
      std::vector<std::size_t> vs;
      for (std::size_t v = 0; v < cl.var_cell.size(); ++v)
        if (cl.var_cell[v] == cc) vs.push_back(v);
      std::size_t combos = std::size_t(1) << vs.size();
      for (std::size_t mask = 0; mask < combos; ++mask) {
        CClause cp = cl;
        for (std::size_t i = 0; i < vs.size(); ++i)
          cp.var_cell[vs[i]] = (mask >> i) & 1 ? F : T;
        std::set<std::pair<int, int>> nd;
        for (auto [x, y] : cp.diffs)
          if (cp.var_cell[std::size_t(x)] == cp.var_cell[std::size_t(y)])
            nd.insert({x, y});
        cp.diffs = std::move(nd);
        bool sat = false;
        std::vector<CLit> lits;
        for (const auto& l : cp.lits) {
          if (l.pred == pred && l.vars.size() == 1 &&
              (cp.var_cell[std::size_t(l.vars[0])] == T ||
               cp.var_cell[std::size_t(l.vars[0])] == F)) {
            bool truth = cp.var_cell[std::size_t(l.vars[0])] == T;
            if (truth == l.pos) {
              sat = true;
              break;
            }
            continue;  // falsified literal drops out
          }
          lits.push_back(l);
        }
        if (sat) continue;
        cp.lits = std::move(lits);
        th2.clauses.push_back(std::move(cp));
      }
    }
    // split pending sets touching the counted cell
    std::map<std::string, Pend> np;
    for (const auto& [k, pe] : th.pending) {
      bool touches = false;
      for (int cell : pe.cells) touches |= cell == cc;
      if (!touches) {
        np[k] = pe;
        continue;
      }
      std::vector<Pend> out;
      if (pe.cells.size() == 1) {
        out.push_back({pe.pred, {T}, ' '});
        out.push_back({pe.pred, {F}, ' '});
      } else if (pe.cells[0] == cc && pe.cells[1] == cc) {
        if (pe.diag == 'E') {
          out.push_back({pe.pred, {T, T}, 'E'});
          out.push_back({pe.pred, {F, F}, 'E'});
        } else {
          out.push_back({pe.pred, {T, T}, 'D'});
          out.push_back({pe.pred, {T, F}, ' '});
          out.push_back({pe.pred, {F, T}, ' '});
          out.push_back({pe.pred, {F, F}, 'D'});
        }
      } else {
        for (int r : {T, F}) {
          Pend q = pe;
          for (auto& cell : q.cells)
            if (cell == cc) cell = r;
          out.push_back(q);
        }
      }
      for (const auto& q : out) np[akey(q.pred, q.cells, q.diag)] = q;
    }
    th2.pending = std::move(np);
    // the slices assert the counted predicate wholesale
    for (int r : {T, F}) {
      CClause u;
      u.var_cell = {r};
      CLit l;
      l.pos = r == T;
      l.pred = pred;
      l.vars = {0};
      u.lits.push_back(l);
      th2.clauses.push_back(std::move(u));
    }
    int child = compile_theory(std::move(th2));
    CNode n;
    n.kind = CNode::CountDisj;
    n.cell = cc;
    n.count_var = kv;
    n.children = {child};
    return new_node(std::move(n));
  }

  int try_counting(Theory& th) {
    struct Cand {
      bool hist;
      int uses;
      std::string pred;
      int cell;
      bool operator<(const Cand& o) const {
        if (hist != o.hist) return hist;
        if (uses != o.uses) return uses > o.uses;
        if (pred != o.pred) return pred < o.pred;
        return cell < o.cell;
      }
    };
    std::set<std::string> hist_preds;
    for (const auto& h : th.hists) hist_preds.insert(h.pred);
    std::map<std::pair<std::string, int>, int> uses;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& cl : th.clauses) {
      std::set<std::pair<std::string, int>> here;
      for (const auto& l : cl.lits)
        if (l.vars.size() == 1 &&
            generic(cl.var_cell[std::size_t(l.vars[0])]))
          here.insert({l.pred, cl.var_cell[std::size_t(l.vars[0])]});
      for (const auto& pc : here) {
        seen.insert(pc);
        ++uses[pc];
      }
    }
    for (const auto& h : th.hists)
      for (int cell : h.cells_left)
        if (generic(cell)) seen.insert({h.pred, cell});
    std::vector<Cand> cands;
    for (const auto& pc : seen) {
      Cand cd;
      cd.hist = hist_preds.count(pc.first) > 0;
      auto uit = uses.find(pc);
      cd.uses = uit == uses.end() ? 0 : uit->second;
      cd.pred = pc.first;
      cd.cell = pc.second;
      cands.push_back(cd);
    }
    if (cands.empty()) return -1;
    std::sort(cands.begin(), cands.end());
    return count_atoms(th, cands[0].pred, cands[0].cell);
  }

  int try_ground_split(Theory& th) {
    std::map<std::string, std::pair<int, Pend>> cnt;
    for (const auto& cl : th.clauses)
      for (const auto& l : cl.lits) {
        auto [cells, diag] = lit_parts(cl, l);
        bool all_small = true;
        for (int cell : cells) all_small &= small(cell);
        if (!all_small) continue;
        auto& e = cnt[akey(l.pred, cells, diag)];
        ++e.first;
        e.second = Pend{l.pred, cells, diag};
      }
    if (cnt.empty()) return -1;
    const std::pair<const std::string, std::pair<int, Pend>>* best = nullptr;
    for (const auto& e : cnt)
      if (!best || e.second.first > best->second.first) best = &e;
    const Pend& pe = best->second.second;
    std::vector<int> kids;
    for (bool sign : {true, false}) {
      Theory br = th;
      CClause u;
      CLit l;
      l.pos = sign;
      l.pred = pe.pred;
      if (pe.diag == 'E') {
        u.var_cell = {pe.cells[0]};
        l.vars = {0, 0};
      } else {
        u.var_cell = pe.cells;
        for (std::size_t i = 0; i < pe.cells.size(); ++i) l.vars.push_back(int(i));
      }
      u.lits.push_back(l);
      br.clauses.push_back(std::move(u));
      kids.push_back(compile_theory(std::move(br)));
    }
    CNode n;
    n.kind = CNode::Or;
    n.atom_key = best->first;
    n.children = std::move(kids);
    return new_node(std::move(n));
  }

  int compile_core(Theory& th) {
    int r = try_unary_decomposition(th);
    if (r >= 0) return r;
    r = try_pair_decomposition(th);
    if (r >= 0) return r;
    r = try_counting(th);
    if (r >= 0) return r;
    r = try_ground_split(th);
    if (r >= 0) return r;
    // ask for one more named constant of a domain still holding a root cell
    std::set<int> cells;
    for (const auto& cl : th.clauses)
      for (int cell : cl.var_cell) cells.insert(cell);
    for (const auto& h : th.hists)
      for (int cell : h.cells_left) cells.insert(cell);
    for (int cell : cells) {
      const Cell& cc = c.cells[std::size_t(cell)];
      if (cc.kind != Cell::Root || numeric_size(cell) < 1) continue;
      int n = p.domains.at(cc.domain).size();
      for (int id = 0; id < n; ++id)
        if (!named.at(cc.domain).count(id))
          throw CarveRequest{cc.domain, id};
    }
    throw GuardError("no compilation rule applies to the residual theory");
  }

  Circuit run(const std::map<std::string, std::set<int>>& extra) {
    named = extra;
    collect_names();
    build_cells();
    Theory th;
    for (const auto& wc : p.clauses) convert_clause(wc, th);
    for (const auto& h : p.hist_factors) {
      CHist ch;
      ch.pred = h.pred;
      ch.table = h.table;
      ch.cells_left =
          var_cells(h.constraint.domains[0], h.constraint.allowed[0]);
      th.hists.push_back(std::move(ch));
    }
    build_pending(th);
    c.root = compile_theory(std::move(th));
    return std::move(c);
  }
};

}  // namespace

Circuit compile(const WfomcProblem& p, const CompileOptions& opts) {
  std::map<std::string, std::set<int>> extra;
  for (int tries = 0; tries < 64; ++tries) {
    Compiler comp(p, opts);
    try {
      return comp.run(extra);
    } catch (const CarveRequest& cr) {
      extra[cr.domain].insert(cr.id);
    }
  }
  throw GuardError("compilation keeps naming constants without converging");
}

}  // namespace liftedq
