#include "liftedq/wfomc.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "liftedq/errors.hpp"
#include "liftedq/ground.hpp"

namespace liftedq {

namespace {

bool is_boolean(const std::vector<std::string>& range) {
  return range.size() == 2;
}

// "Rel(c1,c2)" -> pred name + constant names
void parse_ground_key(const std::string& key, std::string& pred,
                      std::vector<std::string>& consts) {
  auto open = key.find('(');
  if (open == std::string::npos) {
    pred = key;
    consts.clear();
    return;
  }
  pred = key.substr(0, open);
  consts.clear();
  std::string inner = key.substr(open + 1, key.size() - open - 2);
  std::string cur;
  for (char ch : inner) {
    if (ch == ',') {
      consts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) consts.push_back(cur);
}

void declare_pred(WfomcProblem& p, const Model& m, const std::string& rel) {
  if (p.preds.count(rel)) return;
  const RelationSig& sig = m.relation(rel);
  if (!is_boolean(sig.range))
    throw InferenceError("reduction requires a two-valued range for " + rel);
  p.preds[rel] = sig.param_domains;
}

// Two-sided row encoding: P <-> conjunction of the row's literals.
void add_row_clauses(WfomcProblem& p, const std::string& pname,
                     const Constraint& c, const std::vector<WLiteral>& lits,
                     const std::vector<std::string>& pparams) {
  WLiteral phead;
  phead.pred = pname;
  for (const auto& lv : pparams) phead.params.push_back(logvar(lv));

  WClause all;
  all.constraint = c;
  phead.positive = true;
  all.literals.push_back(phead);
  for (auto l : lits) {
    l.positive = !l.positive;
    all.literals.push_back(l);
  }
  p.clauses.push_back(all);

  for (const auto& l : lits) {
    WClause one;
    one.constraint = c;
    phead.positive = false;
    one.literals.push_back(phead);
    one.literals.push_back(l);
    p.clauses.push_back(one);
  }
}

// Parameter atoms whose parameter tuple falls outside the parfactor
// constraint carry no information; pin them false (weight 1) so the counts
// they would otherwise contribute cancel exactly.
void pin_outside(WfomcProblem& p, const Constraint& c, const DomainTable& doms,
                 const std::vector<std::string>& pnames) {
  struct Piece {
    Constraint constraint;
    std::vector<Term> params;  // per original logvar
  };
  std::vector<Piece> pieces;
  std::vector<Term> ident;
  for (const auto& lv : c.logvars) ident.push_back(logvar(lv));
  if (c.explicit_form) {
    Constraint full = Constraint::top(c.logvars, c.domains);
    auto all = expand_tuples(full, doms);
    std::set<std::vector<int>> in(c.tuples.begin(), c.tuples.end());
    Constraint comp = full;
    comp.explicit_form = true;
    for (const auto& t : all)
      if (!in.count(t)) comp.tuples.push_back(t);
    if (!comp.tuples.empty()) pieces.push_back({comp, ident});
  } else {
    for (std::size_t i = 0; i < c.logvars.size(); ++i) {
      if (c.allowed[i].full) continue;
      const DomainSpec& d = doms.at(c.domains[i]);
      std::set<int> in(c.allowed[i].ids.begin(), c.allowed[i].ids.end());
      std::vector<int> out;
      for (int id = 0; id < d.size(); ++id)
        if (!in.count(id)) out.push_back(id);
      if (out.empty()) continue;
      Constraint pc = Constraint::top(c.logvars, c.domains);
      pc.allowed[i].full = false;
      pc.allowed[i].ids = out;
      pieces.push_back({pc, ident});
    }
    for (auto [i, j] : c.diffs) {
      std::vector<std::string> lvs, ds;
      for (std::size_t k = 0; k < c.logvars.size(); ++k)
        if (int(k) != j) {
          lvs.push_back(c.logvars[k]);
          ds.push_back(c.domains[k]);
        }
      std::vector<Term> params = ident;
      params[std::size_t(j)] = logvar(c.logvars[std::size_t(i)]);
      pieces.push_back({Constraint::top(lvs, ds), params});
    }
  }
  for (const auto& piece : pieces)
    for (const auto& pn : pnames) {
      WLiteral l;
      l.positive = false;
      l.pred = pn;
      l.params = piece.params;
      WClause cl;
      cl.constraint = piece.constraint;
      cl.literals.push_back(l);
      p.clauses.push_back(cl);
    }
}

void reduce_plain(WfomcProblem& p, const Model& m, const Parfactor& g) {
  std::vector<std::string> pparams = g.constraint.logvars;
  std::vector<std::string> pdoms = g.constraint.domains;
  auto rad = arg_range_sizes(m, g);
  std::vector<int> row;
  std::vector<std::string> pnames;
  for (std::size_t r = 0; r < g.table.size(); ++r) {
    index_to_tuple(rad, r, row);
    std::string pname = "P_" + g.name + "_" + std::to_string(r);
    pnames.push_back(pname);
    p.preds[pname] = pdoms;
    p.w_true[pname] = g.table[r];
    std::vector<WLiteral> lits;
    for (std::size_t a = 0; a < g.args.size(); ++a) {
      WLiteral l;
      l.positive = row[a] == 0;
      l.pred = g.args[a].prv.relation;
      l.params = g.args[a].prv.params;
      lits.push_back(l);
    }
    add_row_clauses(p, pname, g.constraint, lits, pparams);
  }
  pin_outside(p, g.constraint, m.domains, pnames);
}

void reduce_hist(WfomcProblem& p, const Model& m, const Parfactor& g) {
  const Arg& a = g.args[0];
  std::int64_t n = crv_instance_count(m, g, a.counted_logvar);
  WfomcProblem::HistFactor h;
  h.pred = a.prv.relation;
  h.constraint = g.constraint;
  // histogram enumeration runs from all-true downwards; reindex by true count
  h.table.assign(std::size_t(n) + 1, Weight::one());
  for (std::int64_t k = 0; k <= n; ++k)
    h.table[std::size_t(k)] = g.table[std::size_t(n - k)];
  p.hist_factors.push_back(h);
}

// Any parfactor shape the clause encoding cannot express gets grounded and
// encoded factor by factor with ground parameter predicates.
void reduce_ground(WfomcProblem& p, const Model& m, const Parfactor& g) {
  Model one = m;
  one.parfactors = {g};
  one.evidence.clear();
  GroundFactorGraph gg = ground_model(one, {});
  for (std::size_t f = 0; f < gg.factors.size(); ++f) {
    const GroundFactor& gf = gg.factors[f];
    std::vector<int> rad;
    for (int v : gf.vars) rad.push_back(int(gg.var_ranges[v].size()));
    std::vector<int> row;
    for (std::size_t r = 0; r < gf.table.size(); ++r) {
      index_to_tuple(rad, r, row);
      std::string pname =
          "P_" + g.name + "_f" + std::to_string(f) + "_" + std::to_string(r);
      p.preds[pname] = {};
      p.w_true[pname] = gf.table[r];
      std::vector<WLiteral> lits;
      for (std::size_t a = 0; a < gf.vars.size(); ++a) {
        std::string pred;
        std::vector<std::string> consts;
        parse_ground_key(gg.var_names[gf.vars[a]], pred, consts);
        WLiteral l;
        l.positive = row[a] == 0;
        l.pred = pred;
        for (const auto& cn : consts) l.params.push_back(constant(cn));
        lits.push_back(l);
      }
      add_row_clauses(p, pname, Constraint::top({}, {}), lits, {});
    }
  }
}

// Reorders and renames a constraint's logvars to positional names.
Constraint positional(const Constraint& c, const std::vector<std::string>& lvs,
                      const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& lv : lvs) idx.push_back(c.index_of(lv));
  Constraint r;
  r.logvars = names;
  for (int i : idx) {
    r.domains.push_back(c.domains[std::size_t(i)]);
    r.allowed.push_back(c.allowed[std::size_t(i)]);
  }
  std::vector<int> inv(c.logvars.size(), -1);
  for (std::size_t i = 0; i < idx.size(); ++i) inv[std::size_t(idx[i])] = int(i);
  for (auto [i, j] : c.diffs) {
    int a = inv[std::size_t(i)], b = inv[std::size_t(j)];
    if (a >= 0 && b >= 0) r.diffs.push_back({std::min(a, b), std::max(a, b)});
  }
  r.explicit_form = c.explicit_form;
  for (const auto& t : c.tuples) {
    std::vector<int> row;
    for (int i : idx) row.push_back(t[std::size_t(i)]);
    r.tuples.push_back(std::move(row));
  }
  return r;
}

// Ground atoms no factor touches are not part of the model's randvar
// universe; pin them false (weight 1) so counts match the ground oracle's
// partition sums exactly.
void pin_uncovered(WfomcProblem& p, const Model& m,
                   const std::vector<Parfactor>& pfs) {
  std::map<std::string, std::vector<Constraint>> occs;
  std::set<std::string> full, opaque;
  for (const auto& g : pfs)
    for (const auto& a : g.args) {
      const std::string& rel = a.prv.relation;
      if (full.count(rel) || opaque.count(rel)) continue;
      std::vector<std::string> lvs;
      bool simple = true;
      for (const auto& t : a.prv.params) {
        if (t.is_constant ||
            std::find(lvs.begin(), lvs.end(), t.name) != lvs.end()) {
          simple = false;
          break;
        }
        lvs.push_back(t.name);
      }
      if (!simple) {
        opaque.insert(rel);
        continue;
      }
      Constraint pr = project(g.constraint, lvs, m.domains);
      if (pr.is_top()) {
        full.insert(rel);
        continue;
      }
      std::vector<std::string> names;
      for (std::size_t i = 0; i < lvs.size(); ++i)
        names.push_back("A" + std::to_string(i));
      occs[rel].push_back(positional(pr, lvs, names));
    }
  for (const auto& [rel, cs] : occs) {
    if (full.count(rel) || opaque.count(rel)) continue;
    bool uniform = true;
    for (std::size_t i = 1; i < cs.size(); ++i)
      uniform = uniform && same_constraint(cs[0], cs[i], m.domains);
    if (!uniform) continue;  // complement of a union is not expressible here
    pin_outside(p, cs[0], m.domains, {rel});
  }
}

}  // namespace

Weight WfomcProblem::wt(const std::string& p) const {
  auto it = w_true.find(p);
  return it == w_true.end() ? Weight::one() : it->second;
}

Weight WfomcProblem::wf(const std::string& p) const {
  auto it = w_false.find(p);
  return it == w_false.end() ? Weight::one() : it->second;
}

WfomcProblem reduce_to_wfomc(const Model& m, const std::vector<Parfactor>& pfs,
                             const std::vector<EvidenceItem>& evidence) {
  WfomcProblem p;
  p.domains = m.domains;
  p.domain_order = m.domain_order;
  for (const auto& g : pfs)
    for (const auto& a : g.args) declare_pred(p, m, a.prv.relation);
  for (const auto& ev : evidence) declare_pred(p, m, ev.prv.relation);

  for (const auto& g : pfs) {
    bool plain = true;
    for (const auto& a : g.args)
      if (a.is_crv()) plain = false;
    if (plain) {
      reduce_plain(p, m, g);
    } else if (g.args.size() == 1 && g.args[0].is_crv() &&
               g.args[0].prv.params.size() == 1 &&
               !g.constraint.explicit_form) {
      reduce_hist(p, m, g);
    } else {
      reduce_ground(p, m, g);
    }
  }
  pin_uncovered(p, m, pfs);

  for (const auto& ev : evidence) {
    auto tuples = expand_tuples(ev.constraint, m.domains);
    for (const auto& t : tuples) {
      Prv ground = ev.prv;
      for (auto& param : ground.params) {
        if (param.is_constant) continue;
        int i = ev.constraint.index_of(param.name);
        const DomainSpec& d = m.domain(ev.constraint.domains[i]);
        param = constant(d.constants[t[i]]);
      }
      add_observation(p, ground, ev.value);
    }
  }
  return p;
}

void add_observation(WfomcProblem& p, const Prv& term, int value) {
  if (!p.preds.count(term.relation))
    throw InferenceError("observation over undeclared predicate " +
                         term.relation);
  WLiteral l;
  l.positive = value == 0;
  l.pred = term.relation;
  l.params = term.params;
  WClause c;
  c.constraint = Constraint::top({}, {});
  c.literals.push_back(l);
  p.clauses.push_back(c);
}

// -- Brute-force count -------------------------------------------------------

Weight wfomc_brute(const WfomcProblem& p, std::int64_t max_states) {
  // ground atoms
  std::map<std::string, int> atom_index;
  std::vector<std::string> atom_pred;
  auto atom_id = [&](const std::string& pred,
                     const std::vector<std::string>& consts) {
    std::string key = ground_name(pred, consts);
    auto it = atom_index.find(key);
    if (it != atom_index.end()) return it->second;
    int id = int(atom_pred.size());
    atom_index[key] = id;
    atom_pred.push_back(pred);
    return id;
  };
  for (const auto& [pred, doms] : p.preds) {
    std::vector<int> rad;
    for (const auto& d : doms) rad.push_back(p.domains.at(d).size());
    std::vector<int> t;
    for (std::size_t i = 0; i < table_size(rad); ++i) {
      index_to_tuple(rad, i, t);
      std::vector<std::string> consts;
      for (std::size_t j = 0; j < doms.size(); ++j)
        consts.push_back(p.domains.at(doms[j]).constants[t[j]]);
      atom_id(pred, consts);
    }
  }
  std::int64_t n_atoms = std::int64_t(atom_pred.size());
  if (n_atoms > 62 || (std::int64_t(1) << n_atoms) > max_states)
    throw GuardError("brute-force model count over " +
                     std::to_string(n_atoms) + " atoms exceeds the guard");

  // ground clauses: lists of (atom, sign)
  std::vector<std::vector<std::pair<int, bool>>> ground;
  for (const auto& cl : p.clauses) {
    auto tuples = expand_tuples(cl.constraint, p.domains);
    if (cl.constraint.logvars.empty()) tuples = {{}};
    for (const auto& t : tuples) {
      std::vector<std::pair<int, bool>> g;
      for (const auto& l : cl.literals) {
        std::vector<std::string> consts;
        for (const auto& param : l.params) {
          if (param.is_constant) {
            consts.push_back(param.name);
          } else {
            int i = cl.constraint.index_of(param.name);
            const DomainSpec& d =
                p.domains.at(cl.constraint.domains[i]);
            consts.push_back(d.constants[t[i]]);
          }
        }
        g.emplace_back(atom_id(l.pred, consts), l.positive);
      }
      ground.push_back(std::move(g));
    }
  }

  // histogram factor scopes
  struct HistScope {
    std::vector<int> atoms;
    const std::vector<Weight>* table;
  };
  std::vector<HistScope> hists;
  for (const auto& h : p.hist_factors) {
    HistScope hs;
    hs.table = &h.table;
    auto tuples = expand_tuples(h.constraint, p.domains);
    for (const auto& t : tuples) {
      const DomainSpec& d = p.domains.at(h.constraint.domains[0]);
      hs.atoms.push_back(atom_id(h.pred, {d.constants[t[0]]}));
    }
    hists.push_back(std::move(hs));
  }

  Weight total = Weight::zero();
  for (std::int64_t state = 0; state < (std::int64_t(1) << n_atoms); ++state) {
    auto truth = [&](int a) { return ((state >> a) & 1) == 0; };  // bit 0: true
    bool sat = true;
    for (const auto& g : ground) {
      bool any = false;
      for (auto [a, pos] : g)
        if (truth(a) == pos) {
          any = true;
          break;
        }
      if (!any) {
        sat = false;
        break;
      }
    }
    if (!sat) continue;
    Weight w = Weight::one();
    for (std::int64_t a = 0; a < n_atoms; ++a)
      w *= truth(int(a)) ? p.wt(atom_pred[std::size_t(a)])
                         : p.wf(atom_pred[std::size_t(a)]);
    for (const auto& hs : hists) {
      int k = 0;
      for (int a : hs.atoms) k += truth(a) ? 1 : 0;
      w *= hs.table->at(std::size_t(k));
    }
    total += w;
  }
  return total;
}

// -- Evaluation --------------------------------------------------------------

namespace {

std::int64_t cell_size(const Circuit& c, const WfomcProblem& p, int id,
                       const std::vector<std::int64_t>& env) {
  const Cell& cell = c.cells[std::size_t(id)];
  switch (cell.kind) {
    case Cell::Root:
      return p.domains.at(cell.domain).size() -
             std::int64_t(cell.excluded.size());
    case Cell::Singleton:
    case Cell::Indiv:
      return 1;
    case Cell::CountTrue:
      return env[std::size_t(cell.count_var)];
    case Cell::CountFalse:
      return cell_size(c, p, cell.parent, env) -
             env[std::size_t(cell.count_var)];
  }
  return 0;
}

std::int64_t mult_value(const Circuit& c, const WfomcProblem& p,
                        const Mult& m, const std::vector<std::int64_t>& env) {
  std::int64_t out = 1;
  for (const auto& f : m.factors) {
    std::int64_t s = cell_size(c, p, f.cell, env);
    for (int t = 0; t < f.take; ++t) out *= std::max<std::int64_t>(s - t, 0);
  }
  return out;
}

Weight eval_node(const Circuit& c, const WfomcProblem& p, int id,
                 std::vector<std::int64_t>& env, std::int64_t& ops) {
  const CNode& n = c.nodes[std::size_t(id)];
  switch (n.kind) {
    case CNode::Leaf: {
      ++ops;
      Weight w = n.positive ? p.wt(n.pred) : p.wf(n.pred);
      return w.pow(double(mult_value(c, p, n.mult, env)));
    }
    case CNode::FreeLeaf: {
      ops += 2;
      Weight w = p.wt(n.pred) + p.wf(n.pred);
      return w.pow(double(mult_value(c, p, n.mult, env)));
    }
    case CNode::HistLeaf: {
      ++ops;
      std::int64_t k = n.fixed;
      for (int cv : n.count_vars) k += env[std::size_t(cv)];
      return n.table.at(std::size_t(k));
    }
    case CNode::Contra:
      ++ops;
      return mult_value(c, p, n.mult, env) > 0 ? Weight::zero() : Weight::one();
    case CNode::And: {
      Weight w = Weight::one();
      for (int ch : n.children) {
        w *= eval_node(c, p, ch, env, ops);
        ++ops;
      }
      return w;
    }
    case CNode::Or: {
      Weight w = Weight::zero();
      for (int ch : n.children) {
        w += eval_node(c, p, ch, env, ops);
        ++ops;
      }
      return w;
    }
    case CNode::SetConj: {
      ++ops;
      return eval_node(c, p, n.children[0], env, ops)
          .pow(double(mult_value(c, p, n.mult, env)));
    }
    case CNode::CountDisj: {
      std::int64_t m = cell_size(c, p, n.cell, env);
      Weight w = Weight::zero();
      for (std::int64_t k = 0; k <= m; ++k) {
        env[std::size_t(n.count_var)] = k;
        Weight term = eval_node(c, p, n.children[0], env, ops);
        w += term * Weight::from_log(log_binomial(int(m), int(k)));
        ops += 2;
      }
      env[std::size_t(n.count_var)] = 0;
      return w;
    }
  }
  return Weight::zero();
}

}  // namespace

Weight wfomc_eval(const Circuit& c, const WfomcProblem& p, EvalStats* stats) {
  std::vector<std::int64_t> env(std::size_t(c.num_count_vars), 0);
  std::int64_t ops = 0;
  Weight w = eval_node(c, p, c.root, env, ops);
  if (stats) stats->ops += ops;
  return w;
}

// -- Validation --------------------------------------------------------------

namespace {

bool cell_related(const Circuit& c, int a, int b) {
  if (a == b) return true;
  for (int x = a; x >= 0; x = c.cells[std::size_t(x)].parent)
    if (x == b) return true;
  for (int x = b; x >= 0; x = c.cells[std::size_t(x)].parent)
    if (x == a) return true;
  return false;
}

struct KeyParts {
  std::string pred;
  std::vector<int> cells;
  char diag = ' ';  // 'D', 'E', or none
};

KeyParts parse_key(const std::string& key) {
  KeyParts k;
  auto bar = key.find('|');
  k.pred = key.substr(0, bar);
  std::string rest = key.substr(bar + 1);
  if (!rest.empty() && (rest.back() == 'D' || rest.back() == 'E')) {
    k.diag = rest.back();
    rest.pop_back();
  }
  std::string cur;
  for (char ch : rest) {
    if (ch == ',') {
      if (!cur.empty()) k.cells.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) k.cells.push_back(std::stoi(cur));
  return k;
}

std::string build_key(const KeyParts& k) {
  std::string out = k.pred + "|";
  for (std::size_t i = 0; i < k.cells.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(k.cells[i]);
  }
  if (k.diag != ' ') out += k.diag;
  return out;
}

// Whether two atom sets can share a ground atom: same pred, related cells at
// every position, compatible diagonal flags.
bool keys_overlap(const Circuit& c, const KeyParts& a, const KeyParts& b) {
  if (a.pred != b.pred) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i)
    if (!cell_related(c, a.cells[i], b.cells[i])) return false;
  if (a.cells.size() == 2) {
    bool adiag = a.cells[0] == a.cells[1] || a.diag != ' ';
    bool bdiag = b.cells[0] == b.cells[1] || b.diag != ' ';
    if (adiag && bdiag && a.diag != b.diag && a.diag != ' ' && b.diag != ' ')
      return false;
  }
  return true;
}

std::set<std::string> node_footprint(const Circuit& c, int id) {
  const CNode& n = c.nodes[std::size_t(id)];
  std::set<std::string> out;
  switch (n.kind) {
    case CNode::Leaf:
    case CNode::FreeLeaf:
      if (!n.atom_key.empty()) out.insert(n.atom_key);
      return out;
    case CNode::HistLeaf:
    case CNode::Contra:
      return out;
    case CNode::And: {
      std::vector<std::set<std::string>> kids;
      for (int ch : n.children) kids.push_back(node_footprint(c, ch));
      for (std::size_t i = 0; i < kids.size(); ++i)
        for (std::size_t j = i + 1; j < kids.size(); ++j)
          for (const auto& ka : kids[i])
            for (const auto& kb : kids[j])
              if (keys_overlap(c, parse_key(ka), parse_key(kb)))
                throw InferenceError(
                    "conjunction is not decomposable: " + ka + " vs " + kb);
      for (auto& k : kids) out.merge(k);
      return out;
    }
    case CNode::Or: {
      if (n.children.size() != 2 || n.atom_key.empty())
        throw InferenceError("malformed disjunction node");
      auto a = node_footprint(c, n.children[0]);
      auto b = node_footprint(c, n.children[1]);
      if (a != b)
        throw InferenceError("disjunction is not smooth at split " +
                             n.atom_key);
      return a;
    }
    case CNode::SetConj: {
      std::set<int> parents;
      for (const auto& f : n.mult.factors) parents.insert(f.cell);
      auto kid = node_footprint(c, n.children[0]);
      for (const auto& key : kid) {
        KeyParts k = parse_key(key);
        std::vector<int> orig = k.cells;
        for (auto& cell : k.cells)
          if (c.cells[std::size_t(cell)].kind == Cell::Indiv &&
              parents.count(c.cells[std::size_t(cell)].parent))
            cell = c.cells[std::size_t(cell)].parent;
        if (k.cells.size() == 2 && k.cells[0] == k.cells[1] && k.diag == ' ')
          k.diag = orig[0] == orig[1] ? 'E' : 'D';
        out.insert(build_key(k));
      }
      return out;
    }
    case CNode::CountDisj: {
      auto kid = node_footprint(c, n.children[0]);
      for (const auto& key : kid) {
        KeyParts k = parse_key(key);
        for (auto& cell : k.cells) {
          const Cell& cc = c.cells[std::size_t(cell)];
          if ((cc.kind == Cell::CountTrue || cc.kind == Cell::CountFalse) &&
              cc.count_var == n.count_var)
            cell = cc.parent;
        }
        if (k.cells.size() == 2 && k.cells[0] == k.cells[1] && k.diag == ' ')
          k.diag = 'D';
        out.insert(build_key(k));
      }
      return out;
    }
  }
  return out;
}

}  // namespace

void validate_circuit(const Circuit& c, const WfomcProblem& p) {
  auto fp = node_footprint(c, c.root);

  // top-level cells per domain
  std::map<std::string, std::vector<int>> top;
  for (std::size_t i = 0; i < c.cells.size(); ++i)
    if (c.cells[i].kind == Cell::Root || c.cells[i].kind == Cell::Singleton)
      top[c.cells[i].domain].push_back(int(i));

  std::set<std::string> expect;
  for (const auto& [pred, doms] : p.preds) {
    if (doms.empty()) {
      expect.insert(pred + "|");
      continue;
    }
    if (doms.size() == 1) {
      for (int cell : top.at(doms[0]))
        expect.insert(pred + "|" + std::to_string(cell));
      continue;
    }
    for (int a : top.at(doms[0]))
      for (int b : top.at(doms[1])) {
        std::string base =
            pred + "|" + std::to_string(a) + "," + std::to_string(b);
        if (a != b) {
          expect.insert(base);
        } else if (c.cells[std::size_t(a)].kind == Cell::Singleton) {
          expect.insert(base + "E");
        } else {
          expect.insert(base + "D");
          expect.insert(base + "E");
        }
      }
  }
  if (fp != expect) {
    for (const auto& k : expect)
      if (!fp.count(k))
        throw InferenceError("circuit does not account for atoms " + k);
    for (const auto& k : fp)
      if (!expect.count(k))
        throw InferenceError("circuit covers unexpected atoms " + k);
  }
}

// -- Dump --------------------------------------------------------------------

namespace {

void mult_str(std::ostringstream& os, const Mult& m) {
  if (m.factors.empty()) {
    os << "1";
    return;
  }
  for (std::size_t i = 0; i < m.factors.size(); ++i) {
    if (i) os << "*";
    os << "c" << m.factors[i].cell;
    if (m.factors[i].take > 1) os << "^_" << m.factors[i].take;
  }
}

void dump_node(const Circuit& c, int id, int depth, std::ostringstream& os) {
  const CNode& n = c.nodes[std::size_t(id)];
  for (int i = 0; i < depth; ++i) os << "  ";
  os << "n" << id << " ";
  switch (n.kind) {
    case CNode::Leaf:
      os << (n.positive ? "leaf +" : "leaf -") << n.pred << " x";
      mult_str(os, n.mult);
      os << "\n";
      return;
    case CNode::FreeLeaf:
      os << "free " << n.pred << " x";
      mult_str(os, n.mult);
      os << "\n";
      return;
    case CNode::HistLeaf:
      os << "hist[" << n.table.size() << "] fixed " << n.fixed << "\n";
      return;
    case CNode::Contra:
      os << "contra x";
      mult_str(os, n.mult);
      os << "\n";
      return;
    case CNode::And:
      os << "and\n";
      break;
    case CNode::Or:
      os << "or on " << n.atom_key << "\n";
      break;
    case CNode::SetConj:
      os << "setconj x";
      mult_str(os, n.mult);
      os << "\n";
      break;
    case CNode::CountDisj:
      os << "countdisj c" << n.cell << " k" << n.count_var << "\n";
      break;
  }
  for (int ch : n.children) dump_node(c, ch, depth + 1, os);
}

}  // namespace

std::string Circuit::dump() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& cell = cells[i];
    os << "c" << i << " ";
    switch (cell.kind) {
      case Cell::Root:
        os << cell.domain << " minus " << cell.excluded.size();
        break;
      case Cell::Singleton:
        os << cell.domain << " const " << cell.constant;
        break;
      case Cell::CountTrue:
        os << "true part of c" << cell.parent << " (k" << cell.count_var
           << ")";
        break;
      case Cell::CountFalse:
        os << "false part of c" << cell.parent << " (k" << cell.count_var
           << ")";
        break;
      case Cell::Indiv:
        os << "one of c" << cell.parent;
        break;
    }
    os << "\n";
  }
  if (root >= 0) dump_node(*this, root, 0, os);
  return os.str();
}

// -- Query answering ---------------------------------------------------------

Distribution fokc_answer(const Model& m, const Query& q,
                         const std::vector<EvidenceItem>& evidence,
                         const CompileOptions& opts, EvalStats* stats) {
  if (q.terms.size() != 1)
    throw InferenceError(
        "conjunctive queries are not supported; ask one term at a time");
  const Prv& term = q.terms[0];
  if (!term.is_ground())
    throw InferenceError("query term must be ground");
  auto range = term.range.empty() ? m.relation(term.relation).range
                                  : term.range;

  WfomcProblem den = reduce_to_wfomc(m, m.parfactors, evidence);
  if (!den.preds.count(term.relation))
    declare_pred(den, m, term.relation);
  Circuit cden = compile(den, opts);
  Weight z = wfomc_eval(cden, den, stats);
  if (z.is_zero()) throw ZeroProbabilityError("evidence has zero probability");

  std::vector<Weight> nums;
  for (int v = 0; v < int(range.size()); ++v) {
    WfomcProblem num = den;
    add_observation(num, term, v);
    Circuit cnum = compile(num, opts);
    nums.push_back(wfomc_eval(cnum, num, stats));
  }
  return Distribution::normalized({range}, nums);
}

}  // namespace liftedq
