#include "liftedq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace liftedq {

void enumerate_histograms(int n, int r, std::vector<std::vector<int>>& out) {
  std::vector<int> h(r, 0);
  // first coordinate descending, recursively
  auto rec = [&](auto&& self, int pos, int rest) -> void {
    if (pos == r - 1) {
      h[pos] = rest;
      out.push_back(h);
      return;
    }
    for (int k = rest; k >= 0; --k) {
      h[pos] = k;
      self(self, pos + 1, rest - k);
    }
  };
  rec(rec, 0, n);
}

int DomainSpec::index_of(const std::string& c) const {
  for (std::size_t i = 0; i < constants.size(); ++i)
    if (constants[i] == c) return int(i);
  return -1;
}

std::string Prv::str() const {
  std::string s = relation;
  if (!params.empty()) {
    s += "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i) s += ",";
      s += params[i].name;
    }
    s += ")";
  }
  return s;
}

int Constraint::index_of(const std::string& lv) const {
  for (std::size_t i = 0; i < logvars.size(); ++i)
    if (logvars[i] == lv) return int(i);
  return -1;
}

Constraint Constraint::top(std::vector<std::string> lvs,
                           std::vector<std::string> doms) {
  Constraint c;
  c.logvars = std::move(lvs);
  c.domains = std::move(doms);
  c.allowed.resize(c.logvars.size());
  return c;
}

namespace {

std::int64_t falling_factorial(std::int64_t m, std::int64_t k) {
  std::int64_t r = 1;
  for (std::int64_t i = 0; i < k; ++i) {
    if (m - i <= 0) return 0;
    r *= m - i;
  }
  return r;
}

std::int64_t set_size(const Constraint::VarSet& vs, const DomainSpec& d) {
  return vs.full ? d.size() : std::int64_t(vs.ids.size());
}

bool set_contains(const Constraint::VarSet& vs, int id) {
  if (vs.full) return true;
  return std::binary_search(vs.ids.begin(), vs.ids.end(), id);
}

std::vector<int> set_ids(const Constraint::VarSet& vs, const DomainSpec& d) {
  if (!vs.full) return vs.ids;
  std::vector<int> ids(d.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

bool has_diff(const Constraint& c, int i, int j) {
  if (i > j) std::swap(i, j);
  return std::find(c.diffs.begin(), c.diffs.end(), std::make_pair(i, j)) !=
         c.diffs.end();
}

// vs_a subset of vs_b, or disjoint, or neither (partial).
enum class Overlap { Subset, Disjoint, Partial };

Overlap overlap(const Constraint::VarSet& a, const Constraint::VarSet& b,
                const DomainSpec& d) {
  if (b.full) return Overlap::Subset;
  if (a.full) {
    if (std::int64_t(b.ids.size()) == d.size()) return Overlap::Subset;
    return b.ids.empty() ? Overlap::Disjoint : Overlap::Partial;
  }
  std::size_t common = 0;
  for (int id : a.ids)
    if (set_contains(b, id)) ++common;
  if (common == a.ids.size()) return Overlap::Subset;
  if (common == 0) return Overlap::Disjoint;
  return Overlap::Partial;
}

struct ClosedFormFail {};

// Groundings of the non-target logvars per fixed admissible target
// assignment, when that count is provably uniform. Throws ClosedFormFail
// when the symbolic conditions do not hold (caller may enumerate).
std::int64_t closed_extension_count(const Constraint& c,
                                    const std::vector<int>& remaining,
                                    const std::vector<int>& targets,
                                    const DomainTable& doms) {
  if (c.explicit_form) throw ClosedFormFail{};
  std::vector<char> is_target(c.logvars.size(), 0);
  for (int t : targets) is_target[t] = 1;

  // components of the diff graph restricted to remaining vars
  std::vector<int> comp(c.logvars.size(), -1);
  int ncomp = 0;
  for (int v : remaining) {
    if (comp[v] >= 0) continue;
    std::vector<int> stack{v};
    comp[v] = ncomp;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (auto [i, j] : c.diffs) {
        int w = -1;
        if (i == u) w = j;
        if (j == u) w = i;
        if (w >= 0 && !is_target[w] && comp[w] < 0 &&
            std::find(remaining.begin(), remaining.end(), w) !=
                remaining.end()) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
      }
    }
    ++ncomp;
  }

  std::int64_t total = 1;
  for (int k = 0; k < ncomp; ++k) {
    std::vector<int> members;
    for (int v : remaining)
      if (comp[v] == k) members.push_back(v);
    const DomainSpec& dom = doms.at(c.domains[members[0]]);
    const Constraint::VarSet& s = c.allowed[members[0]];
    for (int v : members) {
      if (c.domains[v] != dom.name) throw ClosedFormFail{};
      if (!(c.allowed[v] == s)) throw ClosedFormFail{};
    }
    // clique within the component
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        if (!has_diff(c, members[a], members[b])) throw ClosedFormFail{};
    // adjacent targets whose allowed set intersects s
    std::vector<int> tset;
    for (int t : targets) {
      bool adj = false;
      for (int v : members)
        if (has_diff(c, v, t)) adj = true;
      if (!adj) continue;
      if (c.domains[t] != dom.name) continue;  // diff across domains is moot
      Overlap o = overlap(c.allowed[t], s, dom);
      if (o == Overlap::Disjoint) continue;
      if (o == Overlap::Partial) throw ClosedFormFail{};
      tset.push_back(t);
    }
    // every member adjacent to every relevant target; targets pairwise diff
    for (int t : tset)
      for (int v : members)
        if (!has_diff(c, v, t)) throw ClosedFormFail{};
    for (std::size_t a = 0; a < tset.size(); ++a)
      for (std::size_t b = a + 1; b < tset.size(); ++b)
        if (!has_diff(c, tset[a], tset[b])) throw ClosedFormFail{};
    total *= falling_factorial(set_size(s, dom) - std::int64_t(tset.size()),
                               std::int64_t(members.size()));
  }
  return total;
}

std::vector<std::vector<int>> enumerate_product(const Constraint& c,
                                                const DomainTable& doms,
                                                std::int64_t guard) {
  std::vector<std::vector<int>> id_sets;
  std::int64_t prod = 1;
  for (std::size_t i = 0; i < c.logvars.size(); ++i) {
    id_sets.push_back(set_ids(c.allowed[i], doms.at(c.domains[i])));
    prod *= std::int64_t(id_sets.back().size());
    if (prod > guard)
      throw GuardError("constraint expansion exceeds guard");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> tuple(c.logvars.size());
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (pos == c.logvars.size()) {
      out.push_back(tuple);
      return;
    }
    for (int id : id_sets[pos]) {
      bool ok = true;
      for (auto [i, j] : c.diffs) {
        int other = -1;
        if (std::size_t(j) == pos && std::size_t(i) < pos) other = i;
        if (std::size_t(i) == pos && std::size_t(j) < pos) other = j;
        if (other >= 0 && tuple[other] == id &&
            c.domains[other] == c.domains[pos]) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      tuple[pos] = id;
      self(self, pos + 1);
    }
  };
  rec(rec, 0);
  return out;
}

std::vector<std::vector<int>> sorted_unique(std::vector<std::vector<int>> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

bool admits(const Constraint& c, const std::vector<int>& tuple) {
  if (c.explicit_form)
    return std::find(c.tuples.begin(), c.tuples.end(), tuple) !=
           c.tuples.end();
  for (std::size_t i = 0; i < tuple.size(); ++i)
    if (!set_contains(c.allowed[i], tuple[i])) return false;
  for (auto [i, j] : c.diffs)
    if (tuple[i] == tuple[j] && c.domains[i] == c.domains[j]) return false;
  return true;
}

std::vector<std::vector<int>> expand_tuples(const Constraint& c,
                                            const DomainTable& doms,
                                            std::int64_t guard) {
  if (c.explicit_form) return sorted_unique(c.tuples);
  return enumerate_product(c, doms, guard);
}

std::int64_t tuple_count(const Constraint& c, const DomainTable& doms) {
  if (c.explicit_form) return std::int64_t(sorted_unique(c.tuples).size());
  std::vector<int> all(c.logvars.size());
  std::iota(all.begin(), all.end(), 0);
  try {
    return closed_extension_count(c, all, {}, doms);
  } catch (const ClosedFormFail&) {
    return std::int64_t(expand_tuples(c, doms).size());
  }
}

std::int64_t count_per_instance(const Constraint& c,
                                const std::vector<std::string>& targets,
                                const DomainTable& doms) {
  std::vector<int> tidx, ridx;
  for (const auto& t : targets) {
    int i = c.index_of(t);
    if (i < 0)
      throw ValidationError("count_per_instance: unknown logvar " + t);
    tidx.push_back(i);
  }
  for (std::size_t i = 0; i < c.logvars.size(); ++i)
    if (std::find(tidx.begin(), tidx.end(), int(i)) == tidx.end())
      ridx.push_back(int(i));
  try {
    return closed_extension_count(c, ridx, tidx, doms);
  } catch (const ClosedFormFail&) {
  }
  // enumeration fallback: group tuples by target projection
  auto tuples = expand_tuples(c, doms);
  if (tuples.empty()) return 0;
  std::map<std::vector<int>, std::int64_t> counts;
  for (const auto& t : tuples) {
    std::vector<int> key;
    for (int i : tidx) key.push_back(t[i]);
    ++counts[key];
  }
  std::int64_t first = counts.begin()->second;
  for (const auto& [k, v] : counts)
    if (v != first)
      throw NonUniformCountError(
          "count_per_instance: non-uniform count; count-normalise first");
  return first;
}

Constraint project(const Constraint& c, const std::vector<std::string>& keep,
                   const DomainTable& doms) {
  std::vector<int> kidx;
  for (const auto& k : keep) {
    int i = c.index_of(k);
    if (i < 0) throw ValidationError("project: unknown logvar " + k);
    kidx.push_back(i);
  }
  if (!c.explicit_form) {
    std::vector<int> dropped;
    for (std::size_t i = 0; i < c.logvars.size(); ++i)
      if (std::find(kidx.begin(), kidx.end(), int(i)) == kidx.end())
        dropped.push_back(int(i));
    try {
      std::int64_t ext = closed_extension_count(c, dropped, kidx, doms);
      if (ext > 0) {
        Constraint out;
        for (int i : kidx) {
          out.logvars.push_back(c.logvars[i]);
          out.domains.push_back(c.domains[i]);
          out.allowed.push_back(c.allowed[i]);
        }
        for (auto [i, j] : c.diffs) {
          auto pi = std::find(kidx.begin(), kidx.end(), i);
          auto pj = std::find(kidx.begin(), kidx.end(), j);
          if (pi != kidx.end() && pj != kidx.end()) {
            int a = int(pi - kidx.begin()), b = int(pj - kidx.begin());
            if (a > b) std::swap(a, b);
            out.diffs.emplace_back(a, b);
          }
        }
        return out;
      }
    } catch (const ClosedFormFail&) {
    }
  }
  auto tuples = expand_tuples(c, doms);
  Constraint out;
  for (int i : kidx) {
    out.logvars.push_back(c.logvars[i]);
    out.domains.push_back(c.domains[i]);
  }
  out.explicit_form = true;
  for (const auto& t : tuples) {
    std::vector<int> row;
    for (int i : kidx) row.push_back(t[i]);
    out.tuples.push_back(std::move(row));
  }
  out.tuples = sorted_unique(out.tuples);
  if (auto rec = recognize_product_form(out, doms)) return *rec;
  return out;
}

Constraint conjoin(const Constraint& a, const Constraint& b,
                   const DomainTable& doms) {
  // shared logvars must agree on domains
  for (std::size_t i = 0; i < a.logvars.size(); ++i) {
    int j = b.index_of(a.logvars[i]);
    if (j >= 0 && b.domains[j] != a.domains[i])
      throw ValidationError("conjoin: logvar " + a.logvars[i] +
                            " has conflicting domains");
  }
  if (!a.explicit_form && !b.explicit_form) {
    Constraint out = a;
    std::vector<int> bmap(b.logvars.size());  // b index -> out index
    for (std::size_t j = 0; j < b.logvars.size(); ++j) {
      int i = out.index_of(b.logvars[j]);
      if (i < 0) {
        out.logvars.push_back(b.logvars[j]);
        out.domains.push_back(b.domains[j]);
        out.allowed.push_back(b.allowed[j]);
        i = int(out.logvars.size()) - 1;
      } else {
        // intersect allowed sets
        const DomainSpec& d = doms.at(out.domains[i]);
        auto ia = set_ids(out.allowed[i], d);
        auto ib = set_ids(b.allowed[j], d);
        std::vector<int> inter;
        std::set_intersection(ia.begin(), ia.end(), ib.begin(), ib.end(),
                              std::back_inserter(inter));
        Constraint::VarSet vs;
        vs.full = std::int64_t(inter.size()) == d.size();
        if (!vs.full) vs.ids = std::move(inter);
        out.allowed[i] = vs;
      }
      bmap[j] = i;
    }
    for (auto [i, j] : b.diffs) {
      int x = bmap[i], y = bmap[j];
      if (x > y) std::swap(x, y);
      if (!has_diff(out, x, y)) out.diffs.emplace_back(x, y);
    }
    return out;
  }
  // explicit join over shared logvars
  auto ta = expand_tuples(a, doms);
  auto tb = expand_tuples(b, doms);
  Constraint out;
  out.logvars = a.logvars;
  out.domains = a.domains;
  std::vector<int> bshared, bnew;  // indices into b
  for (std::size_t j = 0; j < b.logvars.size(); ++j) {
    if (a.index_of(b.logvars[j]) >= 0)
      bshared.push_back(int(j));
    else {
      bnew.push_back(int(j));
      out.logvars.push_back(b.logvars[j]);
      out.domains.push_back(b.domains[j]);
    }
  }
  out.explicit_form = true;
  for (const auto& ra : ta) {
    for (const auto& rb : tb) {
      bool match = true;
      for (int j : bshared)
        if (rb[j] != ra[a.index_of(b.logvars[j])]) {
          match = false;
          break;
        }
      if (!match) continue;
      std::vector<int> row = ra;
      for (int j : bnew) row.push_back(rb[j]);
      out.tuples.push_back(std::move(row));
    }
  }
  out.tuples = sorted_unique(out.tuples);
  if (auto rec = recognize_product_form(out, doms)) return *rec;
  return out;
}

Constraint restrict_var(const Constraint& c, const std::string& lv,
                        const std::vector<int>& ids, const DomainTable& doms) {
  int i = c.index_of(lv);
  if (i < 0) throw ValidationError("restrict: unknown logvar " + lv);
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (c.explicit_form) {
    Constraint out = c;
    out.tuples.clear();
    for (const auto& t : c.tuples)
      if (std::binary_search(sorted.begin(), sorted.end(), t[i]))
        out.tuples.push_back(t);
    if (auto rec = recognize_product_form(out, doms)) return *rec;
    return out;
  }
  Constraint out = c;
  const DomainSpec& d = doms.at(c.domains[i]);
  auto cur = set_ids(c.allowed[i], d);
  std::vector<int> inter;
  std::set_intersection(cur.begin(), cur.end(), sorted.begin(), sorted.end(),
                        std::back_inserter(inter));
  Constraint::VarSet vs;
  vs.full = std::int64_t(inter.size()) == d.size();
  if (!vs.full) vs.ids = std::move(inter);
  out.allowed[i] = vs;
  return out;
}

bool same_constraint(const Constraint& a, const Constraint& b,
                     const DomainTable& doms) {
  if (a.logvars.size() != b.logvars.size()) return false;
  std::vector<int> perm;  // a index -> b index
  for (const auto& lv : a.logvars) {
    int j = b.index_of(lv);
    if (j < 0) return false;
    perm.push_back(j);
  }
  if (!a.explicit_form && !b.explicit_form) {
    bool structural = true;
    for (std::size_t i = 0; i < a.logvars.size(); ++i) {
      if (a.domains[i] != b.domains[perm[i]]) return false;
      const DomainSpec& d = doms.at(a.domains[i]);
      if (set_ids(a.allowed[i], d) != set_ids(b.allowed[perm[i]], d))
        structural = false;
    }
    if (structural) {
      auto norm = [&](const Constraint& c,
                      const std::vector<int>* map) {
        std::set<std::pair<int, int>> s;
        for (auto [i, j] : c.diffs) {
          int x = i, y = j;
          if (map) {
            // translate b indices back into a's ordering
            auto pos = [&](int bi) {
              for (std::size_t k = 0; k < map->size(); ++k)
                if ((*map)[k] == bi) return int(k);
              return -1;
            };
            x = pos(i);
            y = pos(j);
            if (x < 0 || y < 0) return std::set<std::pair<int, int>>{{-2, -2}};
          }
          if (x > y) std::swap(x, y);
          s.insert({x, y});
        }
        return s;
      };
      if (norm(a, nullptr) == norm(b, &perm)) return true;
    }
  }
  auto ta = expand_tuples(a, doms);
  auto tb = expand_tuples(b, doms);
  for (auto& t : tb) {
    std::vector<int> r(t.size());
    for (std::size_t i = 0; i < perm.size(); ++i) r[i] = t[perm[i]];
    t = std::move(r);
  }
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  return ta == tb;
}

std::optional<Constraint> recognize_product_form(const Constraint& c,
                                                 const DomainTable& doms) {
  if (!c.explicit_form) return c;
  if (c.tuples.empty()) return std::nullopt;
  std::size_t k = c.logvars.size();
  Constraint cand;
  cand.logvars = c.logvars;
  cand.domains = c.domains;
  cand.allowed.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::set<int> vals;
    for (const auto& t : c.tuples) vals.insert(t[i]);
    const DomainSpec& d = doms.at(c.domains[i]);
    if (std::int64_t(vals.size()) != d.size()) {
      cand.allowed[i].full = false;
      cand.allowed[i].ids.assign(vals.begin(), vals.end());
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      if (c.domains[i] != c.domains[j]) continue;
      bool never_equal = true;
      for (const auto& t : c.tuples)
        if (t[i] == t[j]) {
          never_equal = false;
          break;
        }
      if (never_equal) cand.diffs.emplace_back(int(i), int(j));
    }
  auto expanded = expand_tuples(cand, doms);
  if (expanded == sorted_unique(c.tuples)) return cand;
  return std::nullopt;
}

// -- Parfactor helpers -------------------------------------------------------

std::vector<std::string> Parfactor::counted_logvars() const {
  std::vector<std::string> out;
  for (const auto& a : args)
    if (a.is_crv()) out.push_back(a.counted_logvar);
  return out;
}

std::vector<std::string> Parfactor::free_logvars() const {
  auto counted = counted_logvars();
  std::vector<std::string> out;
  for (const auto& lv : constraint.logvars)
    if (std::find(counted.begin(), counted.end(), lv) == counted.end())
      out.push_back(lv);
  return out;
}

bool Parfactor::has_arg_relation(const std::string& rel) const {
  for (const auto& a : args)
    if (a.prv.relation == rel) return true;
  return false;
}

const DomainSpec& Model::domain(const std::string& name) const {
  auto it = domains.find(name);
  if (it == domains.end())
    throw ValidationError("undeclared domain " + name);
  return it->second;
}

const RelationSig& Model::relation(const std::string& name) const {
  auto it = relations.find(name);
  if (it == relations.end())
    throw ValidationError("undeclared relation " + name);
  return it->second;
}

std::int64_t crv_instance_count(const Model& m, const Parfactor& g,
                                const std::string& counted_lv) {
  std::vector<std::string> others;
  for (const auto& lv : g.constraint.logvars)
    if (lv != counted_lv) others.push_back(lv);
  return count_per_instance(g.constraint, others, m.domains);
}

std::vector<int> arg_range_sizes(const Model& m, const Parfactor& g) {
  std::vector<int> out;
  for (const auto& a : g.args) {
    if (a.is_crv()) {
      std::int64_t n = crv_instance_count(m, g, a.counted_logvar);
      out.push_back(int(histogram_count(int(n), int(a.prv.range.size()))));
    } else {
      out.push_back(int(a.prv.range.size()));
    }
  }
  return out;
}

std::int64_t gr_instance_count(const Model& m, const Parfactor& g) {
  auto free = g.free_logvars();
  if (free.size() == g.constraint.logvars.size())
    return tuple_count(g.constraint, m.domains);
  return tuple_count(project(g.constraint, free, m.domains), m.domains);
}

std::vector<std::string> gr_instances(const Prv& prv, const Constraint& c,
                                      const DomainTable& doms) {
  std::vector<std::string> lvs = prv.logvars();
  std::vector<std::string> out;
  if (lvs.empty()) {
    std::vector<std::string> consts;
    for (const auto& t : prv.params) consts.push_back(t.name);
    out.push_back(ground_name(prv.relation, consts));
    return out;
  }
  Constraint proj = c;
  {
    // keep only the PRV's logvars, deduplicated
    std::vector<std::string> keep;
    for (const auto& lv : lvs)
      if (std::find(keep.begin(), keep.end(), lv) == keep.end())
        keep.push_back(lv);
    proj = project(c, keep, doms);
  }
  auto tuples = expand_tuples(proj, doms);
  std::set<std::string> seen;
  for (const auto& t : tuples) {
    std::vector<std::string> consts;
    for (const auto& p : prv.params) {
      if (p.is_constant) {
        consts.push_back(p.name);
      } else {
        int i = proj.index_of(p.name);
        consts.push_back(doms.at(proj.domains[i]).constants[t[i]]);
      }
    }
    std::string n = ground_name(prv.relation, consts);
    if (seen.insert(n).second) out.push_back(n);
  }
  return out;
}

std::int64_t gr_size(const Model& m) {
  std::int64_t total = 0;
  for (const auto& g : m.parfactors) total += gr_instance_count(m, g);
  return total;
}

std::size_t table_size(const std::vector<int>& radices) {
  std::size_t s = 1;
  for (int r : radices) s *= std::size_t(r);
  return s;
}

std::size_t tuple_to_index(const std::vector<int>& radices,
                           const std::vector<int>& tuple) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < radices.size(); ++i)
    idx = idx * std::size_t(radices[i]) + std::size_t(tuple[i]);
  return idx;
}

void index_to_tuple(const std::vector<int>& radices, std::size_t idx,
                    std::vector<int>& tuple) {
  tuple.resize(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    tuple[i] = int(idx % std::size_t(radices[i]));
    idx /= std::size_t(radices[i]);
  }
}

std::string ground_name(const std::string& relation,
                        const std::vector<std::string>& constants) {
  std::string s = relation;
  if (!constants.empty()) {
    s += "(";
    for (std::size_t i = 0; i < constants.size(); ++i) {
      if (i) s += ",";
      s += constants[i];
    }
    s += ")";
  }
  return s;
}

// -- Validation --------------------------------------------------------------

void Model::validate() const {
  for (const auto& [name, d] : domains) {
    if (d.constants.empty())
      throw ValidationError("domain " + name + " is empty");
    std::set<std::string> seen(d.constants.begin(), d.constants.end());
    if (seen.size() != d.constants.size())
      throw ValidationError("domain " + name + " has duplicate constants");
  }
  std::set<std::string> pfnames;
  for (const auto& g : parfactors) {
    if (!pfnames.insert(g.name).second)
      throw ValidationError("duplicate parfactor name " + g.name);
    std::set<std::string> lvset(g.constraint.logvars.begin(),
                                g.constraint.logvars.end());
    if (lvset.size() != g.constraint.logvars.size())
      throw ValidationError("parfactor " + g.name + ": duplicate logvar");
    for (const auto& dn : g.constraint.domains) domain(dn);
    for (const auto& a : g.args) {
      const RelationSig& sig = relation(a.prv.relation);
      if (sig.param_domains.size() != a.prv.params.size())
        throw ValidationError("parfactor " + g.name + ": arity mismatch for " +
                              a.prv.relation);
      if (sig.range != a.prv.range)
        throw ValidationError("parfactor " + g.name + ": range mismatch for " +
                              a.prv.relation);
      for (std::size_t i = 0; i < a.prv.params.size(); ++i) {
        const Term& t = a.prv.params[i];
        if (t.is_constant) {
          if (domain(sig.param_domains[i]).index_of(t.name) < 0)
            throw ValidationError("parfactor " + g.name + ": constant " +
                                  t.name + " not in domain " +
                                  sig.param_domains[i]);
        } else {
          int ci = g.constraint.index_of(t.name);
          if (ci < 0)
            throw ValidationError("parfactor " + g.name + ": logvar " +
                                  t.name + " not bound by the constraint");
          if (g.constraint.domains[ci] != sig.param_domains[i])
            throw ValidationError("parfactor " + g.name + ": logvar " +
                                  t.name + " has domain " +
                                  g.constraint.domains[ci] + ", expected " +
                                  sig.param_domains[i]);
        }
      }
      if (a.is_crv() && g.constraint.index_of(a.counted_logvar) < 0)
        throw ValidationError("parfactor " + g.name +
                              ": counted logvar not in constraint");
    }
    if (tuple_count(g.constraint, domains) == 0)
      throw ValidationError("parfactor " + g.name + ": empty constraint");
    auto radices = arg_range_sizes(*this, g);
    if (g.table.size() != table_size(radices))
      throw ValidationError("parfactor " + g.name + ": table has " +
                            std::to_string(g.table.size()) + " rows, needs " +
                            std::to_string(table_size(radices)));
    bool any_positive = false;
    for (const auto& w : g.table)
      if (!w.is_zero()) any_positive = true;
    if (!any_positive)
      throw ValidationError("parfactor " + g.name + ": all-zero table");
  }
  // evidence: no conflicting assignments to one ground instance
  std::map<std::string, int> assigned;
  for (const auto& ev : evidence) {
    const RelationSig& sig = relation(ev.prv.relation);
    if (ev.value < 0 || ev.value >= int(sig.range.size()))
      throw ValidationError("evidence value out of range for " +
                            ev.prv.relation);
    for (const auto& gname : gr_instances(ev.prv, ev.constraint, domains)) {
      auto [it, fresh] = assigned.emplace(gname, ev.value);
      if (!fresh && it->second != ev.value)
        throw ValidationError("conflicting evidence for " + gname);
    }
  }
}

// -- Distribution ------------------------------------------------------------

Distribution Distribution::normalized(
    const std::vector<std::vector<std::string>>& ranges,
    const std::vector<Weight>& weights) {
  Weight z = Weight::zero();
  for (const auto& w : weights) z += w;
  if (z.is_zero())
    throw ZeroProbabilityError("all weights zero (evidence has probability 0)");
  Distribution d;
  d.ranges = ranges;
  d.probs.reserve(weights.size());
  for (const auto& w : weights) d.probs.push_back((w / z).value());
  return d;
}

std::string Distribution::label(std::size_t idx) const {
  std::vector<int> radices;
  for (const auto& r : ranges) radices.push_back(int(r.size()));
  std::vector<int> t;
  index_to_tuple(radices, idx, t);
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ",";
    s += ranges[i][t[i]];
  }
  return s;
}

double Distribution::max_abs_diff(const Distribution& o) const {
  double m = 0;
  for (std::size_t i = 0; i < probs.size() && i < o.probs.size(); ++i)
    m = std::max(m, std::abs(probs[i] - o.probs[i]));
  if (probs.size() != o.probs.size()) return 1.0;
  return m;
}

}  // namespace liftedq
