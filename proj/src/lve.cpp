#include "liftedq/lve.hpp"

#include "liftedq/ground.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <set>
#include <numeric>
#include <optional>
#include <sstream>

namespace liftedq {

namespace {

std::vector<int> allowed_ids(const Constraint& c, int idx,
                             const DomainTable& doms) {
  const DomainSpec& d = doms.at(c.domains[idx]);
  if (c.explicit_form) {
    std::set<int> s;
    for (const auto& t : c.tuples) s.insert(t[idx]);
    return {s.begin(), s.end()};
  }
  if (c.allowed[idx].full) {
    std::vector<int> all(d.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  return c.allowed[idx].ids;
}

bool constraint_empty(const Constraint& c, const DomainTable& doms) {
  return tuple_count(c, doms) == 0;
}

// Distinct logvars of an argument, in order of first occurrence.
std::vector<std::string> arg_logvars(const Arg& a) {
  std::vector<std::string> out;
  for (const auto& p : a.prv.params)
    if (!p.is_constant &&
        std::find(out.begin(), out.end(), p.name) == out.end())
      out.push_back(p.name);
  return out;
}

std::vector<std::string> used_logvars(const Parfactor& g,
                                      const std::vector<std::size_t>& skip) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
    for (const auto& lv : arg_logvars(g.args[i]))
      if (std::find(out.begin(), out.end(), lv) == out.end()) out.push_back(lv);
  }
  return out;
}

void rename_logvars(Parfactor& g,
                    const std::map<std::string, std::string>& ren) {
  auto sub = [&](std::string& n) {
    auto it = ren.find(n);
    if (it != ren.end()) n = it->second;
  };
  for (auto& lv : g.constraint.logvars) sub(lv);
  for (auto& a : g.args) {
    for (auto& p : a.prv.params)
      if (!p.is_constant) sub(p.name);
    if (!a.counted_logvar.empty()) sub(a.counted_logvar);
  }
}

void substitute_constant(Parfactor& g, const std::string& lv,
                         const std::string& value) {
  for (auto& a : g.args)
    for (auto& p : a.prv.params)
      if (!p.is_constant && p.name == lv) p = constant(value);
}

// Keeps only the listed logvars in the constraint, in their current order.
Constraint project_keep(const Constraint& c,
                        const std::vector<std::string>& keep,
                        const DomainTable& doms) {
  std::vector<std::string> ordered;
  for (const auto& lv : c.logvars)
    if (std::find(keep.begin(), keep.end(), lv) != keep.end())
      ordered.push_back(lv);
  return project(c, ordered, doms);
}

std::size_t checked_table_size(const std::vector<int>& radices,
                               std::int64_t guard) {
  std::size_t s = 1;
  for (int r : radices) {
    s *= std::size_t(r);
    if (std::int64_t(s) > guard)
      throw GuardError("parfactor table exceeds the operator guard");
  }
  return s;
}

}  // namespace

// -- Trace -------------------------------------------------------------------

std::map<std::string, std::int64_t> LveTrace::counts() const {
  std::map<std::string, std::int64_t> out;
  for (const auto& r : records) ++out[r.op];
  return out;
}

std::int64_t LveTrace::total_cost() const {
  std::int64_t t = 0;
  for (const auto& r : records) t += r.cost;
  return t;
}

bool LveTrace::mentions(const std::string& op) const {
  for (const auto& r : records)
    if (r.op == op) return true;
  return false;
}

std::string LveTrace::str() const {
  std::ostringstream os;
  for (const auto& r : records)
    os << r.op << ',' << r.parfactor << ',' << r.target << ',' << r.cost
       << '\n';
  return os.str();
}

// -- Operators ---------------------------------------------------------------

Parfactor op_sum_out(const Model& m, const Parfactor& g, std::size_t arg) {
  if (arg >= g.args.size()) throw InferenceError("sum_out: no such argument");
  const Arg& a = g.args[arg];
  std::vector<std::string> covered = arg_logvars(a);

  // the argument must cover every free logvar of the parfactor
  for (const auto& lv : g.free_logvars()) {
    bool in_arg =
        std::find(covered.begin(), covered.end(), lv) != covered.end();
    if (!in_arg && lv != a.counted_logvar)
      throw InferenceError("sum_out: argument " + a.prv.str() +
                           " does not cover logvar " + lv);
  }
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != arg && g.args[i].prv.relation == a.prv.relation &&
        g.args[i].prv == a.prv)
      throw InferenceError("sum_out: argument occurs twice");

  std::vector<std::string> kept = used_logvars(g, {arg});
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != arg && g.args[i].is_crv() &&
        std::find(kept.begin(), kept.end(), g.args[i].counted_logvar) ==
            kept.end())
      kept.push_back(g.args[i].counted_logvar);

  // exponent: groundings removed alongside the argument, per kept instance
  Constraint c_nc = g.constraint;
  if (a.is_crv()) {
    std::vector<std::string> minus;
    for (const auto& lv : g.constraint.logvars)
      if (lv != a.counted_logvar) minus.push_back(lv);
    c_nc = project_keep(g.constraint, minus, m.domains);
  }
  std::int64_t k = count_per_instance(c_nc, kept, m.domains);

  Parfactor out;
  out.name = g.name + "-so";
  out.constraint = project_keep(g.constraint, kept, m.domains);
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != arg) out.args.push_back(g.args[i]);

  auto in_rad = arg_range_sizes(m, g);
  std::vector<int> out_rad;
  for (std::size_t i = 0; i < in_rad.size(); ++i)
    if (i != arg) out_rad.push_back(in_rad[i]);

  std::vector<std::vector<int>> hists;
  std::vector<double> mul_lg;
  if (a.is_crv()) {
    int n = int(crv_instance_count(m, g, a.counted_logvar));
    enumerate_histograms(n, int(a.prv.range.size()), hists);
    for (const auto& h : hists) mul_lg.push_back(log_multinomial(h));
  }

  out.table.assign(table_size(out_rad), Weight::zero());
  std::vector<int> otuple, ituple(in_rad.size());
  for (std::size_t oidx = 0; oidx < out.table.size(); ++oidx) {
    index_to_tuple(out_rad, oidx, otuple);
    for (std::size_t i = 0, j = 0; i < in_rad.size(); ++i)
      if (i != arg) ituple[i] = otuple[j++];
    Weight s = Weight::zero();
    for (int v = 0; v < in_rad[arg]; ++v) {
      ituple[arg] = v;
      Weight t = g.table[tuple_to_index(in_rad, ituple)];
      if (a.is_crv()) t *= Weight::from_log(mul_lg[v]);
      s += t;
    }
    out.table[oidx] = s.pow(double(k));
  }
  return out;
}

Parfactor op_multiply(const Model& m, const std::vector<Parfactor>& gs) {
  if (gs.empty()) throw InferenceError("multiply: empty operand list");
  Parfactor out;
  out.name = gs[0].name + "-x";
  out.constraint = gs[0].constraint;
  for (std::size_t i = 1; i < gs.size(); ++i)
    out.constraint = conjoin(out.constraint, gs[i].constraint, m.domains);

  // every operand's own groundings must survive the conjunction
  for (const auto& g : gs) {
    Constraint proj =
        project_keep(out.constraint, g.constraint.logvars, m.domains);
    if (!same_constraint(proj, g.constraint, m.domains))
      throw InferenceError("multiply: operand " + g.name +
                           " is not covered by the joint constraint");
  }

  std::vector<std::vector<std::size_t>> arg_map(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (const auto& a : gs[i].args) {
      auto pos = std::find(out.args.begin(), out.args.end(), a);
      if (pos == out.args.end()) {
        out.args.push_back(a);
        pos = out.args.end() - 1;
      }
      arg_map[i].push_back(std::size_t(pos - out.args.begin()));
    }
  }

  // counting arguments keep their histogram shape only if the instance count
  // is the same under the joint constraint
  for (std::size_t i = 0; i < gs.size(); ++i)
    for (const auto& a : gs[i].args)
      if (a.is_crv() && crv_instance_count(m, gs[i], a.counted_logvar) !=
                            crv_instance_count(m, out, a.counted_logvar))
        throw InferenceError("multiply: counting argument of " + gs[i].name +
                             " changes instance count");

  std::vector<std::string> counted;
  for (const auto& a : out.args)
    if (a.is_crv()) counted.push_back(a.counted_logvar);
  std::vector<std::string> free_res;
  for (const auto& lv : out.constraint.logvars)
    if (std::find(counted.begin(), counted.end(), lv) == counted.end())
      free_res.push_back(lv);
  Constraint c_free = project_keep(out.constraint, free_res, m.domains);

  std::vector<double> expo(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    std::vector<std::string> free_i;
    for (const auto& lv : gs[i].free_logvars())
      free_i.push_back(lv);
    std::int64_t k = count_per_instance(c_free, free_i, m.domains);
    if (k <= 0) throw InferenceError("multiply: empty result constraint");
    expo[i] = 1.0 / double(k);
  }

  auto out_rad = arg_range_sizes(m, out);
  out.table.assign(checked_table_size(out_rad, std::int64_t(1) << 22),
                   Weight::one());
  std::vector<std::vector<int>> in_rad;
  for (const auto& g : gs) in_rad.push_back(arg_range_sizes(m, g));

  std::vector<int> tuple;
  for (std::size_t idx = 0; idx < out.table.size(); ++idx) {
    index_to_tuple(out_rad, idx, tuple);
    Weight w = Weight::one();
    for (std::size_t i = 0; i < gs.size(); ++i) {
      std::vector<int> sub;
      for (std::size_t j = 0; j < gs[i].args.size(); ++j)
        sub.push_back(tuple[arg_map[i][j]]);
      w *= gs[i].table[tuple_to_index(in_rad[i], sub)].pow(expo[i]);
    }
    out.table[idx] = w;
  }
  return out;
}

std::vector<Parfactor> op_split(const Model& m, const Parfactor& g,
                                const std::string& lv,
                                const std::vector<int>& ids) {
  int i = g.constraint.index_of(lv);
  if (i < 0) throw InferenceError("split: unknown logvar " + lv);
  auto cur = allowed_ids(g.constraint, i, m.domains);
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> rest;
  for (int id : cur)
    if (!std::binary_search(sorted.begin(), sorted.end(), id))
      rest.push_back(id);

  std::vector<Parfactor> out;
  int part = 0;
  for (const auto& part_ids : {sorted, rest}) {
    Parfactor p = g;
    p.name = g.name + "-s" + std::to_string(part++);
    p.constraint = restrict_var(g.constraint, lv, part_ids, m.domains);
    if (!constraint_empty(p.constraint, m.domains)) out.push_back(std::move(p));
  }
  return out;
}

Parfactor op_count_convert(const Model& m, const Parfactor& g,
                           const std::string& lv) {
  int holder = -1, pos = -1;
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    const auto& a = g.args[i];
    if (a.counted_logvar == lv)
      throw InferenceError("count_convert: logvar already counted");
    int hits = 0;
    for (std::size_t p = 0; p < a.prv.params.size(); ++p)
      if (!a.prv.params[p].is_constant && a.prv.params[p].name == lv) {
        ++hits;
        pos = int(p);
      }
    if (hits > 1)
      throw InferenceError("count_convert: logvar repeats inside an argument");
    if (hits == 1) {
      if (holder >= 0)
        throw InferenceError("count_convert: logvar " + lv +
                             " occurs in several arguments");
      holder = int(i);
    }
  }
  if (holder < 0) throw InferenceError("count_convert: logvar unused");

  std::vector<std::string> others;
  for (const auto& l : g.constraint.logvars)
    if (l != lv) others.push_back(l);
  std::int64_t n = count_per_instance(g.constraint, others, m.domains);

  Parfactor out = g;
  out.name = g.name + "-cc";
  out.args[holder].counted_logvar = lv;
  int r = int(g.args[holder].prv.range.size());
  std::vector<std::vector<int>> hists;
  enumerate_histograms(int(n), r, hists);

  auto in_rad = arg_range_sizes(m, g);
  auto out_rad = arg_range_sizes(m, out);
  out.table.assign(table_size(out_rad), Weight::one());
  std::vector<int> otuple, ituple(in_rad.size());
  for (std::size_t oidx = 0; oidx < out.table.size(); ++oidx) {
    index_to_tuple(out_rad, oidx, otuple);
    ituple = otuple;
    const auto& h = hists[otuple[holder]];
    double lg = 0.0;
    bool zero = false;
    for (int v = 0; v < r && !zero; ++v) {
      if (h[v] == 0) continue;
      ituple[holder] = v;
      Weight base = g.table[tuple_to_index(in_rad, ituple)];
      if (base.is_zero())
        zero = true;
      else
        lg += double(h[v]) * base.log();
    }
    out.table[oidx] = zero ? Weight::zero() : Weight::from_log(lg);
  }
  return out;
}

std::vector<Parfactor> op_count_normalise(const Model& m, const Parfactor& g,
                                          const std::string& lv) {
  int li = g.constraint.index_of(lv);
  if (li < 0) throw InferenceError("count_normalise: unknown logvar " + lv);
  auto tuples = expand_tuples(g.constraint, m.domains);
  std::map<std::vector<int>, std::int64_t> per;
  for (const auto& t : tuples) {
    std::vector<int> key = t;
    key.erase(key.begin() + li);
    ++per[key];
  }
  std::map<std::int64_t, std::vector<std::vector<int>>> buckets;
  for (const auto& t : tuples) {
    std::vector<int> key = t;
    key.erase(key.begin() + li);
    buckets[per[key]].push_back(t);
  }
  if (buckets.size() < 2)
    throw InferenceError("count_normalise: already uniform");
  std::vector<Parfactor> out;
  int part = 0;
  for (auto& [k, rows] : buckets) {
    Parfactor p = g;
    p.name = g.name + "-cn" + std::to_string(part++);
    Constraint c;
    c.logvars = g.constraint.logvars;
    c.domains = g.constraint.domains;
    c.explicit_form = true;
    c.tuples = std::move(rows);
    if (auto rec = recognize_product_form(c, m.domains)) c = *rec;
    p.constraint = std::move(c);
    out.push_back(std::move(p));
  }
  return out;
}

Parfactor op_expand(const Model& m, const Parfactor& g, std::size_t arg,
                    int constant_id) {
  if (arg >= g.args.size() || !g.args[arg].is_crv())
    throw InferenceError("expand: not a counting argument");
  const Arg& a = g.args[arg];
  const std::string& lv = a.counted_logvar;
  int li = g.constraint.index_of(lv);
  for (auto [i, j] : g.constraint.diffs)
    if (!g.constraint.explicit_form && (i == li || j == li))
      throw InferenceError("expand: counted logvar is inequality-linked");
  auto ids = allowed_ids(g.constraint, li, m.domains);
  if (!std::binary_search(ids.begin(), ids.end(), constant_id))
    throw InferenceError("expand: constant not admitted");

  int n = int(crv_instance_count(m, g, lv));
  int r = int(a.prv.range.size());
  const std::string& cname =
      m.domain(g.constraint.domains[li]).constants[constant_id];

  Parfactor out = g;
  out.name = g.name + "-ex";
  // plain argument for the pulled-out constant
  Arg plain = a;
  plain.counted_logvar.clear();
  for (auto& p : plain.prv.params)
    if (!p.is_constant && p.name == lv) p = constant(cname);
  out.args[arg] = plain;
  bool keep_crv = n > 1;
  if (keep_crv) {
    std::vector<int> rest;
    for (int id : ids)
      if (id != constant_id) rest.push_back(id);
    out.constraint = restrict_var(g.constraint, lv, rest, m.domains);
    out.args.insert(out.args.begin() + arg + 1, a);
  } else {
    std::vector<std::string> others;
    for (const auto& l : g.constraint.logvars)
      if (l != lv) others.push_back(l);
    out.constraint = project_keep(g.constraint, others, m.domains);
  }

  std::vector<std::vector<int>> old_h, new_h;
  enumerate_histograms(n, r, old_h);
  if (keep_crv) enumerate_histograms(n - 1, r, new_h);

  auto in_rad = arg_range_sizes(m, g);
  auto out_rad = arg_range_sizes(m, out);
  out.table.assign(table_size(out_rad), Weight::zero());
  std::vector<int> otuple, ituple(in_rad.size());
  for (std::size_t oidx = 0; oidx < out.table.size(); ++oidx) {
    index_to_tuple(out_rad, oidx, otuple);
    int v = otuple[arg];
    std::vector<int> h =
        keep_crv ? new_h[otuple[arg + 1]] : std::vector<int>(r, 0);
    h[v] += 1;
    auto hit = std::find(old_h.begin(), old_h.end(), h);
    for (std::size_t i = 0; i < in_rad.size(); ++i) {
      if (i == arg)
        ituple[i] = int(hit - old_h.begin());
      else
        ituple[i] = otuple[i < arg ? i : i + (keep_crv ? 1 : 0)];
    }
    out.table[oidx] = g.table[tuple_to_index(in_rad, ituple)];
  }
  return out;
}

std::vector<Parfactor> op_ground_logvar(const Model& m, const Parfactor& g,
                                        const std::string& lv) {
  int li = g.constraint.index_of(lv);
  if (li < 0) throw InferenceError("ground: unknown logvar " + lv);
  for (const auto& a : g.args)
    if (a.counted_logvar == lv)
      throw InferenceError("ground: logvar is counted");
  auto ids = allowed_ids(g.constraint, li, m.domains);
  std::vector<std::string> others;
  for (const auto& l : g.constraint.logvars)
    if (l != lv) others.push_back(l);

  std::vector<Parfactor> out;
  for (int id : ids) {
    Parfactor p = g;
    p.name = g.name + "-g" + std::to_string(id);
    Constraint c = restrict_var(g.constraint, lv, {id}, m.domains);
    if (constraint_empty(c, m.domains)) continue;
    p.constraint = project_keep(c, others, m.domains);
    substitute_constant(p, lv, m.domain(g.constraint.domains[li]).constants[id]);
    out.push_back(std::move(p));
  }
  return out;
}

Parfactor op_absorb(const Model& m, const Parfactor& g, std::size_t arg,
                    int value) {
  if (arg >= g.args.size()) throw InferenceError("absorb: no such argument");
  const Arg& a = g.args[arg];
  auto in_rad = arg_range_sizes(m, g);

  int pick;  // table position of the observed value along the argument's axis
  std::vector<std::string> drop_lvs = arg_logvars(a);
  if (a.is_crv()) {
    // all counted instances observed: the histogram is a point mass
    int n = int(crv_instance_count(m, g, a.counted_logvar));
    int r = int(a.prv.range.size());
    std::vector<std::vector<int>> hists;
    enumerate_histograms(n, r, hists);
    std::vector<int> h(r, 0);
    h[value] = n;
    pick = int(std::find(hists.begin(), hists.end(), h) - hists.begin());
  } else {
    pick = value;
  }

  std::vector<std::string> kept = used_logvars(g, {arg});
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != arg && g.args[i].is_crv() &&
        std::find(kept.begin(), kept.end(), g.args[i].counted_logvar) ==
            kept.end())
      kept.push_back(g.args[i].counted_logvar);

  Constraint c_nc = g.constraint;
  if (a.is_crv()) {
    std::vector<std::string> minus;
    for (const auto& l : g.constraint.logvars)
      if (l != a.counted_logvar) minus.push_back(l);
    c_nc = project_keep(g.constraint, minus, m.domains);
  }
  std::int64_t k = count_per_instance(c_nc, kept, m.domains);

  Parfactor out;
  out.name = g.name + "-ab";
  out.constraint = project_keep(g.constraint, kept, m.domains);
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != arg) out.args.push_back(g.args[i]);

  std::vector<int> out_rad;
  for (std::size_t i = 0; i < in_rad.size(); ++i)
    if (i != arg) out_rad.push_back(in_rad[i]);
  out.table.assign(table_size(out_rad), Weight::zero());
  std::vector<int> otuple, ituple(in_rad.size());
  for (std::size_t oidx = 0; oidx < out.table.size(); ++oidx) {
    index_to_tuple(out_rad, oidx, otuple);
    for (std::size_t i = 0, j = 0; i < in_rad.size(); ++i)
      ituple[i] = (i == arg) ? pick : otuple[j++];
    out.table[oidx] = g.table[tuple_to_index(in_rad, ituple)].pow(double(k));
  }
  return out;
}

Parfactor op_joint_count_convert(const Model& m, const Parfactor& g) {
  // locate the pair: two plain arguments equal except at one position, where
  // they hold different logvars linked by an inequality
  int a1 = -1, a2 = -1, pos = -1;
  for (std::size_t i = 0; i < g.args.size() && a1 < 0; ++i) {
    for (std::size_t j = i + 1; j < g.args.size() && a1 < 0; ++j) {
      const Arg &x = g.args[i], &y = g.args[j];
      if (x.is_crv() || y.is_crv()) continue;
      if (x.prv.relation != y.prv.relation) continue;
      if (x.prv.params.size() != y.prv.params.size()) continue;
      int mismatch = -1;
      bool ok = true;
      for (std::size_t p = 0; p < x.prv.params.size(); ++p) {
        if (x.prv.params[p] == y.prv.params[p]) continue;
        if (mismatch >= 0 || x.prv.params[p].is_constant ||
            y.prv.params[p].is_constant) {
          ok = false;
          break;
        }
        mismatch = int(p);
      }
      if (ok && mismatch >= 0) {
        a1 = int(i);
        a2 = int(j);
        pos = mismatch;
      }
    }
  }
  if (a1 < 0)
    throw InferenceError("joint count conversion: no just-different pair");
  const std::string X = g.args[a1].prv.params[pos].name;
  const std::string Y = g.args[a2].prv.params[pos].name;
  int xi = g.constraint.index_of(X), yi = g.constraint.index_of(Y);
  if (g.constraint.explicit_form)
    throw InferenceError("joint count conversion: explicit constraint");
  bool has_ineq = false;
  for (auto [i, j] : g.constraint.diffs)
    if ((i == std::min(xi, yi) && j == std::max(xi, yi))) has_ineq = true;
  if (!has_ineq)
    throw InferenceError("joint count conversion: pair is not inequality-"
                         "linked");
  if (!(g.constraint.allowed[xi] == g.constraint.allowed[yi]))
    throw InferenceError("joint count conversion: asymmetric value sets");
  // the two logvars must be confined to the pair and symmetric elsewhere
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    if (int(i) == a1 || int(i) == a2) continue;
    for (const auto& lv : arg_logvars(g.args[i]))
      if (lv == X || lv == Y)
        throw InferenceError("joint count conversion: pair logvar escapes");
    if (g.args[i].counted_logvar == X || g.args[i].counted_logvar == Y)
      throw InferenceError("joint count conversion: pair logvar escapes");
  }
  std::set<int> xd, yd;
  for (auto [i, j] : g.constraint.diffs) {
    if (i == xi && j != yi) xd.insert(j);
    if (j == xi && i != yi) xd.insert(i);
    if (i == yi && j != xi) yd.insert(j);
    if (j == yi && i != xi) yd.insert(i);
  }
  if (xd != yd)
    throw InferenceError("joint count conversion: asymmetric inequalities");

  Parfactor out = g;
  out.name = g.name + "-jc";
  std::vector<std::string> keep;
  for (const auto& l : g.constraint.logvars)
    if (l != Y) keep.push_back(l);
  out.constraint = project_keep(g.constraint, keep, m.domains);
  out.args[a1].counted_logvar = X;
  out.args.erase(out.args.begin() + a2);

  std::int64_t n = crv_instance_count(m, out, X);
  int r = int(g.args[a1].prv.range.size());
  std::vector<std::vector<int>> hists;
  enumerate_histograms(int(n), r, hists);

  auto in_rad = arg_range_sizes(m, g);
  auto out_rad = arg_range_sizes(m, out);
  out.table.assign(table_size(out_rad), Weight::zero());
  std::vector<int> otuple, ituple(in_rad.size());
  for (std::size_t oidx = 0; oidx < out.table.size(); ++oidx) {
    index_to_tuple(out_rad, oidx, otuple);
    const auto& h = hists[otuple[a1]];
    for (std::size_t i = 0, j = 0; i < in_rad.size(); ++i) {
      if (int(i) == a2) continue;
      ituple[i] = otuple[j++];
    }
    double lg = 0.0;
    bool zero = false;
    for (int v = 0; v < r && !zero; ++v) {
      for (int w = 0; w < r && !zero; ++w) {
        std::int64_t e =
            std::int64_t(h[v]) * h[w] - (v == w ? std::int64_t(h[v]) : 0);
        if (e == 0) continue;
        ituple[a1] = v;
        ituple[a2] = w;
        Weight base = g.table[tuple_to_index(in_rad, ituple)];
        if (base.is_zero())
          zero = true;
        else
          lg += double(e) * base.log();
      }
    }
    out.table[oidx] = zero ? Weight::zero() : Weight::from_log(lg);
  }
  return out;
}

// -- Engine ------------------------------------------------------------------

// An argument class: the set of ground randvars one parfactor argument (or an
// anchor) stands for, with the positional pattern needed to compare classes.
struct LveEngine::ClassInfo {
  std::string relation;
  std::vector<int> consts;        // per position: constant id, or -1
  std::vector<int> lv_of_pos;     // per position: index into lvs, or -1
  std::vector<std::string> lvs;   // distinct logvars, first-occurrence order
  Constraint proj;                // over lvs
  std::int64_t count = 0;
  int pf = -1, arg = -1;          // occurrence, -1 for anchors
  std::string key;
};

struct LveEngineDetail {
  using ClassInfo = LveEngine::ClassInfo;

  static ClassInfo make_class(const Model& m, const Prv& prv,
                              const Constraint& c, int pf, int arg) {
    ClassInfo ci;
    ci.relation = prv.relation;
    ci.pf = pf;
    ci.arg = arg;
    const auto& sig = m.relation(prv.relation);
    for (std::size_t p = 0; p < prv.params.size(); ++p) {
      const Term& t = prv.params[p];
      if (t.is_constant) {
        ci.consts.push_back(m.domain(sig.param_domains[p]).index_of(t.name));
        ci.lv_of_pos.push_back(-1);
      } else {
        auto it = std::find(ci.lvs.begin(), ci.lvs.end(), t.name);
        if (it == ci.lvs.end()) {
          ci.lvs.push_back(t.name);
          it = ci.lvs.end() - 1;
        }
        ci.consts.push_back(-1);
        ci.lv_of_pos.push_back(int(it - ci.lvs.begin()));
      }
    }
    if (ci.lvs.empty()) {
      ci.proj = Constraint::top({}, {});
      ci.count = 1;
    } else {
      ci.proj = project(c, ci.lvs, m.domains);
      ci.count = tuple_count(ci.proj, m.domains);
    }
    std::ostringstream os;
    os << ci.relation;
    for (std::size_t p = 0; p < ci.consts.size(); ++p)
      os << '|' << (ci.consts[p] >= 0 ? "c" + std::to_string(ci.consts[p])
                                      : "v" + std::to_string(ci.lv_of_pos[p]));
    os << '#';
    if (ci.proj.explicit_form) {
      os << "E";
      auto rows = ci.proj.tuples;
      std::sort(rows.begin(), rows.end());
      for (const auto& r : rows) {
        os << '(';
        for (int v : r) os << v << ' ';
        os << ')';
      }
    } else {
      for (std::size_t i = 0; i < ci.proj.logvars.size(); ++i) {
        os << '[';
        for (int id : allowed_ids(ci.proj, int(i), m.domains)) os << id << ' ';
        os << ']';
      }
      auto diffs = ci.proj.diffs;
      std::sort(diffs.begin(), diffs.end());
      for (auto [i, j] : diffs) os << "!" << i << ',' << j;
    }
    ci.key = os.str();
    return ci;
  }

  static std::vector<std::vector<int>> class_tuples(const Model& m,
                                                    const ClassInfo& c) {
    std::vector<std::vector<int>> out;
    if (c.lvs.empty()) {
      out.push_back(c.consts);
      return out;
    }
    for (const auto& t : expand_tuples(c.proj, m.domains)) {
      std::vector<int> row(c.consts.size());
      for (std::size_t p = 0; p < row.size(); ++p)
        row[p] = c.consts[p] >= 0 ? c.consts[p] : t[c.lv_of_pos[p]];
      out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // |A ∩ B| for two classes of the same relation.
  static std::int64_t meet_count(const Model& m, const ClassInfo& a,
                                 const ClassInfo& b) {
    if (a.relation != b.relation) return 0;
    if (a.proj.explicit_form || b.proj.explicit_form ||
        (a.count <= 4096 && b.count <= 4096)) {
      auto ta = class_tuples(m, a), tb = class_tuples(m, b);
      std::vector<std::vector<int>> inter;
      std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                            std::back_inserter(inter));
      return std::int64_t(inter.size());
    }
    // symbolic: merge positionally matched logvars, intersect value sets
    std::size_t na = a.lvs.size(), nb = b.lvs.size();
    std::vector<int> parent(na + nb);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<int> fixed(na + nb, -1);
    for (std::size_t p = 0; p < a.consts.size(); ++p) {
      int ca = a.consts[p], cb = b.consts[p];
      int la = a.lv_of_pos[p], lb = b.lv_of_pos[p];
      if (ca >= 0 && cb >= 0) {
        if (ca != cb) return 0;
      } else if (ca >= 0) {
        int r = find(int(na) + lb);
        if (fixed[r] >= 0 && fixed[r] != ca) return 0;
        fixed[r] = ca;
      } else if (cb >= 0) {
        int r = find(la);
        if (fixed[r] >= 0 && fixed[r] != cb) return 0;
        fixed[r] = cb;
      } else {
        int r1 = find(la), r2 = find(int(na) + lb);
        if (r1 != r2) {
          int f1 = fixed[r1], f2 = fixed[r2];
          if (f1 >= 0 && f2 >= 0 && f1 != f2) return 0;
          parent[r1] = r2;
          fixed[r2] = std::max(f1, f2);
        }
      }
    }
    std::map<int, int> root_var;
    Constraint c;
    auto var_of = [&](int node) {
      int r = find(node);
      auto it = root_var.find(r);
      if (it != root_var.end()) return it->second;
      int idx = int(c.logvars.size());
      c.logvars.push_back("m" + std::to_string(idx));
      std::string dom = std::size_t(r) < na ? a.proj.domains[r]
                                            : b.proj.domains[r - int(na)];
      c.domains.push_back(dom);
      c.allowed.emplace_back();
      root_var[r] = idx;
      return idx;
    };
    // collect per-root allowed intersections
    std::map<int, std::vector<int>> sets;
    auto narrow = [&](int node, std::vector<int> ids) {
      int r = find(node);
      auto it = sets.find(r);
      if (it == sets.end()) {
        sets[r] = std::move(ids);
      } else {
        std::vector<int> inter;
        std::set_intersection(it->second.begin(), it->second.end(), ids.begin(),
                              ids.end(), std::back_inserter(inter));
        it->second = std::move(inter);
      }
    };
    for (std::size_t i = 0; i < na; ++i)
      narrow(int(i), allowed_ids(a.proj, int(i), m.domains));
    for (std::size_t i = 0; i < nb; ++i)
      narrow(int(na + i), allowed_ids(b.proj, int(i), m.domains));
    for (std::size_t i = 0; i < na + nb; ++i) {
      int r = find(int(i));
      if (fixed[r] >= 0) narrow(r, {fixed[r]});
    }
    std::set<std::pair<int, int>> diffs;
    auto add_diff = [&](int n1, int n2) {
      int v1 = var_of(n1), v2 = var_of(n2);
      if (v1 == v2) return false;
      diffs.emplace(std::min(v1, v2), std::max(v1, v2));
      return true;
    };
    for (std::size_t i = 0; i < na + nb; ++i) var_of(int(i));
    for (auto [i, j] : a.proj.diffs)
      if (!add_diff(i, j)) return 0;
    for (auto [i, j] : b.proj.diffs)
      if (!add_diff(int(na) + i, int(na) + j)) return 0;
    for (const auto& [r, var] : root_var) {
      const DomainSpec& d = m.domain(c.domains[var]);
      const auto& ids = sets.at(find(r));
      if (ids.empty()) return 0;
      c.allowed[var].full = std::int64_t(ids.size()) == d.size();
      if (!c.allowed[var].full) c.allowed[var].ids = ids;
    }
    for (auto [i, j] : diffs) c.diffs.emplace_back(i, j);
    return tuple_count(c, m.domains);
  }

  static bool class_equal(const Model& m, const ClassInfo& a,
                          const ClassInfo& b) {
    if (a.relation != b.relation || a.count != b.count) return false;
    return meet_count(m, a, b) == a.count;
  }

  static bool class_subset(const Model& m, const ClassInfo& a,
                           const ClassInfo& b) {
    if (a.relation != b.relation) return false;
    return meet_count(m, a, b) == a.count;
  }

  static std::vector<int> pos_ids(const Model& m, const ClassInfo& c,
                                  std::size_t p) {
    if (c.consts[p] >= 0) return {c.consts[p]};
    return allowed_ids(c.proj, c.lv_of_pos[p], m.domains);
  }

  static bool lv_is_counted(const Parfactor& g, const std::string& lv) {
    for (const auto& a : g.args)
      if (a.counted_logvar == lv) return true;
    return false;
  }

  static std::vector<Parfactor> split_on_diag(const Model& m,
                                              const Parfactor& g,
                                              const std::string& X,
                                              const std::string& Y) {
    std::vector<Parfactor> out;
    const Constraint& c = g.constraint;
    int xi = c.index_of(X), yi = c.index_of(Y);
    if (c.explicit_form) {
      Parfactor off = g, diag = g;
      off.name = g.name + "-sd0";
      diag.name = g.name + "-sd1";
      off.constraint.tuples.clear();
      diag.constraint.tuples.clear();
      for (const auto& t : c.tuples)
        (t[xi] != t[yi] ? off : diag).constraint.tuples.push_back(t);
      if (!off.constraint.tuples.empty()) {
        if (auto r = recognize_product_form(off.constraint, m.domains))
          off.constraint = *r;
        out.push_back(std::move(off));
      }
      if (!diag.constraint.tuples.empty()) {
        // collapse Y onto X
        std::vector<std::string> keep;
        for (const auto& l : c.logvars)
          if (l != Y) keep.push_back(l);
        diag.constraint = project_keep(diag.constraint, keep, m.domains);
        std::map<std::string, std::string> ren{{Y, X}};
        rename_logvars(diag, ren);
        out.push_back(std::move(diag));
      }
      return out;
    }
    Parfactor off = g;
    off.name = g.name + "-sd0";
    off.constraint.diffs.emplace_back(std::min(xi, yi), std::max(xi, yi));
    if (!constraint_empty(off.constraint, m.domains))
      out.push_back(std::move(off));

    Parfactor diag = g;
    diag.name = g.name + "-sd1";
    Constraint dc;
    for (std::size_t i = 0; i < c.logvars.size(); ++i) {
      if (int(i) == yi) continue;
      dc.logvars.push_back(c.logvars[i]);
      dc.domains.push_back(c.domains[i]);
      dc.allowed.push_back(c.allowed[i]);
    }
    int nxi = dc.index_of(X);
    {
      const DomainSpec& d = m.domain(c.domains[xi]);
      auto sx = allowed_ids(c, xi, m.domains);
      auto sy = allowed_ids(c, yi, m.domains);
      std::vector<int> inter;
      std::set_intersection(sx.begin(), sx.end(), sy.begin(), sy.end(),
                            std::back_inserter(inter));
      dc.allowed[nxi].full = std::int64_t(inter.size()) == d.size();
      if (!dc.allowed[nxi].full) dc.allowed[nxi].ids = inter;
    }
    bool empty = false;
    std::set<std::pair<int, int>> nd;
    for (auto [i, j] : c.diffs) {
      int a = i == yi ? xi : i, b = j == yi ? xi : j;
      if (a == b) {
        empty = true;
        break;
      }
      int ni = dc.index_of(c.logvars[a]), nj = dc.index_of(c.logvars[b]);
      nd.emplace(std::min(ni, nj), std::max(ni, nj));
    }
    if (!empty) {
      for (auto [i, j] : nd) dc.diffs.emplace_back(i, j);
      diag.constraint = std::move(dc);
      std::map<std::string, std::string> ren{{Y, X}};
      rename_logvars(diag, ren);
      if (!constraint_empty(diag.constraint, m.domains))
        out.push_back(std::move(diag));
    }
    return out;
  }

  // Splits parfactor `pf` so the class at argument `arg` separates into the
  // part inside `other` and the part outside it. Returns the pieces.
  static std::vector<Parfactor> split_class(const Model& m, const Parfactor& g,
                                            const ClassInfo& cls,
                                            const ClassInfo& other,
                                            LveTrace& trace) {
    // 1) a position whose value sets differ
    for (std::size_t p = 0; p < cls.consts.size(); ++p) {
      if (cls.consts[p] >= 0) continue;
      auto sa = pos_ids(m, cls, p);
      auto sb = pos_ids(m, other, p);
      std::vector<int> inter;
      std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                            std::back_inserter(inter));
      if (inter.empty() || inter == sa) continue;
      const std::string& lv = cls.lvs[cls.lv_of_pos[p]];
      if (lv_is_counted(g, lv)) {
        // a counted logvar cannot be split; pull the boundary constants out
        for (std::size_t ai = 0; ai < g.args.size(); ++ai)
          if (g.args[ai].counted_logvar == lv) {
            trace.records.push_back({"expand", g.name, lv, 0});
            return {op_expand(m, g, ai, inter.front())};
          }
      }
      trace.records.push_back(
          {"split", g.name, lv, std::int64_t(inter.size())});
      return op_split(m, g, lv, inter);
    }
    // 2) an inequality present in `other` but not here
    for (auto [i, j] : other.proj.diffs) {
      // positions of other's logvars i and j
      int pi = -1, pj = -1;
      for (std::size_t p = 0; p < other.consts.size(); ++p) {
        if (other.lv_of_pos[p] == i && pi < 0) pi = int(p);
        if (other.lv_of_pos[p] == j && pj < 0) pj = int(p);
      }
      if (pi < 0 || pj < 0) continue;
      if (cls.lv_of_pos[pi] < 0 || cls.lv_of_pos[pj] < 0) continue;
      if (cls.lv_of_pos[pi] == cls.lv_of_pos[pj]) continue;
      const std::string& X = cls.lvs[cls.lv_of_pos[pi]];
      const std::string& Y = cls.lvs[cls.lv_of_pos[pj]];
      bool have = false;
      for (auto [u, v] : cls.proj.diffs)
        if ((u == cls.lv_of_pos[pi] && v == cls.lv_of_pos[pj]) ||
            (v == cls.lv_of_pos[pi] && u == cls.lv_of_pos[pj]))
          have = true;
      if (have || lv_is_counted(g, X) || lv_is_counted(g, Y)) continue;
      trace.records.push_back({"split", g.name, X + "/" + Y, 0});
      return split_on_diag(m, g, X, Y);
    }
    // 3) explicit fallback: partition the constraint tuples by membership
    auto meet_rows = [&] {
      auto ta = class_tuples(m, cls), tb = class_tuples(m, other);
      std::vector<std::vector<int>> inter;
      std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                            std::back_inserter(inter));
      return inter;
    }();
    std::set<std::vector<int>> in_meet(meet_rows.begin(), meet_rows.end());
    auto tuples = expand_tuples(g.constraint, m.domains);
    Parfactor inside = g, outside = g;
    inside.name = g.name + "-m0";
    outside.name = g.name + "-m1";
    for (auto* part : {&inside, &outside}) {
      part->constraint.explicit_form = true;
      part->constraint.allowed.clear();
      part->constraint.diffs.clear();
      part->constraint.tuples.clear();
    }
    for (const auto& t : tuples) {
      std::vector<int> row(cls.consts.size());
      for (std::size_t p = 0; p < row.size(); ++p)
        row[p] = cls.consts[p] >= 0
                     ? cls.consts[p]
                     : t[g.constraint.index_of(cls.lvs[cls.lv_of_pos[p]])];
      (in_meet.count(row) ? inside : outside).constraint.tuples.push_back(t);
    }
    trace.records.push_back({"split", g.name, cls.relation, 0});
    std::vector<Parfactor> out;
    for (auto* part : {&inside, &outside}) {
      if (part->constraint.tuples.empty()) continue;
      if (auto r = recognize_product_form(part->constraint, m.domains))
        part->constraint = *r;
      out.push_back(std::move(*part));
    }
    return out;
  }

  // Rewrites a parfactor into an equivalent simpler one: drops empty
  // constraints, substitutes singleton logvars by their constants, folds
  // logvars no argument uses into a table exponent.
  static bool simplify_one(const Model& m, Parfactor& g) {
    for (;;) {
      if (constraint_empty(g.constraint, m.domains)) return false;
      Constraint& c = g.constraint;
      bool changed = false;
      for (std::size_t i = 0; i < c.logvars.size() && !changed; ++i) {
        auto ids = allowed_ids(c, int(i), m.domains);
        if (ids.size() != 1) continue;
        const std::string lv = c.logvars[i];
        if (lv_is_counted(g, lv)) {
          // a counting argument over one instance is a plain argument; the
          // histogram order for n=1 matches the range order entry for entry
          std::int64_t n = 0;
          try {
            n = crv_instance_count(m, g, lv);
          } catch (const NonUniformCountError&) {
            continue;
          }
          if (n != 1) continue;
          for (auto& a : g.args)
            if (a.counted_logvar == lv) a.counted_logvar.clear();
          changed = true;
          continue;
        }
        if (!c.explicit_form) {
          // move inequalities into the partners' value sets
          std::vector<std::pair<int, int>> rest;
          for (auto [x, y] : c.diffs) {
            if (x != int(i) && y != int(i)) {
              rest.emplace_back(x, y);
              continue;
            }
            int o = x == int(i) ? y : x;
            auto oid = allowed_ids(c, o, m.domains);
            oid.erase(std::remove(oid.begin(), oid.end(), ids[0]), oid.end());
            const DomainSpec& d = m.domain(c.domains[o]);
            c.allowed[o].full = std::int64_t(oid.size()) == d.size();
            if (!c.allowed[o].full) c.allowed[o].ids = oid;
          }
          c.diffs = std::move(rest);
        }
        std::vector<std::string> keep;
        for (const auto& l : c.logvars)
          if (l != lv) keep.push_back(l);
        std::string value = m.domain(c.domains[i]).constants[ids[0]];
        g.constraint = project_keep(c, keep, m.domains);
        substitute_constant(g, lv, value);
        changed = true;
      }
      if (changed) continue;
      // logvars no argument mentions
      std::vector<std::string> used = used_logvars(g, {});
      for (const auto& a : g.args)
        if (a.is_crv() &&
            std::find(used.begin(), used.end(), a.counted_logvar) == used.end())
          used.push_back(a.counted_logvar);
      if (used.size() < c.logvars.size()) {
        std::int64_t k = count_per_instance(c, used, m.domains);
        g.constraint = project_keep(c, used, m.domains);
        for (auto& w : g.table) w = w.pow(double(k));
        continue;
      }
      return true;
    }
  }

  static void simplify_all(LveEngine& e) {
    std::vector<Parfactor> out;
    for (auto& g : e.pfs_)
      if (simplify_one(e.m_, g)) out.push_back(std::move(g));
    e.pfs_ = std::move(out);
  }

  static bool shatter_impl(LveEngine& e, const std::vector<ClassInfo>& anchors) {
    std::vector<ClassInfo> classes;
    for (std::size_t i = 0; i < e.pfs_.size(); ++i)
      for (std::size_t a = 0; a < e.pfs_[i].args.size(); ++a)
        classes.push_back(make_class(e.m_, e.pfs_[i].args[a].prv,
                                     e.pfs_[i].constraint, int(i), int(a)));
    auto apply_split = [&](const ClassInfo& target, const ClassInfo& other) {
      auto pieces = split_class(e.m_, e.pfs_[target.pf], target, other,
                                e.trace_);
      e.pfs_.erase(e.pfs_.begin() + target.pf);
      for (auto& p : pieces) e.pfs_.push_back(std::move(p));
    };
    for (std::size_t i = 0; i < classes.size(); ++i) {
      for (std::size_t j = i + 1; j < classes.size(); ++j) {
        const ClassInfo &a = classes[i], &b = classes[j];
        if (a.relation != b.relation) continue;
        if (a.pf == b.pf && a.key == b.key) continue;
        std::int64_t mc = meet_count(e.m_, a, b);
        if (mc == 0 || (mc == a.count && mc == b.count)) continue;
        if (mc != a.count)
          apply_split(a, b);
        else
          apply_split(b, a);
        return true;
      }
      for (const auto& anc : anchors) {
        const ClassInfo& a = classes[i];
        if (a.relation != anc.relation) continue;
        std::int64_t mc = meet_count(e.m_, a, anc);
        if (mc == 0 || mc == a.count) continue;
        apply_split(a, anc);
        return true;
      }
    }
    return false;
  }

  static void fixpoint(LveEngine& e, const std::vector<ClassInfo>& anchors) {
    for (;;) {
      simplify_all(e);
      if (!shatter_impl(e, anchors)) return;
    }
  }

  // Alignment: renames g's logvars so arguments of classes it shares with the
  // pool take the pool's names. Returns false on irreconcilable patterns.
  static bool align(LveEngine& e, Parfactor& g,
                    const std::vector<Parfactor>& pool,
                    std::set<std::string>& taken) {
    std::map<std::string, std::string> ren;
    std::set<std::string> targets;
    std::vector<bool> matched(g.args.size(), false);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t ai = 0; ai < g.args.size(); ++ai) {
        if (matched[ai]) continue;
        ClassInfo ga = make_class(e.m_, g.args[ai].prv, g.constraint, -1, -1);
        for (const auto& ref : pool) {
          bool done = false;
          for (const auto& ra : ref.args) {
            if (ra.prv.relation != g.args[ai].prv.relation) continue;
            ClassInfo rc = make_class(e.m_, ra.prv, ref.constraint, -1, -1);
            if (!class_equal(e.m_, ga, rc)) continue;
            // tentative positional mapping
            std::map<std::string, std::string> add;
            bool ok = true;
            for (std::size_t p = 0; p < ra.prv.params.size() && ok; ++p) {
              const Term& rp = ra.prv.params[p];
              const Term& gp = g.args[ai].prv.params[p];
              if (rp.is_constant != gp.is_constant) {
                ok = false;
              } else if (rp.is_constant) {
                ok = rp.name == gp.name;
              } else {
                auto cur = ren.count(gp.name)
                               ? ren.at(gp.name)
                               : (add.count(gp.name) ? add.at(gp.name)
                                                     : std::string());
                if (cur.empty()) {
                  if (targets.count(rp.name) &&
                      (!ren.count(gp.name) || ren.at(gp.name) != rp.name)) {
                    // another logvar already claimed this name
                    bool mine = false;
                    for (const auto& [k, v] : ren)
                      if (v == rp.name && k == gp.name) mine = true;
                    if (!mine) ok = false;
                  }
                  if (ok) add[gp.name] = rp.name;
                } else {
                  ok = cur == rp.name;
                }
              }
            }
            if (!ok) continue;
            for (const auto& [k, v] : add) {
              ren[k] = v;
              targets.insert(v);
            }
            matched[ai] = true;
            changed = true;
            done = true;
            break;
          }
          if (done) break;
        }
      }
    }
    // fresh names for everything unmapped that clashes
    for (const auto& lv : g.constraint.logvars) {
      if (ren.count(lv)) continue;
      if (!taken.count(lv)) {
        taken.insert(lv);
        continue;
      }
      ren[lv] = e.fresh_name(lv);
      taken.insert(ren[lv]);
    }
    for (const auto& [k, v] : ren) taken.insert(v);
    rename_logvars(g, ren);
    return true;
  }

  static int try_elim(LveEngine& e, const ClassInfo& cand, bool allow_ground) {
    const Model& m = e.m_;
    LveTrace buf;
    std::vector<std::size_t> gathered;
    for (std::size_t i = 0; i < e.pfs_.size(); ++i) {
      bool hit = false;
      for (const auto& a : e.pfs_[i].args) {
        if (a.prv.relation != cand.relation) continue;
        ClassInfo cls = make_class(m, a.prv, e.pfs_[i].constraint, -1, -1);
        std::int64_t mc = meet_count(m, cls, cand);
        if (mc == 0) continue;
        if (!class_equal(m, cls, cand)) return 0;  // needs more shattering
        hit = true;
      }
      if (hit) gathered.push_back(i);
    }
    if (gathered.empty()) return 0;

    std::vector<Parfactor> ops;
    std::set<std::string> taken;
    ops.push_back(e.pfs_[gathered[0]]);
    for (const auto& lv : ops[0].constraint.logvars) taken.insert(lv);
    for (std::size_t k = 1; k < gathered.size(); ++k) {
      Parfactor g = e.pfs_[gathered[k]];
      if (!align(e, g, ops, taken)) return 0;
      ops.push_back(std::move(g));
    }

    // when a counting argument cannot be reconciled with its plain twins,
    // the grounding fallback pulls its constants out one by one; the changed
    // parfactor is committed and the elimination retried from scratch
    auto ground_crv = [&](std::size_t i, const std::string& relation) -> int {
      if (!allow_ground) return 0;
      Parfactor exp = e.pfs_[gathered[i]];
      std::vector<OpRecord> recs;
      while (true) {
        int ai = -1;
        for (std::size_t k = 0; k < exp.args.size(); ++k)
          if (exp.args[k].is_crv() && exp.args[k].prv.relation == relation) {
            ai = int(k);
            break;
          }
        if (ai < 0) break;
        std::int64_t n;
        try {
          n = crv_instance_count(m, exp, exp.args[ai].counted_logvar);
        } catch (const NonUniformCountError&) {
          return 0;
        }
        if (n <= 1) break;
        int lvi = exp.constraint.index_of(exp.args[ai].counted_logvar);
        auto ids = allowed_ids(exp.constraint, lvi, m.domains);
        if (ids.empty()) return 0;
        std::int64_t cost = std::int64_t(exp.table.size());
        try {
          exp = op_expand(m, exp, std::size_t(ai), ids[0]);
        } catch (const std::runtime_error&) {
          return 0;
        }
        recs.push_back({"expand", exp.name, relation, cost});
      }
      if (recs.empty()) return 0;
      e.pfs_[gathered[i]] = std::move(exp);
      for (auto& r : recs) e.trace_.records.push_back(std::move(r));
      return 1;
    };

    // a counting argument in one operand forces the plain twins to convert
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (const auto& a : ops[i].args) {
        if (!a.is_crv()) continue;
        for (std::size_t j = 0; j < ops.size(); ++j) {
          if (j == i) continue;
          int plain_twins = 0;
          for (const auto& b : ops[j].args)
            if (!b.is_crv() && b.prv.relation == a.prv.relation) ++plain_twins;
          if (plain_twins >= 2) {
            // a pairwise-different pair next to a counting argument folds
            // into one counting argument regardless of policy
            try {
              ops[j] = op_joint_count_convert(m, ops[j]);
            } catch (const InferenceError&) {
              return ground_crv(i, a.prv.relation);
            }
            // line the counted logvar up with the existing counting argument
            for (auto& b2 : ops[j].args) {
              if (!b2.is_crv() || b2.prv.relation != a.prv.relation) continue;
              if (b2.counted_logvar == a.counted_logvar) break;
              bool clash = false;
              for (const auto& l : ops[j].constraint.logvars)
                if (l == a.counted_logvar) clash = true;
              if (!clash)
                rename_logvars(ops[j], {{b2.counted_logvar, a.counted_logvar}});
              break;
            }
            buf.records.push_back({"joint_count_convert", ops[j].name,
                                   a.prv.relation,
                                   std::int64_t(ops[j].table.size())});
            continue;
          }
          for (const auto& b : ops[j].args) {
            if (b.is_crv() || b.prv != a.prv) continue;
            try {
              ops[j] = op_count_convert(m, ops[j], a.counted_logvar);
            } catch (const InferenceError&) {
              return ground_crv(i, a.prv.relation);
            } catch (const NonUniformCountError&) {
              return ground_crv(i, a.prv.relation);
            }
            buf.records.push_back({"count_convert", ops[j].name,
                                   a.counted_logvar,
                                   std::int64_t(ops[j].table.size())});
            break;
          }
        }
      }
    }

    Parfactor product;
    try {
      product = ops.size() > 1 ? op_multiply(m, ops) : ops[0];
    } catch (const std::runtime_error&) {
      return 0;
    }
    if (ops.size() > 1)
      buf.records.push_back({"multiply", product.name, cand.relation,
                             std::int64_t(product.table.size())});

    std::vector<std::size_t> cidx;
    for (std::size_t a = 0; a < product.args.size(); ++a) {
      if (product.args[a].prv.relation != cand.relation) continue;
      ClassInfo cls =
          make_class(m, product.args[a].prv, product.constraint, -1, -1);
      if (class_equal(m, cls, cand)) cidx.push_back(a);
    }
    if (cidx.empty()) return 0;

    auto commit = [&](std::vector<Parfactor> replacement) {
      std::sort(gathered.rbegin(), gathered.rend());
      for (std::size_t i : gathered) e.pfs_.erase(e.pfs_.begin() + i);
      for (auto& p : replacement) e.pfs_.push_back(std::move(p));
      for (auto& r : buf.records) e.trace_.records.push_back(std::move(r));
    };

    auto finish_single = [&](Parfactor g, std::size_t target) -> int {
      // count-convert logvars the target argument does not cover
      for (;;) {
        std::vector<std::string> covered = arg_logvars(g.args[target]);
        if (g.args[target].is_crv())
          covered.push_back(g.args[target].counted_logvar);
        std::string miss;
        for (const auto& lv : g.free_logvars())
          if (std::find(covered.begin(), covered.end(), lv) == covered.end()) {
            miss = lv;
            break;
          }
        if (miss.empty()) break;
        try {
          g = op_count_convert(m, g, miss);
          buf.records.push_back({"count_convert", g.name, miss,
                                 std::int64_t(g.table.size())});
        } catch (const NonUniformCountError&) {
          try {
            auto pieces = op_count_normalise(m, g, miss);
            buf.records.push_back({"count_normalise", g.name, miss,
                                   std::int64_t(pieces.size())});
            commit(std::move(pieces));
            return 1;
          } catch (const std::runtime_error&) {
            return 0;
          }
        } catch (const std::runtime_error&) {
          return 0;
        }
      }
      std::int64_t cost = std::int64_t(g.table.size());
      Parfactor result;
      try {
        result = op_sum_out(m, g, target);
      } catch (const std::runtime_error&) {
        return 0;
      }
      buf.records.push_back({"sum_out", g.name, cand.relation, cost});
      commit({std::move(result)});
      return 1;
    };

    if (cidx.size() == 1) return finish_single(std::move(product), cidx[0]);

    if (cidx.size() == 2 && e.opts_.justdiff == JustDiff::Count) {
      try {
        Parfactor jc = op_joint_count_convert(m, product);
        buf.records.push_back({"joint_count_convert", jc.name, cand.relation,
                               std::int64_t(jc.table.size())});
        for (std::size_t a = 0; a < jc.args.size(); ++a)
          if (jc.args[a].is_crv() && jc.args[a].prv.relation == cand.relation)
            return finish_single(std::move(jc), a);
        return 0;
      } catch (const InferenceError&) {
        // fall through to grounding
      }
    }
    if (!allow_ground) return 0;
    const Arg& pick = product.args[cidx.back()];
    auto lvs = arg_logvars(pick);
    if (pick.is_crv() || lvs.empty()) return 0;
    try {
      auto pieces = op_ground_logvar(m, product, lvs.front());
      buf.records.push_back({"ground_logvar", product.name, lvs.front(),
                             std::int64_t(pieces.size())});
      commit(std::move(pieces));
      return 1;
    } catch (const std::runtime_error&) {
      return 0;
    }
  }
};

// -- Engine public interface -------------------------------------------------

LveEngine::LveEngine(const Model& m, LveOptions opts) : m_(m), opts_(opts) {}

void LveEngine::set_parfactors(std::vector<Parfactor> pfs) {
  pfs_ = std::move(pfs);
}

std::string LveEngine::fresh_name(const std::string& base) {
  return base + "~" + std::to_string(fresh_++);
}

void LveEngine::record(const std::string& op, const std::string& pf,
                       const std::string& target, std::int64_t cost) {
  trace_.records.push_back({op, pf, target, cost});
}

void LveEngine::drop_empty() {
  std::vector<Parfactor> out;
  for (auto& g : pfs_)
    if (!constraint_empty(g.constraint, m_.domains))
      out.push_back(std::move(g));
  pfs_ = std::move(out);
}

bool LveEngine::shatter_step(const std::vector<Prv>& anchors) {
  std::vector<ClassInfo> anc;
  for (const auto& t : anchors)
    anc.push_back(LveEngineDetail::make_class(m_, t, Constraint::top({}, {}),
                                              -1, -1));
  return LveEngineDetail::shatter_impl(*this, anc);
}

void LveEngine::shatter(const std::vector<Prv>& anchors) {
  std::vector<ClassInfo> anc;
  for (const auto& t : anchors)
    anc.push_back(LveEngineDetail::make_class(m_, t, Constraint::top({}, {}),
                                              -1, -1));
  LveEngineDetail::fixpoint(*this, anc);
}

void LveEngine::absorb_all(const std::vector<EvidenceItem>& evidence) {
  std::vector<ClassInfo> anc;
  for (const auto& ev : evidence)
    anc.push_back(
        LveEngineDetail::make_class(m_, ev.prv, ev.constraint, -1, -1));
  LveEngineDetail::fixpoint(*this, anc);
  for (std::size_t e = 0; e < evidence.size(); ++e) {
    const auto& ev = evidence[e];
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t i = 0; i < pfs_.size() && !again; ++i) {
        for (std::size_t a = 0; a < pfs_[i].args.size(); ++a) {
          const Arg& arg = pfs_[i].args[a];
          if (arg.prv.relation != ev.prv.relation) continue;
          ClassInfo cls = LveEngineDetail::make_class(
              m_, arg.prv, pfs_[i].constraint, -1, -1);
          if (LveEngineDetail::meet_count(m_, cls, anc[e]) == 0) continue;
          if (!LveEngineDetail::class_subset(m_, cls, anc[e]))
            throw InferenceError("evidence partially covers a class after "
                                 "shattering");
          std::int64_t cost = std::int64_t(pfs_[i].table.size());
          pfs_[i] = op_absorb(m_, pfs_[i], a, ev.value);
          record("absorb", pfs_[i].name, ev.prv.relation, cost);
          again = true;
          break;
        }
      }
    }
  }
  LveEngineDetail::fixpoint(*this, {});
}

bool LveEngine::try_eliminate(const std::string& key) {
  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < pfs_.size(); ++i)
    for (std::size_t a = 0; a < pfs_[i].args.size(); ++a) {
      auto c = LveEngineDetail::make_class(m_, pfs_[i].args[a].prv,
                                           pfs_[i].constraint, int(i), int(a));
      if (c.key == key) return LveEngineDetail::try_elim(*this, c, true) == 1;
    }
  return false;
}

void LveEngine::eliminate_all_except(
    const std::set<std::string>& keep_relations,
    const std::vector<Prv>& keep_terms) {
  std::vector<ClassInfo> anc;
  for (const auto& t : keep_terms)
    anc.push_back(LveEngineDetail::make_class(m_, t, Constraint::top({}, {}),
                                              -1, -1));
  for (int iter = 0; iter < 100000; ++iter) {
    LveEngineDetail::fixpoint(*this, anc);

    std::map<std::string, ClassInfo> cands;
    for (std::size_t i = 0; i < pfs_.size(); ++i) {
      for (std::size_t a = 0; a < pfs_[i].args.size(); ++a) {
        auto c = LveEngineDetail::make_class(m_, pfs_[i].args[a].prv,
                                             pfs_[i].constraint, int(i),
                                             int(a));
        if (keep_relations.count(c.relation)) continue;
        bool kept = false;
        for (const auto& anchor : anc)
          if (LveEngineDetail::meet_count(m_, c, anchor) > 0) kept = true;
        if (kept) continue;
        cands.emplace(c.key, std::move(c));
      }
    }
    if (cands.empty()) return;

    std::vector<const ClassInfo*> order;
    for (const auto& [k, c] : cands) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(),
                     [&](const ClassInfo* x, const ClassInfo* y) {
                       auto width = [&](const ClassInfo* c) {
                         int w = 0;
                         for (const auto& g : pfs_)
                           if (g.has_arg_relation(c->relation)) ++w;
                         return w;
                       };
                       int wx = width(x), wy = width(y);
                       if (wx != wy) return wx < wy;
                       return x->key < y->key;
                     });
    bool progress = false;
    for (const auto* c : order)
      if (LveEngineDetail::try_elim(*this, *c, false) == 1) {
        progress = true;
        break;
      }
    if (!progress)
      for (const auto* c : order)
        if (LveEngineDetail::try_elim(*this, *c, true) == 1) {
          progress = true;
          break;
        }
    if (!progress)
      throw InferenceError("lifted elimination is stuck");
  }
  throw InferenceError("lifted elimination did not converge");
}

Distribution LveEngine::extract(const Query& q) const {
  std::vector<std::vector<std::string>> ranges;
  std::map<std::string, std::size_t> pos;
  std::vector<int> radices;
  for (std::size_t i = 0; i < q.terms.size(); ++i) {
    const Prv& t = q.terms[i];
    auto range = t.range.empty() ? m_.relation(t.relation).range : t.range;
    ranges.push_back(range);
    radices.push_back(int(range.size()));
    pos[ground_key(t)] = i;
  }
  std::vector<Weight> acc(table_size(radices), Weight::one());
  std::vector<int> tuple;
  for (const auto& g : pfs_) {
    if (g.args.empty()) continue;  // pure weight, cancels on normalisation
    std::vector<std::size_t> idx;
    for (const auto& a : g.args) {
      if (a.is_crv())
        throw InferenceError("residual counting argument at extraction");
      auto it = pos.find(ground_key(a.prv));
      if (it == pos.end())
        throw InferenceError("residual class " + a.prv.str() +
                             " is not part of the query");
      idx.push_back(it->second);
    }
    double k = double(tuple_count(g.constraint, m_.domains));
    auto rad = arg_range_sizes(m_, g);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      index_to_tuple(radices, i, tuple);
      std::vector<int> sub;
      for (std::size_t j : idx) sub.push_back(tuple[j]);
      acc[i] *= g.table[tuple_to_index(rad, sub)].pow(k);
    }
  }
  return Distribution::normalized(ranges, acc);
}

// -- Front door --------------------------------------------------------------

bool evidence_covers(const Model& m,
                     const std::vector<EvidenceItem>& evidence, const Prv& term,
                     int* value) {
  std::string key = ground_key(term);
  for (const auto& ev : evidence) {
    if (ev.prv.relation != term.relation) continue;
    auto names = gr_instances(ev.prv, ev.constraint, m.domains);
    if (std::find(names.begin(), names.end(), key) != names.end()) {
      if (value) *value = ev.value;
      return true;
    }
  }
  return false;
}

Distribution lve_answer(const Model& m, const Query& q,
                        const std::vector<EvidenceItem>& evidence,
                        const LveOptions& opts, LveTrace* trace) {
  std::vector<int> fixed(q.terms.size(), -1);
  Query open;
  for (std::size_t i = 0; i < q.terms.size(); ++i) {
    int v;
    if (evidence_covers(m, evidence, q.terms[i], &v))
      fixed[i] = v;
    else
      open.terms.push_back(q.terms[i]);
  }

  LveEngine e(m, opts);
  Distribution sub;
  if (!open.terms.empty()) {
    e.set_parfactors(m.parfactors);
    e.shatter(q.terms);
    e.absorb_all(evidence);
    e.eliminate_all_except({}, open.terms);
    sub = e.extract(open);
  }
  if (trace) *trace = e.trace();

  if (open.terms.size() == q.terms.size()) return sub;

  std::vector<std::vector<std::string>> ranges;
  std::vector<int> radices;
  for (const auto& t : q.terms) {
    auto range = t.range.empty() ? m.relation(t.relation).range : t.range;
    ranges.push_back(range);
    radices.push_back(int(range.size()));
  }
  Distribution out;
  out.ranges = ranges;
  out.probs.assign(table_size(radices), 0.0);
  std::vector<int> sub_rad;
  for (const auto& r : sub.ranges) sub_rad.push_back(int(r.size()));
  std::vector<int> tuple;
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    index_to_tuple(radices, i, tuple);
    bool match = true;
    std::vector<int> stuple;
    for (std::size_t j = 0; j < q.terms.size(); ++j) {
      if (fixed[j] >= 0) {
        if (tuple[j] != fixed[j]) match = false;
      } else {
        stuple.push_back(tuple[j]);
      }
    }
    if (!match) continue;
    out.probs[i] = open.terms.empty()
                       ? 1.0
                       : sub.probs[tuple_to_index(sub_rad, stuple)];
  }
  return out;
}

}  // namespace liftedq

