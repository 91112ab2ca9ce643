#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "liftedq/generators.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/lve.hpp"
#include "liftedq/parser.hpp"

using namespace liftedq;

namespace {

Model with_parfactors(const Model& base, std::vector<Parfactor> pfs) {
  Model m = base;
  m.parfactors = std::move(pfs);
  return m;
}

// Marginal of the ground product onto `vars` (all vars if empty), by
// enumeration. Used to compare operator inputs and outputs exactly.
std::map<std::vector<int>, Weight> ground_marginal(
    const Model& m, const std::vector<Parfactor>& pfs,
    const std::vector<std::string>& vars) {
  GroundFactorGraph g = ground_model(with_parfactors(m, pfs), {});
  std::vector<int> keep;
  for (const auto& v : vars) {
    auto it = g.var_index.find(v);
    // a var the side never mentions acts as a constant dimension
    keep.push_back(it == g.var_index.end() ? -1 : it->second);
  }
  auto radices = g.radices();
  std::int64_t states = 1;
  for (int r : radices) states *= r;
  REQUIRE(states <= (1 << 22));
  std::map<std::vector<int>, Weight> out;
  std::vector<int> state(radices.size(), 0);
  for (std::int64_t s = 0; s < states; ++s) {
    Weight w = Weight::one();
    for (const auto& f : g.factors) {
      std::vector<int> sub;
      std::vector<int> frad;
      for (int v : f.vars) {
        sub.push_back(state[v]);
        frad.push_back(radices[v]);
      }
      w *= f.table[tuple_to_index(frad, sub)];
    }
    std::vector<int> key;
    for (int v : keep) key.push_back(v < 0 ? 0 : state[v]);
    auto [it, fresh] = out.emplace(key, w);
    if (!fresh) it->second += w;
    for (std::size_t i = radices.size(); i-- > 0;) {
      if (++state[i] < radices[i]) break;
      state[i] = 0;
    }
  }
  return out;
}

std::vector<std::string> shared_vars(const Model& m,
                                     const std::vector<Parfactor>& a,
                                     const std::vector<Parfactor>& b) {
  auto names = [&](const std::vector<Parfactor>& pfs) {
    GroundFactorGraph g = ground_model(with_parfactors(m, pfs), {});
    return std::set<std::string>(g.var_names.begin(), g.var_names.end());
  };
  auto na = names(a), nb = names(b);
  std::vector<std::string> out;
  std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(),
                        std::back_inserter(out));
  return out;
}

// The operator contract: both sides represent the same function after the
// vars private to one side are summed away.
void check_equivalent(const Model& m, const std::vector<Parfactor>& before,
                      const std::vector<Parfactor>& after) {
  auto vars = shared_vars(m, before, after);
  auto ma = ground_marginal(m, before, vars);
  auto mb = ground_marginal(m, after, vars);
  REQUIRE(ma.size() == mb.size());
  for (const auto& [k, w] : ma) {
    auto it = mb.find(k);
    REQUIRE(it != mb.end());
    if (w.is_zero()) {
      CHECK(it->second.is_zero());
    } else {
      CHECK(std::abs(w.log() - it->second.log()) < 1e-9);
    }
  }
}

const char* kPairSource = R"(
domain person = {a, b, c, d};
prv Friends(person, person), Smokes(person);
parfactor g0 (X:person, Y:person | X != Y)
  on Friends(X,Y), Smokes(X), Smokes(Y)
  table { (true,true,true)=1.4; (true,true,false)=0.9; (true,false,true)=0.9;
          (true,false,false)=0.6; (false,true,true)=0.8; (false,true,false)=1.1;
          (false,false,true)=1.1; (false,false,false)=1.3; };
parfactor g2 (X:person) on Smokes(X) table { (true)=0.7; (false)=1.3; };
)";

Query qterm(const Model& m, const std::string& rel,
            const std::vector<std::string>& consts) {
  Prv p;
  p.relation = rel;
  for (const auto& c : consts) p.params.push_back(constant(c));
  p.range = m.relation(rel).range;
  Query q;
  q.terms.push_back(p);
  return q;
}

}  // namespace

TEST_CASE("multinomial weights cover the full joint: sum Mul(h) = r^n") {
  for (int r = 2; r <= 4; ++r) {
    for (int n = 1; n <= 12; ++n) {
      std::vector<std::vector<int>> hists;
      enumerate_histograms(n, r, hists);
      Weight total = Weight::zero();
      for (const auto& h : hists)
        total += Weight::from_log(log_multinomial(h));
      CHECK(std::abs(total.log() - n * std::log(double(r))) < 1e-9);
    }
  }
}

TEST_CASE("sum_out folds excess logvars into an exponent") {
  Model m = parse_model(kPairSource);
  const Parfactor& g0 = m.parfactors[0];
  Parfactor r = op_sum_out(m, g0, 0);  // sum out Friends(X,Y)
  CHECK(r.args.size() == 2);
  check_equivalent(m, {g0}, {r});
}

TEST_CASE("sum_out exponent against a hand-computed case") {
  Model m = parse_model(R"(
domain d = {a, b, c};
prv F(d, d), S(d);
parfactor g (X:d, Y:d | X != Y) on F(X,Y), S(X)
  table { (true,true)=2; (true,false)=3; (false,true)=5; (false,false)=7; };
)");
  Parfactor r = op_sum_out(m, m.parfactors[0], 0);
  REQUIRE(r.args.size() == 1);
  // per ground S(x): (2+5)^2 when true, (3+7)^2 when false
  CHECK(std::abs(r.table[0].log() - 2 * std::log(7.0)) < 1e-12);
  CHECK(std::abs(r.table[1].log() - 2 * std::log(10.0)) < 1e-12);
}

TEST_CASE("multiply applies fractional exponents to narrower operands") {
  Model m = parse_model(kPairSource);
  Parfactor pair = op_sum_out(m, m.parfactors[0], 0);  // phi(S(X),S(Y))|X!=Y
  const Parfactor& unary = m.parfactors[1];
  Parfactor prod = op_multiply(m, {pair, unary});
  CHECK(prod.args.size() == 2);
  check_equivalent(m, {pair, unary}, {prod});
}

TEST_CASE("count_convert then sum_out equals direct elimination") {
  Model m = parse_model(R"(
domain d = {a, b, c, e};
prv A(d), B(d);
parfactor g (X:d) on A(X), B(X)
  table { (true,true)=1.1; (true,false)=0.8; (false,true)=0.9; (false,false)=1.2; };
parfactor h (X:d) on A(X) table { (true)=0.6; (false)=1.4; };
)");
  Parfactor cc = op_count_convert(m, m.parfactors[1], "X");
  CHECK(cc.args[0].is_crv());
  check_equivalent(m, {m.parfactors[1]}, {cc});
  Parfactor so = op_sum_out(m, cc, 0);
  CHECK(so.args.empty());  // a pure weight
  check_equivalent(m, {m.parfactors[1]}, {so});
}

TEST_CASE("joint count conversion matches the pair product") {
  Model m = parse_model(kPairSource);
  Parfactor pair = op_sum_out(m, m.parfactors[0], 0);
  Parfactor jc = op_joint_count_convert(m, pair);
  REQUIRE(jc.args.size() == 1);
  CHECK(jc.args[0].is_crv());
  check_equivalent(m, {pair}, {jc});
  // and the full elimination of Smokes via the counting route
  Parfactor z1 = op_sum_out(m, jc, 0);
  check_equivalent(m, {pair}, {z1});
}

TEST_CASE("split partitions the groundings") {
  Model m = parse_model(kPairSource);
  auto parts = op_split(m, m.parfactors[0], "X", {0});
  REQUIRE(parts.size() == 2);
  check_equivalent(m, {m.parfactors[0]}, parts);
}

TEST_CASE("ground_logvar keeps inequality information") {
  Model m = parse_model(kPairSource);
  Parfactor pair = op_sum_out(m, m.parfactors[0], 0);
  auto pieces = op_ground_logvar(m, pair, "Y");
  CHECK(pieces.size() == 4);
  check_equivalent(m, {pair}, pieces);
}

TEST_CASE("expand pulls one constant out of a counting argument") {
  Model m = parse_model(R"(
domain d = {a, b, c};
prv A(d);
parfactor h (X:d) on A(X) table { (true)=0.6; (false)=1.4; };
)");
  Parfactor cc = op_count_convert(m, m.parfactors[0], "X");
  Parfactor ex = op_expand(m, cc, 0, 1);
  REQUIRE(ex.args.size() == 2);
  CHECK(!ex.args[0].is_crv());
  CHECK(ex.args[1].is_crv());
  check_equivalent(m, {cc}, {ex});
}

TEST_CASE("absorb selects the observed row and exponentiates") {
  Model m = parse_model(R"(
domain d = {a, b, c};
prv A(d), B(d);
parfactor g (X:d, Y:d | X != Y) on A(X), B(Y)
  table { (true,true)=2; (true,false)=3; (false,true)=5; (false,false)=7; };
)");
  // observe B everywhere: each A(x) instance keeps (row B=true)^2
  Parfactor r = op_absorb(m, m.parfactors[0], 1, 0);
  REQUIRE(r.args.size() == 1);
  CHECK(std::abs(r.table[0].log() - 2 * std::log(2.0)) < 1e-12);
  CHECK(std::abs(r.table[1].log() - 2 * std::log(5.0)) < 1e-12);
}

TEST_CASE("count_normalise splits a skewed constraint") {
  Model m = parse_model(R"(
domain d = {a, b, c};
prv A(d), B(d);
parfactor g (X:d, Y:d | X != Y, X in {a}) on B(Y), A(X)
  table { (true,true)=2; (true,false)=3; (false,true)=5; (false,false)=7; };
)");
  // per Y: y=a has no X, wait: X=a, Y ranges over {b,c}; counts of X per Y
  // are uniform here, so normalisation must refuse
  CHECK_THROWS_AS(op_count_normalise(m, m.parfactors[0], "X"),
                  InferenceError);

  Model m2 = parse_model(R"(
domain d = {a, b, c};
prv A(d), B(d);
parfactor g (X:d, Y:d | X != Y, X in {a, b}) on B(Y), A(X)
  table { (true,true)=2; (true,false)=3; (false,true)=5; (false,false)=7; };
)");
  // per Y: y=a -> X in {b} (1), y=b -> {a} (1), y=c -> {a,b} (2)
  auto parts = op_count_normalise(m2, m2.parfactors[0], "X");
  CHECK(parts.size() == 2);
  check_equivalent(m2, {m2.parfactors[0]}, parts);
}

TEST_CASE("lve agrees with the ground oracle on the example families") {
  for (Family f : {Family::Gex, Family::Gexp}) {
    for (int n : {2, 3}) {
      Model m = gen_model(f, n);
      GroundFactorGraph g = ground_model(m, {});
      auto ev = gex_example_evidence(m);
      GroundFactorGraph ge = ground_model(m, ev);
      for (const auto& rel : m.relation_order) {
        const auto& sig = m.relations.at(rel);
        std::vector<std::string> consts;
        for (const auto& d : sig.param_domains)
          consts.push_back(m.domain(d).constants[0]);
        if (consts.size() == 2 && consts[0] == consts[1])
          consts[1] = m.domain(sig.param_domains[1]).constants[1];
        Query q = qterm(m, rel, consts);
        Distribution ref = brute_marginal(g, q);
        Distribution refe = brute_marginal(ge, q);
        for (JustDiff jd : {JustDiff::Count, JustDiff::Ground}) {
          LveOptions opts;
          opts.justdiff = jd;
          CHECK(lve_answer(m, q, {}, opts).max_abs_diff(ref) < 1e-9);
          CHECK(lve_answer(m, q, ev, opts).max_abs_diff(refe) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("lve handles a query term that is itself observed") {
  Model m = gen_model(Family::Gex, 3);
  auto ev = gex_example_evidence(m);
  Query q = qterm(m, "Smokes", {"p2"});  // observed true
  Distribution d = lve_answer(m, q, ev);
  CHECK(d.probs[0] == doctest::Approx(1.0));
  CHECK(d.probs[1] == doctest::Approx(0.0));
}

TEST_CASE("lve matches variable elimination on the larger family") {
  Model m = gen_model(Family::Gl, 2);
  GroundFactorGraph g = ground_model(m, {});
  for (const auto& rel : m.relation_order) {
    const auto& sig = m.relations.at(rel);
    std::vector<std::string> consts;
    for (const auto& d : sig.param_domains)
      consts.push_back(m.domain(d).constants[0]);
    if (consts.size() == 2 && consts[0] == consts[1])
      consts[1] = m.domain(sig.param_domains[1]).constants[1];
    Query q = qterm(m, rel, consts);
    Distribution ref = ve_marginal(g, q);
    CHECK(lve_answer(m, q, {}).max_abs_diff(ref) < 1e-9);
  }
}

TEST_CASE("policy choice changes the operator counts, not the answers") {
  Model m = gen_model(Family::Gex, 5);
  Query q = qterm(m, "Smokes", {"p1"});
  LveOptions count_opts, ground_opts;
  count_opts.justdiff = JustDiff::Count;
  ground_opts.justdiff = JustDiff::Ground;
  LveTrace tc, tg;
  Distribution dc = lve_answer(m, q, {}, count_opts, &tc);
  Distribution dg = lve_answer(m, q, {}, ground_opts, &tg);
  CHECK(dc.max_abs_diff(dg) < 1e-9);
  CHECK(!tc.mentions("ground_logvar"));
  CHECK(tg.mentions("ground_logvar"));
}

TEST_CASE("counting policy keeps operator counts independent of n") {
  Query q2;
  std::map<std::string, std::int64_t> base;
  for (int n : {4, 6, 9}) {
    Model m = gen_model(Family::Gex, n);
    Query q = qterm(m, "Smokes", {"p1"});
    LveTrace t;
    lve_answer(m, q, {}, {}, &t);
    auto c = t.counts();
    if (base.empty())
      base = c;
    else
      CHECK(c == base);
  }
}

TEST_CASE("randomised operator soundness") {
  std::mt19937 rng(20240817);
  auto uniform = [&](int lo, int hi) {
    return int(rng() % std::uint32_t(hi - lo + 1)) + lo;
  };
  int checked = 0;
  for (int it = 0; it < 200; ++it) {
    // random small model: one or two domains, unary/binary relations
    int nd = uniform(1, 2);
    Model m;
    for (int d = 0; d < nd; ++d) {
      std::string name = "d" + std::to_string(d);
      DomainSpec spec;
      spec.name = name;
      int size = uniform(2, 4);
      for (int i = 0; i < size; ++i)
        spec.constants.push_back(name + "c" + std::to_string(i));
      m.domains[name] = spec;
      m.domain_order.push_back(name);
    }
    int nr = uniform(2, 3);
    for (int r = 0; r < nr; ++r) {
      std::string name = "R" + std::to_string(r);
      RelationSig sig;
      int arity = uniform(1, 2);
      for (int a = 0; a < arity; ++a)
        sig.param_domains.push_back("d" +
                                    std::to_string(uniform(0, nd - 1)));
      sig.range = {"true", "false"};
      m.relations[name] = sig;
      m.relation_order.push_back(name);
    }
    // one parfactor over one or two relations sharing logvar X
    Parfactor g;
    g.name = "g";
    std::vector<std::string> lvnames = {"X", "Y", "Z"};
    std::map<std::string, std::string> lvdom;
    auto add_arg = [&](const std::string& rel) {
      const auto& sig = m.relations.at(rel);
      Prv p;
      p.relation = rel;
      p.range = sig.range;
      for (std::size_t i = 0; i < sig.param_domains.size(); ++i) {
        // pick a logvar compatible with the domain, or mint one
        std::string chosen;
        for (const auto& lv : lvnames) {
          if (lvdom.count(lv) && lvdom[lv] == sig.param_domains[i] &&
              uniform(0, 1)) {
            chosen = lv;
            break;
          }
        }
        if (chosen.empty()) {
          for (const auto& lv : lvnames)
            if (!lvdom.count(lv)) {
              chosen = lv;
              lvdom[lv] = sig.param_domains[i];
              break;
            }
        }
        if (chosen.empty() || lvdom[chosen] != sig.param_domains[i]) {
          // fall back to a constant
          const auto& d = m.domains[sig.param_domains[i]];
          p.params.push_back(
              constant(d.constants[uniform(0, d.size() - 1)]));
        } else {
          p.params.push_back(logvar(chosen));
        }
      }
      g.args.push_back(Arg{p, ""});
    };
    int nargs = uniform(1, 2);
    int first = uniform(0, nr - 1);
    add_arg("R" + std::to_string(first));
    if (nargs == 2) add_arg("R" + std::to_string((first + 1) % nr));
    // constraint over the used logvars
    Constraint c;
    for (const auto& [lv, dom] : lvdom) {
      bool used = false;
      for (const auto& a : g.args)
        for (const auto& p : a.prv.params)
          if (!p.is_constant && p.name == lv) used = true;
      if (!used) continue;
      c.logvars.push_back(lv);
      c.domains.push_back(dom);
      Constraint::VarSet vs;
      const auto& d = m.domains[dom];
      if (uniform(0, 2) == 0) {
        vs.full = false;
        int keep = uniform(1, d.size());
        for (int i = 0; i < keep; ++i) vs.ids.push_back(i);
      }
      c.allowed.push_back(vs);
    }
    for (std::size_t i = 0; i < c.logvars.size(); ++i)
      for (std::size_t j = i + 1; j < c.logvars.size(); ++j)
        if (c.domains[i] == c.domains[j] && uniform(0, 2) == 0)
          c.diffs.emplace_back(int(i), int(j));
    g.constraint = c;
    if (tuple_count(g.constraint, m.domains) == 0) continue;
    std::size_t cells = table_size(arg_range_sizes(m, g));
    for (std::size_t i = 0; i < cells; ++i)
      g.table.push_back(Weight::from_value(0.25 + uniform(0, 300) / 100.0));
    m.parfactors.push_back(g);
    try {
      m.validate();
    } catch (const ValidationError&) {
      continue;
    }
    {
      // keep the ground state space enumerable
      GroundFactorGraph gg = ground_model(m, {});
      std::int64_t states = 1;
      for (int r : gg.radices()) {
        states *= r;
        if (states > (1 << 16)) break;
      }
      if (states > (1 << 16)) continue;
    }

    // try each applicable operator and check ground equivalence
    bool any = false;
    for (std::size_t a = 0; a < g.args.size(); ++a) {
      try {
        Parfactor r = op_sum_out(m, g, a);
        check_equivalent(m, {g}, {r});
        any = true;
      } catch (const std::runtime_error&) {
      }
    }
    for (const auto& lv : g.constraint.logvars) {
      try {
        Parfactor r = op_count_convert(m, g, lv);
        check_equivalent(m, {g}, {r});
        any = true;
      } catch (const std::runtime_error&) {
      }
      try {
        auto pieces = op_ground_logvar(m, g, lv);
        check_equivalent(m, {g}, pieces);
        any = true;
      } catch (const std::runtime_error&) {
      }
      try {
        auto ids = std::vector<int>{0};
        auto pieces = op_split(m, g, lv, ids);
        check_equivalent(m, {g}, pieces);
        any = true;
      } catch (const std::runtime_error&) {
      }
    }
    if (any) ++checked;
  }
  // the generator must actually exercise the operators
  CHECK(checked > 100);
}

TEST_CASE("randomised end-to-end queries match the oracle") {
  std::mt19937 rng(987654321);
  auto uniform = [&](int lo, int hi) {
    return int(rng() % std::uint32_t(hi - lo + 1)) + lo;
  };
  int checked = 0;
  for (int it = 0; it < 60; ++it) {
    int n = uniform(2, 4);
    Family f = uniform(0, 1) ? Family::Gex : Family::Gexp;
    Model m = gen_model(f, n);
    const auto& rel =
        m.relation_order[std::size_t(uniform(0, int(m.relation_order.size()) - 1))];
    const auto& sig = m.relations.at(rel);
    std::vector<std::string> consts;
    for (const auto& d : sig.param_domains) {
      const auto& dom = m.domain(d);
      consts.push_back(dom.constants[std::size_t(uniform(0, dom.size() - 1))]);
    }
    if (consts.size() == 2 && consts[0] == consts[1]) continue;
    Query q = qterm(m, rel, consts);
    std::vector<EvidenceItem> ev;
    if (uniform(0, 1)) ev = gex_example_evidence(m);
    GroundFactorGraph g = ground_model(m, ev);
    Distribution ref = ve_marginal(g, q);
    LveOptions opts;
    opts.justdiff = uniform(0, 1) ? JustDiff::Count : JustDiff::Ground;
    Distribution got = lve_answer(m, q, ev, opts);
    if (evidence_covers(m, ev, q.terms[0], nullptr)) continue;
    CHECK(got.max_abs_diff(ref) < 1e-9);
    ++checked;
  }
  CHECK(checked >= 40);
}
