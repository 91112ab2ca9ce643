#include "liftedq/generators.hpp"

#include <stdexcept>

namespace liftedq {

namespace {

DomainSpec make_domain(const std::string& name, const std::string& prefix,
                       int n) {
  DomainSpec d;
  d.name = name;
  for (int i = 1; i <= n; ++i) d.constants.push_back(prefix + std::to_string(i));
  return d;
}

struct Builder {
  Model m;

  void domain(const std::string& name, const std::string& prefix, int n) {
    m.domains[name] = make_domain(name, prefix, n);
    m.domain_order.push_back(name);
  }

  void relation(const std::string& name,
                std::vector<std::string> param_domains) {
    m.relations[name] = RelationSig{std::move(param_domains),
                                    {"true", "false"}};
    m.relation_order.push_back(name);
  }

  Prv prv(const std::string& rel, std::vector<Term> params) {
    Prv p;
    p.relation = rel;
    p.params = std::move(params);
    p.range = m.relations.at(rel).range;
    return p;
  }

  void parfactor(const std::string& name, Constraint c, std::vector<Prv> prvs,
                 const std::vector<double>& table) {
    Parfactor g;
    g.name = name;
    g.constraint = std::move(c);
    for (auto& p : prvs) g.args.push_back(Arg{std::move(p), ""});
    for (double v : table) g.table.push_back(Weight::from_value(v));
    m.parfactors.push_back(std::move(g));
  }

  // fixed pseudo-pattern for the extension tables; never zero
  std::vector<double> pattern_table(int pf_index, int rows) {
    std::vector<double> t;
    for (int i = 0; i < rows; ++i)
      t.push_back(1.0 + 0.25 * (double((pf_index * 31 + i * 17) % 7) - 3.0));
    return t;
  }
};

void add_smokers_core(Builder& b, bool own_y_domain) {
  Constraint cxy;
  if (own_y_domain) {
    cxy = Constraint::top({"X", "Y"}, {"person", "colleague"});
  } else {
    cxy = Constraint::top({"X", "Y"}, {"person", "person"});
    cxy.diffs.emplace_back(0, 1);
  }
  Constraint cx = Constraint::top({"X"}, {"person"});
  auto X = logvar("X");
  auto Y = logvar("Y");
  b.parfactor("g0", cxy,
              {b.prv("Friends", {X, Y}), b.prv("Smokes", {X}),
               b.prv("SmokesY", {Y})},
              {1.4, 0.9, 0.9, 0.6, 0.8, 1.1, 1.1, 1.3});
  b.parfactor("g1", cxy, {b.prv("Friends", {X, Y})}, {1.2, 0.8});
  b.parfactor("g2", cx, {b.prv("Smokes", {X})}, {0.7, 1.3});
  b.parfactor("g3", cx, {b.prv("Cancer", {X})}, {0.6, 1.4});
  b.parfactor("g4", cx, {b.prv("Smokes", {X}), b.prv("Asthma", {X})},
              {1.3, 0.7, 0.9, 1.1});
  b.parfactor("g5", cx, {b.prv("Smokes", {X}), b.prv("Cancer", {X})},
              {1.5, 0.5, 0.8, 1.2});
}

}  // namespace

Family family_from_string(const std::string& s) {
  if (s == "gex") return Family::Gex;
  if (s == "gexp") return Family::Gexp;
  if (s == "gl") return Family::Gl;
  if (s == "glp") return Family::Glp;
  throw std::invalid_argument("unknown model family: " + s);
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Gex: return "gex";
    case Family::Gexp: return "gexp";
    case Family::Gl: return "gl";
    case Family::Glp: return "glp";
  }
  return "?";
}

Model gen_model(Family f, int n) {
  if (n < 1) throw std::invalid_argument("domain size must be >= 1");
  bool own_y = f == Family::Gexp || f == Family::Glp;
  bool large = f == Family::Gl || f == Family::Glp;

  Builder b;
  b.domain("person", "p", n);
  if (own_y) b.domain("colleague", "q", n);
  if (large) {
    b.domain("substance", "s", n);
    b.domain("city", "c", n);
  }

  const std::string ydom = own_y ? "colleague" : "person";
  b.relation("Smokes", {"person"});
  b.relation("Friends", {"person", ydom});
  b.relation("Asthma", {"person"});
  b.relation("Cancer", {"person"});
  if (own_y) b.relation("SmokesY", {ydom});
  if (large) {
    b.relation("Stress", {"person"});
    b.relation("Overweight", {"person"});
    b.relation("Drinks", {"person", "substance"});
    b.relation("Uses", {"person", "substance"});
    b.relation("Harmful", {"substance"});
    b.relation("LivesIn", {"person", "city"});
    b.relation("Polluted", {"city"});
    b.relation("Sick", {"person"});
  }

  // Without an own Y domain, Smokes(Y) is the same relation.
  if (!own_y) b.m.relations["SmokesY"] = b.m.relations["Smokes"];
  add_smokers_core(b, own_y);
  if (!own_y) {
    b.m.relations.erase("SmokesY");
    for (auto& g : b.m.parfactors)
      for (auto& a : g.args)
        if (a.prv.relation == "SmokesY") a.prv.relation = "Smokes";
  } else {
    // Smokes over the colleague domain is its own relation
  }

  if (large) {
    Constraint cx = Constraint::top({"X"}, {"person"});
    Constraint cxw = Constraint::top({"X", "W"}, {"person", "substance"});
    Constraint cw = Constraint::top({"W"}, {"substance"});
    Constraint cxv = Constraint::top({"X", "V"}, {"person", "city"});
    Constraint cv = Constraint::top({"V"}, {"city"});
    auto X = logvar("X");
    auto W = logvar("W");
    auto V = logvar("V");
    int idx = 6;
    auto pat = [&](int rows) { return b.pattern_table(idx, rows); };
    b.parfactor("g6", cx, {b.prv("Stress", {X})}, pat(2)); ++idx;
    b.parfactor("g7", cx, {b.prv("Overweight", {X})}, pat(2)); ++idx;
    b.parfactor("g8", cx,
                {b.prv("Overweight", {X}), b.prv("Stress", {X})}, pat(4));
    ++idx;
    b.parfactor("g9", cxw,
                {b.prv("Stress", {X}), b.prv("Drinks", {X, W})}, pat(4));
    ++idx;
    b.parfactor("g10", cxw,
                {b.prv("Drinks", {X, W}), b.prv("Uses", {X, W}),
                 b.prv("Harmful", {W})},
                pat(8));
    ++idx;
    b.parfactor("g11", cw, {b.prv("Harmful", {W})}, pat(2)); ++idx;
    b.parfactor("g12", cxv, {b.prv("LivesIn", {X, V})}, pat(2)); ++idx;
    b.parfactor("g13", cxv,
                {b.prv("LivesIn", {X, V}), b.prv("Polluted", {V}),
                 b.prv("Sick", {X})},
                pat(8));
    ++idx;
    b.parfactor("g14", cv, {b.prv("Polluted", {V})}, pat(2)); ++idx;
    b.parfactor("g15", cx,
                {b.prv("Smokes", {X}), b.prv("Asthma", {X}),
                 b.prv("Cancer", {X})},
                pat(8));
    ++idx;
    b.parfactor("g16", cx,
                {b.prv("Asthma", {X}), b.prv("Cancer", {X}),
                 b.prv("Sick", {X})},
                pat(8));
    ++idx;
    b.parfactor("g17", cx,
                {b.prv("Cancer", {X}), b.prv("Sick", {X}),
                 b.prv("Stress", {X})},
                pat(8));
    ++idx;
    b.parfactor("g18", cx,
                {b.prv("Sick", {X}), b.prv("Stress", {X}),
                 b.prv("Smokes", {X})},
                pat(8));
    ++idx;
    b.parfactor("g19", cx,
                {b.prv("Asthma", {X}), b.prv("Stress", {X})}, pat(4));
  }

  b.m.validate();
  return b.m;
}

std::vector<EvidenceItem> gex_example_evidence(const Model& m) {
  const DomainSpec& person = m.domain("person");
  if (person.size() < 2)
    throw std::invalid_argument("example evidence needs |person| >= 2");
  const RelationSig& fsig = m.relation("Friends");
  std::string eve = person.constants[0];
  const DomainSpec& ydom = m.domain(fsig.param_domains[1]);
  std::string bob = ydom.constants[1];

  std::vector<EvidenceItem> ev;
  EvidenceItem friends;
  friends.prv.relation = "Friends";
  friends.prv.params = {constant(eve), constant(bob)};
  friends.prv.range = fsig.range;
  friends.value = 0;  // true
  ev.push_back(friends);

  EvidenceItem smokes;
  smokes.prv.relation = "Smokes";
  std::string bob_person = person.constants[1];
  smokes.prv.params = {constant(bob_person)};
  smokes.prv.range = m.relation("Smokes").range;
  smokes.value = 0;
  ev.push_back(smokes);
  return ev;
}

}  // namespace liftedq
