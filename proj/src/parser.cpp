#include "liftedq/parser.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

namespace liftedq {

namespace {

struct Token {
  enum Kind { Ident, Number, Punct, End } kind;
  std::string text;
  int line, col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= s_.size()) {
      tok_ = {Token::End, "", line_, col_};
      return;
    }
    char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
              s_[pos_] == '_'))
        id += take();
      tok_ = {Token::Ident, id, tok_.line, tok_.col};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
        ((c == '-' || c == '+') && pos_ + 1 < s_.size() &&
         (std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          s_[pos_ + 1] == '.'))) {
      std::string num;
      num += take();
      while (pos_ < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
              s_[pos_] == '.' || s_[pos_] == 'e' || s_[pos_] == 'E' ||
              ((s_[pos_] == '-' || s_[pos_] == '+') &&
               (num.back() == 'e' || num.back() == 'E'))))
        num += take();
      tok_ = {Token::Number, num, tok_.line, tok_.col};
      return;
    }
    if (c == '!' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '=') {
      take();
      take();
      tok_ = {Token::Punct, "!=", tok_.line, tok_.col};
      return;
    }
    tok_ = {Token::Punct, std::string(1, take()), tok_.line, tok_.col};
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < s_.size() &&
             std::isspace(static_cast<unsigned char>(s_[pos_])))
        take();
      if (pos_ + 1 < s_.size() && s_[pos_] == '/' && s_[pos_ + 1] == '/') {
        while (pos_ < s_.size() && s_[pos_] != '\n') take();
        continue;
      }
      break;
    }
  }

  char take() {
    char c = s_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lx_(text) {
    model_.relations["__none__"];  // placeholder removed below
    model_.relations.clear();
  }

  Model parse() {
    while (lx_.peek().kind != Token::End) statement();
    model_.validate();
    return model_;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  Token expect_punct(const std::string& p) {
    Token t = lx_.next();
    if (t.kind != Token::Punct || t.text != p)
      fail(t, "expected '" + p + "', got '" + t.text + "'");
    return t;
  }

  Token expect_ident() {
    Token t = lx_.next();
    if (t.kind != Token::Ident) fail(t, "expected identifier");
    return t;
  }

  bool accept_punct(const std::string& p) {
    if (lx_.peek().kind == Token::Punct && lx_.peek().text == p) {
      lx_.next();
      return true;
    }
    return false;
  }

  void statement() {
    Token t = expect_ident();
    if (t.text == "domain")
      domain_decl();
    else if (t.text == "range")
      range_decl();
    else if (t.text == "prv")
      prv_decl();
    else if (t.text == "parfactor")
      parfactor_decl();
    else if (t.text == "evidence")
      evidence_decl();
    else
      fail(t, "expected a declaration, got '" + t.text + "'");
  }

  std::vector<std::string> ident_list_braced() {
    expect_punct("{");
    std::vector<std::string> out;
    out.push_back(expect_ident().text);
    while (accept_punct(",")) out.push_back(expect_ident().text);
    expect_punct("}");
    return out;
  }

  void domain_decl() {
    Token name = expect_ident();
    expect_punct("=");
    DomainSpec d;
    d.name = name.text;
    d.constants = ident_list_braced();
    expect_punct(";");
    if (model_.domains.count(d.name)) fail(name, "duplicate domain");
    model_.domains[d.name] = d;
    model_.domain_order.push_back(d.name);
  }

  void range_decl() {
    Token name = expect_ident();
    expect_punct("=");
    auto vals = ident_list_braced();
    expect_punct(";");
    if (vals.size() < 2) fail(name, "a range needs at least two values");
    ranges_[name.text] = vals;
  }

  void prv_decl() {
    do {
      Token name = expect_ident();
      RelationSig sig;
      expect_punct("(");
      if (!accept_punct(")")) {
        sig.param_domains.push_back(expect_ident().text);
        while (accept_punct(",")) sig.param_domains.push_back(expect_ident().text);
        expect_punct(")");
      }
      if (accept_punct(":")) {
        Token rn = expect_ident();
        auto it = ranges_.find(rn.text);
        if (it == ranges_.end() && rn.text != "bool")
          fail(rn, "unknown range " + rn.text);
        sig.range = rn.text == "bool" && it == ranges_.end()
                        ? std::vector<std::string>{"true", "false"}
                        : it->second;
      } else {
        sig.range = {"true", "false"};
      }
      for (const auto& dn : sig.param_domains)
        if (!model_.domains.count(dn))
          fail(name, "undeclared domain " + dn + " in prv " + name.text);
      if (model_.relations.count(name.text)) fail(name, "duplicate prv");
      model_.relations[name.text] = sig;
      model_.relation_order.push_back(name.text);
    } while (accept_punct(","));
    expect_punct(";");
  }

  // "(X:person, Y:person | <constr>)" -> constraint over declared logvars
  Constraint logvar_block() {
    expect_punct("(");
    Constraint c;
    if (!accept_punct(")")) {
      do {
        Token lv = expect_ident();
        expect_punct(":");
        Token dn = expect_ident();
        if (!model_.domains.count(dn.text))
          fail(dn, "undeclared domain " + dn.text);
        c.logvars.push_back(lv.text);
        c.domains.push_back(dn.text);
        c.allowed.emplace_back();
      } while (accept_punct(","));
      if (accept_punct("|")) constraint_body(c);
      expect_punct(")");
    }
    return c;
  }

  void constraint_body(Constraint& c) {
    // whole-tuple listing: "in { (a,b), (c,d) }"
    if (lx_.peek().kind == Token::Ident && lx_.peek().text == "in") {
      lx_.next();
      expect_punct("{");
      c.explicit_form = true;
      c.allowed.clear();
      do {
        expect_punct("(");
        std::vector<int> row;
        std::size_t pos = 0;
        do {
          Token ct = expect_ident();
          if (pos >= c.logvars.size()) fail(ct, "tuple too long");
          int id = model_.domain(c.domains[pos]).index_of(ct.text);
          if (id < 0) fail(ct, "constant " + ct.text + " not in domain " +
                                   c.domains[pos]);
          row.push_back(id);
          ++pos;
        } while (accept_punct(","));
        if (pos != c.logvars.size())
          fail(lx_.peek(), "tuple arity mismatch");
        expect_punct(")");
        c.tuples.push_back(std::move(row));
      } while (accept_punct(","));
      expect_punct("}");
      if (auto rec = recognize_product_form(c, model_.domains)) c = *rec;
      return;
    }
    // list of "X != Y" and "X in {a, b}"
    do {
      Token lv = expect_ident();
      int i = c.index_of(lv.text);
      if (i < 0) fail(lv, "unknown logvar " + lv.text);
      Token op = lx_.next();
      if (op.kind == Token::Punct && op.text == "!=") {
        Token rv = expect_ident();
        int j = c.index_of(rv.text);
        if (j < 0) fail(rv, "unknown logvar " + rv.text);
        if (c.domains[i] != c.domains[j])
          fail(rv, "inequality over different domains");
        int a = i, b = j;
        if (a > b) std::swap(a, b);
        c.diffs.emplace_back(a, b);
      } else if (op.kind == Token::Ident && op.text == "in") {
        auto names = ident_list_braced();
        Constraint::VarSet vs;
        vs.full = false;
        for (const auto& n : names) {
          int id = model_.domain(c.domains[i]).index_of(n);
          if (id < 0) fail(lv, "constant " + n + " not in domain " +
                                   c.domains[i]);
          vs.ids.push_back(id);
        }
        std::sort(vs.ids.begin(), vs.ids.end());
        if (std::int64_t(vs.ids.size()) == model_.domain(c.domains[i]).size())
          vs.full = true;
        c.allowed[i] = vs;
      } else {
        fail(op, "expected '!=' or 'in'");
      }
    } while (accept_punct(","));
  }

  Prv parse_prv_ref(const Constraint& c) {
    Token name = expect_ident();
    auto it = model_.relations.find(name.text);
    if (it == model_.relations.end())
      fail(name, "undeclared prv " + name.text);
    Prv p;
    p.relation = name.text;
    p.range = it->second.range;
    expect_punct("(");
    if (!accept_punct(")")) {
      std::size_t pos = 0;
      do {
        Token t = expect_ident();
        if (pos >= it->second.param_domains.size())
          fail(t, "too many parameters for " + name.text);
        if (c.index_of(t.text) >= 0) {
          p.params.push_back(logvar(t.text));
        } else {
          int id = model_.domain(it->second.param_domains[pos])
                       .index_of(t.text);
          if (id < 0)
            fail(t, t.text + " is neither a logvar nor a constant of " +
                        it->second.param_domains[pos]);
          p.params.push_back(constant(t.text));
        }
        ++pos;
      } while (accept_punct(","));
      if (pos != it->second.param_domains.size())
        fail(lx_.peek(), "too few parameters for " + name.text);
      expect_punct(")");
    } else if (!it->second.param_domains.empty()) {
      fail(name, "too few parameters for " + name.text);
    }
    return p;
  }

  void parfactor_decl() {
    Token name = expect_ident();
    Parfactor g;
    g.name = name.text;
    g.constraint = logvar_block();
    Token on = expect_ident();
    if (on.text != "on") fail(on, "expected 'on'");
    do {
      Arg a;
      a.prv = parse_prv_ref(g.constraint);
      g.args.push_back(std::move(a));
    } while (accept_punct(","));
    Token tbl = expect_ident();
    if (tbl.text != "table") fail(tbl, "expected 'table'");
    expect_punct("{");
    std::vector<int> radices;
    for (const auto& a : g.args) radices.push_back(int(a.prv.range.size()));
    std::vector<char> seen(table_size(radices), 0);
    g.table.assign(table_size(radices), Weight::zero());
    while (!accept_punct("}")) {
      Token open = expect_punct("(");
      std::vector<int> tuple;
      std::size_t pos = 0;
      do {
        Token v = expect_ident();
        if (pos >= g.args.size()) fail(v, "row too long");
        const auto& range = g.args[pos].prv.range;
        auto vi = std::find(range.begin(), range.end(), v.text);
        if (vi == range.end())
          fail(v, "value " + v.text + " not in range of " +
                      g.args[pos].prv.relation);
        tuple.push_back(int(vi - range.begin()));
        ++pos;
      } while (accept_punct(","));
      if (pos != g.args.size()) fail(open, "row arity mismatch");
      expect_punct(")");
      expect_punct("=");
      Token num = lx_.next();
      if (num.kind != Token::Number) fail(num, "expected a potential value");
      double v = std::stod(num.text);
      if (v < 0) fail(num, "potentials must be non-negative");
      std::size_t idx = tuple_to_index(radices, tuple);
      if (seen[idx]) fail(open, "duplicate table row");
      seen[idx] = 1;
      g.table[idx] = Weight::from_value(v);
      expect_punct(";");
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        throw ValidationError("parfactor " + g.name + ": table has " +
                              std::to_string(std::count(seen.begin(),
                                                        seen.end(), 1)) +
                              " rows, needs " + std::to_string(seen.size()));
    expect_punct(";");
    model_.parfactors.push_back(std::move(g));
  }

  void evidence_decl() {
    Token name = expect_ident();
    auto it = model_.relations.find(name.text);
    if (it == model_.relations.end())
      fail(name, "undeclared prv " + name.text);
    EvidenceItem ev;
    ev.prv.relation = name.text;
    ev.prv.range = it->second.range;
    Constraint c;
    expect_punct("(");
    if (!accept_punct(")")) {
      std::size_t pos = 0;
      bool saw_constr = false;
      do {
        Token t = expect_ident();
        if (pos >= it->second.param_domains.size())
          fail(t, "too many parameters for " + name.text);
        const std::string& dn = it->second.param_domains[pos];
        if (lx_.peek().kind == Token::Punct && lx_.peek().text == ":") {
          lx_.next();
          Token dtok = expect_ident();
          if (dtok.text != dn)
            fail(dtok, "logvar domain mismatch, expected " + dn);
          c.logvars.push_back(t.text);
          c.domains.push_back(dn);
          c.allowed.emplace_back();
          ev.prv.params.push_back(logvar(t.text));
        } else {
          int id = model_.domain(dn).index_of(t.text);
          if (id < 0)
            fail(t, t.text + " is not a constant of " + dn);
          ev.prv.params.push_back(constant(t.text));
        }
        ++pos;
        if (accept_punct("|")) {
          constraint_body(c);
          saw_constr = true;
          break;
        }
      } while (accept_punct(","));
      if (pos != it->second.param_domains.size())
        fail(lx_.peek(), "too few parameters for " + name.text);
      (void)saw_constr;
      expect_punct(")");
    }
    ev.constraint = c;
    expect_punct("=");
    Token v = expect_ident();
    auto vi = std::find(ev.prv.range.begin(), ev.prv.range.end(), v.text);
    if (vi == ev.prv.range.end())
      fail(v, "value " + v.text + " not in range of " + name.text);
    ev.value = int(vi - ev.prv.range.begin());
    expect_punct(";");
    model_.evidence.push_back(std::move(ev));
  }

  Lexer lx_;
  Model model_;
  std::map<std::string, std::vector<std::string>> ranges_;
};

std::string fmt_weight(const Weight& w) {
  std::ostringstream os;
  os << std::setprecision(17) << w.value();
  return os.str();
}

}  // namespace

Model parse_model(const std::string& text) { return Parser(text).parse(); }

std::string print_model(const Model& m) {
  std::ostringstream os;
  for (const auto& dn : m.domain_order) {
    const DomainSpec& d = m.domains.at(dn);
    os << "domain " << d.name << " = {";
    for (std::size_t i = 0; i < d.constants.size(); ++i)
      os << (i ? ", " : "") << d.constants[i];
    os << "};\n";
  }
  // named ranges for non-boolean relations
  std::map<std::vector<std::string>, std::string> range_names;
  std::vector<std::string> bool_range{"true", "false"};
  int next_range = 0;
  for (const auto& rn : m.relation_order) {
    const RelationSig& sig = m.relations.at(rn);
    if (sig.range == bool_range || range_names.count(sig.range)) continue;
    std::string name = "r" + std::to_string(next_range++);
    range_names[sig.range] = name;
    os << "range " << name << " = {";
    for (std::size_t i = 0; i < sig.range.size(); ++i)
      os << (i ? ", " : "") << sig.range[i];
    os << "};\n";
  }
  for (const auto& rn : m.relation_order) {
    const RelationSig& sig = m.relations.at(rn);
    os << "prv " << rn << "(";
    for (std::size_t i = 0; i < sig.param_domains.size(); ++i)
      os << (i ? ", " : "") << sig.param_domains[i];
    os << ")";
    if (sig.range != bool_range) os << " : " << range_names.at(sig.range);
    os << ";\n";
  }
  for (const auto& g : m.parfactors) {
    for (const auto& a : g.args)
      if (a.is_crv())
        throw ValidationError(
            "print_model: counting randvars have no textual form");
    os << "parfactor " << g.name << " (";
    const Constraint& c = g.constraint;
    for (std::size_t i = 0; i < c.logvars.size(); ++i)
      os << (i ? ", " : "") << c.logvars[i] << ":" << c.domains[i];
    if (c.explicit_form) {
      os << " | in {";
      auto tuples = expand_tuples(c, m.domains);
      for (std::size_t t = 0; t < tuples.size(); ++t) {
        os << (t ? ", " : "") << "(";
        for (std::size_t i = 0; i < tuples[t].size(); ++i)
          os << (i ? "," : "")
             << m.domains.at(c.domains[i]).constants[tuples[t][i]];
        os << ")";
      }
      os << "}";
    } else if (!c.is_top()) {
      bool first = true;
      os << " | ";
      for (std::size_t i = 0; i < c.allowed.size(); ++i) {
        if (c.allowed[i].full) continue;
        os << (first ? "" : ", ") << c.logvars[i] << " in {";
        for (std::size_t k = 0; k < c.allowed[i].ids.size(); ++k)
          os << (k ? ", " : "")
             << m.domains.at(c.domains[i]).constants[c.allowed[i].ids[k]];
        os << "}";
        first = false;
      }
      for (auto [i, j] : c.diffs) {
        os << (first ? "" : ", ") << c.logvars[i] << " != " << c.logvars[j];
        first = false;
      }
    }
    os << ")\n  on ";
    for (std::size_t i = 0; i < g.args.size(); ++i)
      os << (i ? ", " : "") << g.args[i].prv.str();
    os << "\n  table {";
    std::vector<int> radices;
    for (const auto& a : g.args) radices.push_back(int(a.prv.range.size()));
    std::vector<int> tuple;
    for (std::size_t idx = 0; idx < g.table.size(); ++idx) {
      index_to_tuple(radices, idx, tuple);
      os << " (";
      for (std::size_t i = 0; i < tuple.size(); ++i)
        os << (i ? "," : "") << g.args[i].prv.range[tuple[i]];
      os << ")=" << fmt_weight(g.table[idx]) << ";";
    }
    os << " };\n";
  }
  for (const auto& ev : m.evidence) {
    os << "evidence " << ev.prv.relation;
    if (!ev.prv.params.empty()) {
      os << "(";
      const RelationSig& sig = m.relations.at(ev.prv.relation);
      for (std::size_t i = 0; i < ev.prv.params.size(); ++i) {
        const Term& t = ev.prv.params[i];
        os << (i ? ", " : "");
        if (t.is_constant)
          os << t.name;
        else
          os << t.name << ":" << sig.param_domains[i];
      }
      const Constraint& c = ev.constraint;
      if (!c.logvars.empty() && !c.is_top()) {
        os << " | ";
        bool first = true;
        if (c.explicit_form) {
          os << "in {";
          auto tuples = expand_tuples(c, m.domains);
          for (std::size_t t = 0; t < tuples.size(); ++t) {
            os << (t ? ", " : "") << "(";
            for (std::size_t i = 0; i < tuples[t].size(); ++i)
              os << (i ? "," : "")
                 << m.domains.at(c.domains[i]).constants[tuples[t][i]];
            os << ")";
          }
          os << "}";
        } else {
          for (std::size_t i = 0; i < c.allowed.size(); ++i) {
            if (c.allowed[i].full) continue;
            os << (first ? "" : ", ") << c.logvars[i] << " in {";
            for (std::size_t k = 0; k < c.allowed[i].ids.size(); ++k)
              os << (k ? ", " : "")
                 << m.domains.at(c.domains[i]).constants[c.allowed[i].ids[k]];
            os << "}";
            first = false;
          }
          for (auto [i, j] : c.diffs) {
            os << (first ? "" : ", ") << c.logvars[i] << " != "
               << c.logvars[j];
            first = false;
          }
        }
      }
      os << ")";
    }
    os << " = " << ev.prv.range[ev.value] << ";\n";
  }
  return os.str();
}

Prv parse_ground_term(const std::string& text, const Model& m) {
  Lexer lx(text);
  Token name = lx.next();
  if (name.kind != Token::Ident)
    throw ParseError(name.line, name.col, "expected a relation name");
  auto it = m.relations.find(name.text);
  if (it == m.relations.end())
    throw ValidationError("unknown relation " + name.text + " in query");
  Prv p;
  p.relation = name.text;
  p.range = it->second.range;
  Token open = lx.next();
  if (!(open.kind == Token::Punct && open.text == "(")) {
    if (!it->second.param_domains.empty())
      throw ParseError(open.line, open.col, "expected '('");
    return p;
  }
  std::size_t pos = 0;
  for (;;) {
    Token t = lx.next();
    if (t.kind == Token::Punct && t.text == ")") break;
    if (t.kind == Token::Punct && t.text == ",") continue;
    if (t.kind != Token::Ident)
      throw ParseError(t.line, t.col, "expected a constant");
    if (pos >= it->second.param_domains.size())
      throw ValidationError("too many parameters for " + name.text);
    if (m.domain(it->second.param_domains[pos]).index_of(t.text) < 0)
      throw ValidationError("constant " + t.text + " not in domain " +
                            it->second.param_domains[pos]);
    p.params.push_back(constant(t.text));
    ++pos;
  }
  if (pos != it->second.param_domains.size())
    throw ValidationError("too few parameters for " + name.text);
  return p;
}

std::vector<Query> parse_query_file(const std::string& text, const Model& m) {
  std::vector<Query> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto cut = line.find("//");
    if (cut != std::string::npos) line = line.substr(0, cut);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    Query q;
    q.terms.push_back(parse_ground_term(line.substr(first, last - first + 1), m));
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<EvidenceItem> parse_evidence_file(const std::string& text,
                                              const Model& m) {
  std::vector<EvidenceItem> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto cut = line.find("//");
    if (cut != std::string::npos) line = line.substr(0, cut);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string item = line.substr(first, last - first + 1);
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ParseError(lineno, 1, "expected term=value");
    auto strip = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    EvidenceItem e;
    e.prv = parse_ground_term(strip(item.substr(0, eq)), m);
    std::string label = strip(item.substr(eq + 1));
    const auto& range = m.relation(e.prv.relation).range;
    auto it = std::find(range.begin(), range.end(), label);
    if (it == range.end())
      throw ValidationError("'" + label + "' is not in the range of " +
                            e.prv.relation);
    e.value = int(it - range.begin());
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace liftedq
