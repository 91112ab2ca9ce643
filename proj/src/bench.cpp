#include "liftedq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <map>
#include <new>
#include <random>
#include <sstream>

#include "liftedq/errors.hpp"
#include "liftedq/ground.hpp"
#include "liftedq/ljtkc.hpp"

namespace liftedq {

namespace {

std::string query_name(const Query& q) {
  const Prv& t = q.terms[0];
  std::string s = t.relation + "(";
  for (std::size_t i = 0; i < t.params.size(); ++i)
    s += (i ? "," : "") + t.params[i].name;
  return s + ")";
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch())
      .count();
}

struct CellResult {
  std::vector<BenchRow> rows;
};

// runs one (size, engine) cell; any guard or allocation failure marks every
// row of the cell and the run continues
CellResult run_cell(const BenchConfig& cfg, int n, const std::string& engine) {
  CellResult out;
  Model m = gen_model(cfg.family, n);
  std::int64_t gr = gr_size(m);
  std::vector<Query> queries = bench_queries(m, cfg.seed);

  std::vector<Distribution> refs;
  bool have_ref = false;
  {
    std::int64_t states = 1;
    bool small = true;
    GroundFactorGraph g = n <= 16 ? ground_model(m, {}) : GroundFactorGraph{};
    for (const auto& r : g.var_ranges) {
      states *= std::int64_t(r.size());
      if (states > (std::int64_t(1) << 22)) {
        small = false;
        break;
      }
    }
    if (n <= 16 && small && !g.var_ranges.empty()) {
      for (const auto& q : queries) refs.push_back(brute_marginal(g, q));
      have_ref = true;
    }
  }

  auto make_row = [&](const Query& q) {
    BenchRow r;
    r.family = family_name(cfg.family);
    r.n = n;
    r.gr_size = gr;
    r.engine = engine;
    r.query = query_name(q);
    return r;
  };

  try {
    // shared preparation, reused across queries and repetitions
    FOJtree tree;
    PreparedModel prep;
    GroundFactorGraph g;
    if (engine == "ljt") {
      tree = construct_fojtree(m);
      pass_messages(tree);
    } else if (engine == "ljtkc") {
      prep = ljtkc_precompute(m);
    } else if (engine == "ve") {
      g = ground_model(m, {});
    }

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const Query& q = queries[qi];
      BenchRow row = make_row(q);
      std::vector<double> times;
      Distribution d;
      for (int rep = 0; rep < cfg.reps; ++rep) {
        LveTrace trace;
        std::int64_t ops_before = prep.query_stats.ops;
        double t0 = now_ms();
        if (engine == "jt") {
          d = jt_answer(m, {q}, {})[0];
        } else if (engine == "ve") {
          d = ve_marginal(g, q);
        } else if (engine == "lve") {
          d = lve_answer(m, q, {}, {}, &trace);
        } else if (engine == "ljt") {
          d = ljt_answer(tree, q);
        } else if (engine == "fokc") {
          EvalStats st;
          d = fokc_answer(m, q, {}, {}, &st);
          row.eval_ops = st.ops;
        } else if (engine == "ljtkc") {
          d = ljtkc_answer(prep, q);
        } else {
          throw ValidationError("unknown engine '" + engine + "'");
        }
        times.push_back(now_ms() - t0);
        if (engine == "lve") row.lve_ops = std::int64_t(trace.records.size());
        if (engine == "ljtkc") row.eval_ops = prep.query_stats.ops - ops_before;
      }
      if (engine == "ljt")
        row.lve_ops = std::int64_t(tree.message_trace.records.size());
      if (engine == "ljtkc") {
        row.lve_ops = std::int64_t(prep.tree.message_trace.records.size());
        for (const auto& u : prep.units)
          row.circuit_nodes += std::int64_t(u.circuit.size());
      }
      if (engine == "fokc") {
        WfomcProblem p = reduce_to_wfomc(m, m.parfactors);
        row.circuit_nodes = std::int64_t(compile(p).size());
      }
      std::sort(times.begin(), times.end());
      row.median_ms = times[times.size() / 2];
      for (double t : times) row.mean_ms += t;
      row.mean_ms /= double(times.size());
      if (have_ref) row.verified = d.max_abs_diff(refs[qi]) < 1e-9;
      out.rows.push_back(std::move(row));
    }
  } catch (const GuardError&) {
    out.rows.clear();
    for (const auto& q : queries) {
      BenchRow row = make_row(q);
      row.status = "guard";
      out.rows.push_back(std::move(row));
    }
  } catch (const std::bad_alloc&) {
    out.rows.clear();
    for (const auto& q : queries) {
      BenchRow row = make_row(q);
      row.status = "oom-simulated";
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace

std::vector<Query> bench_queries(const Model& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Query> out;
  for (const auto& rel : m.relation_order) {
    const auto& sig = m.relations.at(rel);
    Prv p;
    p.relation = rel;
    p.range = sig.range;
    for (const auto& dom : sig.param_domains) {
      const auto& cs = m.domains.at(dom).constants;
      p.params.push_back(constant(cs[rng() % cs.size()]));
    }
    // distinct constants where the model never relates a thing to itself
    if (p.params.size() == 2 && p.params[0].name == p.params[1].name &&
        sig.param_domains[0] == sig.param_domains[1]) {
      const auto& cs = m.domains.at(sig.param_domains[0]).constants;
      if (cs.size() > 1) {
        std::size_t i = std::size_t(std::find(cs.begin(), cs.end(),
                                              p.params[0].name) -
                                    cs.begin());
        std::size_t j = rng() % (cs.size() - 1);
        if (j >= i) ++j;
        p.params[1] = constant(cs[j]);
      }
    }
    Query q;
    q.terms.push_back(std::move(p));
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.sizes.empty()) throw ValidationError("no sizes given");
  for (int n : cfg.sizes)
    if (n < 1) throw ValidationError("sizes must be at least 1");
  if (cfg.reps < 1) throw ValidationError("repetitions must be at least 1");
  std::vector<std::string> engines = cfg.engines;
  if (engines.empty()) engines = {"jt", "ve", "lve", "ljt", "fokc", "ljtkc"};

  std::vector<BenchRow> rows;
  if (cfg.concurrent) {
    std::vector<std::future<CellResult>> cells;
    for (int n : cfg.sizes)
      for (const auto& e : engines)
        cells.push_back(std::async(std::launch::async, run_cell, cfg, n, e));
    for (auto& c : cells)
      for (auto& r : c.get().rows) rows.push_back(std::move(r));
  } else {
    for (int n : cfg.sizes)
      for (const auto& e : engines)
        for (auto& r : run_cell(cfg, n, e).rows) rows.push_back(std::move(r));
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "family,n,gr_size,engine,query,median_ms,mean_ms,lve_ops,"
        "circuit_nodes,eval_ops,status,verified\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    os << r.family << ',' << r.n << ',' << r.gr_size << ',' << r.engine << ','
       << r.query << ',' << r.median_ms << ',' << r.mean_ms << ','
       << r.lve_ops << ',' << r.circuit_nodes << ',' << r.eval_ops << ','
       << r.status << ',' << (r.verified ? "true" : "false") << '\n';
  return os.str();
}

std::string bench_plot(const std::vector<BenchRow>& rows) {
  std::map<std::string, std::map<int, double>> per_engine;
  for (const auto& r : rows)
    if (r.status == "ok") per_engine[r.engine][r.n] += r.median_ms;
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  for (const auto& [engine, pts] : per_engine) {
    os << "# " << engine << '\n';
    for (const auto& [n, ms] : pts) os << n << ' ' << ms << '\n';
    os << '\n';
  }
  return os.str();
}

}  // namespace liftedq
