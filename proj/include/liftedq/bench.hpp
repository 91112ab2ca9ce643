#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftedq/generators.hpp"

namespace liftedq {

struct BenchConfig {
  Family family = Family::Gex;
  std::vector<int> sizes;
  std::vector<std::string> engines;  // subset of jt, ve, lve, ljt, fokc, ljtkc
  int reps = 5;
  std::uint64_t seed = 0;
  bool concurrent = false;  // one thread per (size, engine) cell
};

// One benchmark cell result: a single ground query answered by one engine at
// one domain size. Timings exclude model generation and any shared
// preparation reuse; counters are deterministic for a fixed seed.
struct BenchRow {
  std::string family;
  int n = 0;
  std::int64_t gr_size = 0;
  std::string engine;
  std::string query;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  std::int64_t lve_ops = 0;       // lifted operator applications
  std::int64_t circuit_nodes = 0; // compiled circuit nodes (fokc, ljtkc)
  std::int64_t eval_ops = 0;      // circuit evaluation arithmetic
  std::string status = "ok";      // ok | guard | oom-simulated
  bool verified = false;          // matched the ground oracle within 1e-9
};

std::vector<BenchRow> run_bench(const BenchConfig& cfg);

// Seeded per-relation single-ground-instance queries, one per PRV.
std::vector<Query> bench_queries(const Model& m, std::uint64_t seed);

std::string bench_csv(const std::vector<BenchRow>& rows);

// Gnuplot-friendly blocks: one per engine, "n median_ms" pairs separated by
// blank lines, query times summed per size.
std::string bench_plot(const std::vector<BenchRow>& rows);

}  // namespace liftedq
