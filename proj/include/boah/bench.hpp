// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Workload driver shared by the CLI and the tests: builds one of the table
// variants over a fresh simulated store, replays a deterministic workload
// (load phase of pure inserts, then an operation phase mixing inserts and
// hit/miss queries), validates every query against an in-memory oracle, and
// reports per-phase amortized block IO.
#ifndef BOAH_BENCH_HPP
#define BOAH_BENCH_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boah/block_store.hpp"

namespace boah {

struct WorkloadSpec {
  std::uint64_t n = 1ULL << 16;  // load-phase inserts
  std::uint64_t ops = 0;         // operation-phase op count
  double insert_frac = 0.0;      // mix fractions; normalized, sum > 0
  double hit_frac = 0.5;
  double miss_frac = 0.5;
  std::uint64_t seed = 1;
  // When nonempty, load-phase keys come from here (n is ignored); values
  // and miss keys are still generated.
  std::vector<std::string> keys;
};

struct StructureParams {
  std::string structure = "stlsm";  // stlsm | boa | bot | cobot
  std::uint32_t lambda = 16;
  std::size_t block_bytes = 4096;
  std::size_t memory_bytes = 1ULL << 20;
};

struct PhaseReport {
  std::string phase;  // "load" or "ops"
  std::uint64_t ops = 0;
  double blocks_read_per_op = 0.0;
  double blocks_written_per_op = 0.0;
  std::uint64_t mismatches = 0;
};

struct RunReport {
  StructureParams params;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::vector<PhaseReport> phases;
  std::string error;  // nonempty when the run aborted

  std::uint64_t total_mismatches() const {
    std::uint64_t m = 0;
    for (const PhaseReport& p : phases) m += p.mismatches;
    return m;
  }
};

// Uniform interface over the table variants.
class TableAdapter {
 public:
  virtual ~TableAdapter() = default;
  virtual void insert(std::string_view key, std::string_view value) = 0;
  virtual std::optional<std::string> query(std::string_view key) = 0;
  virtual void destroy() = 0;
};

// Throws std::invalid_argument for unknown names or constructor constraint
// violations (the message carries the violated inequality).
std::unique_ptr<TableAdapter> make_adapter(const std::string& structure,
                                           BlockStore& store,
                                           std::uint32_t lambda,
                                           std::uint64_t n_max,
                                           std::uint64_t seed);

// Runs the workload on a fresh volatile store; never throws for per-run
// failures (the report's error field is set instead).
RunReport run_workload(const StructureParams& params, const WorkloadSpec& spec);

std::string csv_header();
void append_csv(std::string& out, const RunReport& report);

// Deterministic 64-bit mix used for workload generation.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace boah

#endif  // BOAH_BENCH_HPP
