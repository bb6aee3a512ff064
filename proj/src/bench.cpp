// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/bench.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "boah/boa.hpp"
#include "boah/bot.hpp"
#include "boah/st_lsm.hpp"

namespace boah {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::string hex_token(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return std::string(buf);
}

template <class Table>
class AdapterOf final : public TableAdapter {
 public:
  template <class... Args>
  explicit AdapterOf(Args&&... args) : t_(std::forward<Args>(args)...) {}
  void insert(std::string_view k, std::string_view v) override {
    t_.insert(k, v);
  }
  std::optional<std::string> query(std::string_view k) override {
    return t_.query(k);
  }
  void destroy() override { t_.destroy(); }

 private:
  Table t_;
};

}  // namespace

std::unique_ptr<TableAdapter> make_adapter(const std::string& structure,
                                           BlockStore& store,
                                           std::uint32_t lambda,
                                           std::uint64_t n_max,
                                           std::uint64_t seed) {
  if (structure == "stlsm")
    return std::make_unique<AdapterOf<StLsm>>(store, lambda, n_max, seed);
  if (structure == "boa")
    return std::make_unique<AdapterOf<BoaTable>>(store, lambda, n_max, seed);
  if (structure == "bot" || structure == "cobot") {
    BotConfig cfg;
    cfg.lambda = lambda;
    cfg.n_max = n_max;
    cfg.seed = seed;
    cfg.strategy = structure == "bot" ? MergeStrategy::kBoundedFanIn
                                      : MergeStrategy::kFunnel;
    return std::make_unique<AdapterOf<BotTable>>(store, cfg);
  }
  throw std::invalid_argument("unknown structure: " + structure);
}

RunReport run_workload(const StructureParams& params,
                       const WorkloadSpec& spec) {
  RunReport report;
  report.params = params;
  report.seed = spec.seed;

  const bool external_keys = !spec.keys.empty();
  const std::uint64_t n = external_keys ? spec.keys.size() : spec.n;
  report.n = n;

  const double mix_sum = spec.insert_frac + spec.hit_frac + spec.miss_frac;
  if (spec.ops > 0 && mix_sum <= 0.0) {
    report.error = "operation mix fractions must sum to a positive value";
    return report;
  }

  try {
    StoreConfig sc;
    sc.block_bytes = params.block_bytes;
    sc.cache_bytes = params.memory_bytes;
    BlockStore store(sc);
    auto table = make_adapter(params.structure, store, params.lambda,
                              n + spec.ops + 1, spec.seed);

    std::unordered_map<std::string, std::string> oracle;
    std::vector<std::string> inserted;
    inserted.reserve(n);
    std::uint64_t gen = spec.seed * 0x9e3779b97f4a7c15ULL + 1;

    auto do_insert = [&](std::string key) {
      std::string value = hex_token(splitmix64(gen));
      table->insert(key, value);
      oracle[key] = value;
      inserted.push_back(std::move(key));
    };

    // Load phase: pure inserts.
    store.reset_stats();
    for (std::uint64_t i = 0; i < n; ++i) {
      if (external_keys)
        do_insert(spec.keys[i]);
      else
        do_insert("k" + hex_token(splitmix64(gen)));
    }
    {
      const IoStats io = store.stats();
      PhaseReport ph;
      ph.phase = "load";
      ph.ops = n;
      if (n > 0) {
        ph.blocks_read_per_op = double(io.block_reads) / double(n);
        ph.blocks_written_per_op = double(io.block_writes) / double(n);
      }
      report.phases.push_back(ph);
    }

    // Operation phase: mixed inserts and verified hit/miss queries.
    if (spec.ops > 0) {
      const double t_insert = spec.insert_frac / mix_sum;
      const double t_hit = t_insert + spec.hit_frac / mix_sum;
      PhaseReport ph;
      ph.phase = "ops";
      ph.ops = spec.ops;
      store.reset_stats();
      for (std::uint64_t i = 0; i < spec.ops; ++i) {
        const double pick =
            double(splitmix64(gen) >> 11) * 0x1.0p-53;  // [0, 1)
        if (pick < t_insert || (pick < t_hit && inserted.empty())) {
          do_insert("o" + hex_token(splitmix64(gen)));
          continue;
        }
        std::string key;
        if (pick < t_hit)
          key = inserted[splitmix64(gen) % inserted.size()];
        else
          key = "m" + hex_token(splitmix64(gen));
        const std::optional<std::string> got = table->query(key);
        const auto want = oracle.find(key);
        const bool ok = want == oracle.end() ? !got.has_value()
                                             : got.has_value() &&
                                                   *got == want->second;
        if (!ok) ++ph.mismatches;
      }
      const IoStats io = store.stats();
      ph.blocks_read_per_op = double(io.block_reads) / double(spec.ops);
      ph.blocks_written_per_op = double(io.block_writes) / double(spec.ops);
      report.phases.push_back(ph);
    }

    table->destroy();
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  return report;
}

std::string csv_header() {
  return "structure,lambda,B,M,N,phase,blocks_read_per_op,"
         "blocks_written_per_op,mismatches,seed\n";
}

void append_csv(std::string& out, const RunReport& report) {
  for (const PhaseReport& ph : report.phases) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "%s,%u,%zu,%zu,%" PRIu64 ",%s,%.6f,%.6f,%" PRIu64
                  ",%" PRIu64 "\n",
                  report.params.structure.c_str(), report.params.lambda,
                  report.params.block_bytes, report.params.memory_bytes,
                  report.n, ph.phase.c_str(), ph.blocks_read_per_op,
                  ph.blocks_written_per_op, ph.mismatches, report.seed);
    out += line;
  }
  if (!report.error.empty()) {
    out += "# aborted: " + report.params.structure + " lambda=" +
           std::to_string(report.params.lambda) + ": " + report.error + "\n";
  }
}

}  // namespace boah
