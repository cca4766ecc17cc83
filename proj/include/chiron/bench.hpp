#pragma once

#include <chiron/engine_guided.hpp>
#include <chiron/workload.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chiron {

// One measured pass over a block sequence with a fixed engine configuration.
// txns_per_s counts every transaction of the pass against engine wall time;
// oracle runs and hint extraction are excluded from the clock.
struct BenchRow {
    std::string workload;
    std::string engine; // "seq" | "blockstm" | "chiron"
    unsigned threads = 1;
    SigMode sig = SigMode::Off;
    double txns_per_s = 0.0;
    std::uint64_t aborts = 0;
    std::uint64_t executions = 0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
    // Diagnostics, deliberately outside the CSV schema.
    std::uint64_t digest = 0; // final-state digest after the last block
    bool fallback = false;    // chiron: any block fell back to optimistic
};

// Column order of csv_row. digest and fallback stay out so downstream
// tooling sees a stable schema.
extern const char* const kBenchCsvHeader;

std::string csv_row(const BenchRow& row);

// Single-line JSON rendering of a row, digest as a 0x-prefixed hex string.
std::string bench_row_json(const BenchRow& row);

SigMode sig_mode_from_string(const std::string& name);

// Thrown when an engine disagrees with the sequential oracle. Every pass
// cross-checks; this firing means a scheduler bug, not a workload problem.
struct DigestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PassSpec {
    std::string workload_label;
    std::string engine; // "seq" | "blockstm" | "chiron"
    EngineConfig cfg;   // threads are forced to 1 for "seq"
    // chiron only: external hints in block order, or self-extracted exact
    // hints from the oracle run. Exactly one of the two must be set.
    const std::vector<Hint>* hints = nullptr;
    bool self_hint = false;
    std::uint64_t seed = 0; // reported in the row, not consumed
};

// Executes the blocks in order, chaining state from an empty genesis. Each
// block is checked against the sequential oracle; a shape-invalid hint drops
// that block to the optimistic engine and sets row.fallback.
BenchRow run_blocks(const std::vector<Block>& blocks, const PassSpec& pass);

struct BenchPlan {
    std::vector<WorkloadKind> workloads = {
        WorkloadKind::P2P, WorkloadKind::Nft, WorkloadKind::DexAvg,
        WorkloadKind::DexBursty, WorkloadKind::Mixed};
    std::vector<unsigned> threads = {1, 2, 4, 8};
    std::vector<SigMode> sigs = {SigMode::Off};
    unsigned reps = 5;           // measured reps; one warm-up pass is discarded
    std::uint32_t blocks = 4;
    std::uint32_t txns_per_block = 0; // 0 keeps the workload default
    std::optional<std::uint64_t> seed_override;
    VmConfig vm;
    std::uint64_t sig_cost_rounds = 20000;
    bool include_seq = true; // one seq row set per (workload, sig), threads=1
};

struct BenchResult {
    std::vector<BenchRow> rows;    // one per (workload, engine, threads, sig, rep)
    std::vector<BenchRow> medians; // one per combination, field-wise medians
};

// Full grid: seq baseline (optional), blockstm, and chiron with
// self-extracted hints. Workload blocks are generated once per workload and
// shared across reps and thread counts. Throws DigestMismatch on any
// cross-engine disagreement.
BenchResult run_bench(const BenchPlan& plan);

// Header, one line per rep row, then the medians as "# median," comment
// lines so plain CSV readers can skip them.
std::string bench_csv(const BenchResult& result);

} // namespace chiron
