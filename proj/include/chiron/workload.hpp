#pragma once

// Synthetic workload generators driven by per-role access-frequency tables,
// plus the statistics used to calibrate them (hottest/top-k/singleton shares
// and the gas-weighted critical-path fraction of a block).

#include "chiron/hint.hpp"
#include "chiron/types.hpp"
#include "chiron/vm.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace chiron {

enum class WorkloadKind : std::uint8_t { P2P, Nft, DexAvg, DexBursty, Mixed };

std::string to_string(WorkloadKind kind);
WorkloadKind workload_kind_from_string(const std::string& name);

// One histogram bucket: `share` of the role's accesses go to resources that
// are touched `accesses` times within the generated window.
struct FreqRow {
    std::uint64_t accesses = 1;
    double share = 0.0;

    bool operator==(const FreqRow&) const = default;
};

struct FrequencyTable {
    std::vector<FreqRow> rows;

    bool operator==(const FrequencyTable&) const = default;
};

// Throws std::invalid_argument naming the table and row when the histogram is
// unusable (shares off 1, buckets not strictly increasing, ...).
void validate_table(const FrequencyTable& table, const std::string& name);

// Mixed-workload knobs. Write-set length is geometric with the given mean,
// clamped to [1, write_set_max]; compute gas is log-uniform in
// [gas_min, gas_max]. read_prob is the chance a write is preceded by a read
// of the same key; dependency chains only form through such reads.
struct MixedParams {
    double write_set_mean = 4.0;
    std::uint32_t write_set_max = 16;
    std::uint64_t gas_min = 10;
    std::uint64_t gas_max = 1000;
    double read_prob = 1.0;
    double target_critical_path = 0.30;

    bool operator==(const MixedParams&) const = default;
};

struct WorkloadSpec {
    WorkloadKind kind = WorkloadKind::P2P;
    std::map<std::string, FrequencyTable> tables; // role name -> histogram
    MixedParams mixed;                            // Mixed only
    std::uint32_t txns_per_block = 1000;
    std::uint64_t seed = 1;
    double invalid_rate = 0.0; // fraction of planted bad signatures

    bool operator==(const WorkloadSpec&) const = default;
};

// Checks kind-specific role tables are present and valid; throws
// std::invalid_argument with a diagnostic otherwise.
void validate_spec(const WorkloadSpec& spec);

// Tables tuned so the generated blocks reproduce the published aggregates
// (hottest-pair shares, singleton shares, NFT top-2, Mixed critical path).
WorkloadSpec default_spec(WorkloadKind kind);

// Deterministic in (spec, n_blocks). Transaction shapes per kind:
//   P2P   [Read s, Read r, Write s, Write r]
//   NFT   [Read c, Write c, Write m]
//   DEX   [Read p, Write p, Write t]
//   Mixed k x [Read x?, Write x] + Compute(gas)
// Resource identities are drawn per role so empirical frequencies match the
// spec's tables over the generated window (capped at 1000 blocks).
std::vector<Block> generate(const WorkloadSpec& spec, std::uint32_t n_blocks);

struct WorkloadStats {
    double hottest_share = 0.0;
    double top2_share = 0.0;
    double singleton_share = 0.0;
    double critical_path_fraction = 0.0; // mean over blocks
    double mean_write_set_len = 0.0;

    bool operator==(const WorkloadStats&) const = default;
};

// Dependency edges a block will produce at runtime, derived from the static
// step lists: a read served by an earlier transaction's write links the two.
// Own writes shadow later own reads; invalid signatures neither read nor
// write. Matches extract_hints on the executed block exactly.
std::vector<DepEdge> static_edges(const Block& block);

// Per-transaction gas as the VM will report it: prologue + declared +
// epilogue for valid signatures, 0 for invalid ones.
std::vector<std::uint64_t> static_gas(const Block& block, const VmConfig& vm = {});

// Longest gas-weighted dependency chain divided by total gas; 0 when the
// block burns no gas at all.
double critical_path_fraction(const Block& block, const VmConfig& vm = {});

// Empirical shares over the supplied blocks. `role` restricts resource
// counting to keys with that prefix ("receiver:", ...); empty matches all
// keys. A singleton is a resource touched by exactly one transaction in the
// window. Write-set length counts distinct written keys regardless of role.
WorkloadStats measure_stats(const std::vector<Block>& blocks, const std::string& role = "");

// Fraction of transactions touching one of the k most-touched resources.
double topk_share(const std::vector<Block>& blocks, const std::string& role, std::size_t k);

// Rescales the hottest resource row until generated blocks' mean critical
// path lands within 0.05 of mixed.target_critical_path. Bounded at 50
// rounds; on failure throws std::runtime_error carrying the last fraction.
WorkloadSpec calibrate_mixed(const WorkloadSpec& spec);

} // namespace chiron
