#pragma once

// Scheduling hints: the dependency DAG of a completed block, per-transaction
// gas and gas-weighted longest-path costs. Hints order execution; they are
// never trusted for safety (validation stays hint-independent).

#include "chiron/types.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chiron {

using DepEdge = std::pair<TxnIndex, TxnIndex>; // (parent, child), parent < child

// Acyclic by construction: every edge goes from a lower to a higher index.
struct DepGraph {
    std::size_t n = 0;
    std::vector<DepEdge> edges; // sorted lexicographically, unique
    std::vector<std::vector<TxnIndex>> parents;
    std::vector<std::vector<TxnIndex>> children;
};

// Sorts and dedupes; throws std::invalid_argument unless parent < child < n.
DepGraph build_depgraph(std::size_t n, std::vector<DepEdge> edges);

struct Hint {
    std::uint64_t height = 0;
    std::vector<DepEdge> edges; // sorted lexicographically, unique
    std::vector<std::uint64_t> gas;
    std::vector<std::uint64_t> path_cost; // gas[i] + max parent path_cost
    std::string provider;

    std::size_t n() const { return gas.size(); }

    bool operator==(const Hint&) const = default;
};

// Longest-chain DP over the edge list: cost[i] = gas[i] + max over parents.
std::vector<std::uint64_t> path_costs(std::size_t n, const std::vector<DepEdge>& edges,
                                      const std::vector<std::uint64_t>& gas);

// Edge (i, j) iff j's recorded read of some key observed a version written by
// i (the last writer below j). Gas is the outputs' gas_used.
Hint extract_hints(const BlockResult& result, std::uint64_t height, std::string provider);

// Structural check: list lengths match the block, parent < child < n, and
// path_cost satisfies its recurrence over the supplied gas. Never throws.
bool verify_hint_shape(const Hint& hint, const Block& block);

// Canonical JSON: {"edges":[[i,j],...],"gas":[...],"h":height,"n":count,
// "path":[...],"provider":str}, keys sorted, integers only.
std::string serialize(const Hint& hint);

// Strict inverse of serialize; throws std::runtime_error naming the offending
// field on malformed input. parse_hint(serialize(h)) == h.
Hint parse_hint(std::string_view bytes);

enum class HintCorruption : std::uint8_t {
    DropEdges,  // remove ~fraction of edges (missed dependencies)
    AddEdges,   // add ~fraction*|edges| spurious edges (over-constraint)
    PerturbGas, // rescale ~fraction of gas entries
};

// Deterministic corruption for fault-injection; path costs are recomputed so
// the result is still shape-valid and exercises the semantic detection path.
Hint corrupt_hint(const Hint& hint, HintCorruption mode, double fraction, std::uint64_t seed);

} // namespace chiron
