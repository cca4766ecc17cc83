#pragma once

// Hint-guided parallel executor: dependency-aware dispatch (long chains
// first, children chained through their critical parent), immediate
// per-execution validation for early fault detection, and a final
// hint-independent validation sweep that doubles as the optimistic fallback
// for anything the guided phase could not settle.

#include "chiron/engine_blockstm.hpp"
#include "chiron/hint.hpp"

#include <optional>

namespace chiron {

// Static dispatch plan derived from a shape-valid hint.
struct GuidedSchedule {
    DepGraph graph;
    std::vector<TxnIndex> queue;         // ready from the start, no children
    std::vector<TxnIndex> priorityqueue; // ready from the start, with children
    // Parented txns start registered on their critical parent: the parent
    // with maximal path cost, ties to the lowest index.
    std::vector<std::optional<TxnIndex>> critical_parent;
};

// Requires verify_hint_shape(hint, block); throws std::invalid_argument on
// structurally broken edges.
GuidedSchedule schedule(const Block& block, const Hint& hint);

// Executes the block under hint guidance. Safety never depends on the hint:
// every retained result is re-validated against the settled store, and any
// invalidated or unfinished transaction is handed to the optimistic engine.
// metrics.guided_fallback reports whether the hint proved wrong (shape
// rejection, a failed immediate validation, or any abort during the final
// sweep). Exact hints yield executions == n and aborts == 0.
BlockResult run_guided(const Block& block, const State& state, const Hint& hint,
                       const EngineConfig& cfg);

} // namespace chiron
