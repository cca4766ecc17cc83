#pragma once

#include "chiron/mv_store.hpp"
#include "chiron/types.hpp"
#include "chiron/vm.hpp"

namespace chiron {

// Where the simulated signature-verification cost is paid. The validity bit
// itself is applied in every mode (all executors must invalidate the same
// transactions); the mode only moves the CPU cost on or off the critical
// path, or drops it entirely.
enum class SigMode : std::uint8_t { Off, Inline, IdleCore };

const char* to_string(SigMode m);

struct EngineConfig {
    unsigned threads = 1;
    SigMode sig_verify = SigMode::Off;
    VmConfig vm;
    std::uint64_t sig_cost_rounds = 20000;
};

// Baseline optimistic parallel executor: collaborative scheduler dispatching
// execution and validation tasks over a multi-version store, aborting and
// re-executing on validation failure. final_state always equals the
// sequential oracle. Throws std::runtime_error if total executions exceed
// 10*n (livelock trap).
BlockResult execute_block_optimistic(const Block& block, const State& state,
                                     const EngineConfig& cfg);

// Strict in-order single-thread execution; the ground-truth oracle and the
// "serial" baseline. Applies the same dirty-ledger signature semantics as the
// parallel engines. Read origins are recorded as the parallel engines would
// see them (last writer index), so hints extract identically from either.
BlockResult sequential_execute(const Block& block, const State& state, const VmConfig& vm);

} // namespace chiron
