#pragma once

#include "chiron/types.hpp"

#include <functional>
#include <variant>

namespace chiron {

// Interpreter cost knobs. gas_cost_rounds scales Compute steps into hash
// rounds; prologue/epilogue model the fixed per-transaction overhead that
// dominates small transactions. All are calibration parameters, not ground
// truth.
struct VmConfig {
    std::uint32_t gas_cost_rounds = 100;
    std::uint32_t prologue_gas = 20;
    std::uint32_t epilogue_gas = 20;
    // Yield to the OS scheduler once per execution, at a step boundary chosen
    // by hashing (txn index, incarnation). The parallel engines enable this
    // when workers outnumber hardware cores: concurrently dispatched txns on
    // real parallel hardware progress at unsynchronized relative phases, and
    // a deterministic random phase reproduces that overlap. A fixed yield
    // point would synchronize every worker at the same boundary and push the
    // read-write inversion rate to its worst case.
    bool random_phase_yield = false;
};

struct Blocked {
    TxnIndex blocking_txn = 0;
};

using VmResult = std::variant<ExecutionOutput, Blocked>;

struct MvReadValue {
    Value value = 0;
    ReadOrigin origin;
};

// Read callback supplied by the engine; an Estimate origin aborts the run.
using ReadFn = std::function<MvReadValue(const ResourceKey&)>;

// Deterministic step interpreter. Reads record (key, origin) and append the
// value to the running input list; a Write stores mix_value(inputs so far,
// txn index); Compute burns gas * gas_cost_rounds hash rounds. A read of a
// key this execution already wrote is served from the local write buffer and
// is not recorded in the read set.
//
// With signature_invalid the transaction is a dirty-ledger no-op: empty read
// and write sets, zero gas, status InvalidSignature.
VmResult execute(const Transaction& txn, const ReadFn& reader, const VmConfig& cfg,
                 std::uint32_t incarnation = 0, bool signature_invalid = false);

// Exposed for tests and cost calibration: burns `rounds` hash rounds.
void burn_gas(std::uint64_t rounds);

} // namespace chiron
