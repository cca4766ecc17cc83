#include "chiron/engine_blockstm.hpp"

#include "stm_scheduler.hpp"

#include <chrono>
#include <unordered_map>

namespace chiron {

const char* to_string(SigMode m)
{
    switch (m) {
    case SigMode::Off:
        return "off";
    case SigMode::Inline:
        return "inline";
    case SigMode::IdleCore:
        return "idle";
    }
    return "?";
}

BlockResult execute_block_optimistic(const Block& block, const State& state,
                                     const EngineConfig& cfg)
{
    auto t0 = std::chrono::steady_clock::now();

    MultiVersionStore store(state, block.txns.size());
    detail::AtomicMetrics metrics;
    detail::SigPool sigs(block, cfg, metrics);
    detail::StmScheduler scheduler(block, store, cfg, metrics, sigs);
    scheduler.run();
    scheduler.final_check();

    BlockResult result;
    result.outputs = scheduler.take_outputs();
    result.final_state = store.finalize();
    metrics.fold_into(result.metrics);
    result.metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.validated = true;
    return result;
}

BlockResult sequential_execute(const Block& block, const State& state, const VmConfig& vm)
{
    auto t0 = std::chrono::steady_clock::now();

    // value and last writer per key touched so far
    std::unordered_map<ResourceKey, std::pair<Value, TxnIndex>> current;

    BlockResult result;
    result.final_state = state;
    result.outputs.reserve(block.txns.size());

    for (const Transaction& txn : block.txns) {
        ReadFn reader = [&](const ResourceKey& key) -> MvReadValue {
            if (auto it = current.find(key); it != current.end())
                return {it->second.first, ReadOrigin::versioned({it->second.second, 0})};
            if (auto it = result.final_state.find(key); it != result.final_state.end())
                return {it->second, ReadOrigin::storage()};
            return {0, ReadOrigin::storage()};
        };
        VmResult res = execute(txn, reader, vm, 0, !txn.signature.valid);
        ExecutionOutput out = std::move(std::get<ExecutionOutput>(res));
        for (const WriteRecord& w : out.write_set)
            current[w.key] = {w.value, txn.index};
        result.outputs.push_back(std::move(out));
    }

    for (const auto& [key, vw] : current)
        result.final_state[key] = vw.first;
    result.metrics.executions = block.txns.size();
    result.metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.validated = true;
    return result;
}

} // namespace chiron
