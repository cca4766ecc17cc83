#include "chiron/vm.hpp"

#include "chiron/rng.hpp"

#include <thread>
#include <unordered_map>

namespace chiron {
namespace {

void consume(std::uint64_t v)
{
#if defined(__GNUC__) || defined(__clang__)
    asm volatile("" : : "r"(v));
#else
    volatile std::uint64_t sink = v;
    (void)sink;
#endif
}

} // namespace

void burn_gas(std::uint64_t rounds)
{
    std::uint64_t h = kFnvOffset;
    for (std::uint64_t r = 0; r < rounds; ++r)
        h = fnv1a64_u64(r, h);
    consume(h);
}

VmResult execute(const Transaction& txn, const ReadFn& reader, const VmConfig& cfg,
                 std::uint32_t incarnation, bool signature_invalid)
{
    ExecutionOutput out;
    out.txn_index = txn.index;
    out.incarnation = incarnation;

    if (signature_invalid) {
        out.status = TxnStatus::InvalidSignature;
        return out;
    }

    burn_gas(std::uint64_t{cfg.prologue_gas} * cfg.gas_cost_rounds);

    std::vector<Value> inputs;
    std::unordered_map<ResourceKey, Value> pending; // own writes, visible to later reads

    std::size_t yield_at = txn.steps.size(); // one past the end: no yield
    if (cfg.random_phase_yield && !txn.steps.empty())
        yield_at = DetRng::substream(txn.index, "phase", incarnation).next() % txn.steps.size();

    std::size_t step_idx = 0;
    for (const TxnStep& step : txn.steps) {
        if (step_idx++ == yield_at)
            std::this_thread::yield();
        switch (step.kind) {
        case StepKind::Read: {
            if (auto it = pending.find(step.key); it != pending.end()) {
                inputs.push_back(it->second);
                break;
            }
            MvReadValue r = reader(step.key);
            if (r.origin.kind == ReadOrigin::Kind::Estimate)
                return Blocked{r.origin.blocking};
            out.read_set.push_back({step.key, r.origin});
            inputs.push_back(r.value);
            break;
        }
        case StepKind::Write: {
            Value v = mix_value(inputs, txn.index);
            out.write_set.push_back({step.key, v});
            pending[step.key] = v;
            break;
        }
        case StepKind::Compute:
            burn_gas(step.gas * cfg.gas_cost_rounds);
            break;
        }
    }

    burn_gas(std::uint64_t{cfg.epilogue_gas} * cfg.gas_cost_rounds);
    out.gas_used = std::uint64_t{cfg.prologue_gas} + txn.declared_gas + cfg.epilogue_gas;
    out.status = TxnStatus::Success;
    return out;
}

} // namespace chiron
