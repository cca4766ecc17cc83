#include "chiron/types.hpp"

#include <stdexcept>

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

const char* to_string(TxnStatus s)
{
    switch (s) {
    case TxnStatus::Success: return "success";
    case TxnStatus::InvalidSignature: return "invalid_signature";
    case TxnStatus::InvalidTxn: return "invalid_txn";
    }
    return "unknown";
}

std::uint64_t mix_value(std::span<const Value> inputs, TxnIndex txn_index)
{
    std::uint64_t h = kFnvOffset;
    for (Value v : inputs)
        h = fnv1a64_u64(v, h);
    return fnv1a64_u64(txn_index, h);
}

bool verify_signature(const Transaction& txn, std::uint64_t cost_rounds)
{
    std::uint64_t h = kFnvOffset;
    if (txn.payload.empty()) {
        for (std::uint64_t r = 0; r < cost_rounds; ++r)
            h = fnv1a64_u64(r, h);
    } else {
        for (std::uint64_t r = 0; r < cost_rounds; ++r)
            h = fnv1a64(txn.payload, h);
    }
    consume(h);
    return txn.signature.valid;
}

std::uint64_t state_digest(const State& state)
{
    std::uint64_t h = kFnvOffset;
    for (const auto& [key, value] : state) {
        h = fnv1a64({reinterpret_cast<const std::uint8_t*>(key.data()), key.size()}, h);
        h = fnv1a64_u64(key.size(), h);
        h = fnv1a64_u64(value, h);
    }
    return h;
}

void check_block(const Block& block)
{
    for (std::size_t i = 0; i < block.txns.size(); ++i) {
        const Transaction& txn = block.txns[i];
        if (txn.index != i)
            throw std::invalid_argument("block: txn indices must be dense 0..n-1");
        std::uint64_t gas = 0;
        for (const TxnStep& step : txn.steps) {
            switch (step.kind) {
            case StepKind::Read:
            case StepKind::Write:
                if (step.key.empty())
                    throw std::invalid_argument("block: read/write step without a key");
                if (step.gas != 0)
                    throw std::invalid_argument("block: read/write step carries gas");
                break;
            case StepKind::Compute:
                if (!step.key.empty())
                    throw std::invalid_argument("block: compute step carries a key");
                if (step.gas == 0)
                    throw std::invalid_argument("block: compute step needs gas >= 1");
                gas += step.gas;
                break;
            }
        }
        if (gas != txn.declared_gas)
            throw std::invalid_argument("block: declared_gas does not match compute steps");
    }
}

} // namespace chiron
