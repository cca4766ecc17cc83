#pragma once

// Shared test utilities: a tiny deterministic RNG (independent of the
// library's generator) and hand-rolled random block construction for
// property-style tests.

#include "chiron/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace testutil {

// splitmix64; fixed algorithm so failures reproduce from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

    bool chance(double p) { return static_cast<double>(next() >> 11) / 9007199254740992.0 < p; }

private:
    std::uint64_t state_;
};

inline chiron::Transaction
make_txn(chiron::TxnIndex index, std::vector<chiron::TxnStep> steps,
         bool sig_valid = true)
{
    chiron::Transaction txn;
    txn.index = index;
    txn.steps = std::move(steps);
    txn.payload = {static_cast<std::uint8_t>(index), 0x5a,
                   static_cast<std::uint8_t>(index >> 8)};
    txn.signature = chiron::SignatureStamp::over(txn.payload, sig_valid);
    for (const auto& s : txn.steps)
        if (s.kind == chiron::StepKind::Compute)
            txn.declared_gas += s.gas;
    return txn;
}

// Random block over a small key pool; ~8% invalid signatures. Contention is
// high by construction (few keys), which is what the engine tests want.
inline chiron::Block random_block(Rng& rng, std::size_t n, std::size_t key_pool = 8)
{
    chiron::Block block;
    block.height = rng.below(1000);
    block.txns.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<chiron::TxnStep> steps;
        std::size_t n_steps = 1 + rng.below(6);
        for (std::size_t s = 0; s < n_steps; ++s) {
            auto key = "k" + std::to_string(rng.below(key_pool));
            switch (rng.below(3)) {
            case 0: steps.push_back(chiron::TxnStep::read(key)); break;
            case 1: steps.push_back(chiron::TxnStep::write(key)); break;
            default: steps.push_back(chiron::TxnStep::compute(1 + rng.below(4))); break;
            }
        }
        block.txns.push_back(
            make_txn(static_cast<chiron::TxnIndex>(i), std::move(steps), !rng.chance(0.08)));
    }
    return block;
}

} // namespace testutil
