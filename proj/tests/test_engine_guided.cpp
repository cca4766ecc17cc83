#include "chiron/engine_guided.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace chiron;
using testutil::make_txn;

namespace {

EngineConfig cfg(unsigned threads, SigMode sig = SigMode::Off)
{
    EngineConfig c;
    c.threads = threads;
    c.sig_verify = sig;
    c.vm.gas_cost_rounds = 0;
    c.sig_cost_rounds = 0;
    return c;
}

Hint exact_hint(const Block& block, const State& base, const VmConfig& vm)
{
    return extract_hints(sequential_execute(block, base, vm), block.height, "test");
}

void check_equivalent(const BlockResult& got, const BlockResult& oracle)
{
    CHECK(got.final_state == oracle.final_state);
    REQUIRE(got.outputs.size() == oracle.outputs.size());
    for (std::size_t i = 0; i < got.outputs.size(); ++i) {
        CHECK(got.outputs[i].status == oracle.outputs[i].status);
        CHECK(got.outputs[i].write_set == oracle.outputs[i].write_set);
    }
    CHECK(got.metrics.priority_violations == 0);
}

} // namespace

TEST_CASE("schedule follows the dispatch rules")
{
    Block block;
    block.txns.push_back(make_txn(0, {TxnStep::write("k1")}));
    block.txns.push_back(make_txn(1, {TxnStep::read("k1"), TxnStep::write("k2")}));
    block.txns.push_back(make_txn(2, {TxnStep::read("k9"), TxnStep::write("k9")}));

    Hint hint;
    hint.edges = {{0, 1}};
    hint.gas = {5, 7, 3};
    hint.path_cost = {5, 12, 3};
    REQUIRE(verify_hint_shape(hint, block));

    GuidedSchedule plan = schedule(block, hint);
    CHECK(plan.priorityqueue == std::vector<TxnIndex>{0}); // has a child
    CHECK(plan.queue == std::vector<TxnIndex>{2});         // isolated
    CHECK_FALSE(plan.critical_parent[0].has_value());
    CHECK(plan.critical_parent[1] == TxnIndex{0});
    CHECK_FALSE(plan.critical_parent[2].has_value());
}

TEST_CASE("schedule picks the max-path-cost parent, ties to the lowest index")
{
    Block block;
    for (TxnIndex i = 0; i < 3; ++i)
        block.txns.push_back(make_txn(i, {TxnStep::compute(1)}));

    Hint hint;
    hint.edges = {{0, 2}, {1, 2}};
    hint.gas = {5, 12, 3};
    hint.path_cost = {5, 12, 15};
    CHECK(schedule(block, hint).critical_parent[2] == TxnIndex{1});

    hint.gas = {7, 7, 3};
    hint.path_cost = {7, 7, 10};
    CHECK(schedule(block, hint).critical_parent[2] == TxnIndex{0});
}

TEST_CASE("empty edge set sends everything to the plain queue")
{
    Block block;
    for (TxnIndex i = 0; i < 4; ++i)
        block.txns.push_back(make_txn(i, {TxnStep::compute(1)}));
    Hint hint;
    hint.gas = {1, 1, 1, 1};
    hint.path_cost = hint.gas;
    GuidedSchedule plan = schedule(block, hint);
    CHECK(plan.queue == std::vector<TxnIndex>{0, 1, 2, 3});
    CHECK(plan.priorityqueue.empty());
}

TEST_CASE("exact hints execute every transaction exactly once, zero aborts")
{
    testutil::Rng rng(808);
    for (int round = 0; round < 8; ++round) {
        std::size_t n = 5 + rng.below(40);
        auto block = testutil::random_block(rng, n, 3);
        State base{{"k0", 11}};
        auto oracle = sequential_execute(block, base, cfg(1).vm);
        Hint hint = exact_hint(block, base, cfg(1).vm);

        for (unsigned threads : {1u, 2u, 4u, 8u}) {
            auto got = run_guided(block, base, hint, cfg(threads));
            check_equivalent(got, oracle);
            CHECK(got.metrics.aborts == 0);
            CHECK(got.metrics.executions == n);
            CHECK_FALSE(got.metrics.guided_fallback);
        }
    }
}

TEST_CASE("hints extracted from a guided run equal the sequential extraction")
{
    testutil::Rng rng(4);
    auto block = testutil::random_block(rng, 30, 4);
    Hint hint = exact_hint(block, {}, cfg(1).vm);
    auto got = run_guided(block, {}, hint, cfg(4));
    CHECK(extract_hints(got, block.height, "test") == hint);
}

TEST_CASE("a deleted edge triggers fallback but never corrupts state")
{
    // txn 0 spans several yield points so that, once the edge is hidden,
    // txn 1's read really does race its write under concurrent dispatch
    Block block;
    block.txns.push_back(make_txn(0, {TxnStep::compute(1), TxnStep::compute(1),
                                      TxnStep::compute(1), TxnStep::write("k")}));
    block.txns.push_back(make_txn(1, {TxnStep::read("k"), TxnStep::write("k2")}));
    block.txns.push_back(make_txn(2, {TxnStep::read("z"), TxnStep::write("z")}));

    auto oracle = sequential_execute(block, {}, cfg(1).vm);
    Hint lying = exact_hint(block, {}, cfg(1).vm);
    REQUIRE(lying.edges == std::vector<DepEdge>{{0, 1}});
    lying.edges.clear();
    lying.path_cost = path_costs(3, lying.edges, lying.gas);

    // All thread counts, many repetitions: the interleavings differ but state
    // must not. Fallback may or may not engage when txn 1 happens to run
    // late; at 1 thread the plain queue preserves index order, so it must.
    bool fallback_seen = false;
    for (unsigned threads : {1u, 2u, 4u}) {
        for (int rep = 0; rep < 5; ++rep) {
            auto got = run_guided(block, {}, lying, cfg(threads));
            check_equivalent(got, oracle);
            fallback_seen = fallback_seen || got.metrics.guided_fallback;
        }
    }
    CHECK(fallback_seen);
}

TEST_CASE("a spurious edge only delays execution: no aborts, no fallback")
{
    Block block;
    block.txns.push_back(make_txn(0, {TxnStep::write("a")}));
    block.txns.push_back(make_txn(1, {TxnStep::write("b")}));
    block.txns.push_back(make_txn(2, {TxnStep::read("b"), TxnStep::write("c")}));

    auto oracle = sequential_execute(block, {}, cfg(1).vm);
    Hint padded = exact_hint(block, {}, cfg(1).vm);
    padded.edges.insert(padded.edges.begin(), {0, 1}); // fake dependency
    padded.path_cost = path_costs(3, padded.edges, padded.gas);

    for (unsigned threads : {1u, 2u, 4u}) {
        auto got = run_guided(block, {}, padded, cfg(threads));
        check_equivalent(got, oracle);
        CHECK(got.metrics.aborts == 0);
        CHECK_FALSE(got.metrics.guided_fallback);
    }
}

TEST_CASE("a shape-invalid hint falls back to the optimistic engine wholesale")
{
    testutil::Rng rng(66);
    auto block = testutil::random_block(rng, 20, 4);
    Hint broken = exact_hint(block, {}, cfg(1).vm);
    broken.path_cost[5] += 1;
    REQUIRE_FALSE(verify_hint_shape(broken, block));

    auto got = run_guided(block, {}, broken, cfg(4));
    check_equivalent(got, sequential_execute(block, {}, cfg(1).vm));
    CHECK(got.metrics.guided_fallback);
}

TEST_CASE("corrupted hints keep oracle equivalence at every thread count")
{
    testutil::Rng rng(313);
    for (int round = 0; round < 5; ++round) {
        auto block = testutil::random_block(rng, 25 + rng.below(20), 4);
        State base{{"k1", 7}};
        auto oracle = sequential_execute(block, base, cfg(1).vm);
        Hint hint = exact_hint(block, base, cfg(1).vm);

        for (auto mode : {HintCorruption::DropEdges, HintCorruption::AddEdges}) {
            Hint bad = corrupt_hint(hint, mode, 0.10, round);
            for (unsigned threads : {1u, 2u, 4u, 8u})
                check_equivalent(run_guided(block, base, bad, cfg(threads)), oracle);
        }
    }
}

TEST_CASE("dirty ledger: an all-invalid block leaves base storage untouched")
{
    Block block;
    for (TxnIndex i = 0; i < 6; ++i)
        block.txns.push_back(
            make_txn(i, {TxnStep::read("a"), TxnStep::write("a")}, /*sig_valid=*/false));
    State base{{"a", 123}};
    Hint hint = exact_hint(block, base, cfg(1).vm);
    CHECK(hint.edges.empty()); // no-ops have no reads to form edges

    for (SigMode m : {SigMode::Off, SigMode::Inline, SigMode::IdleCore}) {
        auto got = run_guided(block, base, hint, cfg(4, m));
        CHECK(got.final_state == base);
        for (const auto& out : got.outputs)
            CHECK(out.status == TxnStatus::InvalidSignature);
    }
}

TEST_CASE("signature modes agree on state and verify exactly once per transaction")
{
    testutil::Rng rng(21);
    auto block = testutil::random_block(rng, 30, 3);
    auto oracle = sequential_execute(block, {}, cfg(1).vm);
    Hint hint = exact_hint(block, {}, cfg(1).vm);
    Hint dropped = corrupt_hint(hint, HintCorruption::DropEdges, 0.3, 1);

    for (unsigned threads : {1u, 4u}) {
        for (const Hint& h : {hint, dropped}) {
            for (SigMode m : {SigMode::Off, SigMode::Inline, SigMode::IdleCore}) {
                auto got = run_guided(block, {}, h, cfg(threads, m));
                check_equivalent(got, oracle);
                CHECK(got.metrics.sig_verifications == (m == SigMode::Off ? 0 : 30));
            }
        }
    }
}

TEST_CASE("idle workers absorb signature verification during a long chain")
{
    // One 64-txn dependency chain: with 8 workers, all but one are idle at
    // any moment, so the signature pool should drain before execution ends.
    Block block;
    block.txns.push_back(make_txn(0, {TxnStep::compute(1000), TxnStep::write("k")}));
    for (TxnIndex i = 1; i < 64; ++i)
        block.txns.push_back(
            make_txn(i, {TxnStep::read("k"), TxnStep::compute(1000), TxnStep::write("k")}));

    EngineConfig c;
    c.threads = 8;
    c.sig_verify = SigMode::IdleCore;
    c.vm.gas_cost_rounds = 25;
    c.sig_cost_rounds = 20000;

    Hint hint = exact_hint(block, {}, c.vm);
    auto got = run_guided(block, {}, hint, c);
    CHECK(got.metrics.aborts == 0);
    CHECK(got.metrics.sig_verifications == 64);
    CHECK(got.metrics.sigs_done_at_exec_end >= 58); // >= 90% of 64
}

TEST_CASE("empty block")
{
    Hint empty;
    auto got = run_guided({}, {{"a", 5}}, empty, cfg(4));
    CHECK(got.final_state == State{{"a", 5}});
    CHECK(got.outputs.empty());
    CHECK_FALSE(got.metrics.guided_fallback);
}

TEST_CASE("guided runs are reproducible across repetitions")
{
    testutil::Rng rng(505);
    auto block = testutil::random_block(rng, 40, 4);
    Hint hint = exact_hint(block, {}, cfg(1).vm);
    auto first = run_guided(block, {}, hint, cfg(8));
    for (int i = 0; i < 3; ++i) {
        auto again = run_guided(block, {}, hint, cfg(8));
        CHECK(state_digest(again.final_state) == state_digest(first.final_state));
    }
}
