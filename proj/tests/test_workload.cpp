#include "chiron/workload.hpp"

#include "chiron/engine_blockstm.hpp"
#include "chiron/workload_io.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace chiron;
using testutil::make_txn;
using testutil::random_block;

namespace {

Block block_of(std::vector<Transaction> txns)
{
    Block b;
    b.height = 7;
    b.txns = std::move(txns);
    for (TxnIndex i = 0; i < b.txns.size(); ++i)
        b.txns[i].index = i;
    return b;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const VmConfig kBareVm{/*gas_cost_rounds=*/0, /*prologue_gas=*/0, /*epilogue_gas=*/0,
                       /*random_phase_yield=*/false};

} // namespace

TEST_CASE("frequency tables reject malformed histograms")
{
    CHECK_THROWS_WITH_AS(validate_table({}, "t"), "table t: no rows", std::invalid_argument);
    CHECK_THROWS_AS(validate_table({{{1, 0.5}, {3, 0.6}}}, "t"), std::invalid_argument);
    CHECK_THROWS_AS(validate_table({{{3, 0.5}, {2, 0.5}}}, "t"), std::invalid_argument);
    CHECK_THROWS_AS(validate_table({{{3, 0.5}, {3, 0.5}}}, "t"), std::invalid_argument);
    CHECK_THROWS_AS(validate_table({{{1, 0.0}, {3, 1.0}}}, "t"), std::invalid_argument);
    CHECK_THROWS_AS(validate_table({{{0, 1.0}}}, "t"), std::invalid_argument);
    CHECK_NOTHROW(validate_table({{{1, 0.25}, {4, 0.75}}}, "t"));
}

TEST_CASE("spec validation names the missing or extra role")
{
    for (auto kind : {WorkloadKind::P2P, WorkloadKind::Nft, WorkloadKind::DexAvg,
                      WorkloadKind::DexBursty, WorkloadKind::Mixed})
        CHECK_NOTHROW(validate_spec(default_spec(kind)));

    auto spec = default_spec(WorkloadKind::P2P);
    spec.tables.erase("receiver");
    CHECK_THROWS_WITH_AS(validate_spec(spec), "spec: missing table for role \"receiver\"",
                         std::invalid_argument);

    spec = default_spec(WorkloadKind::Mixed);
    spec.tables["pair"] = spec.tables.at("resource");
    CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

    spec = default_spec(WorkloadKind::Mixed);
    spec.mixed.target_critical_path = 1.0;
    CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

    spec = default_spec(WorkloadKind::P2P);
    spec.invalid_rate = 1.5;
    CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);
}

TEST_CASE("critical path: hand-checked three-transaction block")
{
    // gas 5, 7, 3; txn 1 reads txn 0's key, txn 2 independent -> 12/15
    auto b = block_of({
        make_txn(0, {TxnStep::write("k"), TxnStep::compute(5)}),
        make_txn(1, {TxnStep::read("k"), TxnStep::compute(7)}),
        make_txn(2, {TxnStep::compute(3)}),
    });
    CHECK(static_edges(b) == std::vector<DepEdge>{{0, 1}});
    CHECK(static_gas(b, kBareVm) == std::vector<std::uint64_t>{5, 7, 3});
    CHECK(critical_path_fraction(b, kBareVm) == 12.0 / 15.0);
}

TEST_CASE("critical path: chains, independence and empty gas")
{
    auto chain = block_of({
        make_txn(0, {TxnStep::write("a"), TxnStep::compute(2)}),
        make_txn(1, {TxnStep::read("a"), TxnStep::write("b"), TxnStep::compute(9)}),
        make_txn(2, {TxnStep::read("b"), TxnStep::compute(4)}),
    });
    CHECK(critical_path_fraction(chain, kBareVm) == 1.0);

    auto isolated = block_of({
        make_txn(0, {TxnStep::compute(2)}),
        make_txn(1, {TxnStep::compute(9)}),
        make_txn(2, {TxnStep::compute(4)}),
    });
    CHECK(critical_path_fraction(isolated, kBareVm) == 9.0 / 15.0);

    // prologue/epilogue gas is part of both numerator and denominator
    auto tiny = block_of({
        make_txn(0, {TxnStep::write("k")}),
        make_txn(1, {TxnStep::read("k")}),
    });
    VmConfig vm{0, 20, 20, false};
    CHECK(critical_path_fraction(tiny, vm) == 80.0 / 80.0);

    auto gasless = block_of({make_txn(0, {TxnStep::write("k")})});
    CHECK(critical_path_fraction(gasless, kBareVm) == 0.0);
}

TEST_CASE("static edges honor own-write shadowing and invalid signatures")
{
    auto shadowed = block_of({
        make_txn(0, {TxnStep::write("k")}),
        make_txn(1, {TxnStep::write("k"), TxnStep::read("k")}),
    });
    CHECK(static_edges(shadowed).empty());

    auto read_first = block_of({
        make_txn(0, {TxnStep::write("k")}),
        make_txn(1, {TxnStep::read("k"), TxnStep::write("k")}),
    });
    CHECK(static_edges(read_first) == std::vector<DepEdge>{{0, 1}});

    auto dirty = block_of({
        make_txn(0, {TxnStep::write("k"), TxnStep::compute(5)}, /*sig_valid=*/false),
        make_txn(1, {TxnStep::read("k"), TxnStep::compute(7)}),
    });
    CHECK(static_edges(dirty).empty());
    CHECK(static_gas(dirty, kBareVm) == std::vector<std::uint64_t>{0, 7});

    // the invalid writer must not shadow the previous valid one
    auto skip_writer = block_of({
        make_txn(0, {TxnStep::write("k")}),
        make_txn(1, {TxnStep::write("k")}, /*sig_valid=*/false),
        make_txn(2, {TxnStep::read("k")}),
    });
    CHECK(static_edges(skip_writer) == std::vector<DepEdge>{{0, 2}});
}

TEST_CASE("static DAG coincides with the DAG extracted from execution")
{
    for (auto kind : {WorkloadKind::P2P, WorkloadKind::Nft, WorkloadKind::DexAvg,
                      WorkloadKind::DexBursty, WorkloadKind::Mixed}) {
        auto spec = default_spec(kind);
        spec.txns_per_block = 300;
        spec.seed = 42;
        spec.invalid_rate = 0.05;
        VmConfig vm;
        vm.gas_cost_rounds = 0;
        for (const auto& block : generate(spec, 2)) {
            auto result = sequential_execute(block, {}, vm);
            auto hint = extract_hints(result, block.height, "oracle");
            CHECK(static_edges(block) == hint.edges);
            CHECK(static_gas(block, vm) == hint.gas);
            auto costs = path_costs(block.txns.size(), hint.edges, hint.gas);
            CHECK(costs == hint.path_cost);
        }
    }
}

TEST_CASE("generation is deterministic in the spec and sensitive to the seed")
{
    auto spec = default_spec(WorkloadKind::DexAvg);
    spec.txns_per_block = 120;
    auto a = generate(spec, 3);
    auto b = generate(spec, 3);
    CHECK(a == b);

    spec.seed = 2;
    auto c = generate(spec, 3);
    CHECK(a != c);
}

TEST_CASE("transaction shapes per kind")
{
    auto shapes = [](WorkloadKind kind) {
        auto spec = default_spec(kind);
        spec.txns_per_block = 50;
        return generate(spec, 1).front();
    };

    for (const auto& txn : shapes(WorkloadKind::P2P).txns) {
        REQUIRE(txn.steps.size() == 4);
        CHECK(txn.steps[0].kind == StepKind::Read);
        CHECK(txn.steps[1].kind == StepKind::Read);
        CHECK(txn.steps[2] == TxnStep::write(txn.steps[0].key));
        CHECK(txn.steps[3] == TxnStep::write(txn.steps[1].key));
        CHECK(txn.steps[0].key.starts_with("sender:"));
        CHECK(txn.steps[1].key.starts_with("receiver:"));
        CHECK(txn.declared_gas == 0);
    }
    for (const auto& txn : shapes(WorkloadKind::Nft).txns) {
        REQUIRE(txn.steps.size() == 3);
        CHECK(txn.steps[0].kind == StepKind::Read);
        CHECK(txn.steps[1] == TxnStep::write(txn.steps[0].key));
        CHECK(txn.steps[0].key.starts_with("contract:"));
        CHECK(txn.steps[2].kind == StepKind::Write);
        CHECK(txn.steps[2].key.starts_with("minter:"));
    }
    for (const auto& txn : shapes(WorkloadKind::DexBursty).txns) {
        REQUIRE(txn.steps.size() == 3);
        CHECK(txn.steps[0].kind == StepKind::Read);
        CHECK(txn.steps[1] == TxnStep::write(txn.steps[0].key));
        CHECK(txn.steps[0].key.starts_with("pair:"));
        CHECK(txn.steps[2].key.starts_with("trader:"));
    }
    for (const auto& txn : shapes(WorkloadKind::Mixed).txns) {
        REQUIRE(txn.steps.size() >= 2);
        const auto& last = txn.steps.back();
        CHECK(last.kind == StepKind::Compute);
        CHECK(last.gas == txn.declared_gas);
        CHECK(txn.declared_gas >= 10);
        CHECK(txn.declared_gas <= 1000);
        std::size_t writes = 0;
        for (std::size_t i = 0; i + 1 < txn.steps.size(); ++i) {
            const auto& step = txn.steps[i];
            REQUIRE(step.kind != StepKind::Compute);
            if (step.kind == StepKind::Write)
                ++writes;
            else
                CHECK(txn.steps[i + 1] == TxnStep::write(step.key)); // read-modify-write
        }
        CHECK(writes >= 1);
        CHECK(writes <= 16);
    }
}

TEST_CASE("measured shares: all-unique block")
{
    auto b = block_of({
        make_txn(0, {TxnStep::write("u:0")}),
        make_txn(1, {TxnStep::write("u:1")}),
        make_txn(2, {TxnStep::write("u:2")}),
        make_txn(3, {TxnStep::write("u:3")}),
    });
    auto stats = measure_stats({b});
    CHECK(stats.singleton_share == 1.0);
    CHECK(stats.hottest_share == 0.25);
    CHECK(stats.top2_share == 0.5);
    CHECK(stats.mean_write_set_len == 1.0);
    CHECK(topk_share({b}, "", 3) == 0.75);
    CHECK(topk_share({b}, "", 99) == 1.0);
}

// Tolerances below mirror the published aggregates the default tables are
// calibrated against; 10 blocks x 1000 txns, seed 1.

TEST_CASE("DEX defaults hit the hottest-pair shares")
{
    auto avg = measure_stats(generate(default_spec(WorkloadKind::DexAvg), 10), "pair:");
    CHECK(avg.hottest_share > 0.27);
    CHECK(avg.hottest_share < 0.33);

    auto bursty = measure_stats(generate(default_spec(WorkloadKind::DexBursty), 10), "pair:");
    CHECK(bursty.hottest_share > 0.42);
    CHECK(bursty.hottest_share < 0.48);
}

TEST_CASE("NFT defaults: two hot collections, independent minters")
{
    auto blocks = generate(default_spec(WorkloadKind::Nft), 10);
    CHECK(topk_share(blocks, "contract:", 2) >= 0.35);
    CHECK(measure_stats(blocks, "minter:").singleton_share >= 0.50);
}

TEST_CASE("P2P defaults: one hot receiver, wide singleton tails")
{
    auto blocks = generate(default_spec(WorkloadKind::P2P), 10);
    auto receiver = measure_stats(blocks, "receiver:");
    CHECK(receiver.hottest_share >= 0.10);
    CHECK(receiver.singleton_share > 0.35);
    CHECK(receiver.singleton_share < 0.45);
    auto sender = measure_stats(blocks, "sender:");
    CHECK(sender.singleton_share > 0.35);
    CHECK(sender.singleton_share < 0.45);
}

TEST_CASE("mixed calibration lands the critical-path target")
{
    auto spec = calibrate_mixed(default_spec(WorkloadKind::Mixed));
    CHECK_NOTHROW(validate_spec(spec));

    auto blocks = generate(spec, 10);
    auto stats = measure_stats(blocks);
    CHECK(stats.critical_path_fraction > 0.25);
    CHECK(stats.critical_path_fraction < 0.35);
    CHECK(stats.mean_write_set_len > 3.0);
    CHECK(stats.mean_write_set_len < 4.5);

    spec.seed = 99;
    for (const auto& block : generate(spec, 30)) {
        double f = critical_path_fraction(block);
        CHECK(f > 0.15);
        CHECK(f < 0.65);
    }
}

TEST_CASE("mixed calibration edge cases")
{
    // an all-singleton table with target 0 is already converged: identity
    WorkloadSpec flat;
    flat.kind = WorkloadKind::Mixed;
    flat.tables["resource"] = {{{1, 1.0}}};
    flat.mixed.target_critical_path = 0.0;
    flat.txns_per_block = 200;
    CHECK(calibrate_mixed(flat) == flat);

    // the same table cannot reach a high target: error carries the last fraction
    flat.mixed.target_critical_path = 0.8;
    CHECK_THROWS_WITH_AS(calibrate_mixed(flat),
                         doctest::Contains("last critical-path fraction"), std::runtime_error);

    CHECK_THROWS_AS(calibrate_mixed(default_spec(WorkloadKind::P2P)), std::invalid_argument);
}

TEST_CASE("workload JSONL round-trips and is byte-stable")
{
    testutil::Rng rng(31);
    std::vector<Block> blocks;
    for (std::uint64_t h = 0; h < 3; ++h) {
        blocks.push_back(random_block(rng, 12));
        blocks.back().height = h;
    }
    blocks.push_back(generate(default_spec(WorkloadKind::Mixed), 1).front());

    const std::string path = "tmp_workload_roundtrip.jsonl";
    write_blocks_jsonl(path, blocks);
    CHECK(read_blocks_jsonl(path) == blocks);

    auto first = slurp(path);
    write_blocks_jsonl(path, blocks);
    CHECK(slurp(path) == first);
    CHECK(first.starts_with("{\"block\":0,"));
    std::remove(path.c_str());
}

TEST_CASE("workload JSONL rejects malformed files with the line number")
{
    auto expect_error = [](const std::string& text, const char* needle) {
        const std::string path = "tmp_workload_bad.jsonl";
        std::ofstream(path, std::ios::binary) << text;
        CHECK_THROWS_WITH_AS(read_blocks_jsonl(path), doctest::Contains(needle),
                             std::runtime_error);
        std::remove(path.c_str());
    };

    expect_error("not json\n", "line 1: not valid JSON");
    expect_error(R"({"index":0,"steps":[],"payload_hex":"","sig_valid":true})"
                 "\n",
                 "line 1: transaction outside a block header");
    expect_error(R"({"block":0,"n":1})"
                 "\n"
                 R"({"index":0,"steps":[{"op":"x"}],"payload_hex":"","sig_valid":true})"
                 "\n",
                 "unknown step op");
    expect_error(R"({"block":0,"n":1})"
                 "\n"
                 R"({"index":0,"steps":[],"payload_hex":"zz","sig_valid":true})"
                 "\n",
                 "non-hex");
    expect_error(R"({"block":0,"n":1})"
                 "\n"
                 R"({"index":0,"steps":[],"payload_hex":"","sig_valid":true,"extra":1})"
                 "\n",
                 "unknown transaction field");
    expect_error(R"({"block":0,"n":2})"
                 "\n"
                 R"({"index":0,"steps":[],"payload_hex":"","sig_valid":true})"
                 "\n",
                 "ends mid-block");
    // dense-index violation surfaces through the block checker
    expect_error(R"({"block":0,"n":1})"
                 "\n"
                 R"({"index":3,"steps":[],"payload_hex":"","sig_valid":true})"
                 "\n",
                 "line 2");
}

TEST_CASE("spec JSON round-trips every default")
{
    for (auto kind : {WorkloadKind::P2P, WorkloadKind::Nft, WorkloadKind::DexAvg,
                      WorkloadKind::DexBursty, WorkloadKind::Mixed}) {
        auto spec = default_spec(kind);
        spec.seed = 17;
        spec.txns_per_block = 640;
        CHECK(spec_from_json_text(spec_to_json(spec)) == spec);
    }

    const std::string path = "tmp_spec_roundtrip.json";
    write_spec_file(path, default_spec(WorkloadKind::DexBursty));
    CHECK(read_spec_file(path) == default_spec(WorkloadKind::DexBursty));
    std::remove(path.c_str());
}

TEST_CASE("spec JSON parsing names the offending field")
{
    auto expect = [](const std::string& text, const char* needle) {
        CHECK_THROWS_WITH_AS(spec_from_json_text(text), doctest::Contains(needle),
                             std::runtime_error);
    };
    expect("{", "not valid JSON");
    expect("[]", "expected a JSON object");
    expect(R"({"tables":{}})", "kind");
    expect(R"({"kind":"warp","tables":{}})", "unknown workload kind");
    expect(R"({"kind":"p2p","tables":{},"bogus":1})", "unknown field \"bogus\"");
    expect(R"({"kind":"p2p","tables":{}})", "missing table for role");
    expect(R"({"kind":"p2p","seed":-4,"tables":{}})", "seed");
    expect(R"({"kind":"mixed","tables":{"resource":[{"accesses":1,"share":1.0}]},)"
           R"("mixed":{"warp":3}})",
           "unknown mixed field \"warp\"");
    expect(R"({"kind":"p2p","tables":{"sender":[{"accesses":1}],)"
           R"("receiver":[{"accesses":1,"share":1.0}]}})",
           "rows need exactly accesses and share");
    // shares that do not sum to 1 fail spec validation after parsing
    expect(R"({"kind":"mixed","tables":{"resource":[{"accesses":1,"share":0.5}]}})",
           "shares sum to");
}
