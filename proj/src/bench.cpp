#include <chiron/bench.hpp>

#include <chiron/hint.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace chiron {

const char* const kBenchCsvHeader =
    "workload,engine,threads,sig_mode,txns_per_s,aborts,executions,wall_ms,seed";

namespace {

std::string fixed3(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string csv_row(const BenchRow& row)
{
    std::string out;
    out += row.workload;
    out += ',';
    out += row.engine;
    out += ',';
    out += std::to_string(row.threads);
    out += ',';
    out += to_string(row.sig);
    out += ',';
    out += fixed3(row.txns_per_s);
    out += ',';
    out += std::to_string(row.aborts);
    out += ',';
    out += std::to_string(row.executions);
    out += ',';
    out += fixed3(row.wall_ms);
    out += ',';
    out += std::to_string(row.seed);
    return out;
}

std::string bench_row_json(const BenchRow& row)
{
    char digest_hex[20];
    std::snprintf(digest_hex, sizeof digest_hex, "0x%016llx",
                  static_cast<unsigned long long>(row.digest));
    nlohmann::json j{
        {"workload", row.workload},
        {"engine", row.engine},
        {"threads", row.threads},
        {"sig_mode", to_string(row.sig)},
        {"txns_per_s", row.txns_per_s},
        {"aborts", row.aborts},
        {"executions", row.executions},
        {"wall_ms", row.wall_ms},
        {"seed", row.seed},
        {"digest", digest_hex},
        {"fallback", row.fallback},
    };
    return j.dump();
}

SigMode sig_mode_from_string(const std::string& name)
{
    if (name == "off")
        return SigMode::Off;
    if (name == "inline")
        return SigMode::Inline;
    if (name == "idle")
        return SigMode::IdleCore;
    throw std::invalid_argument("sig_mode: expected off, inline or idle, got \"" + name + "\"");
}

BenchRow run_blocks(const std::vector<Block>& blocks, const PassSpec& pass)
{
    if (blocks.empty())
        throw std::invalid_argument("run_blocks: no blocks");
    const bool is_seq = pass.engine == "seq";
    const bool is_stm = pass.engine == "blockstm";
    const bool is_chiron = pass.engine == "chiron";
    if (!is_seq && !is_stm && !is_chiron)
        throw std::invalid_argument("engine: expected seq, blockstm or chiron, got \"" +
                                    pass.engine + "\"");
    if (is_chiron) {
        if ((pass.hints != nullptr) == pass.self_hint)
            throw std::invalid_argument("engine chiron needs exactly one of hints or self_hint");
        if (pass.hints && pass.hints->size() != blocks.size())
            throw std::invalid_argument("hints: " + std::to_string(pass.hints->size()) +
                                        " hints for " + std::to_string(blocks.size()) +
                                        " blocks");
    }

    EngineConfig cfg = pass.cfg;
    if (is_seq)
        cfg.threads = 1;

    BenchRow row;
    row.workload = pass.workload_label;
    row.engine = pass.engine;
    row.threads = cfg.threads;
    row.sig = cfg.sig_verify;
    row.seed = pass.seed;

    State state;
    double wall = 0.0;
    std::uint64_t total_txns = 0;

    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const Block& block = blocks[i];
        total_txns += block.txns.size();

        BlockResult res;
        if (is_seq) {
            // The oracle is the measured run. Signature cost is burned up
            // front since the serial interpreter has no verification stage.
            auto t0 = std::chrono::steady_clock::now();
            if (cfg.sig_verify != SigMode::Off) {
                for (const Transaction& txn : block.txns)
                    verify_signature(txn, cfg.sig_cost_rounds);
            }
            res = sequential_execute(block, state, cfg.vm);
            wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (cfg.sig_verify != SigMode::Off)
                res.metrics.sig_verifications = block.txns.size();
        } else {
            BlockResult oracle = sequential_execute(block, state, cfg.vm);
            if (is_stm) {
                res = execute_block_optimistic(block, state, cfg);
            } else {
                Hint hint = pass.self_hint
                                ? extract_hints(oracle, block.height, "self")
                                : (*pass.hints)[i];
                if (!verify_hint_shape(hint, block)) {
                    res = execute_block_optimistic(block, state, cfg);
                    res.metrics.guided_fallback = true;
                } else {
                    res = run_guided(block, state, hint, cfg);
                }
            }
            wall += res.metrics.wall_seconds;
            if (state_digest(res.final_state) != state_digest(oracle.final_state))
                throw DigestMismatch("digest mismatch: workload " + pass.workload_label +
                                     " engine " + pass.engine + " block " +
                                     std::to_string(block.height));
        }

        row.aborts += res.metrics.aborts;
        row.executions += res.metrics.executions;
        row.fallback = row.fallback || res.metrics.guided_fallback;
        state = std::move(res.final_state);
    }

    row.wall_ms = wall * 1000.0;
    row.txns_per_s = wall > 0.0 ? static_cast<double>(total_txns) / wall : 0.0;
    row.digest = state_digest(state);
    return row;
}

namespace {

template <typename T, typename Get>
T median_of(const std::vector<BenchRow>& reps, Get get)
{
    std::vector<T> vals;
    vals.reserve(reps.size());
    for (const BenchRow& r : reps)
        vals.push_back(get(r));
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
}

BenchRow median_row(const std::vector<BenchRow>& reps)
{
    BenchRow m = reps.front();
    m.txns_per_s = median_of<double>(reps, [](const BenchRow& r) { return r.txns_per_s; });
    m.wall_ms = median_of<double>(reps, [](const BenchRow& r) { return r.wall_ms; });
    m.aborts = median_of<std::uint64_t>(reps, [](const BenchRow& r) { return r.aborts; });
    m.executions = median_of<std::uint64_t>(reps, [](const BenchRow& r) { return r.executions; });
    for (const BenchRow& r : reps)
        m.fallback = m.fallback || r.fallback;
    return m;
}

} // namespace

BenchResult run_bench(const BenchPlan& plan)
{
    if (plan.workloads.empty())
        throw std::invalid_argument("bench plan: no workloads");
    if (plan.threads.empty())
        throw std::invalid_argument("bench plan: no thread counts");
    for (unsigned t : plan.threads)
        if (t == 0)
            throw std::invalid_argument("bench plan: thread count 0");
    if (plan.sigs.empty())
        throw std::invalid_argument("bench plan: no sig modes");
    if (plan.reps == 0)
        throw std::invalid_argument("bench plan: reps must be >= 1");
    if (plan.blocks == 0)
        throw std::invalid_argument("bench plan: blocks must be >= 1");

    BenchResult out;
    for (WorkloadKind kind : plan.workloads) {
        WorkloadSpec spec = default_spec(kind);
        if (plan.txns_per_block != 0)
            spec.txns_per_block = plan.txns_per_block;
        if (plan.seed_override)
            spec.seed = *plan.seed_override;
        if (kind == WorkloadKind::Mixed)
            spec = calibrate_mixed(spec);
        const std::vector<Block> blocks = generate(spec, plan.blocks);
        const std::string label = to_string(kind);

        struct Combo {
            std::string engine;
            unsigned threads;
            SigMode sig;
        };
        std::vector<Combo> combos;
        if (plan.include_seq)
            for (SigMode sig : plan.sigs)
                combos.push_back({"seq", 1, sig});
        for (const char* engine : {"blockstm", "chiron"})
            for (unsigned t : plan.threads)
                for (SigMode sig : plan.sigs)
                    combos.push_back({engine, t, sig});

        // Repetitions are blocked: each round runs every combo once, so slow
        // drift of the host (steal time, frequency) lands on all engines
        // alike instead of biasing whichever combo ran last. Round 0 warms
        // caches and is discarded.
        std::vector<std::vector<BenchRow>> reps(combos.size());
        for (auto& r : reps)
            r.reserve(plan.reps);
        for (unsigned r = 0; r <= plan.reps; ++r) {
            for (std::size_t c = 0; c < combos.size(); ++c) {
                const Combo& combo = combos[c];
                PassSpec pass;
                pass.workload_label = label;
                pass.engine = combo.engine;
                pass.cfg = EngineConfig{combo.threads, combo.sig, plan.vm, plan.sig_cost_rounds};
                pass.self_hint = combo.engine == "chiron";
                pass.seed = spec.seed;
                BenchRow row = run_blocks(blocks, pass);
                if (r > 0)
                    reps[c].push_back(std::move(row));
            }
        }
        for (std::size_t c = 0; c < combos.size(); ++c) {
            out.rows.insert(out.rows.end(), reps[c].begin(), reps[c].end());
            out.medians.push_back(median_row(reps[c]));
        }
    }
    return out;
}

std::string bench_csv(const BenchResult& result)
{
    std::string out = kBenchCsvHeader;
    out += '\n';
    for (const BenchRow& row : result.rows) {
        out += csv_row(row);
        out += '\n';
    }
    for (const BenchRow& row : result.medians) {
        out += "# median,";
        out += csv_row(row);
        out += '\n';
    }
    return out;
}

} // namespace chiron
