// chiron: workload generation, block execution and benchmarking front end.
//
// Subcommands:
//   gen     --spec F --out F [--blocks N]        write a workload JSONL file
//   run     --workload F --engine E --threads N --sig M [--hints F|--self-hint]
//   bench   --workloads L --threads L --sig L --reps N --out F [--blocks N]
//   syncsim --config F --out F                   straggler-recovery simulation
//
// Exit codes: 0 success, 2 configuration error, 3 digest mismatch.
// CHIRON_SEED overrides every workload seed for reproducible CI runs.

#include <chiron/bench.hpp>
#include <chiron/hint.hpp>
#include <chiron/sync_sim.hpp>
#include <chiron/workload_io.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDigest = 3;

std::optional<std::uint64_t> env_seed()
{
    const char* raw = std::getenv("CHIRON_SEED");
    if (raw == nullptr || *raw == '\0')
        return std::nullopt;
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(raw, &end, 10);
    if (errno != 0 || end == raw || *end != '\0')
        throw std::invalid_argument(std::string("CHIRON_SEED: not an unsigned integer: \"") +
                                    raw + "\"");
    return static_cast<std::uint64_t>(v);
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out)
        throw std::runtime_error("short write to " + path);
}

std::vector<std::string> split_list(const std::string& csv)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(csv);
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int cmd_gen(const std::string& spec_path, const std::string& out_path, std::uint32_t n_blocks)
{
    chiron::WorkloadSpec spec = chiron::read_spec_file(spec_path);
    if (auto seed = env_seed())
        spec.seed = *seed;
    std::vector<chiron::Block> blocks = chiron::generate(spec, n_blocks);
    chiron::write_blocks_jsonl(out_path, blocks);

    chiron::WorkloadStats stats = chiron::measure_stats(blocks);
    std::uint64_t txns = 0;
    for (const chiron::Block& b : blocks)
        txns += b.txns.size();
    std::printf("workload %s: %zu blocks, %llu txns -> %s\n",
                chiron::to_string(spec.kind).c_str(), blocks.size(),
                static_cast<unsigned long long>(txns), out_path.c_str());
    std::printf("  hottest_share=%.4f top2_share=%.4f singleton_share=%.4f\n",
                stats.hottest_share, stats.top2_share, stats.singleton_share);
    std::printf("  critical_path_fraction=%.4f mean_write_set_len=%.2f\n",
                stats.critical_path_fraction, stats.mean_write_set_len);
    return 0;
}

int cmd_run(const std::string& workload_path, const std::string& engine, unsigned threads,
            const std::string& sig_name, const std::string& hints_path, bool self_hint)
{
    if (engine != "seq" && engine != "blockstm" && engine != "chiron")
        throw std::invalid_argument("engine: expected seq, blockstm or chiron, got \"" +
                                    engine + "\"");
    if (engine == "chiron" && hints_path.empty() && !self_hint)
        throw std::invalid_argument("engine chiron requires --hints or --self-hint");
    if (engine != "chiron" && (!hints_path.empty() || self_hint))
        throw std::invalid_argument("--hints/--self-hint only apply to engine chiron");

    std::vector<chiron::Block> blocks = chiron::read_blocks_jsonl(workload_path);
    if (blocks.empty())
        throw std::invalid_argument("workload file " + workload_path + ": no blocks");

    std::vector<chiron::Hint> hints;
    if (!hints_path.empty()) {
        std::istringstream in(slurp(hints_path));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty())
                continue;
            try {
                hints.push_back(chiron::parse_hint(line));
            } catch (const std::exception& e) {
                throw std::invalid_argument("hints file line " + std::to_string(lineno) +
                                            ": " + e.what());
            }
        }
        if (hints.size() != blocks.size())
            throw std::invalid_argument("hints file has " + std::to_string(hints.size()) +
                                        " hints but workload has " +
                                        std::to_string(blocks.size()) + " blocks");
    }

    chiron::PassSpec pass;
    pass.workload_label = workload_path;
    pass.engine = engine;
    pass.cfg.threads = threads;
    pass.cfg.sig_verify = chiron::sig_mode_from_string(sig_name);
    pass.hints = hints_path.empty() ? nullptr : &hints;
    pass.self_hint = self_hint;
    if (auto seed = env_seed())
        pass.seed = *seed;

    chiron::BenchRow row = chiron::run_blocks(blocks, pass);
    std::printf("%s\n", chiron::bench_row_json(row).c_str());
    return 0;
}

int cmd_bench(const std::string& workloads_csv, const std::string& threads_csv,
              const std::string& sigs_csv, unsigned reps, const std::string& out_path,
              std::uint32_t n_blocks, std::uint32_t txns_per_block)
{
    chiron::BenchPlan plan;
    plan.reps = reps;
    plan.blocks = n_blocks;
    plan.txns_per_block = txns_per_block;
    plan.seed_override = env_seed();

    plan.workloads.clear();
    for (const std::string& name : split_list(workloads_csv))
        plan.workloads.push_back(chiron::workload_kind_from_string(name));
    plan.threads.clear();
    for (const std::string& t : split_list(threads_csv)) {
        int v = std::stoi(t);
        if (v <= 0)
            throw std::invalid_argument("threads: must be positive, got " + t);
        plan.threads.push_back(static_cast<unsigned>(v));
    }
    plan.sigs.clear();
    for (const std::string& s : split_list(sigs_csv))
        plan.sigs.push_back(chiron::sig_mode_from_string(s));

    chiron::BenchResult result = chiron::run_bench(plan);
    write_file(out_path, chiron::bench_csv(result));
    for (const chiron::BenchRow& m : result.medians)
        std::printf("median %s\n", chiron::csv_row(m).c_str());
    std::printf("%zu rows -> %s\n", result.rows.size(), out_path.c_str());
    return 0;
}

int cmd_syncsim(const std::string& config_path, const std::string& out_path)
{
    chiron::SimConfig cfg = chiron::read_sim_config_file(config_path);
    chiron::SimTrace trace = chiron::simulate(cfg);
    chiron::write_trace_csv(out_path, trace);

    std::uint64_t straggler_height = 0;
    for (const chiron::TracePoint& p : trace.points)
        if (p.node_id == cfg.n_nodes - 1 && p.event == "exec")
            straggler_height = std::max(straggler_height, p.executed_height);
    std::printf("syncsim: %zu trace points, straggler reached height %llu, "
                "%zu untrust events -> %s\n",
                trace.points.size(), static_cast<unsigned long long>(straggler_height),
                trace.untrusted.size(), out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"deterministic parallel transaction execution workbench"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a workload JSONL file from a spec");
    std::string gen_spec, gen_out;
    std::uint32_t gen_blocks = 10;
    gen->add_option("--spec", gen_spec, "workload spec JSON file")->required();
    gen->add_option("--out", gen_out, "output JSONL path")->required();
    gen->add_option("--blocks", gen_blocks, "number of blocks to generate");

    auto* run = app.add_subcommand("run", "execute a workload file with one engine");
    std::string run_workload, run_engine, run_sig = "off", run_hints;
    unsigned run_threads = 1;
    bool run_self_hint = false;
    run->add_option("--workload", run_workload, "workload JSONL file")->required();
    run->add_option("--engine", run_engine, "seq | blockstm | chiron")->required();
    run->add_option("--threads", run_threads, "worker threads");
    run->add_option("--sig", run_sig, "off | inline | idle");
    run->add_option("--hints", run_hints, "hint JSONL file, one hint per block");
    run->add_flag("--self-hint", run_self_hint, "extract exact hints from an oracle run");

    auto* bench = app.add_subcommand("bench", "run the engine grid and write a CSV");
    std::string bench_workloads = "p2p,nft,dex_avg,dex_bursty,mixed";
    std::string bench_threads = "1,2,4,8";
    std::string bench_sigs = "off";
    std::string bench_out;
    unsigned bench_reps = 5;
    std::uint32_t bench_blocks = 4, bench_txns = 0;
    bench->add_option("--workloads", bench_workloads, "comma list of workload names");
    bench->add_option("--threads", bench_threads, "comma list of thread counts");
    bench->add_option("--sig", bench_sigs, "comma list of sig modes");
    bench->add_option("--reps", bench_reps, "measured repetitions per combination");
    bench->add_option("--out", bench_out, "output CSV path")->required();
    bench->add_option("--blocks", bench_blocks, "blocks per workload");
    bench->add_option("--txns", bench_txns, "transactions per block (0 = workload default)");

    auto* sim = app.add_subcommand("syncsim", "straggler-recovery simulation");
    std::string sim_config, sim_out;
    sim->add_option("--config", sim_config, "simulation config JSON file")->required();
    sim->add_option("--out", sim_out, "output trace CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen)
            return cmd_gen(gen_spec, gen_out, gen_blocks);
        if (*run)
            return cmd_run(run_workload, run_engine, run_threads, run_sig, run_hints,
                           run_self_hint);
        if (*bench)
            return cmd_bench(bench_workloads, bench_threads, bench_sigs, bench_reps, bench_out,
                             bench_blocks, bench_txns);
        if (*sim)
            return cmd_syncsim(sim_config, sim_out);
    } catch (const chiron::DigestMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDigest;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return 0;
}
