#include "chiron/sync_sim.hpp"

#include "chiron/engine_guided.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace chiron {

namespace {

constexpr double kEps = 1e-9;

// Real execution backing a straggler step in integration mode. Blocks are
// chained: each executes on the state left by the previous height.
struct IntegrationState {
    std::vector<Block> blocks;
    State state;
    EngineConfig engine;
};

} // namespace

std::string to_string(SimMode mode)
{
    return mode == SimMode::Analytic ? "analytic" : "integration";
}

void validate_sim_config(const SimConfig& cfg)
{
    if (cfg.n_nodes < 4 || (cfg.n_nodes - 1) % 3 != 0)
        throw std::invalid_argument("sim config: n_nodes must be 3f+1 with f >= 1");
    if (!(cfg.block_period > 0.0) || !(cfg.alpha > 0.0) || !(cfg.delta > 0.0)
        || !(cfg.horizon > 0.0))
        throw std::invalid_argument("sim config: block_period, alpha, delta and horizon "
                                    "must be positive");
    if (!(cfg.straggler.speed_factor_unguided > 0.0)
        || !(cfg.straggler.speed_factor_guided > 0.0))
        throw std::invalid_argument("sim config: speed factors must be positive");
    const std::uint32_t f = (cfg.n_nodes - 1) / 3;
    std::vector<std::uint32_t> seen;
    for (std::uint32_t a : cfg.adversaries) {
        if (a >= cfg.n_nodes - 1)
            throw std::invalid_argument("sim config: adversary " + std::to_string(a)
                                        + " is not a provider index");
        if (std::find(seen.begin(), seen.end(), a) != seen.end())
            throw std::invalid_argument("sim config: duplicate adversary "
                                        + std::to_string(a));
        seen.push_back(a);
    }
    if (seen.size() > f)
        throw std::invalid_argument("sim config: at most f = " + std::to_string(f)
                                    + " adversaries");
    if (cfg.mode == SimMode::Integration) {
        if (cfg.integration.txns_per_block < 1)
            throw std::invalid_argument("sim config: integration txns_per_block must be >= 1");
        if (cfg.integration.threads < 1)
            throw std::invalid_argument("sim config: integration threads must be >= 1");
        if (!(cfg.integration.drop_fraction > 0.0) || cfg.integration.drop_fraction > 1.0)
            throw std::invalid_argument("sim config: drop_fraction must be in (0, 1]");
    }
}

double produce_time(const SimConfig& cfg, std::uint64_t h)
{
    const std::uint64_t backlog = cfg.straggler.initial_lag_blocks;
    if (h <= backlog)
        return 0.0;
    return static_cast<double>(h - backlog) * cfg.block_period;
}

std::uint64_t head_height(const SimConfig& cfg, double t)
{
    if (t < 0.0)
        return cfg.straggler.initial_lag_blocks;
    return cfg.straggler.initial_lag_blocks
        + static_cast<std::uint64_t>(std::floor(t / cfg.block_period + kEps));
}

SimTrace simulate(const SimConfig& cfg)
{
    validate_sim_config(cfg);
    const std::uint64_t backlog = cfg.straggler.initial_lag_blocks;
    const std::uint32_t straggler_id = cfg.n_nodes - 1;
    const double guided_cost = cfg.alpha / cfg.straggler.speed_factor_guided;
    const double unguided_cost = cfg.alpha / cfg.straggler.speed_factor_unguided;

    // Completion time of block h on a healthy node; the backlog is done.
    auto exec_time = [&](std::uint64_t h) {
        return h <= backlog ? 0.0 : produce_time(cfg, h) + cfg.alpha;
    };
    // Newest height healthy nodes have finished by time t.
    auto healthy_done = [&](double t) {
        if (t + kEps < cfg.block_period + cfg.alpha)
            return backlog;
        return backlog
            + static_cast<std::uint64_t>(std::floor((t - cfg.alpha) / cfg.block_period + kEps));
    };

    std::optional<IntegrationState> integ;
    if (cfg.mode == SimMode::Integration) {
        auto spec = default_spec(cfg.integration.workload);
        spec.txns_per_block = cfg.integration.txns_per_block;
        spec.seed = cfg.integration.seed;
        integ.emplace();
        integ->blocks
            = generate(spec, static_cast<std::uint32_t>(head_height(cfg, cfg.horizon)));
        integ->engine.threads = cfg.integration.threads;
    }
    // Runs height h through the real engines and checks it against the
    // sequential oracle. Corrupted guided attempts are discarded (the model
    // says validation rejects them); everything else commits.
    auto run_real = [&](std::uint64_t h, bool guided, bool corrupted) {
        if (!integ)
            return;
        const Block& block = integ->blocks.at(h - 1);
        auto oracle = sequential_execute(block, integ->state, integ->engine.vm);
        BlockResult got;
        if (guided) {
            Hint hint = extract_hints(oracle, h, "provider");
            if (corrupted)
                hint = corrupt_hint(hint, HintCorruption::DropEdges,
                                    cfg.integration.drop_fraction, h);
            got = run_guided(block, integ->state, hint, integ->engine);
        } else {
            got = execute_block_optimistic(block, integ->state, integ->engine);
        }
        if (state_digest(got.final_state) != state_digest(oracle.final_state))
            throw std::logic_error("sync-sim integration: digest mismatch at height "
                                   + std::to_string(h));
        if (!corrupted)
            integ->state = std::move(oracle.final_state);
    };

    SimTrace trace;
    for (std::uint32_t node = 0; node < straggler_id; ++node)
        trace.points.push_back({0.0, node, backlog, "start"});
    trace.points.push_back({0.0, straggler_id, 0, "start"});

    for (std::uint64_t h = backlog + 1; exec_time(h) <= cfg.horizon + kEps; ++h)
        for (std::uint32_t node = 0; node < straggler_id; ++node)
            trace.points.push_back({exec_time(h), node, h, "exec"});

    std::vector<bool> untrusted(cfg.n_nodes - 1, false);
    auto is_adversary = [&](std::uint32_t p) {
        return std::find(cfg.adversaries.begin(), cfg.adversaries.end(), p)
            != cfg.adversaries.end();
    };
    // Fixed rotation by index; untrusted providers are skipped forever.
    auto pick_provider = [&]() -> std::optional<std::uint32_t> {
        for (std::uint32_t p = 0; p + 1 < cfg.n_nodes; ++p)
            if (!untrusted[p])
                return p;
        return std::nullopt;
    };

    double t = 0.0;
    std::uint64_t height = 0;
    while (true) {
        std::uint64_t avail = healthy_done(t);
        if (avail <= height) {
            double next = exec_time(height + 1);
            if (next > cfg.horizon + kEps)
                break;
            t = next;
            continue;
        }
        auto provider = pick_provider();
        if (!provider)
            break; // cannot happen under the f bound; defensive stop
        if (t + cfg.delta > cfg.horizon + kEps)
            break;
        t += cfg.delta; // hint batch for (height, avail] arrives
        if (!is_adversary(*provider)) {
            bool out_of_time = false;
            for (std::uint64_t h = height + 1; h <= avail; ++h) {
                if (t + guided_cost > cfg.horizon + kEps) {
                    out_of_time = true;
                    break;
                }
                t += guided_cost;
                run_real(h, /*guided=*/true, /*corrupted=*/false);
                height = h;
                trace.points.push_back({t, straggler_id, height, "exec"});
            }
            if (out_of_time)
                break;
        } else {
            // Corruption surfaces at the first block's validation: one wasted
            // guided attempt, then the provider is dropped and the block is
            // redone without a hint.
            std::uint64_t h = height + 1;
            if (t + guided_cost > cfg.horizon + kEps)
                break;
            t += guided_cost;
            run_real(h, /*guided=*/true, /*corrupted=*/true);
            untrusted[*provider] = true;
            trace.untrusted.push_back(*provider);
            trace.points.push_back(
                {t, straggler_id, height, "untrust:" + std::to_string(*provider)});
            if (t + unguided_cost > cfg.horizon + kEps)
                break;
            t += unguided_cost;
            run_real(h, /*guided=*/false, /*corrupted=*/false);
            height = h;
            trace.points.push_back({t, straggler_id, height, "exec"});
        }
    }

    std::stable_sort(trace.points.begin(), trace.points.end(),
                     [](const TracePoint& a, const TracePoint& b) {
                         if (a.time_s != b.time_s)
                             return a.time_s < b.time_s;
                         if (a.node_id != b.node_id)
                             return a.node_id < b.node_id;
                         return a.executed_height < b.executed_height;
                     });
    return trace;
}

std::vector<std::pair<double, std::uint64_t>> straggler_series(const SimConfig& cfg,
                                                               const SimTrace& trace)
{
    std::vector<std::pair<double, std::uint64_t>> series;
    for (const auto& p : trace.points)
        if (p.node_id == cfg.n_nodes - 1 && p.event == "exec")
            series.emplace_back(p.time_s, p.executed_height);
    return series;
}

std::string trace_to_csv(const SimTrace& trace)
{
    std::string out = "time_s,node_id,executed_height,event\n";
    char buf[96];
    for (const auto& p : trace.points) {
        std::snprintf(buf, sizeof buf, "%.6f,%u,%llu,", p.time_s, p.node_id,
                      static_cast<unsigned long long>(p.executed_height));
        out += buf;
        out += p.event;
        out += '\n';
    }
    return out;
}

void write_trace_csv(const std::string& path, const SimTrace& trace)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << trace_to_csv(trace);
    if (!out)
        throw std::runtime_error("write to " + path + " failed");
}

namespace {

using nlohmann::json;

[[noreturn]] void cfg_error(const std::string& what)
{
    throw std::runtime_error("sim config: " + what);
}

double cfg_number(const json& j, const char* field)
{
    if (!j.is_number())
        cfg_error(std::string(field) + " must be a number");
    return j.get<double>();
}

std::uint64_t cfg_u64(const json& j, const char* field)
{
    if (!j.is_number_unsigned())
        cfg_error(std::string(field) + " must be an unsigned integer");
    return j.get<std::uint64_t>();
}

} // namespace

std::string sim_config_to_json(const SimConfig& cfg)
{
    json j{{"n_nodes", cfg.n_nodes},
           {"block_period", cfg.block_period},
           {"alpha", cfg.alpha},
           {"delta", cfg.delta},
           {"straggler",
            {{"initial_lag_blocks", cfg.straggler.initial_lag_blocks},
             {"speed_factor_unguided", cfg.straggler.speed_factor_unguided},
             {"speed_factor_guided", cfg.straggler.speed_factor_guided}}},
           {"adversaries", cfg.adversaries},
           {"horizon", cfg.horizon},
           {"mode", to_string(cfg.mode)}};
    if (cfg.mode == SimMode::Integration)
        j["integration"] = {{"workload", to_string(cfg.integration.workload)},
                            {"txns_per_block", cfg.integration.txns_per_block},
                            {"seed", cfg.integration.seed},
                            {"threads", cfg.integration.threads},
                            {"drop_fraction", cfg.integration.drop_fraction}};
    return j.dump(2) + "\n";
}

SimConfig sim_config_from_json_text(const std::string& text)
{
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        cfg_error("not valid JSON");
    if (!j.is_object())
        cfg_error("expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (key != "n_nodes" && key != "block_period" && key != "alpha" && key != "delta"
            && key != "straggler" && key != "adversaries" && key != "horizon" && key != "mode"
            && key != "integration")
            cfg_error("unknown field \"" + key + "\"");

    SimConfig cfg;
    if (j.contains("n_nodes"))
        cfg.n_nodes = static_cast<std::uint32_t>(cfg_u64(j["n_nodes"], "n_nodes"));
    if (j.contains("block_period"))
        cfg.block_period = cfg_number(j["block_period"], "block_period");
    if (j.contains("alpha"))
        cfg.alpha = cfg_number(j["alpha"], "alpha");
    if (j.contains("delta"))
        cfg.delta = cfg_number(j["delta"], "delta");
    if (j.contains("horizon"))
        cfg.horizon = cfg_number(j["horizon"], "horizon");
    if (j.contains("straggler")) {
        const json& s = j["straggler"];
        if (!s.is_object())
            cfg_error("straggler must be an object");
        for (const auto& [key, value] : s.items())
            if (key != "initial_lag_blocks" && key != "speed_factor_unguided"
                && key != "speed_factor_guided")
                cfg_error("unknown straggler field \"" + key + "\"");
        if (s.contains("initial_lag_blocks"))
            cfg.straggler.initial_lag_blocks = cfg_u64(s["initial_lag_blocks"],
                                                       "initial_lag_blocks");
        if (s.contains("speed_factor_unguided"))
            cfg.straggler.speed_factor_unguided
                = cfg_number(s["speed_factor_unguided"], "speed_factor_unguided");
        if (s.contains("speed_factor_guided"))
            cfg.straggler.speed_factor_guided
                = cfg_number(s["speed_factor_guided"], "speed_factor_guided");
    }
    if (j.contains("adversaries")) {
        if (!j["adversaries"].is_array())
            cfg_error("adversaries must be an array");
        for (const auto& a : j["adversaries"])
            cfg.adversaries.push_back(
                static_cast<std::uint32_t>(cfg_u64(a, "adversaries")));
    }
    if (j.contains("mode")) {
        if (!j["mode"].is_string())
            cfg_error("mode must be a string");
        std::string mode = j["mode"].get<std::string>();
        if (mode == "analytic")
            cfg.mode = SimMode::Analytic;
        else if (mode == "integration")
            cfg.mode = SimMode::Integration;
        else
            cfg_error("unknown mode \"" + mode + "\"");
    }
    if (j.contains("integration")) {
        const json& p = j["integration"];
        if (!p.is_object())
            cfg_error("integration must be an object");
        for (const auto& [key, value] : p.items())
            if (key != "workload" && key != "txns_per_block" && key != "seed"
                && key != "threads" && key != "drop_fraction")
                cfg_error("unknown integration field \"" + key + "\"");
        if (p.contains("workload")) {
            if (!p["workload"].is_string())
                cfg_error("integration workload must be a string");
            try {
                cfg.integration.workload
                    = workload_kind_from_string(p["workload"].get<std::string>());
            } catch (const std::invalid_argument& e) {
                cfg_error(e.what());
            }
        }
        if (p.contains("txns_per_block"))
            cfg.integration.txns_per_block
                = static_cast<std::uint32_t>(cfg_u64(p["txns_per_block"], "txns_per_block"));
        if (p.contains("seed"))
            cfg.integration.seed = cfg_u64(p["seed"], "seed");
        if (p.contains("threads"))
            cfg.integration.threads
                = static_cast<unsigned>(cfg_u64(p["threads"], "threads"));
        if (p.contains("drop_fraction"))
            cfg.integration.drop_fraction = cfg_number(p["drop_fraction"], "drop_fraction");
    }

    try {
        validate_sim_config(cfg);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
    }
    return cfg;
}

SimConfig read_sim_config_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return sim_config_from_json_text(buf.str());
}

} // namespace chiron
