#include "chiron/workload.hpp"

#include "chiron/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace chiron {

namespace {

// Walker alias sampler over table rows; always consumes exactly two draws so
// generated streams keep their shape regardless of outcomes.
class AliasTable {
public:
    explicit AliasTable(const std::vector<double>& weights)
        : accept_(weights.size(), 1.0)
        , alias_(weights.size(), 0)
    {
        const std::size_t n = weights.size();
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i)
            scaled[i] = weights[i] * static_cast<double>(n) / total;
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i)
            (scaled[i] < 1.0 ? small : large).push_back(i);
        while (!small.empty() && !large.empty()) {
            std::size_t s = small.back();
            small.pop_back();
            std::size_t l = large.back();
            large.pop_back();
            accept_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        // Leftover columns keep accept = 1 (rounding residue only).
    }

    std::size_t sample(DetRng& rng) const
    {
        std::size_t col = static_cast<std::size_t>(rng.below(accept_.size()));
        return rng.uniform() < accept_[col] ? col : alias_[col];
    }

private:
    std::vector<double> accept_;
    std::vector<std::size_t> alias_;
};

// Draws resource identities for one role. Row pools are sized so a row's
// resources average `accesses` touches over the window; the tail (accesses
// == 1) is oversized 32x so i.i.d. draws rarely collide and its resources
// stay true singletons, and a row too hot for even one resource pins a
// single identity that soaks up the whole share.
class RoleSampler {
public:
    RoleSampler(const std::string& role, const FrequencyTable& table, double window_slots)
        : prefix_(role + ":")
        , rows_([&] {
            std::vector<double> w(table.rows.size());
            for (std::size_t i = 0; i < w.size(); ++i)
                w[i] = table.rows[i].share;
            return AliasTable(w);
        }())
    {
        pool_.reserve(table.rows.size());
        for (const auto& row : table.rows) {
            double slots = row.share * window_slots;
            double count = row.accesses == 1
                ? slots * 32.0
                : slots / static_cast<double>(row.accesses);
            pool_.push_back(std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(count))));
        }
    }

    ResourceKey sample(DetRng& rng) const
    {
        std::size_t row = rows_.sample(rng);
        std::uint64_t idx = rng.below(pool_[row]);
        return prefix_ + std::to_string(row) + ":" + std::to_string(idx);
    }

private:
    std::string prefix_;
    AliasTable rows_;
    std::vector<std::uint64_t> pool_;
};

// Geometric with the given mean, clamped to [1, cap]. Consumes one draw even
// when the result is forced.
std::uint32_t geometric_len(DetRng& rng, double mean, std::uint32_t cap)
{
    double u = rng.uniform();
    if (mean <= 1.0 || cap <= 1)
        return 1;
    double p = 1.0 / mean;
    double k = 1.0 + std::floor(std::log1p(-u) / std::log1p(-p));
    if (!(k >= 1.0))
        k = 1.0;
    return std::min<std::uint32_t>(static_cast<std::uint32_t>(k), cap);
}

const std::map<WorkloadKind, std::vector<std::string>>& roles_by_kind()
{
    static const std::map<WorkloadKind, std::vector<std::string>> roles{
        {WorkloadKind::P2P, {"receiver", "sender"}},
        {WorkloadKind::Nft, {"contract", "minter"}},
        {WorkloadKind::DexAvg, {"pair", "trader"}},
        {WorkloadKind::DexBursty, {"pair", "trader"}},
        {WorkloadKind::Mixed, {"resource"}},
    };
    return roles;
}

FrequencyTable p2p_sender_table()
{
    return {{{1, 0.40}, {3, 0.12}, {10, 0.18}, {50, 0.22}, {150, 0.08}}};
}

} // namespace

std::string to_string(WorkloadKind kind)
{
    switch (kind) {
    case WorkloadKind::P2P: return "p2p";
    case WorkloadKind::Nft: return "nft";
    case WorkloadKind::DexAvg: return "dex_avg";
    case WorkloadKind::DexBursty: return "dex_bursty";
    case WorkloadKind::Mixed: return "mixed";
    }
    throw std::invalid_argument("unknown workload kind");
}

WorkloadKind workload_kind_from_string(const std::string& name)
{
    for (auto kind : {WorkloadKind::P2P, WorkloadKind::Nft, WorkloadKind::DexAvg,
                      WorkloadKind::DexBursty, WorkloadKind::Mixed})
        if (to_string(kind) == name)
            return kind;
    throw std::invalid_argument("unknown workload kind \"" + name + "\"");
}

void validate_table(const FrequencyTable& table, const std::string& name)
{
    if (table.rows.empty())
        throw std::invalid_argument("table " + name + ": no rows");
    double sum = 0.0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.accesses < 1)
            throw std::invalid_argument("table " + name + " row " + std::to_string(i)
                                        + ": accesses must be >= 1");
        if (!(row.share > 0.0) || row.share > 1.0)
            throw std::invalid_argument("table " + name + " row " + std::to_string(i)
                                        + ": share must be in (0, 1]");
        if (i > 0 && table.rows[i - 1].accesses >= row.accesses)
            throw std::invalid_argument("table " + name + " row " + std::to_string(i)
                                        + ": buckets must be strictly increasing");
        sum += row.share;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("table " + name + ": shares sum to " + std::to_string(sum)
                                    + ", expected 1");
}

void validate_spec(const WorkloadSpec& spec)
{
    if (spec.txns_per_block < 1)
        throw std::invalid_argument("spec: txns_per_block must be >= 1");
    if (spec.invalid_rate < 0.0 || spec.invalid_rate > 1.0)
        throw std::invalid_argument("spec: invalid_rate must be in [0, 1]");
    const auto& roles = roles_by_kind().at(spec.kind);
    for (const auto& role : roles) {
        auto it = spec.tables.find(role);
        if (it == spec.tables.end())
            throw std::invalid_argument("spec: missing table for role \"" + role + "\"");
        validate_table(it->second, role);
    }
    for (const auto& [role, table] : spec.tables)
        if (std::find(roles.begin(), roles.end(), role) == roles.end())
            throw std::invalid_argument("spec: unexpected table \"" + role + "\" for kind "
                                        + to_string(spec.kind));
    if (spec.kind == WorkloadKind::Mixed) {
        const auto& m = spec.mixed;
        if (m.write_set_mean < 1.0)
            throw std::invalid_argument("spec: write_set_mean must be >= 1");
        if (m.write_set_max < 1)
            throw std::invalid_argument("spec: write_set_max must be >= 1");
        if (m.gas_min < 1 || m.gas_min > m.gas_max)
            throw std::invalid_argument("spec: need 1 <= gas_min <= gas_max");
        if (m.read_prob < 0.0 || m.read_prob > 1.0)
            throw std::invalid_argument("spec: read_prob must be in [0, 1]");
        if (m.target_critical_path < 0.0 || m.target_critical_path >= 1.0)
            throw std::invalid_argument("spec: target_critical_path must be in [0, 1)");
    }
}

WorkloadSpec default_spec(WorkloadKind kind)
{
    // One resource soaking up a whole row: more accesses than the window has
    // transaction slots collapses the pool to a single identity.
    constexpr std::uint64_t kPinned = 1'000'000'000;
    WorkloadSpec spec;
    spec.kind = kind;
    switch (kind) {
    case WorkloadKind::P2P:
        spec.tables["sender"] = p2p_sender_table();
        spec.tables["receiver"]
            = {{{1, 0.40}, {3, 0.10}, {10, 0.15}, {50, 0.165}, {200, 0.08}, {kPinned, 0.105}}};
        break;
    case WorkloadKind::Nft:
        spec.tables["contract"]
            = {{{1, 0.18}, {5, 0.10}, {30, 0.15}, {200, 0.20}, {kPinned / 2, 0.17}, {kPinned, 0.20}}};
        spec.tables["minter"] = {{{1, 0.55}, {2, 0.12}, {5, 0.13}, {20, 0.12}, {100, 0.08}}};
        break;
    case WorkloadKind::DexAvg:
        spec.tables["pair"] = {{{1, 0.10}, {4, 0.12}, {20, 0.18}, {100, 0.30}, {kPinned, 0.30}}};
        spec.tables["trader"] = p2p_sender_table();
        break;
    case WorkloadKind::DexBursty:
        spec.tables["pair"] = {{{1, 0.08}, {4, 0.10}, {20, 0.12}, {100, 0.25}, {kPinned, 0.45}}};
        spec.tables["trader"] = p2p_sender_table();
        break;
    case WorkloadKind::Mixed:
        spec.tables["resource"]
            = {{{1, 0.30}, {4, 0.15}, {12, 0.18}, {60, 0.15}, {300, 0.14}, {kPinned, 0.08}}};
        break;
    }
    return spec;
}

std::vector<Block> generate(const WorkloadSpec& spec, std::uint32_t n_blocks)
{
    validate_spec(spec);
    // The run is the calibration window (capped so "accesses per window"
    // keeps meaning on long runs).
    const double window_blocks = static_cast<double>(std::min<std::uint32_t>(n_blocks, 1000));
    const double txn_slots = window_blocks * static_cast<double>(spec.txns_per_block);

    std::map<std::string, RoleSampler> samplers;
    for (const auto& role : roles_by_kind().at(spec.kind)) {
        double per_txn = (spec.kind == WorkloadKind::Mixed) ? spec.mixed.write_set_mean : 1.0;
        samplers.emplace(role, RoleSampler(role, spec.tables.at(role), txn_slots * per_txn));
    }

    DetRng rng = DetRng::substream(spec.seed, "workload", static_cast<std::uint64_t>(spec.kind));
    std::vector<Block> blocks;
    blocks.reserve(n_blocks);
    for (std::uint32_t h = 0; h < n_blocks; ++h) {
        Block block;
        block.height = h;
        block.txns.reserve(spec.txns_per_block);
        for (std::uint32_t i = 0; i < spec.txns_per_block; ++i) {
            std::vector<TxnStep> steps;
            std::uint64_t declared = 0;
            switch (spec.kind) {
            case WorkloadKind::P2P: {
                auto s = samplers.at("sender").sample(rng);
                auto r = samplers.at("receiver").sample(rng);
                steps = {TxnStep::read(s), TxnStep::read(r), TxnStep::write(s), TxnStep::write(r)};
                break;
            }
            case WorkloadKind::Nft: {
                auto c = samplers.at("contract").sample(rng);
                auto m = samplers.at("minter").sample(rng);
                steps = {TxnStep::read(c), TxnStep::write(c), TxnStep::write(m)};
                break;
            }
            case WorkloadKind::DexAvg:
            case WorkloadKind::DexBursty: {
                auto p = samplers.at("pair").sample(rng);
                auto t = samplers.at("trader").sample(rng);
                steps = {TxnStep::read(p), TxnStep::write(p), TxnStep::write(t)};
                break;
            }
            case WorkloadKind::Mixed: {
                std::uint32_t k
                    = geometric_len(rng, spec.mixed.write_set_mean, spec.mixed.write_set_max);
                for (std::uint32_t j = 0; j < k; ++j) {
                    auto x = samplers.at("resource").sample(rng);
                    if (rng.chance(spec.mixed.read_prob))
                        steps.push_back(TxnStep::read(x));
                    steps.push_back(TxnStep::write(std::move(x)));
                }
                declared = rng.log_uniform(spec.mixed.gas_min, spec.mixed.gas_max);
                steps.push_back(TxnStep::compute(declared));
                break;
            }
            }
            std::vector<std::uint8_t> payload(16);
            for (int word = 0; word < 2; ++word) {
                std::uint64_t v = rng.next();
                for (int b = 0; b < 8; ++b)
                    payload[static_cast<std::size_t>(word * 8 + b)]
                        = static_cast<std::uint8_t>(v >> (8 * b));
            }
            bool valid = !rng.chance(spec.invalid_rate);
            Transaction txn;
            txn.index = i;
            txn.steps = std::move(steps);
            txn.signature = SignatureStamp::over(payload, valid);
            txn.payload = std::move(payload);
            txn.declared_gas = declared;
            block.txns.push_back(std::move(txn));
        }
        check_block(block);
        blocks.push_back(std::move(block));
    }
    return blocks;
}

std::vector<DepEdge> static_edges(const Block& block)
{
    std::unordered_map<ResourceKey, TxnIndex> last_writer;
    std::set<DepEdge> edges;
    for (const auto& txn : block.txns) {
        if (!txn.signature.valid)
            continue;
        std::unordered_set<ResourceKey> own;
        for (const auto& step : txn.steps) {
            if (step.kind == StepKind::Read) {
                if (own.count(step.key))
                    continue;
                auto it = last_writer.find(step.key);
                if (it != last_writer.end())
                    edges.emplace(it->second, txn.index);
            } else if (step.kind == StepKind::Write) {
                own.insert(step.key);
            }
        }
        for (const auto& key : own)
            last_writer[key] = txn.index;
    }
    return {edges.begin(), edges.end()};
}

std::vector<std::uint64_t> static_gas(const Block& block, const VmConfig& vm)
{
    std::vector<std::uint64_t> gas(block.txns.size(), 0);
    for (std::size_t i = 0; i < block.txns.size(); ++i)
        if (block.txns[i].signature.valid)
            gas[i] = vm.prologue_gas + block.txns[i].declared_gas + vm.epilogue_gas;
    return gas;
}

double critical_path_fraction(const Block& block, const VmConfig& vm)
{
    auto gas = static_gas(block, vm);
    std::uint64_t total = std::accumulate(gas.begin(), gas.end(), std::uint64_t{0});
    if (total == 0)
        return 0.0;
    auto costs = path_costs(gas.size(), static_edges(block), gas);
    std::uint64_t longest = *std::max_element(costs.begin(), costs.end());
    return static_cast<double>(longest) / static_cast<double>(total);
}

WorkloadStats measure_stats(const std::vector<Block>& blocks, const std::string& role)
{
    WorkloadStats stats;
    std::size_t total_txns = 0;
    std::unordered_map<ResourceKey, std::uint64_t> touches;
    double write_len_sum = 0.0;
    double cpf_sum = 0.0;
    for (const auto& block : blocks) {
        cpf_sum += critical_path_fraction(block);
        for (const auto& txn : block.txns) {
            ++total_txns;
            std::set<ResourceKey> matching;
            std::set<ResourceKey> written;
            for (const auto& step : txn.steps) {
                if (step.kind == StepKind::Compute)
                    continue;
                if (step.kind == StepKind::Write)
                    written.insert(step.key);
                if (role.empty() || step.key.starts_with(role))
                    matching.insert(step.key);
            }
            write_len_sum += static_cast<double>(written.size());
            for (const auto& key : matching)
                ++touches[key];
        }
    }
    if (!blocks.empty())
        stats.critical_path_fraction = cpf_sum / static_cast<double>(blocks.size());
    if (total_txns == 0 || touches.empty())
        return stats;

    std::uint64_t top1 = 0, top2 = 0, singletons = 0;
    for (const auto& [key, count] : touches) {
        if (count == 1)
            ++singletons;
        if (count > top1) {
            top2 = top1;
            top1 = count;
        } else if (count > top2) {
            top2 = count;
        }
    }
    const double total = static_cast<double>(total_txns);
    stats.hottest_share = static_cast<double>(top1) / total;
    stats.top2_share = static_cast<double>(top1 + top2) / total;
    stats.singleton_share = static_cast<double>(singletons) / total;
    stats.mean_write_set_len = write_len_sum / total;
    return stats;
}

double topk_share(const std::vector<Block>& blocks, const std::string& role, std::size_t k)
{
    std::unordered_map<ResourceKey, std::uint64_t> touches;
    std::size_t total_txns = 0;
    for (const auto& block : blocks) {
        for (const auto& txn : block.txns) {
            ++total_txns;
            std::set<ResourceKey> matching;
            for (const auto& step : txn.steps)
                if (step.kind != StepKind::Compute
                    && (role.empty() || step.key.starts_with(role)))
                    matching.insert(step.key);
            for (const auto& key : matching)
                ++touches[key];
        }
    }
    if (total_txns == 0)
        return 0.0;
    std::vector<std::uint64_t> counts;
    counts.reserve(touches.size());
    for (const auto& [key, count] : touches)
        counts.push_back(count);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts.size() && i < k; ++i)
        sum += counts[i];
    return static_cast<double>(sum) / static_cast<double>(total_txns);
}

WorkloadSpec calibrate_mixed(const WorkloadSpec& spec)
{
    if (spec.kind != WorkloadKind::Mixed)
        throw std::invalid_argument("calibrate_mixed: spec kind must be mixed");
    validate_spec(spec);
    const double target = spec.mixed.target_critical_path;
    WorkloadSpec tuned = spec;
    double measured = 0.0;
    for (int round = 0; round < 50; ++round) {
        auto blocks = generate(tuned, 8);
        double sum = 0.0;
        for (const auto& block : blocks)
            sum += critical_path_fraction(block);
        measured = sum / static_cast<double>(blocks.size());
        if (std::abs(measured - target) <= 0.05)
            return tuned;

        // The chain through the hottest resource dominates the critical
        // path, and its length scales with the row's share.
        auto& rows = tuned.tables.at("resource").rows;
        if (rows.size() < 2)
            continue; // nothing to shift share between; report non-convergence
        double ratio = measured > 1e-6 ? target / measured : 2.0;
        ratio = std::clamp(ratio, 0.5, 2.0);
        double hot_old = rows.back().share;
        double hot_new = std::clamp(hot_old * ratio, 0.005, 0.85);
        for (std::size_t i = 0; i + 1 < rows.size(); ++i)
            rows[i].share *= (1.0 - hot_new) / (1.0 - hot_old);
        rows.back().share = hot_new;
    }
    throw std::runtime_error("calibrate_mixed: no convergence after 50 rounds; "
                             "last critical-path fraction "
                             + std::to_string(measured));
}

} // namespace chiron
