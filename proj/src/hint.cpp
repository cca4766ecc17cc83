#include "chiron/hint.hpp"

#include "chiron/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <stdexcept>

namespace chiron {

namespace {

void sort_unique(std::vector<DepEdge>& edges)
{
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

} // namespace

DepGraph build_depgraph(std::size_t n, std::vector<DepEdge> edges)
{
    sort_unique(edges);
    DepGraph g;
    g.n = n;
    g.parents.resize(n);
    g.children.resize(n);
    for (const auto& [p, c] : edges) {
        if (p >= c || c >= n)
            throw std::invalid_argument("depgraph: edge must satisfy parent < child < n");
        g.parents[c].push_back(p);
        g.children[p].push_back(c);
    }
    g.edges = std::move(edges);
    return g;
}

std::vector<std::uint64_t> path_costs(std::size_t n, const std::vector<DepEdge>& edges,
                                      const std::vector<std::uint64_t>& gas)
{
    std::vector<std::uint64_t> cost(gas.begin(), gas.end());
    cost.resize(n);
    // edges go low -> high, so a single index-order pass is topological
    std::vector<std::vector<TxnIndex>> parents(n);
    for (const auto& [p, c] : edges)
        parents[c].push_back(p);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t best = 0;
        for (TxnIndex p : parents[i])
            best = std::max(best, cost[p]);
        cost[i] += best;
    }
    return cost;
}

Hint extract_hints(const BlockResult& result, std::uint64_t height, std::string provider)
{
    Hint hint;
    hint.height = height;
    hint.provider = std::move(provider);
    std::set<DepEdge> edges;
    for (const ExecutionOutput& out : result.outputs) {
        hint.gas.push_back(out.gas_used);
        for (const ReadRecord& r : out.read_set)
            if (r.origin.kind == ReadOrigin::Kind::Versioned)
                edges.emplace(r.origin.version.txn_index, out.txn_index);
    }
    hint.edges.assign(edges.begin(), edges.end());
    hint.path_cost = path_costs(hint.gas.size(), hint.edges, hint.gas);
    return hint;
}

bool verify_hint_shape(const Hint& hint, const Block& block)
{
    std::size_t n = block.txns.size();
    if (hint.gas.size() != n || hint.path_cost.size() != n)
        return false;
    for (const auto& [p, c] : hint.edges)
        if (p >= c || c >= n)
            return false;
    return hint.path_cost == path_costs(n, hint.edges, hint.gas);
}

std::string serialize(const Hint& hint)
{
    nlohmann::json j;
    j["h"] = hint.height;
    j["n"] = hint.gas.size();
    auto edges = nlohmann::json::array();
    for (const auto& [p, c] : hint.edges)
        edges.push_back({p, c});
    j["edges"] = std::move(edges);
    j["gas"] = hint.gas;
    j["path"] = hint.path_cost;
    j["provider"] = hint.provider;
    return j.dump(); // nlohmann objects iterate key-sorted: canonical form
}

namespace {

[[noreturn]] void bad_field(const char* field, const char* what)
{
    throw std::runtime_error(std::string("hint: field '") + field + "' " + what);
}

std::uint64_t get_u64(const nlohmann::json& j, const char* field)
{
    if (!j.is_number_unsigned())
        bad_field(field, "must be an unsigned integer");
    return j.get<std::uint64_t>();
}

std::vector<std::uint64_t> get_u64_list(const nlohmann::json& j, const char* field)
{
    if (!j.is_array())
        bad_field(field, "must be an array");
    std::vector<std::uint64_t> out;
    out.reserve(j.size());
    for (const auto& v : j)
        out.push_back(get_u64(v, field));
    return out;
}

} // namespace

Hint parse_hint(std::string_view bytes)
{
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded())
        throw std::runtime_error("hint: not valid JSON");
    if (!j.is_object())
        throw std::runtime_error("hint: top level must be an object");

    static constexpr const char* known[] = {"edges", "gas", "h", "n", "path", "provider"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw std::runtime_error("hint: unknown field '" + key + "'");
    }
    for (const char* field : known)
        if (!j.contains(field))
            bad_field(field, "is missing");

    Hint hint;
    hint.height = get_u64(j["h"], "h");
    std::uint64_t n = get_u64(j["n"], "n");
    hint.gas = get_u64_list(j["gas"], "gas");
    hint.path_cost = get_u64_list(j["path"], "path");
    if (!j["provider"].is_string())
        bad_field("provider", "must be a string");
    hint.provider = j["provider"].get<std::string>();
    if (hint.gas.size() != n)
        bad_field("n", "does not match the gas list length");
    if (hint.path_cost.size() != n)
        bad_field("path", "length does not match n");

    const auto& edges = j["edges"];
    if (!edges.is_array())
        bad_field("edges", "must be an array");
    for (const auto& e : edges) {
        if (!e.is_array() || e.size() != 2)
            bad_field("edges", "entries must be [parent, child] pairs");
        std::uint64_t p = get_u64(e[0], "edges");
        std::uint64_t c = get_u64(e[1], "edges");
        if (p >= c || c >= n)
            bad_field("edges", "must satisfy parent < child < n");
        hint.edges.emplace_back(static_cast<TxnIndex>(p), static_cast<TxnIndex>(c));
    }
    if (!std::is_sorted(hint.edges.begin(), hint.edges.end())
        || std::adjacent_find(hint.edges.begin(), hint.edges.end()) != hint.edges.end())
        bad_field("edges", "must be sorted and unique");
    return hint;
}

Hint corrupt_hint(const Hint& hint, HintCorruption mode, double fraction, std::uint64_t seed)
{
    DetRng rng = DetRng::substream(seed, "corrupt", static_cast<std::uint64_t>(mode));
    Hint out = hint;
    switch (mode) {
    case HintCorruption::DropEdges: {
        std::vector<DepEdge> kept;
        for (const DepEdge& e : out.edges)
            if (!rng.chance(fraction))
                kept.push_back(e);
        // dropping must drop something to be a fault at all
        if (kept.size() == out.edges.size() && !out.edges.empty())
            kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(rng.below(kept.size())));
        out.edges = std::move(kept);
        break;
    }
    case HintCorruption::AddEdges: {
        if (out.n() < 2)
            break;
        std::size_t want = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(out.edges.size()) * fraction));
        for (std::size_t tries = 0; tries < want * 20 && want > 0; ++tries) {
            auto c = static_cast<TxnIndex>(1 + rng.below(out.n() - 1));
            auto p = static_cast<TxnIndex>(rng.below(c));
            DepEdge e{p, c};
            auto it = std::lower_bound(out.edges.begin(), out.edges.end(), e);
            if (it != out.edges.end() && *it == e)
                continue;
            out.edges.insert(it, e);
            --want;
        }
        break;
    }
    case HintCorruption::PerturbGas: {
        for (auto& g : out.gas)
            if (rng.chance(fraction))
                g = g / 2 + rng.below(g + 1);
        break;
    }
    }
    out.path_cost = path_costs(out.n(), out.edges, out.gas);
    return out;
}

} // namespace chiron
