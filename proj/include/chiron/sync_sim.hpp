#pragma once

// Discrete-event simulation of straggler catch-up: healthy nodes execute at
// the consensus rate and serve hints; the straggler requests hints, executes
// guided, and converges toward the alpha + delta lag floor. Providers that
// serve corrupted hints are detected at validation time, marked untrusted
// and never queried again.

#include "chiron/workload.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace chiron {

// Analytic mode prices executions from the config alone. Integration mode
// additionally runs every straggler block through the real engines (guided
// with hints extracted from a healthy execution, corrupted when the provider
// is adversarial) and checks the final state against the sequential oracle;
// timing still comes from the config.
enum class SimMode : std::uint8_t { Analytic, Integration };

std::string to_string(SimMode mode);

struct StragglerProfile {
    std::uint64_t initial_lag_blocks = 10;
    double speed_factor_unguided = 1.0;
    double speed_factor_guided = 4.0;

    bool operator==(const StragglerProfile&) const = default;
};

struct IntegrationParams {
    WorkloadKind workload = WorkloadKind::DexBursty;
    std::uint32_t txns_per_block = 40;
    std::uint64_t seed = 1;
    unsigned threads = 4;
    double drop_fraction = 0.5; // hint corruption applied by adversaries

    bool operator==(const IntegrationParams&) const = default;
};

struct SimConfig {
    std::uint32_t n_nodes = 4; // 3f+1; nodes 0..n-2 are providers, n-1 straggles
    double block_period = 0.1; // seconds between consensus outputs
    double alpha = 0.2;        // healthy per-block execution delay
    double delta = 0.05;       // hint transmission delay
    StragglerProfile straggler;
    std::vector<std::uint32_t> adversaries; // providers serving corrupted hints
    double horizon = 30.0;                  // simulated seconds
    SimMode mode = SimMode::Analytic;
    IntegrationParams integration;

    bool operator==(const SimConfig&) const = default;
};

// Throws std::invalid_argument: n_nodes must be 3f+1 with f >= 1, delays and
// factors positive, adversaries must be at most f distinct providers.
void validate_sim_config(const SimConfig& cfg);

struct TracePoint {
    double time_s = 0.0;
    std::uint32_t node_id = 0;
    std::uint64_t executed_height = 0;
    std::string event; // "start", "exec" or "untrust:<provider>"

    bool operator==(const TracePoint&) const = default;
};

struct SimTrace {
    std::vector<TracePoint> points;       // time-ordered
    std::vector<std::uint32_t> untrusted; // providers, in detection order

    bool operator==(const SimTrace&) const = default;
};

// Single-threaded event loop; deterministic in the config. In integration
// mode a digest mismatch against the sequential oracle throws
// std::logic_error (it indicates an engine bug, not a bad config).
SimTrace simulate(const SimConfig& cfg);

// Consensus output time of block h; the initial backlog is already produced
// at time 0.
double produce_time(const SimConfig& cfg, std::uint64_t h);

// Newest produced block at time t.
std::uint64_t head_height(const SimConfig& cfg, double t);

// The straggler's execution completions as (time, height), ascending.
std::vector<std::pair<double, std::uint64_t>> straggler_series(const SimConfig& cfg,
                                                               const SimTrace& trace);

// CSV with header time_s,node_id,executed_height,event; fixed-point times so
// identical traces serialize byte-identically.
std::string trace_to_csv(const SimTrace& trace);
void write_trace_csv(const std::string& path, const SimTrace& trace);

std::string sim_config_to_json(const SimConfig& cfg);

// Strict inverse; throws std::runtime_error naming the offending field.
SimConfig sim_config_from_json_text(const std::string& text);
SimConfig read_sim_config_file(const std::string& path);

} // namespace chiron
