#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace chiron {

using Value = std::uint64_t;
using TxnIndex = std::uint32_t;

// Resources are identified by exact string equality ("acct:1234", "pair:USDC-ETH").
using ResourceKey = std::string;

// 64-bit FNV-1a, the one hash used throughout: value mixing, payload tags,
// state digests and simulated signature cost.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data, std::uint64_t h = kFnvOffset)
{
    for (std::uint8_t b : data) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t v, std::uint64_t h)
{
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<std::uint8_t>(v >> (8 * i));
        h *= kFnvPrime;
    }
    return h;
}

enum class StepKind : std::uint8_t { Read, Write, Compute };

// One interpreter step. Read/Write carry a key and no gas; Compute carries
// gas >= 1 and no key.
struct TxnStep {
    StepKind kind = StepKind::Compute;
    ResourceKey key;
    std::uint64_t gas = 0;

    static TxnStep read(ResourceKey k) { return {StepKind::Read, std::move(k), 0}; }
    static TxnStep write(ResourceKey k) { return {StepKind::Write, std::move(k), 0}; }
    static TxnStep compute(std::uint64_t gas) { return {StepKind::Compute, {}, gas}; }

    bool operator==(const TxnStep&) const = default;
};

// Simulated signature: tag derived from the payload, validity planted by the
// generator. verify_signature returns `valid` exactly; the cost knob only
// burns CPU.
struct SignatureStamp {
    std::uint64_t tag = kFnvOffset;
    bool valid = true;

    static SignatureStamp over(std::span<const std::uint8_t> payload, bool valid = true)
    {
        return {fnv1a64(payload), valid};
    }

    bool operator==(const SignatureStamp&) const = default;
};

struct Transaction {
    TxnIndex index = 0;
    std::vector<TxnStep> steps;
    std::vector<std::uint8_t> payload;
    SignatureStamp signature;
    std::uint64_t declared_gas = 0; // sum of Compute step gas

    bool operator==(const Transaction&) const = default;
};

struct Block {
    std::uint64_t height = 0;
    std::vector<Transaction> txns; // indices dense 0..n-1

    bool operator==(const Block&) const = default;
};

enum class TxnStatus : std::uint8_t { Success, InvalidSignature, InvalidTxn };

const char* to_string(TxnStatus s);

struct Version {
    TxnIndex txn_index = 0;
    std::uint32_t incarnation = 0;

    friend auto operator<=>(const Version&, const Version&) = default;
};

// Provenance of a read: committed base storage, a versioned write by a lower
// transaction, or a flagged estimate that blocks the reader.
struct ReadOrigin {
    enum class Kind : std::uint8_t { Storage, Versioned, Estimate };

    Kind kind = Kind::Storage;
    Version version{}; // Versioned only
    TxnIndex blocking = 0; // Estimate only

    static ReadOrigin storage() { return {}; }
    static ReadOrigin versioned(Version v) { return {Kind::Versioned, v, 0}; }
    static ReadOrigin estimate(TxnIndex blocking) { return {Kind::Estimate, {}, blocking}; }

    bool operator==(const ReadOrigin&) const = default;
};

struct ReadRecord {
    ResourceKey key;
    ReadOrigin origin;

    bool operator==(const ReadRecord&) const = default;
};

struct WriteRecord {
    ResourceKey key;
    Value value = 0;

    bool operator==(const WriteRecord&) const = default;
};

struct ExecutionOutput {
    TxnIndex txn_index = 0;
    std::uint32_t incarnation = 0;
    std::vector<ReadRecord> read_set;
    std::vector<WriteRecord> write_set;
    std::uint64_t gas_used = 0;
    TxnStatus status = TxnStatus::Success;
};

struct ExecMetrics {
    std::uint64_t executions = 0; // completed VM runs, incl. re-executions
    std::uint64_t aborts = 0;
    std::uint64_t validations = 0;
    std::uint64_t sig_verifications = 0;
    // Signature verifications already done when the last execution finished;
    // shows how much signature work rode on otherwise idle workers.
    std::uint64_t sigs_done_at_exec_end = 0;
    // Times a guided worker took a plain-queue txn while the priority queue
    // held one. Structurally impossible; a nonzero value is a scheduler bug.
    std::uint64_t priority_violations = 0;
    bool guided_fallback = false;
    double wall_seconds = 0.0;
};

using State = std::map<ResourceKey, Value>;

struct BlockResult {
    State final_state;
    std::vector<ExecutionOutput> outputs; // one per txn, by index
    ExecMetrics metrics;
    bool validated = false;
};

// Deterministic value propagation: one FNV-1a pass over the little-endian
// concatenation of the values read so far, then the transaction index.
// Mis-ordered scheduling therefore changes the final state.
std::uint64_t mix_value(std::span<const Value> inputs, TxnIndex txn_index);

// Burns cost_rounds chained hash rounds over the payload (stand-in for
// ed25519 cost), then reports the planted validity bit.
bool verify_signature(const Transaction& txn, std::uint64_t cost_rounds);

// Order-independent 64-bit digest of a final state (std::map iterates sorted).
std::uint64_t state_digest(const State& state);

// Throws std::invalid_argument if indices are not dense 0..n-1 or a step or
// declared_gas violates its invariant.
void check_block(const Block& block);

} // namespace chiron
