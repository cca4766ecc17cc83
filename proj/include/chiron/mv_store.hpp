#pragma once

#include "chiron/types.hpp"

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace chiron {

// Multi-version data structure shared by both parallel engines. Per key it
// keeps an ordered map txn_index -> (incarnation, value, estimate flag) on
// top of a read-only base storage. Single-key operations are linearizable;
// there is no cross-key atomicity — validation provides consistency.
//
// Absent keys read as value 0 with origin Storage (keys self-initialize).
class MultiVersionStore {
public:
    MultiVersionStore(State base, std::size_t txn_count);

    struct ReadResult {
        Value value = 0;
        ReadOrigin origin;
    };

    // Value written by the highest txn_index < reader, else base storage.
    // An estimate-flagged entry yields origin Estimate(blocking index) and no
    // usable value.
    ReadResult read(const ResourceKey& key, TxnIndex reader) const;

    // Inserts or replaces the entry at (key, version.txn_index) and clears
    // the estimate flag. Rejects incarnation regressions.
    void write(const ResourceKey& key, Version version, Value value);

    // Flags every entry the txn last wrote so dependent readers block instead
    // of observing stale data. No-op when the txn has no recorded writes.
    void mark_estimates(TxnIndex txn_index);

    // True iff re-performing each read yields the identical origin and none
    // is an estimate.
    bool validate_read_set(TxnIndex txn_index, std::span<const ReadRecord> read_set) const;

    // Highest-index entry per key folded over base storage. Requires
    // quiescence; throws std::logic_error if an estimate flag is still set.
    State finalize() const;

    std::size_t txn_count() const { return writes_by_txn_.size(); }

private:
    struct Entry {
        std::uint32_t incarnation = 0;
        Value value = 0;
        bool estimate = false;
    };

    struct KeySlot {
        mutable std::mutex mutex;
        std::map<TxnIndex, Entry> entries;
    };

    struct TxnWrites {
        std::mutex mutex;
        std::vector<ResourceKey> keys;
    };

    KeySlot* find_slot(const ResourceKey& key) const;
    KeySlot& slot_for(const ResourceKey& key);
    Value base_value(const ResourceKey& key) const;

    State base_;
    mutable std::shared_mutex map_mutex_;
    std::unordered_map<ResourceKey, std::unique_ptr<KeySlot>> slots_;
    std::vector<std::unique_ptr<TxnWrites>> writes_by_txn_;
};

} // namespace chiron
