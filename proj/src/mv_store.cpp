#include "chiron/mv_store.hpp"

#include <algorithm>
#include <stdexcept>

namespace chiron {

MultiVersionStore::MultiVersionStore(State base, std::size_t txn_count)
    : base_(std::move(base))
{
    writes_by_txn_.reserve(txn_count);
    for (std::size_t i = 0; i < txn_count; ++i)
        writes_by_txn_.push_back(std::make_unique<TxnWrites>());
}

MultiVersionStore::KeySlot* MultiVersionStore::find_slot(const ResourceKey& key) const
{
    std::shared_lock lock(map_mutex_);
    auto it = slots_.find(key);
    return it == slots_.end() ? nullptr : it->second.get();
}

MultiVersionStore::KeySlot& MultiVersionStore::slot_for(const ResourceKey& key)
{
    {
        std::shared_lock lock(map_mutex_);
        auto it = slots_.find(key);
        if (it != slots_.end())
            return *it->second;
    }
    std::unique_lock lock(map_mutex_);
    auto& slot = slots_[key];
    if (!slot)
        slot = std::make_unique<KeySlot>();
    return *slot;
}

Value MultiVersionStore::base_value(const ResourceKey& key) const
{
    auto it = base_.find(key);
    return it == base_.end() ? 0 : it->second;
}

MultiVersionStore::ReadResult MultiVersionStore::read(const ResourceKey& key, TxnIndex reader) const
{
    if (KeySlot* slot = find_slot(key)) {
        std::lock_guard lock(slot->mutex);
        auto it = slot->entries.lower_bound(reader);
        if (it != slot->entries.begin()) {
            --it; // highest txn_index < reader
            const auto& [writer, entry] = *it;
            if (entry.estimate)
                return {0, ReadOrigin::estimate(writer)};
            return {entry.value, ReadOrigin::versioned({writer, entry.incarnation})};
        }
    }
    return {base_value(key), ReadOrigin::storage()};
}

void MultiVersionStore::write(const ResourceKey& key, Version version, Value value)
{
    KeySlot& slot = slot_for(key);
    bool fresh = false;
    {
        std::lock_guard lock(slot.mutex);
        auto [it, inserted] = slot.entries.try_emplace(version.txn_index);
        if (!inserted && it->second.incarnation > version.incarnation)
            throw std::logic_error("mv_store: write with a stale incarnation");
        fresh = inserted;
        it->second = Entry{version.incarnation, value, false};
    }
    if (fresh) {
        if (version.txn_index >= writes_by_txn_.size())
            throw std::logic_error("mv_store: writer index out of range");
        TxnWrites& wr = *writes_by_txn_[version.txn_index];
        std::lock_guard lock(wr.mutex);
        wr.keys.push_back(key);
    }
}

void MultiVersionStore::mark_estimates(TxnIndex txn_index)
{
    if (txn_index >= writes_by_txn_.size())
        return;
    std::vector<ResourceKey> keys;
    {
        TxnWrites& wr = *writes_by_txn_[txn_index];
        std::lock_guard lock(wr.mutex);
        keys = wr.keys;
    }
    for (const ResourceKey& key : keys) {
        KeySlot* slot = find_slot(key);
        if (!slot)
            continue;
        std::lock_guard lock(slot->mutex);
        auto it = slot->entries.find(txn_index);
        if (it != slot->entries.end())
            it->second.estimate = true;
    }
}

bool MultiVersionStore::validate_read_set(TxnIndex txn_index, std::span<const ReadRecord> read_set) const
{
    for (const ReadRecord& rec : read_set) {
        ReadResult now = read(rec.key, txn_index);
        if (now.origin.kind == ReadOrigin::Kind::Estimate)
            return false;
        if (now.origin != rec.origin)
            return false;
    }
    return true;
}

State MultiVersionStore::finalize() const
{
    State out = base_;
    std::shared_lock lock(map_mutex_);
    for (const auto& [key, slot] : slots_) {
        std::lock_guard slot_lock(slot->mutex);
        if (slot->entries.empty())
            continue;
        const Entry& top = slot->entries.rbegin()->second;
        for (const auto& [writer, entry] : slot->entries)
            if (entry.estimate)
                throw std::logic_error("mv_store: finalize with estimate still set");
        out[key] = top.value;
    }
    return out;
}

} // namespace chiron
