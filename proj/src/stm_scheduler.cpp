#include "stm_scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <latch>
#include <stdexcept>

namespace chiron::detail {

StmScheduler::StmScheduler(const Block& block, MultiVersionStore& store, const EngineConfig& cfg,
                           AtomicMetrics& metrics, SigPool& sigs)
    : block_(block), store_(store), cfg_(cfg), metrics_(metrics), sigs_(sigs),
      n_(block.txns.size()),
      oversubscribed_(std::thread::hardware_concurrency() < cfg.threads), vm_(cfg.vm)
{
    vm_.random_phase_yield = vm_.random_phase_yield || oversubscribed_;
    slots_.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i)
        slots_.push_back(std::make_unique<Slot>());
}

void StmScheduler::seed_executed(ExecutionOutput out)
{
    Slot& slot = *slots_[out.txn_index];
    std::vector<ResourceKey> keys;
    keys.reserve(out.write_set.size());
    for (const WriteRecord& w : out.write_set)
        keys.push_back(w.key);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    slot.prev_write_keys = std::move(keys);
    std::uint32_t inc = out.incarnation;
    slot.output = std::move(out);
    slot.has_output = true;
    slot.sig_done.store(true);
    slot.status.store(pack(inc, TxnState::Executed));
    executed_now_.fetch_add(1);
}

void StmScheduler::run()
{
    unsigned threads = std::max(1u, cfg_.threads);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    std::mutex err_mutex;
    std::exception_ptr err;
    std::latch start(threads); // workers start together, even on few cores
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            try {
                start.arrive_and_wait();
                worker();
            } catch (...) {
                {
                    std::lock_guard lock(err_mutex);
                    if (!err)
                        err = std::current_exception();
                }
                failed_.store(true);
                done_.store(true);
                wake_idle();
            }
        });
    }
    for (auto& w : workers)
        w.join();
    if (err)
        std::rethrow_exception(err);
}

void StmScheduler::worker()
{
    Task task;
    while (!done_.load()) {
        if (task.kind == Task::Kind::None)
            task = next_task();
        if (task.kind == Task::Kind::None) {
            // None with a counter still below n means the dispensed slot was
            // a no-op (already executed, still executing, or suspended), not
            // that work ran out; ask again before touching the idle path.
            if (execution_idx_.load() < n_ || validation_idx_.load() < n_)
                continue;
            if (sigs_.try_run_one())
                continue;
            std::uint64_t epoch = wake_epoch_.load();
            check_done();
            if (done_.load())
                break;
            idle_wait(epoch);
            continue;
        }
        bool executed = task.kind == Task::Kind::Execute;
        Task next = executed ? do_execute(task.idx, task.incarnation)
                             : do_validate(task.idx, task.incarnation);
        if (next.kind == Task::Kind::None) {
            num_active_.fetch_sub(1);
            check_done();
        }
        task = next;
        // Rotate runnable workers between executions so concurrent writers
        // interleave on an oversubscribed core. Validations are read-only and
        // need no such pacing.
        if (oversubscribed_ && executed)
            std::this_thread::yield();
    }
}

StmScheduler::Task StmScheduler::next_task()
{
    if (validation_idx_.load() < execution_idx_.load())
        return next_version_to_validate();
    return next_version_to_execute();
}

StmScheduler::Task StmScheduler::next_version_to_execute()
{
    if (execution_idx_.load() >= n_) {
        check_done();
        return {};
    }
    num_active_.fetch_add(1);
    std::uint64_t idx = execution_idx_.fetch_add(1);
    if (idx >= n_) {
        num_active_.fetch_sub(1);
        check_done();
        return {};
    }
    Task t = try_incarnate(static_cast<TxnIndex>(idx));
    if (t.kind == Task::Kind::None)
        num_active_.fetch_sub(1);
    return t;
}

StmScheduler::Task StmScheduler::next_version_to_validate()
{
    if (validation_idx_.load() >= n_) {
        check_done();
        return {};
    }
    num_active_.fetch_add(1);
    std::uint64_t idx = validation_idx_.fetch_add(1);
    if (idx >= n_) {
        num_active_.fetch_sub(1);
        check_done();
        return {};
    }
    std::uint64_t s = slots_[idx]->status.load();
    if (state_of(s) == TxnState::Executed)
        return {Task::Kind::Validate, static_cast<TxnIndex>(idx), incarnation_of(s)};
    num_active_.fetch_sub(1);
    return {};
}

StmScheduler::Task StmScheduler::try_incarnate(TxnIndex idx)
{
    Slot& slot = *slots_[idx];
    std::uint64_t s = slot.status.load();
    while (state_of(s) == TxnState::Ready) {
        if (slot.status.compare_exchange_weak(s, pack(incarnation_of(s), TxnState::Executing)))
            return {Task::Kind::Execute, idx, incarnation_of(s)};
    }
    return {};
}

StmScheduler::Task StmScheduler::do_execute(TxnIndex idx, std::uint32_t incarnation)
{
    const Transaction& txn = block_.txns[idx];
    Slot& slot = *slots_[idx];
    if (cfg_.sig_verify == SigMode::Inline && !slot.sig_done.exchange(true)) {
        verify_signature(txn, cfg_.sig_cost_rounds);
        metrics_.sig_verifications.fetch_add(1);
    }
    const bool invalid = !txn.signature.valid;
    ReadFn reader = [this, idx](const ResourceKey& key) -> MvReadValue {
        auto r = store_.read(key, idx);
        return {r.value, r.origin};
    };

    for (;;) {
        VmResult res = execute(txn, reader, vm_, incarnation, invalid);
        if (auto* blocked = std::get_if<Blocked>(&res)) {
            if (add_dependency(idx, incarnation, blocked->blocking_txn))
                return {}; // suspended; resumed when the blocker re-executes
            continue;      // estimate already resolved, retry
        }
        ExecutionOutput out = std::move(std::get<ExecutionOutput>(res));
        if (total_execs_.fetch_add(1) + 1 > 10 * std::max<std::uint64_t>(n_, 1))
            throw std::runtime_error("blockstm: total executions exceeded 10*n (livelock)");
        metrics_.executions.fetch_add(1);

        for (const WriteRecord& w : out.write_set)
            store_.write(w.key, {idx, incarnation}, w.value);

        std::vector<ResourceKey> keys;
        keys.reserve(out.write_set.size());
        for (const WriteRecord& w : out.write_set)
            keys.push_back(w.key);
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

        bool wrote_new = false;
        {
            std::lock_guard lock(slot.out_mutex);
            wrote_new = !std::includes(slot.prev_write_keys.begin(), slot.prev_write_keys.end(),
                                       keys.begin(), keys.end());
            slot.prev_write_keys = std::move(keys);
            slot.output = std::move(out);
            slot.has_output = true;
        }
        return finish_execution(idx, incarnation, wrote_new);
    }
}

StmScheduler::Task StmScheduler::finish_execution(TxnIndex idx, std::uint32_t incarnation,
                                                  bool wrote_new_key)
{
    Slot& slot = *slots_[idx];
    slot.status.store(pack(incarnation, TxnState::Executed));
    if (executed_now_.fetch_add(1) + 1 >= n_)
        metrics_.sigs_done_at_exec_end.store(sigs_.done());

    std::vector<TxnIndex> resumed;
    {
        std::lock_guard lock(slot.dep_mutex);
        resumed.swap(slot.dependents);
    }
    if (!resumed.empty()) {
        for (TxnIndex d : resumed) {
            Slot& ds = *slots_[d];
            ds.status.store(pack(incarnation_of(ds.status.load()), TxnState::Ready));
        }
        decrease_execution_idx(*std::min_element(resumed.begin(), resumed.end()));
    }

    Task out;
    if (validation_idx_.load() > idx) {
        if (wrote_new_key)
            decrease_validation_idx(idx);
        else
            out = {Task::Kind::Validate, idx, incarnation};
    }
    wake_one(); // one txn became validatable; bulk re-openings wake via decreases
    return out;
}

StmScheduler::Task StmScheduler::do_validate(TxnIndex idx, std::uint32_t incarnation)
{
    Slot& slot = *slots_[idx];
    std::vector<ReadRecord> read_set;
    {
        std::lock_guard lock(slot.out_mutex);
        if (!slot.has_output || slot.output.incarnation != incarnation)
            return {}; // stale task
        read_set = slot.output.read_set;
    }
    metrics_.validations.fetch_add(1);
    if (store_.validate_read_set(idx, read_set))
        return {};

    std::uint64_t expected = pack(incarnation, TxnState::Executed);
    if (!slot.status.compare_exchange_strong(expected, pack(incarnation, TxnState::Aborting)))
        return {}; // another task already handled this incarnation
    executed_now_.fetch_sub(1);
    metrics_.aborts.fetch_add(1);
    store_.mark_estimates(idx);
    decrease_validation_idx(std::uint64_t{idx} + 1);
    slot.status.store(pack(incarnation + 1, TxnState::Ready));
    if (execution_idx_.load() > idx) {
        Task t = try_incarnate(idx);
        if (t.kind != Task::Kind::None)
            return t;
    }
    wake_one(); // at most one execution slot re-opened here
    return {};
}

bool StmScheduler::add_dependency(TxnIndex idx, std::uint32_t incarnation, TxnIndex blocking)
{
    Slot& bslot = *slots_[blocking];
    std::lock_guard lock(bslot.dep_mutex);
    if (state_of(bslot.status.load()) == TxnState::Executed)
        return false;
    slots_[idx]->status.store(pack(incarnation, TxnState::Suspended));
    bslot.dependents.push_back(idx);
    return true;
}

void StmScheduler::decrease_execution_idx(std::uint64_t target)
{
    decrease_cnt_.fetch_add(1);
    std::uint64_t cur = execution_idx_.load();
    while (cur > target && !execution_idx_.compare_exchange_weak(cur, target)) {
    }
    wake_idle();
}

void StmScheduler::decrease_validation_idx(std::uint64_t target)
{
    decrease_cnt_.fetch_add(1);
    std::uint64_t cur = validation_idx_.load();
    while (cur > target && !validation_idx_.compare_exchange_weak(cur, target)) {
    }
    wake_idle();
}

void StmScheduler::check_done()
{
    std::uint64_t observed = decrease_cnt_.load();
    if (execution_idx_.load() >= n_ && validation_idx_.load() >= n_ && num_active_.load() == 0
        && sigs_.all_done() && decrease_cnt_.load() == observed) {
        if (!done_.exchange(true))
            wake_idle();
    }
}

void StmScheduler::wake_idle()
{
    wake_epoch_.fetch_add(1);
    // Skipping the notify when nobody sleeps keeps the hot path cheap; a
    // sleeper that registered after the check is bounded by the wait timeout.
    if (idlers_.load() == 0)
        return;
    {
        std::lock_guard lock(idle_mutex_);
    }
    idle_cv_.notify_all();
}

void StmScheduler::wake_one()
{
    wake_epoch_.fetch_add(1);
    if (idlers_.load() == 0)
        return;
    {
        std::lock_guard lock(idle_mutex_);
    }
    idle_cv_.notify_one();
}

void StmScheduler::idle_wait(std::uint64_t seen_epoch)
{
    std::unique_lock lock(idle_mutex_);
    idlers_.fetch_add(1);
    idle_cv_.wait_for(lock, std::chrono::microseconds(200),
                      [&] { return done_.load() || wake_epoch_.load() != seen_epoch; });
    idlers_.fetch_sub(1);
}

std::vector<ExecutionOutput> StmScheduler::take_outputs()
{
    std::vector<ExecutionOutput> out;
    out.reserve(n_);
    for (auto& slot : slots_) {
        if (!slot->has_output)
            throw std::logic_error("blockstm: missing output after completion");
        out.push_back(std::move(slot->output));
    }
    return out;
}

void StmScheduler::final_check() const
{
    for (std::size_t i = 0; i < n_; ++i) {
        const Slot& slot = *slots_[i];
        if (state_of(slot.status.load()) != TxnState::Executed)
            throw std::logic_error("blockstm: transaction not executed at completion");
        if (!store_.validate_read_set(static_cast<TxnIndex>(i), slot.output.read_set))
            throw std::logic_error("blockstm: final read-set check failed");
    }
}

} // namespace chiron::detail
