#include "chiron/engine_guided.hpp"

#include "stm_scheduler.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <latch>
#include <stdexcept>

namespace chiron {

GuidedSchedule schedule(const Block& block, const Hint& hint)
{
    std::size_t n = block.txns.size();
    GuidedSchedule plan;
    plan.graph = build_depgraph(n, hint.edges);
    plan.critical_parent.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& parents = plan.graph.parents[i];
        if (parents.empty()) {
            if (plan.graph.children[i].empty())
                plan.queue.push_back(static_cast<TxnIndex>(i));
            else
                plan.priorityqueue.push_back(static_cast<TxnIndex>(i));
            continue;
        }
        TxnIndex critical = parents.front(); // parents ascend, so ties keep the lowest
        for (TxnIndex p : parents)
            if (hint.path_cost[p] > hint.path_cost[critical])
                critical = p;
        plan.critical_parent[i] = critical;
    }
    return plan;
}

namespace {

using detail::AtomicMetrics;
using detail::SigPool;

// The hint-ordered dispatch phase. Executions are validated immediately and
// their writes applied only when that validation passes, so the store never
// holds unvalidated data; anything else is left Pending for the optimistic
// pass that follows.
class GuidedPhase {
public:
    GuidedPhase(const Block& block, MultiVersionStore& store, const EngineConfig& cfg,
                const GuidedSchedule& plan, AtomicMetrics& metrics, SigPool& sigs)
        : block_(block), store_(store), cfg_(cfg), plan_(plan), metrics_(metrics), sigs_(sigs),
          n_(block.txns.size()),
          oversubscribed_(std::thread::hardware_concurrency() < cfg.threads), vm_(cfg.vm)
    {
        vm_.random_phase_yield = vm_.random_phase_yield || oversubscribed_;
        states_.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i)
            states_.push_back(std::make_unique<TxnState>());
        for (std::size_t i = 0; i < n_; ++i)
            if (plan.critical_parent[i])
                states_[*plan.critical_parent[i]]->primary_children.push_back(
                    static_cast<TxnIndex>(i));
        for (TxnIndex i : plan.priorityqueue) {
            states_[i]->queued.store(true);
            priority_.push_back(i);
        }
        for (TxnIndex i : plan.queue) {
            states_[i]->queued.store(true);
            plain_.push_back(i);
        }
    }

    void run()
    {
        unsigned threads = std::max(1u, cfg_.threads);
        std::vector<std::thread> workers;
        workers.reserve(threads);
        std::mutex err_mutex;
        std::exception_ptr err;
        std::latch start(threads);
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
                    fallback_.store(true);
                    wake_all();
                }
            });
        }
        for (auto& w : workers)
            w.join();
        if (err)
            std::rethrow_exception(err);
    }

    bool fallback() const { return fallback_.load(); }
    bool all_completed() const { return completed_count_.load() >= n_; }
    bool completed(TxnIndex idx) const
    {
        return states_[idx]->status.load() == St::Completed;
    }
    bool sig_verified(TxnIndex idx) const { return states_[idx]->sig_done.load(); }
    const ExecutionOutput& output(TxnIndex idx) const { return states_[idx]->output; }
    ExecutionOutput take_output(TxnIndex idx) { return std::move(states_[idx]->output); }

private:
    enum class St : std::uint8_t { Pending, Executing, Completed };

    struct TxnState {
        std::atomic<St> status{St::Pending};
        std::atomic<bool> queued{false};
        std::atomic<bool> sig_done{false};
        std::mutex child_mutex;
        std::vector<TxnIndex> primary_children;
        ExecutionOutput output; // written before Completed is published
    };

    void worker()
    {
        std::uint64_t idle_spins = 0;
        std::uint64_t seen_completed = 0;
        while (!fallback_.load() && completed_count_.load() < n_) {
            TxnIndex idx;
            if (pop_ready(idx)) {
                idle_spins = 0;
                active_.fetch_add(1);
                process(idx);
                active_.fetch_sub(1);
                if (oversubscribed_)
                    std::this_thread::yield();
                continue;
            }
            if (sigs_.try_run_one())
                continue;
            std::uint64_t done = completed_count_.load();
            if (done != seen_completed) {
                seen_completed = done;
                idle_spins = 0;
            }
            // Stall tripwire: ready work exhausted, nobody executing, block
            // unfinished. A lost wakeup here would be a scheduler bug; rather
            // than hang, hand the rest to the optimistic engine.
            if (++idle_spins > 250 && active_.load() == 0 && queues_empty()) {
                fallback_.store(true);
                wake_all();
                break;
            }
            std::uint64_t epoch = wake_epoch_.load();
            if (fallback_.load() || completed_count_.load() >= n_)
                break;
            idle_wait(epoch);
        }
    }

    bool queues_empty()
    {
        std::lock_guard lock(ready_mutex_);
        return priority_.empty() && plain_.empty();
    }

    bool pop_ready(TxnIndex& idx)
    {
        std::lock_guard lock(ready_mutex_);
        if (!priority_.empty()) {
            idx = priority_.front();
            priority_.pop_front();
            return true;
        }
        if (!plain_.empty()) {
            idx = plain_.front();
            plain_.pop_front();
            if (!priority_.empty()) // unreachable; tripwire for refactors
                metrics_.priority_violations.fetch_add(1);
            return true;
        }
        return false;
    }

    void try_enqueue(TxnIndex idx)
    {
        if (states_[idx]->queued.exchange(true))
            return;
        {
            std::lock_guard lock(ready_mutex_);
            if (plan_.graph.children[idx].empty())
                plain_.push_back(idx);
            else
                priority_.push_back(idx);
        }
        wake_one(); // one new item; waking the whole pool herds on few cores
    }

    void process(TxnIndex idx)
    {
        TxnState& ts = *states_[idx];
        for (TxnIndex p : plan_.graph.parents[idx]) {
            TxnState& ps = *states_[p];
            if (ps.status.load() == St::Completed)
                continue;
            bool registered = false;
            {
                std::lock_guard lock(ps.child_mutex);
                if (ps.status.load() != St::Completed) {
                    ps.primary_children.push_back(idx);
                    registered = true;
                }
            }
            if (!registered)
                continue; // parent completed while we held the lock
            // Handoff race closure: release our queue claim, then re-check.
            // If the parent completed in between, its drain either saw us (and
            // re-enqueues) or ran before our registration, in which case the
            // exchange below wins and we re-enqueue ourselves.
            ts.queued.store(false);
            if (ps.status.load() == St::Completed)
                try_enqueue(idx);
            return;
        }

        St expected = St::Pending;
        if (!ts.status.compare_exchange_strong(expected, St::Executing))
            return;

        const Transaction& txn = block_.txns[idx];
        if (cfg_.sig_verify == SigMode::Inline && !ts.sig_done.exchange(true)) {
            verify_signature(txn, cfg_.sig_cost_rounds);
            metrics_.sig_verifications.fetch_add(1);
        }
        ReadFn reader = [this, idx](const ResourceKey& key) -> MvReadValue {
            auto r = store_.read(key, idx);
            return {r.value, r.origin};
        };
        VmResult res = execute(txn, reader, vm_, 0, !txn.signature.valid);
        if (std::holds_alternative<Blocked>(res)) {
            // estimates cannot exist before fallback; treat as hint failure
            ts.status.store(St::Pending);
            fallback_.store(true);
            wake_all();
            return;
        }
        ExecutionOutput out = std::move(std::get<ExecutionOutput>(res));
        metrics_.executions.fetch_add(1);
        metrics_.validations.fetch_add(1);
        if (!store_.validate_read_set(idx, out.read_set)) {
            // wasted execution; the optimistic pass redoes it from scratch
            metrics_.aborts.fetch_add(1);
            ts.status.store(St::Pending);
            fallback_.store(true);
            wake_all();
            return;
        }
        for (const WriteRecord& w : out.write_set)
            store_.write(w.key, {idx, 0}, w.value);
        ts.output = std::move(out);
        ts.status.store(St::Completed);
        if (completed_count_.fetch_add(1) + 1 >= n_)
            metrics_.sigs_done_at_exec_end.store(sigs_.done());

        std::vector<TxnIndex> drained;
        {
            std::lock_guard lock(ts.child_mutex);
            drained.swap(ts.primary_children);
        }
        for (TxnIndex c : drained)
            try_enqueue(c);
        if (completed_count_.load() >= n_)
            wake_all(); // terminal: every sleeper must observe completion
    }

    void wake_all()
    {
        wake_epoch_.fetch_add(1);
        // Skipping the notify when nobody sleeps keeps completions cheap; a
        // late sleeper is bounded by the wait timeout.
        if (idlers_.load() == 0)
            return;
        {
            std::lock_guard lock(idle_mutex_);
        }
        idle_cv_.notify_all();
    }

    void wake_one()
    {
        wake_epoch_.fetch_add(1);
        if (idlers_.load() == 0)
            return;
        {
            std::lock_guard lock(idle_mutex_);
        }
        idle_cv_.notify_one();
    }

    void idle_wait(std::uint64_t seen_epoch)
    {
        std::unique_lock lock(idle_mutex_);
        idlers_.fetch_add(1);
        idle_cv_.wait_for(lock, std::chrono::microseconds(200),
                          [&] { return wake_epoch_.load() != seen_epoch; });
        idlers_.fetch_sub(1);
    }

    const Block& block_;
    MultiVersionStore& store_;
    const EngineConfig& cfg_;
    const GuidedSchedule& plan_;
    AtomicMetrics& metrics_;
    SigPool& sigs_;
    std::size_t n_;
    bool oversubscribed_;
    VmConfig vm_;

    std::vector<std::unique_ptr<TxnState>> states_;
    std::mutex ready_mutex_;
    std::deque<TxnIndex> priority_;
    std::deque<TxnIndex> plain_;
    std::atomic<std::uint64_t> completed_count_{0};
    std::atomic<std::uint64_t> active_{0};
    std::atomic<bool> fallback_{false};

    std::mutex idle_mutex_;
    std::condition_variable idle_cv_;
    std::atomic<std::uint64_t> wake_epoch_{0};
    std::atomic<int> idlers_{0};
};

} // namespace

BlockResult run_guided(const Block& block, const State& state, const Hint& hint,
                       const EngineConfig& cfg)
{
    auto t0 = std::chrono::steady_clock::now();

    if (!verify_hint_shape(hint, block)) {
        BlockResult result = execute_block_optimistic(block, state, cfg);
        result.metrics.guided_fallback = true;
        result.metrics.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

    GuidedSchedule plan = schedule(block, hint);
    MultiVersionStore store(state, block.txns.size());
    AtomicMetrics metrics;
    SigPool sigs(block, cfg, metrics);

    GuidedPhase phase(block, store, cfg, plan, metrics, sigs);
    phase.run();

    const std::size_t n = block.txns.size();
    BlockResult result;

    // Hint-independent pass: with the store quiescent, an in-order
    // revalidation of every read set is the BlockSTM soundness condition.
    bool clean = !phase.fallback() && phase.all_completed();
    if (clean) {
        for (TxnIndex i = 0; i < n; ++i) {
            if (!store.validate_read_set(i, phase.output(i).read_set)) {
                clean = false;
                break;
            }
            metrics.validations.fetch_add(1);
        }
    }

    if (clean) {
        if (!sigs.all_done()) {
            std::vector<std::thread> team;
            team.reserve(std::max(1u, cfg.threads));
            for (unsigned t = 0; t < std::max(1u, cfg.threads); ++t)
                team.emplace_back([&] {
                    while (sigs.try_run_one()) {
                    }
                });
            for (auto& w : team)
                w.join();
        }
        result.outputs.reserve(n);
        for (TxnIndex i = 0; i < n; ++i)
            result.outputs.push_back(phase.take_output(i));
    } else {
        // Something is stale or unfinished: re-validates everything the
        // guided phase completed and executes the rest optimistically.
        detail::StmScheduler scheduler(block, store, cfg, metrics, sigs);
        for (TxnIndex i = 0; i < n; ++i) {
            if (phase.completed(i))
                scheduler.seed_executed(phase.take_output(i));
            else if (phase.sig_verified(i))
                scheduler.seed_sig_done(i);
        }
        scheduler.run();
        scheduler.final_check();
        result.outputs = scheduler.take_outputs();
    }
    result.final_state = store.finalize();
    metrics.fold_into(result.metrics);
    result.metrics.guided_fallback = phase.fallback() || result.metrics.aborts > 0;
    result.metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.validated = true;
    return result;
}

} // namespace chiron
