#pragma once

// Internal collaborative scheduler following published BlockSTM practice:
// two atomic counters (next-to-execute, next-to-validate) with
// decrease-on-abort, estimate-based dependency suspension, and an optional
// low-priority signature task pool. The guided engine reuses it with
// pre-seeded Executed statuses, which turns the initial validation sweep into
// the hint-independent safety check and the abort path into the fallback.

#include "chiron/engine_blockstm.hpp"
#include "chiron/mv_store.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace chiron::detail {

struct AtomicMetrics {
    std::atomic<std::uint64_t> executions{0};
    std::atomic<std::uint64_t> aborts{0};
    std::atomic<std::uint64_t> validations{0};
    std::atomic<std::uint64_t> sig_verifications{0};
    std::atomic<std::uint64_t> sigs_done_at_exec_end{0};
    std::atomic<std::uint64_t> priority_violations{0};

    void fold_into(ExecMetrics& m) const
    {
        m.executions += executions.load();
        m.aborts += aborts.load();
        m.validations += validations.load();
        m.sig_verifications += sig_verifications.load();
        m.sigs_done_at_exec_end = sigs_done_at_exec_end.load();
        m.priority_violations += priority_violations.load();
    }
};

// One costly verification per transaction, claimed off an atomic counter.
// Only consumed by workers that found no execution or validation task.
class SigPool {
public:
    SigPool(const Block& block, const EngineConfig& cfg, AtomicMetrics& metrics)
        : block_(block), cfg_(cfg), metrics_(metrics),
          count_(cfg.sig_verify == SigMode::IdleCore ? block.txns.size() : 0)
    {
    }

    bool try_run_one()
    {
        std::size_t idx = next_.fetch_add(1);
        if (idx >= count_) {
            return false;
        }
        verify_signature(block_.txns[idx], cfg_.sig_cost_rounds);
        metrics_.sig_verifications.fetch_add(1);
        done_.fetch_add(1);
        return true;
    }

    bool all_done() const { return done_.load() >= count_; }
    std::uint64_t done() const { return done_.load(); }

private:
    const Block& block_;
    const EngineConfig& cfg_;
    AtomicMetrics& metrics_;
    std::size_t count_;
    std::atomic<std::size_t> next_{0};
    std::atomic<std::uint64_t> done_{0};
};

class StmScheduler {
public:
    StmScheduler(const Block& block, MultiVersionStore& store, const EngineConfig& cfg,
                 AtomicMetrics& metrics, SigPool& sigs);

    // Marks a transaction as already executed with the given output (its
    // writes must already be in the store). Call before run().
    void seed_executed(ExecutionOutput out);

    // Marks a transaction's signature as already verified (inline mode).
    void seed_sig_done(TxnIndex idx) { slots_[idx]->sig_done.store(true); }

    // Runs workers to completion: every txn executed and validated, and the
    // signature pool drained. Throws on the 10*n execution cap.
    void run();

    std::vector<ExecutionOutput> take_outputs();

    // Re-validates every transaction against the settled store; throws
    // std::logic_error on any mismatch. Scheduler bug trap, not fallback.
    void final_check() const;

private:
    enum class TxnState : std::uint8_t { Ready = 0, Executing, Executed, Aborting, Suspended };

    static constexpr std::uint64_t pack(std::uint32_t incarnation, TxnState s)
    {
        return (std::uint64_t{incarnation} << 3) | static_cast<std::uint64_t>(s);
    }
    static constexpr TxnState state_of(std::uint64_t packed)
    {
        return static_cast<TxnState>(packed & 0x7);
    }
    static constexpr std::uint32_t incarnation_of(std::uint64_t packed)
    {
        return static_cast<std::uint32_t>(packed >> 3);
    }

    struct Task {
        enum class Kind : std::uint8_t { None, Execute, Validate } kind = Kind::None;
        TxnIndex idx = 0;
        std::uint32_t incarnation = 0;
    };

    struct Slot {
        std::atomic<std::uint64_t> status{pack(0, TxnState::Ready)};
        std::atomic<bool> sig_done{false}; // inline mode: verify once, even across retries
        std::mutex dep_mutex;
        std::vector<TxnIndex> dependents;
        std::mutex out_mutex;
        ExecutionOutput output;
        std::vector<ResourceKey> prev_write_keys; // sorted; guarded by out_mutex
        bool has_output = false;
    };

    void worker();
    Task next_task();
    Task next_version_to_execute();
    Task next_version_to_validate();
    Task try_incarnate(TxnIndex idx);
    Task do_execute(TxnIndex idx, std::uint32_t incarnation);
    Task do_validate(TxnIndex idx, std::uint32_t incarnation);
    Task finish_execution(TxnIndex idx, std::uint32_t incarnation, bool wrote_new_key);
    bool add_dependency(TxnIndex idx, std::uint32_t incarnation, TxnIndex blocking);
    void decrease_execution_idx(std::uint64_t target);
    void decrease_validation_idx(std::uint64_t target);
    void check_done();
    void wake_idle();
    void wake_one();
    void idle_wait(std::uint64_t seen_epoch);

    const Block& block_;
    MultiVersionStore& store_;
    const EngineConfig& cfg_;
    AtomicMetrics& metrics_;
    SigPool& sigs_;
    std::size_t n_;
    bool oversubscribed_;
    VmConfig vm_; // cfg.vm with yields forced on when oversubscribed

    std::vector<std::unique_ptr<Slot>> slots_;
    std::atomic<std::uint64_t> execution_idx_{0};
    std::atomic<std::uint64_t> validation_idx_{0};
    std::atomic<std::uint64_t> decrease_cnt_{0};
    std::atomic<std::uint64_t> num_active_{0};
    std::atomic<std::uint64_t> total_execs_{0};
    std::atomic<std::uint64_t> executed_now_{0}; // txns currently in Executed state
    std::atomic<bool> done_{false};
    std::atomic<bool> failed_{false};

    std::mutex idle_mutex_;
    std::condition_variable idle_cv_;
    std::atomic<std::uint64_t> wake_epoch_{0};
    std::atomic<int> idlers_{0};
};

} // namespace chiron::detail
