#pragma once

// Per-parameter ownership. Owner 0 marks a free (released) weight; owner
// k >= 1 marks a weight preserved for task k. Tags only ever move 0 -> k.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpg/nn.hpp"

namespace cpg {

using TaskId = std::uint16_t;
inline constexpr TaskId kFree = 0;

class Ledger {
public:
    /// All parameters free, no committed tasks.
    explicit Ledger(std::size_t n_params);

    /// Restores a persisted ledger; rejects tags above `committed`.
    static Ledger from_owners(std::vector<TaskId> owners, TaskId committed);

    std::size_t size() const { return owners_.size(); }
    TaskId committed_tasks() const { return committed_; }
    TaskId owner(std::size_t i) const { return owners_.at(i); }
    const std::vector<TaskId>& owners() const { return owners_; }

    /// Claims `surviving` for task `task`, which must be committed_tasks()+1.
    /// Validation happens before any tag is written.
    void commit_task(TaskId task, std::span<const std::size_t> surviving);

    /// Appends `added` free entries.
    void extend(std::size_t added);

    std::vector<std::size_t> free_indices() const;
    std::size_t free_count() const;
    std::size_t owned_count(TaskId task) const;

    /// Ascending indices owned by tasks 1..task-1; the domain of task's pick mask.
    std::vector<std::size_t> prior_indices(TaskId task) const;

private:
    std::vector<TaskId> owners_;
    TaskId committed_ = 0;
};

/// Effective weights of one task.
///   owner == task           -> params[i]
///   0 < owner < task        -> params[i] * pick_mask[j] (j = rank among prior indices)
///   owner == 0              -> params[i] if include_free
///   otherwise               -> 0
std::vector<float> compose_view(const Ledger& ledger, std::span<const float> params, TaskId task,
                                std::span<const std::uint8_t> pick_mask, bool include_free);

/// Grows the network and appends matching free ledger entries.
std::size_t grow(Ledger& ledger, nn::Network& net, std::span<const std::size_t> increments);

}  // namespace cpg
