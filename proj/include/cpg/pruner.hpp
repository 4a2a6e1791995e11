#pragma once

// Gradual magnitude pruning with retraining against an accuracy goal.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpg {

struct PruneSchedule {
    double step_fraction = 0.1;      // of the remaining candidates, per step
    std::size_t retrain_epochs = 5;  // per step, stops early once the goal holds
    std::size_t min_remaining = 1;   // per layer

    void validate() const;
};

enum class GoalSource : std::uint8_t { explicit_value = 0, avg = 1, max = 2, top = 3 };

struct AccuracyGoal {
    double value = 0.0;
    GoalSource source = GoalSource::explicit_value;
    bool operator==(const AccuracyGoal&) const = default;
};

const char* to_string(GoalSource s);
GoalSource goal_source_from_string(const std::string& s);

/// The `count` candidates of smallest |params[i]|, ties broken by lower
/// index. Returned in ascending index order.
std::vector<std::size_t> select_prune_count(std::span<const float> params, std::span<const std::size_t> candidates,
                                            std::size_t count);

/// floor(fraction * |candidates|) entries via select_prune_count.
std::vector<std::size_t> select_prune_set(std::span<const float> params, std::span<const std::size_t> candidates,
                                          double fraction);

/// What gradual_prune needs from the model being compacted. Snapshots are
/// opaque value copies owned by the caller.
class PruneTarget {
public:
    struct Snapshot {
        std::vector<float> params;
        std::vector<float> extra;
    };

    virtual ~PruneTarget() = default;

    virtual std::span<float> params() = 0;
    /// Layer id of each parameter; used for the per-layer floor.
    virtual std::span<const std::uint32_t> param_layers() const = 0;
    virtual double evaluate() = 0;
    /// One training epoch over the entries flagged in `trainable`.
    virtual void retrain_epoch(std::span<const std::uint8_t> trainable) = 0;
    virtual Snapshot snapshot() const = 0;
    virtual void restore(const Snapshot& s) = 0;
};

struct PruneResult {
    std::vector<std::size_t> survivors;  // ascending
    std::vector<std::size_t> pruned;     // ascending
    double accuracy = 0.0;
    std::size_t accepted_steps = 0;
};

/// Repeatedly prunes step_fraction of the remaining candidates (zeroing
/// them and freezing them out of training), retrains up to retrain_epochs,
/// keeps the step if evaluate() >= goal and otherwise restores the last
/// accepted state and stops. Throws GoalUnreachable if the initial model
/// is already below the goal.
PruneResult gradual_prune(PruneTarget& target, std::span<const std::size_t> candidates, const AccuracyGoal& goal,
                          const PruneSchedule& schedule);

}  // namespace cpg
