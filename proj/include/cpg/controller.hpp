#pragma once

// Sequential task learning: compact task 1, then for every later task pick
// from the preserved weights, grow when the goal is missed, and compact
// the newly trained free weights.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpg/data.hpp"
#include "cpg/head.hpp"
#include "cpg/ledger.hpp"
#include "cpg/mask.hpp"
#include "cpg/nn.hpp"
#include "cpg/pruner.hpp"

namespace cpg {

struct GrowthPolicy {
    double increment_fraction = 0.1;  // of each hidden layer's current width, rounded up
    double max_expansion = 1.5;       // bound on param_count / n0
    std::size_t max_retries = 3;
    bool reset_on_grow = false;  // re-initialise every free weight instead of warm starting
    float noise = 1e-3f;         // magnitude of new weights on warm start

    void validate() const;
};

struct EngineHyper {
    TrainHyper train;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 30;   // task-1 and from-scratch training
    std::size_t pick_epochs = 30;  // per picking attempt
    float mask_init = kDefaultMaskInit;
    float mask_threshold = kDefaultMaskThreshold;
    bool force_all_picks = false;  // every prior weight picked, mask never trained
    bool reinit_free = true;       // fresh initialisation of released weights per task
    bool reset_mask_on_grow = false;  // restart the shadow mask after each growth step
    bool verbose = false;

    void validate() const;
};

struct TaskRecord {
    TaskId id = 0;
    std::vector<std::uint8_t> mask;  // over ledger.prior_indices(id)
    Head head;
    AccuracyGoal goal;
    double achieved = 0.0;
    std::size_t owned_count = 0;
    bool best_effort = false;
    std::size_t growth_events = 0;
    std::vector<int> classes;

    bool operator==(const TaskRecord&) const = default;
};

struct CpgState {
    nn::Network net;
    Ledger ledger;
    std::vector<TaskRecord> records;
    GrowthPolicy policy;
    std::size_t n0 = 0;
    std::uint64_t seed = 0;

    static CpgState create(std::span<const nn::LayerSpec> backbone, std::uint64_t seed, GrowthPolicy policy = {});

    TaskId committed_tasks() const { return ledger.committed_tasks(); }
    const TaskRecord& record(TaskId id) const;
    /// param_count / n0
    double expansion() const;
    /// free_count / n0
    double redundancy() const;
    std::size_t growth_events() const;
};

/// Trains task 1 from scratch, compacts it and commits the survivors.
/// Throws GoalUnreachable if training never reaches the goal.
const TaskRecord& learn_first_task(CpgState& state, const data::Task& task, const AccuracyGoal& goal,
                                   const PruneSchedule& schedule, const EngineHyper& hyper);

/// Picks, grows as needed, compacts and commits the next task. A goal that
/// stays out of reach is committed best-effort with the flag set.
const TaskRecord& learn_next_task(CpgState& state, const data::Task& task, const AccuracyGoal& goal,
                                  const PruneSchedule& schedule, const EngineHyper& hyper);

/// Dispatches to learn_first_task / learn_next_task.
const TaskRecord& learn_task(CpgState& state, const data::Task& task, const AccuracyGoal& goal,
                             const PruneSchedule& schedule, const EngineHyper& hyper);

/// Frozen view of a committed task: its own weights, its picks and its head.
std::vector<float> task_view(const CpgState& state, TaskId id);
nn::Tensor task_logits(const CpgState& state, TaskId id, const nn::Tensor& batch);
double evaluate(const CpgState& state, TaskId id, const data::Dataset& eval);

inline constexpr double kDefaultTopDelta = 0.005;

/// avg -> mean, max -> max, top -> max(mean, max) + top_delta, explicit -> value.
AccuracyGoal set_accuracy_goal(GoalSource mode, std::span<const double> baselines, double explicit_value = 0.0,
                               double top_delta = kDefaultTopDelta);

/// Independent from-scratch model for one task; returns its eval accuracy.
double train_scratch(std::span<const nn::LayerSpec> backbone, const data::Task& task, const EngineHyper& hyper,
                     std::uint64_t seed);

/// Per-layer growth increments for the next retry, shrunk to respect the
/// expansion bound; all zero when no growth is possible.
std::vector<std::size_t> plan_growth(const CpgState& state);

}  // namespace cpg
