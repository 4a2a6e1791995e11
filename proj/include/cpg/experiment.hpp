#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cpg/config.hpp"
#include "cpg/controller.hpp"
#include "cpg/data.hpp"
#include "cpg/report.hpp"

namespace cpg {

/// input -> dense -> relu -> ... for every hidden width.
std::vector<nn::LayerSpec> backbone_spec(std::size_t input_width, std::span<const std::size_t> hidden);

/// Builds the task sequence described by the config (order applied).
data::TaskSequence load_tasks(const RunConfig& config);

struct RunOutcome {
    CpgState state;
    RunReport report;
    std::vector<std::vector<double>> baselines;  // per task, empty for explicit goals
};

/// Called after each task commit.
using CommitObserver = std::function<void(const CpgState&, TaskId)>;

/// Learns every task in order and reports accuracies re-measured on the
/// final state.
RunOutcome run_experiment(const RunConfig& config, const data::TaskSequence& tasks,
                          const CommitObserver& on_commit = {});

/// Goal for one task per the config's mode, offset and clamp.
AccuracyGoal goal_for_task(const RunConfig& config, const data::Task& task, std::size_t task_index,
                           std::vector<double>* baselines_out = nullptr);

/// Seed of the from-scratch baseline trial for one task.
std::uint64_t baseline_seed(std::uint64_t run_seed, std::size_t task_index, std::size_t trial);

}  // namespace cpg
