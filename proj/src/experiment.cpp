#include "cpg/experiment.hpp"

#include <algorithm>
#include <chrono>

#include "cpg/error.hpp"

namespace cpg {

std::vector<nn::LayerSpec> backbone_spec(std::size_t input_width, std::span<const std::size_t> hidden) {
    std::vector<nn::LayerSpec> spec;
    std::size_t in = input_width;
    for (auto h : hidden) {
        spec.push_back(nn::dense(in, h));
        spec.push_back(nn::relu(h));
        in = h;
    }
    return spec;
}

data::TaskSequence load_tasks(const RunConfig& c) {
    data::TaskSequence seq;
    switch (c.source) {
        case TaskSource::synthetic: {
            seq = data::gen_synthetic_tasks(c.tasks, c.classes_per_task, c.dim, c.per_class, c.sep, c.seed);
            const auto order = data::task_order(seq.tasks.size(), c.order_seed);
            std::vector<data::Task> permuted;
            for (auto i : order) permuted.push_back(std::move(seq.tasks[i]));
            seq.tasks = std::move(permuted);
            seq.order = order;
            return seq;
        }
        case TaskSource::idx: {
            const auto train = data::load_idx(c.train_images, c.train_labels, c.n_classes);
            const auto test = data::load_idx(c.test_images, c.test_labels, c.n_classes);
            seq = data::split_by_class(train, test, c.classes_per_task, c.order_seed);
            break;
        }
        case TaskSource::csv: {
            const auto train = data::load_csv(c.train_csv, c.n_classes);
            seq = c.test_csv.empty()
                      ? data::split_by_class(train, c.classes_per_task, c.order_seed)
                      : data::split_by_class(train, data::load_csv(c.test_csv, c.n_classes), c.classes_per_task,
                                             c.order_seed);
            break;
        }
    }
    if (c.tasks != 0 && c.tasks < seq.tasks.size()) {
        seq.tasks.resize(c.tasks);
        seq.order.resize(c.tasks);
    }
    return seq;
}

std::uint64_t baseline_seed(std::uint64_t run_seed, std::size_t task_index, std::size_t trial) {
    return run_seed * 1000003ULL + 7919ULL * (task_index + 1) + 104729ULL * (trial + 1);
}

AccuracyGoal goal_for_task(const RunConfig& c, const data::Task& task, std::size_t task_index,
                           std::vector<double>* baselines_out) {
    if (c.goal_mode == GoalSource::explicit_value) return set_accuracy_goal(c.goal_mode, {}, c.goal, c.top_delta);
    const auto spec = backbone_spec(task.train.feature_width(), c.hidden);
    std::vector<double> baselines;
    for (std::size_t t = 0; t < c.baseline_trials; ++t)
        baselines.push_back(train_scratch(spec, task, c.hyper, baseline_seed(c.seed, task_index, t)));
    auto goal = set_accuracy_goal(c.goal_mode, baselines, 0.0, c.top_delta);
    goal.value = std::clamp(goal.value + c.goal_offset, 0.0, 1.0);
    if (baselines_out) *baselines_out = std::move(baselines);
    return goal;
}

RunOutcome run_experiment(const RunConfig& c, const data::TaskSequence& tasks, const CommitObserver& on_commit) {
    if (tasks.tasks.empty()) throw DataError("no tasks to learn");
    const auto start = std::chrono::steady_clock::now();
    const auto spec = backbone_spec(tasks.tasks.front().train.feature_width(), c.hidden);

    RunOutcome out{CpgState::create(spec, c.seed, c.growth), {}, {}};
    for (std::size_t k = 0; k < tasks.tasks.size(); ++k) {
        std::vector<double> baselines;
        const auto goal = goal_for_task(c, tasks.tasks[k], k, &baselines);
        out.baselines.push_back(std::move(baselines));
        const auto& rec = learn_task(out.state, tasks.tasks[k], goal, c.schedule, c.hyper);
        if (on_commit) on_commit(out.state, rec.id);
    }

    std::vector<double> acc;
    for (std::size_t k = 0; k < tasks.tasks.size(); ++k)
        acc.push_back(evaluate(out.state, static_cast<TaskId>(k + 1), tasks.tasks[k].eval));
    out.report = make_report(out.state.records, acc, out.state.net.param_count(), out.state.n0,
                             out.state.ledger.free_count());
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace cpg
