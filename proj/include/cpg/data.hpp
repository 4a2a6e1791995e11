#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cpg/nn.hpp"

namespace cpg::data {

struct Dataset {
    nn::Tensor samples;  // N x features...
    std::vector<int> labels;
    std::size_t n_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_width() const { return samples.row_width(); }
    /// Rows `indices` in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
    bool operator==(const Dataset&) const = default;
};

/// Throws DataError unless labels and tensor agree and labels lie in range.
void validate(const Dataset& d);

struct Batch {
    nn::Tensor samples;
    std::vector<int> labels;
};

struct Task {
    Dataset train;
    Dataset eval;
    /// Original class ids, indexed by the task-local label.
    std::vector<int> classes;
    bool operator==(const Task&) const = default;
};

struct TaskSequence {
    std::vector<Task> tasks;
    /// tasks[i] is original task order[i].
    std::vector<std::size_t> order;
    std::uint64_t seed = 0;
    bool operator==(const TaskSequence&) const = default;
};

/// Task permutation for `order_seed`; seed 0 is the identity.
std::vector<std::size_t> task_order(std::size_t n_tasks, std::uint64_t order_seed);

/// Partitions classes into consecutive groups of `classes_per_task`,
/// remaps labels to [0, classes_per_task) and orders tasks by `order_seed`.
TaskSequence split_by_class(const Dataset& train, const Dataset& eval, std::size_t classes_per_task,
                            std::uint64_t order_seed);

/// Single-source variant: each class's samples are split 80/20 into
/// train/eval in file order before partitioning.
TaskSequence split_by_class(const Dataset& dataset, std::size_t classes_per_task, std::uint64_t order_seed);

/// Isotropic unit-variance Gaussian blobs whose means lie on a sphere of
/// radius `sep`. Each class is split 80/20 into train/eval.
TaskSequence gen_synthetic_tasks(std::size_t n_tasks, std::size_t classes_per_task, std::size_t dim,
                                 std::size_t per_class, double sep, std::uint64_t seed);

/// IDX image/label pair (magic 0x803 / 0x801, big-endian header, u8 payload).
/// Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t n_classes = 10);

/// CSV with a header row, float feature columns and a `label` column.
/// `n_classes` 0 infers max(label)+1.
Dataset load_csv(const std::filesystem::path& path, std::size_t n_classes = 0);

/// Seeded shuffle into batches of `batch_size`; the last partial batch is kept.
std::vector<Batch> batch_iter(const Dataset& dataset, std::size_t batch_size, std::uint64_t epoch_seed);

}  // namespace cpg::data
