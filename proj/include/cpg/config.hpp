#pragma once

// Run configuration: flat `key = value` lines, `#` starts a comment.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpg/controller.hpp"
#include "cpg/pruner.hpp"

namespace cpg {

enum class TaskSource { synthetic, idx, csv };

struct RunConfig {
    std::uint64_t seed = 1;
    TaskSource source = TaskSource::synthetic;

    // synthetic
    std::size_t tasks = 5;  // idx/csv: 0 keeps every task
    std::size_t classes_per_task = 2;
    std::size_t dim = 16;
    std::size_t per_class = 100;
    double sep = 6.0;

    // idx / csv
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::filesystem::path train_csv, test_csv;
    std::size_t n_classes = 10;

    std::uint64_t order_seed = 0;
    std::vector<std::size_t> hidden{64, 32};

    GoalSource goal_mode = GoalSource::explicit_value;
    double goal = 0.9;
    double goal_offset = 0.0;
    double top_delta = kDefaultTopDelta;
    std::size_t baseline_trials = 1;

    PruneSchedule schedule;
    EngineHyper hyper;
    GrowthPolicy growth;

    std::filesystem::path report;
    std::filesystem::path checkpoint;
};

/// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// CPG_SEED, when set, replaces the configured seed.
void apply_env_overrides(RunConfig& config);

}  // namespace cpg
