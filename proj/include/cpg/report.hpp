#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cpg/controller.hpp"

namespace cpg {

struct RunReport {
    std::vector<double> accuracy;  // per task, fraction
    std::vector<double> goal;
    std::vector<bool> best_effort;
    double average = 0.0;
    double expansion = 0.0;  // param_count / n0
    double redundancy = 0.0; // free_count / n0
    double wall_seconds = 0.0;

    bool any_best_effort() const;
};

/// Accuracies are re-measured by the caller; this only assembles the numbers.
RunReport make_report(std::span<const TaskRecord> records, std::span<const double> accuracies, std::size_t n_params,
                      std::size_t n0, std::size_t free_count);

/// CSV in table layout:
///
///   task,accuracy,goal,best_effort       one row per task, percentages to 1 decimal
///   avg,exp,red                          summary: Avg %, Exp x, Red x (2 decimals)
std::string format_report(const RunReport& report);

/// Uses each record's achieved accuracy.
std::string format_report(std::span<const TaskRecord> records, std::size_t n_params, std::size_t n0,
                          std::size_t free_count);
void emit_report(std::span<const TaskRecord> records, std::size_t n_params, std::size_t n0, std::size_t free_count,
                 const std::filesystem::path& path);
void emit_report(const RunReport& report, const std::filesystem::path& path);

struct SizeReport {
    std::size_t backbone = 0;       // 4 bytes per backbone parameter
    std::size_t heads = 0;          // 4 bytes per head parameter
    std::size_t masks = 0;          // ceil(bits/8) per task
    std::size_t ledger = 0;         // 2 bytes per parameter
    std::size_t normalization = 0;  // no normalisation layers; always 0

    std::size_t total() const { return backbone + heads + masks + ledger + normalization; }
};

SizeReport size_report(const CpgState& state);

}  // namespace cpg
