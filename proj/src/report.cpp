#include "cpg/report.hpp"

#include <cstdio>
#include <numeric>

#include "cpg/checkpoint.hpp"
#include "cpg/error.hpp"

namespace cpg {

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

bool RunReport::any_best_effort() const {
    for (bool b : best_effort)
        if (b) return true;
    return false;
}

RunReport make_report(std::span<const TaskRecord> records, std::span<const double> accuracies, std::size_t n_params,
                      std::size_t n0, std::size_t free_count) {
    if (records.empty()) throw Error("report needs at least one task record");
    if (accuracies.size() != records.size()) throw Error("one accuracy per task record required");
    if (n0 == 0) throw Error("initial parameter count must be positive");
    RunReport r;
    for (std::size_t i = 0; i < records.size(); ++i) {
        r.accuracy.push_back(accuracies[i]);
        r.goal.push_back(records[i].goal.value);
        r.best_effort.push_back(records[i].best_effort);
    }
    r.average = std::accumulate(r.accuracy.begin(), r.accuracy.end(), 0.0) / static_cast<double>(r.accuracy.size());
    r.expansion = static_cast<double>(n_params) / static_cast<double>(n0);
    r.redundancy = static_cast<double>(free_count) / static_cast<double>(n0);
    return r;
}

std::string format_report(const RunReport& report) {
    if (report.accuracy.empty()) throw Error("report needs at least one task");
    std::string out = "task,accuracy,goal,best_effort\n";
    for (std::size_t i = 0; i < report.accuracy.size(); ++i) {
        out += std::to_string(i + 1) + ',' + fixed(100.0 * report.accuracy[i], 1) + ',' +
               fixed(100.0 * report.goal[i], 1) + ',' + (report.best_effort[i] ? "1" : "0") + '\n';
    }
    out += "avg,exp,red\n";
    out += fixed(100.0 * report.average, 1) + ',' + fixed(report.expansion, 2) + ',' + fixed(report.redundancy, 2) + '\n';
    return out;
}

std::string format_report(std::span<const TaskRecord> records, std::size_t n_params, std::size_t n0,
                          std::size_t free_count) {
    std::vector<double> acc;
    for (const auto& r : records) acc.push_back(r.achieved);
    return format_report(make_report(records, acc, n_params, n0, free_count));
}

void emit_report(std::span<const TaskRecord> records, std::size_t n_params, std::size_t n0, std::size_t free_count,
                 const std::filesystem::path& path) {
    const auto text = format_report(records, n_params, n0, free_count);
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void emit_report(const RunReport& report, const std::filesystem::path& path) {
    const auto text = format_report(report);
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

SizeReport size_report(const CpgState& state) {
    SizeReport s;
    s.backbone = 4 * state.net.param_count();
    s.ledger = 2 * state.net.param_count();
    for (const auto& r : state.records) {
        s.heads += 4 * r.head.params.size();
        s.masks += (r.mask.size() + 7) / 8;
    }
    return s;
}

}  // namespace cpg
