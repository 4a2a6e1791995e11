// cpg: run sequential task-learning experiments and inspect their
// checkpoints.
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 data error,
// 4 run completed but some task goal was only met best-effort.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numeric>

#include "cpg/checkpoint.hpp"
#include "cpg/config.hpp"
#include "cpg/controller.hpp"
#include "cpg/data.hpp"
#include "cpg/error.hpp"
#include "cpg/experiment.hpp"
#include "cpg/report.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kBestEffort = 4 };

int run(const std::string& config_path) {
    auto config = cpg::load_config(config_path);
    cpg::apply_env_overrides(config);
    const auto tasks = cpg::load_tasks(config);
    std::cout << "learning " << tasks.tasks.size() << " tasks (seed " << config.seed << ")\n";
    auto out = cpg::run_experiment(config, tasks, [](const cpg::CpgState& st, cpg::TaskId id) {
        const auto& r = st.record(id);
        std::printf("task %u: accuracy %.1f%% goal %.1f%% owned %zu grew %zu%s\n", static_cast<unsigned>(id),
                    100.0 * r.achieved, 100.0 * r.goal.value, r.owned_count, r.growth_events,
                    r.best_effort ? " [best effort]" : "");
        std::fflush(stdout);
    });
    std::cout << cpg::format_report(out.report);
    std::printf("wall time %.1f s\n", out.report.wall_seconds);
    if (!config.report.empty()) cpg::emit_report(out.report, config.report);
    if (!config.checkpoint.empty()) cpg::save_checkpoint(out.state, config.checkpoint);
    return out.report.any_best_effort() ? kBestEffort : kOk;
}

// Keeps the samples of the task's classes and remaps them to task-local labels.
cpg::data::Dataset task_slice(const cpg::data::Dataset& d, const cpg::TaskRecord& rec) {
    if (rec.classes.empty()) return d;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (std::find(rec.classes.begin(), rec.classes.end(), d.labels[i]) != rec.classes.end()) rows.push_back(i);
    if (rows.empty()) throw cpg::DataError("no samples of task classes in the data file");
    auto out = d.subset(rows);
    for (auto& y : out.labels)
        y = static_cast<int>(std::find(rec.classes.begin(), rec.classes.end(), y) - rec.classes.begin());
    out.n_classes = rec.classes.size();
    return out;
}

int eval(const std::string& checkpoint, unsigned task, const std::string& data, const std::string& labels,
         std::size_t n_classes) {
    const auto st = cpg::load_checkpoint(checkpoint);
    const auto& rec = st.record(static_cast<cpg::TaskId>(task));
    cpg::data::Dataset d;
    if (!labels.empty()) {
        d = cpg::data::load_idx(data, labels, n_classes);
    } else {
        d = cpg::data::load_csv(data, n_classes == 10 ? 0 : n_classes);
    }
    if (d.n_classes < rec.head.classes) d.n_classes = rec.head.classes;
    const auto slice = task_slice(d, rec);
    const double acc = cpg::evaluate(st, rec.id, slice);
    std::printf("task %u accuracy %.4f (%zu samples)\n", task, acc, slice.size());
    return kOk;
}

int report(const std::string& checkpoint, const std::string& out) {
    const auto st = cpg::load_checkpoint(checkpoint);
    cpg::emit_report(st.records, st.net.param_count(), st.n0, st.ledger.free_count(), out);
    std::cout << cpg::format_report(st.records, st.net.param_count(), st.n0, st.ledger.free_count());
    return kOk;
}

int inspect(const std::string& checkpoint) {
    const auto st = cpg::load_checkpoint(checkpoint);
    std::printf("layers:");
    for (const auto& l : st.net.layers())
        std::printf(" %s(%zu->%zu)", l.kind == cpg::nn::LayerKind::relu ? "relu" : "dense", l.in_width, l.out_width);
    std::printf("\nparams %zu, initial %zu, exp %.2fx, free %zu (red %.2fx)\n", st.net.param_count(), st.n0,
                st.expansion(), st.ledger.free_count(), st.redundancy());
    std::printf("task  owned  prior  picked  head  goal   achieved  grew  flag\n");
    for (const auto& r : st.records) {
        const auto picked = std::accumulate(r.mask.begin(), r.mask.end(), std::size_t{0});
        std::printf("%4u  %5zu  %5zu  %6zu  %4zu  %5.1f  %8.1f  %4zu  %s\n", static_cast<unsigned>(r.id),
                    st.ledger.owned_count(r.id), r.mask.size(), picked, r.head.params.size(), 100.0 * r.goal.value,
                    100.0 * r.achieved, r.growth_events, r.best_effort ? "best-effort" : "");
    }
    const auto sz = cpg::size_report(st);
    std::printf("bytes: backbone %zu, heads %zu, masks %zu, ledger %zu, normalization %zu, total %zu\n", sz.backbone,
                sz.heads, sz.masks, sz.ledger, sz.normalization, sz.total());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential task learning with owned weights, pick masks and bounded growth"};
    app.require_subcommand(1);

    std::string config;
    auto* run_cmd = app.add_subcommand("run", "Learn a task sequence and write the report");
    run_cmd->add_option("--config", config, "Run configuration file")->required()->check(CLI::ExistingFile);

    std::string checkpoint, data, labels, out;
    unsigned task = 1;
    std::size_t n_classes = 10;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate one task of a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--task", task)->required();
    eval_cmd->add_option("--data", data, "CSV file, or IDX images with --labels")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--labels", labels, "IDX labels file")->check(CLI::ExistingFile);
    eval_cmd->add_option("--classes", n_classes, "Class count of the data file");

    auto* report_cmd = app.add_subcommand("report", "Write the CSV report of a checkpoint");
    report_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--out", out)->required();

    auto* inspect_cmd = app.add_subcommand("inspect", "Print ledger and mask statistics");
    inspect_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run_cmd) return run(config);
        if (*eval_cmd) return eval(checkpoint, task, data, labels, n_classes);
        if (*report_cmd) return report(checkpoint, out);
        if (*inspect_cmd) return inspect(checkpoint);
    } catch (const cpg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const cpg::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const cpg::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
