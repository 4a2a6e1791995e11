#include "cpg/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cpg/error.hpp"

namespace cpg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad value for `" + key + "`: " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for `" + key + "`: " + v);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    RunConfig c;
    auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto sz = [](std::size_t& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = parse_number<std::size_t>(k, v); };
    };
    auto dbl = [](double& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); };
    };
    auto flt = [](float& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = parse_number<float>(k, v); };
    };
    auto u64 = [](std::uint64_t& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = parse_number<std::uint64_t>(k, v); };
    };
    auto flag = [](bool& dst) -> Setter {
        return [&dst](const std::string& k, const std::string& v) { dst = parse_bool(k, v); };
    };
    auto file = [&](std::filesystem::path& dst) -> Setter {
        return [&dst, path](const std::string&, const std::string& v) { dst = path(v); };
    };

    const std::map<std::string, Setter> setters = {
        {"seed", u64(c.seed)},
        {"source",
         [&](const std::string& k, const std::string& v) {
             if (v == "synthetic") c.source = TaskSource::synthetic;
             else if (v == "idx") c.source = TaskSource::idx;
             else if (v == "csv") c.source = TaskSource::csv;
             else throw ConfigError("bad value for `" + k + "`: " + v);
         }},
        {"tasks", sz(c.tasks)},
        {"classes_per_task", sz(c.classes_per_task)},
        {"dim", sz(c.dim)},
        {"per_class", sz(c.per_class)},
        {"sep", dbl(c.sep)},
        {"train_images", file(c.train_images)},
        {"train_labels", file(c.train_labels)},
        {"test_images", file(c.test_images)},
        {"test_labels", file(c.test_labels)},
        {"train_csv", file(c.train_csv)},
        {"test_csv", file(c.test_csv)},
        {"n_classes", sz(c.n_classes)},
        {"order_seed", u64(c.order_seed)},
        {"hidden",
         [&](const std::string& k, const std::string& v) {
             c.hidden.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) c.hidden.push_back(parse_number<std::size_t>(k, trim(item)));
             if (c.hidden.empty()) throw ConfigError("`hidden` needs at least one width");
         }},
        {"goal_mode", [&](const std::string&, const std::string& v) { c.goal_mode = goal_source_from_string(v); }},
        {"goal", dbl(c.goal)},
        {"goal_offset", dbl(c.goal_offset)},
        {"top_delta", dbl(c.top_delta)},
        {"baseline_trials", sz(c.baseline_trials)},
        {"prune_step", dbl(c.schedule.step_fraction)},
        {"retrain_epochs", sz(c.schedule.retrain_epochs)},
        {"min_remaining", sz(c.schedule.min_remaining)},
        {"lr", flt(c.hyper.train.lr)},
        {"momentum", flt(c.hyper.train.momentum)},
        {"mask_lr", flt(c.hyper.train.mask_lr)},
        {"mask_threshold", flt(c.hyper.mask_threshold)},
        {"mask_init", flt(c.hyper.mask_init)},
        {"batch_size", sz(c.hyper.batch_size)},
        {"epochs", sz(c.hyper.max_epochs)},
        {"pick_epochs", sz(c.hyper.pick_epochs)},
        {"force_all_picks", flag(c.hyper.force_all_picks)},
        {"reinit_free", flag(c.hyper.reinit_free)},
        {"mask_reset", flag(c.hyper.reset_mask_on_grow)},
        {"verbose", flag(c.hyper.verbose)},
        {"growth_fraction", dbl(c.growth.increment_fraction)},
        {"max_expansion", dbl(c.growth.max_expansion)},
        {"max_retries", sz(c.growth.max_retries)},
        {"growth_reset", flag(c.growth.reset_on_grow)},
        {"growth_noise", flt(c.growth.noise)},
        {"report", file(c.report)},
        {"checkpoint", file(c.checkpoint)},
    };

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected `key = value`");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key `" + key + "`");
        if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for `" + key + "`");
        it->second(key, value);
    }

    c.schedule.validate();
    c.hyper.validate();
    c.growth.validate();
    if (c.goal_mode == GoalSource::explicit_value && !(c.goal >= 0.0 && c.goal <= 1.0))
        throw ConfigError("goal must lie in [0, 1]");
    if (c.goal_mode != GoalSource::explicit_value && c.baseline_trials == 0)
        throw ConfigError("baseline_trials must be at least 1 for goal mode " + std::string(to_string(c.goal_mode)));
    for (auto h : c.hidden)
        if (h == 0) throw ConfigError("hidden widths must be positive");
    if (c.source == TaskSource::idx &&
        (c.train_images.empty() || c.train_labels.empty() || c.test_images.empty() || c.test_labels.empty()))
        throw ConfigError("idx source needs train_images, train_labels, test_images and test_labels");
    if (c.source == TaskSource::csv && c.train_csv.empty()) throw ConfigError("csv source needs train_csv");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void apply_env_overrides(RunConfig& config) {
    if (const char* s = std::getenv("CPG_SEED"); s && *s) config.seed = parse_number<std::uint64_t>("CPG_SEED", s);
}

}  // namespace cpg
