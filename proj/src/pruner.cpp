#include "cpg/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cpg/error.hpp"

namespace cpg {

void PruneSchedule::validate() const {
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) throw ConfigError("prune step fraction must lie in (0, 1)");
    if (retrain_epochs < 1) throw ConfigError("prune retrain epochs must be at least 1");
}

const char* to_string(GoalSource s) {
    switch (s) {
        case GoalSource::explicit_value: return "explicit";
        case GoalSource::avg: return "avg";
        case GoalSource::max: return "max";
        case GoalSource::top: return "top";
    }
    return "?";
}

GoalSource goal_source_from_string(const std::string& s) {
    if (s == "explicit") return GoalSource::explicit_value;
    if (s == "avg") return GoalSource::avg;
    if (s == "max") return GoalSource::max;
    if (s == "top") return GoalSource::top;
    throw ConfigError("unknown goal mode `" + s + "`");
}

std::vector<std::size_t> select_prune_count(std::span<const float> params, std::span<const std::size_t> candidates,
                                            std::size_t count) {
    if (candidates.empty()) throw DimensionError("no prune candidates");
    count = std::min(count, candidates.size());
    std::vector<std::size_t> order(candidates.begin(), candidates.end());
    auto smaller = [&](std::size_t a, std::size_t b) {
        const float ma = std::fabs(params[a]);
        const float mb = std::fabs(params[b]);
        return ma != mb ? ma < mb : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), smaller);
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> select_prune_set(std::span<const float> params, std::span<const std::size_t> candidates,
                                          double fraction) {
    if (candidates.empty()) throw DimensionError("no prune candidates");
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw DimensionError("prune fraction must lie in [0, 1]");
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(candidates.size())));
    return select_prune_count(params, candidates, count);
}

PruneResult gradual_prune(PruneTarget& target, std::span<const std::size_t> candidates, const AccuracyGoal& goal,
                          const PruneSchedule& schedule) {
    schedule.validate();
    const auto params = target.params();
    const auto layers = target.param_layers();
    for (auto i : candidates)
        if (i >= params.size()) throw DimensionError("prune candidate out of range");

    PruneResult result;
    result.accuracy = target.evaluate();
    if (result.accuracy < goal.value)
        throw GoalUnreachable("initial accuracy " + std::to_string(result.accuracy) + " is below the goal " +
                                  std::to_string(goal.value),
                              result.accuracy);

    std::vector<std::size_t> remaining(candidates.begin(), candidates.end());
    std::sort(remaining.begin(), remaining.end());
    std::vector<std::uint8_t> trainable(params.size(), 0);
    for (auto i : remaining) trainable[i] = 1;

    while (!remaining.empty()) {
        std::map<std::uint32_t, std::size_t> per_layer;
        for (auto i : remaining) ++per_layer[layers[i]];
        std::size_t prunable = 0;
        for (const auto& [layer, n] : per_layer) prunable += n > schedule.min_remaining ? n - schedule.min_remaining : 0;
        if (prunable == 0) break;

        auto want = static_cast<std::size_t>(std::floor(schedule.step_fraction * static_cast<double>(remaining.size())));
        want = std::clamp<std::size_t>(want, 1, prunable);

        // Smallest magnitudes first, skipping entries that would empty a layer.
        auto ranked = remaining;
        std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
            const float ma = std::fabs(params[a]);
            const float mb = std::fabs(params[b]);
            return ma != mb ? ma < mb : a < b;
        });
        std::vector<std::size_t> step;
        for (auto i : ranked) {
            if (step.size() == want) break;
            auto& left = per_layer[layers[i]];
            if (left <= schedule.min_remaining) continue;
            --left;
            step.push_back(i);
        }
        std::sort(step.begin(), step.end());

        const auto before = target.snapshot();
        const auto trainable_before = trainable;
        for (auto i : step) {
            params[i] = 0.0f;
            trainable[i] = 0;
        }

        double acc = 0.0;
        for (std::size_t e = 0; e < schedule.retrain_epochs; ++e) {
            target.retrain_epoch(trainable);
            acc = target.evaluate();
            if (acc >= goal.value) break;
        }
        if (acc < goal.value) {
            target.restore(before);
            trainable = trainable_before;
            break;
        }
        result.accuracy = acc;
        ++result.accepted_steps;
        std::vector<std::size_t> kept;
        kept.reserve(remaining.size() - step.size());
        std::set_difference(remaining.begin(), remaining.end(), step.begin(), step.end(), std::back_inserter(kept));
        remaining = std::move(kept);
    }

    result.survivors = remaining;
    std::vector<std::size_t> all(candidates.begin(), candidates.end());
    std::sort(all.begin(), all.end());
    std::set_difference(all.begin(), all.end(), remaining.begin(), remaining.end(),
                        std::back_inserter(result.pruned));
    return result;
}

}  // namespace cpg
