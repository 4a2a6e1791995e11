#include "cpg/mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpg/error.hpp"

namespace cpg {

namespace {

void check_task(const Ledger& ledger, TaskId task) {
    if (task != ledger.committed_tasks() + 1)
        throw OwnershipError("task " + std::to_string(task) + " is not the task being learned (next is " +
                             std::to_string(ledger.committed_tasks() + 1) + ")");
}

void check_head(const nn::Network& net, const Head& head) {
    if (head.in_width != net.output_width() || head.params.size() != head.param_count())
        throw DimensionError("head does not match backbone output width");
}

// Shared by both rounds. `shadow` is null when the mask is frozen.
RoundMetrics run_round(nn::Network& net, const Ledger& ledger, TaskId task, std::span<const std::uint8_t> fixed_mask,
                       ShadowMask* shadow, std::span<const std::uint8_t> trainable, Head& head,
                       std::span<const data::Batch> batches, const TrainHyper& hyper, TaskOptimizer& opt) {
    check_task(ledger, task);
    check_head(net, head);
    if (ledger.size() != net.param_count()) throw DimensionError("ledger and network differ in length");
    if (trainable.size() != net.param_count()) throw DimensionError("trainable flags do not cover the network");

    const auto prior = ledger.prior_indices(task);
    const std::size_t n_prior = shadow ? shadow->shadow.size() : fixed_mask.size();
    if (n_prior != prior.size())
        throw DimensionError("mask has " + std::to_string(n_prior) + " entries, prior-owned set has " +
                             std::to_string(prior.size()));

    opt.fit(net.param_count(), head.param_count());
    const auto stacked = nn::with_head(net, head.classes);
    const std::size_t nb = net.param_count();

    // Only free weights can ever move.
    std::vector<std::uint8_t> update(nb, 0);
    for (std::size_t i = 0; i < nb; ++i) update[i] = trainable[i] && ledger.owner(i) == kFree;
    const std::vector<std::uint8_t> head_update(head.param_count(), 1);

    RoundMetrics m;
    std::vector<std::uint8_t> bits(fixed_mask.begin(), fixed_mask.end());
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
        if (shadow) bits = binarize(shadow->shadow, shadow->threshold);
        const auto view = compose_view(ledger, net.params(), task, bits, true);
        const auto eff = stack_effective(view, head, net.output_width());
        const auto lg = nn::loss_and_grad(stacked, eff, batch.samples, batch.labels);
        loss_sum += lg.loss;
        ++m.steps;

        const std::span<const float> g(lg.grad);
        if (shadow && hyper.mask_lr != 0.0f) {
            // Straight-through: d(loss)/d(mask_j) = d(loss)/d(w_eff_i) * w_i.
            const auto& params = net.params();
            for (std::size_t j = 0; j < prior.size(); ++j) {
                const std::size_t i = prior[j];
                shadow->shadow[j] -= hyper.mask_lr * (g[i] * params[i]);
            }
        }
        nn::sgd_step(net.params(), g.first(nb), update, hyper.lr, opt.backbone, hyper.momentum);
        nn::sgd_step(head.params, g.subspan(nb), head_update, hyper.lr, opt.head, hyper.momentum);
    }
    if (shadow) bits = binarize(shadow->shadow, shadow->threshold);
    m.picked = static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
    m.mean_loss = m.steps ? loss_sum / static_cast<double>(m.steps) : 0.0;
    return m;
}

}  // namespace

ShadowMask ShadowMask::uniform(std::size_t n, float init, float threshold) {
    return ShadowMask{std::vector<float>(n, init), threshold};
}

std::vector<std::uint8_t> binarize(std::span<const float> shadow, float tau) {
    if (!std::isfinite(tau)) throw DimensionError("mask threshold must be finite");
    std::vector<std::uint8_t> bits(shadow.size());
    for (std::size_t i = 0; i < shadow.size(); ++i) bits[i] = shadow[i] > tau ? 1 : 0;
    return bits;
}

std::vector<std::uint8_t> freeze_mask(const ShadowMask& mask) { return binarize(mask.shadow, mask.threshold); }

void TaskOptimizer::fit(std::size_t backbone_len, std::size_t head_len) {
    backbone.resize(backbone_len, 0.0f);
    head.resize(head_len, 0.0f);
}

void TaskOptimizer::reset() {
    std::fill(backbone.begin(), backbone.end(), 0.0f);
    std::fill(head.begin(), head.end(), 0.0f);
}

RoundMetrics train_pick_round(nn::Network& net, const Ledger& ledger, TaskId task, ShadowMask& shadow,
                              Head& head, std::span<const data::Batch> batches, const TrainHyper& hyper,
                              TaskOptimizer& opt) {
    const std::vector<std::uint8_t> all(net.param_count(), 1);
    return run_round(net, ledger, task, {}, &shadow, all, head, batches, hyper, opt);
}

RoundMetrics train_masked_round(nn::Network& net, const Ledger& ledger, TaskId task,
                                std::span<const std::uint8_t> pick_mask, std::span<const std::uint8_t> trainable,
                                Head& head, std::span<const data::Batch> batches, const TrainHyper& hyper,
                                TaskOptimizer& opt) {
    return run_round(net, ledger, task, pick_mask, nullptr, trainable, head, batches, hyper, opt);
}

}  // namespace cpg
