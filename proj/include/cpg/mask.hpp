#pragma once

// Picking: a real-valued shadow mask over prior-owned weights, thresholded
// into the binary pick mask on every forward pass and trained with a
// straight-through gradient.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpg/data.hpp"
#include "cpg/head.hpp"
#include "cpg/ledger.hpp"
#include "cpg/nn.hpp"

namespace cpg {

inline constexpr float kDefaultMaskThreshold = 5e-3f;
inline constexpr float kDefaultMaskInit = 1e-2f;

struct ShadowMask {
    std::vector<float> shadow;
    float threshold = kDefaultMaskThreshold;

    /// Every entry starts at `init`; with init > threshold all prior weights are picked.
    static ShadowMask uniform(std::size_t n, float init = kDefaultMaskInit, float threshold = kDefaultMaskThreshold);
};

/// bit i = shadow[i] > tau. Throws for a non-finite tau.
std::vector<std::uint8_t> binarize(std::span<const float> shadow, float tau);

/// Snapshot of the current binarization; independent of later shadow updates.
std::vector<std::uint8_t> freeze_mask(const ShadowMask& mask);

struct TrainHyper {
    float lr = 0.05f;
    float momentum = 0.9f;
    float mask_lr = 0.05f;
};

/// Momentum buffers for one task's backbone and head.
struct TaskOptimizer {
    std::vector<float> backbone;
    std::vector<float> head;

    /// Resizes to the given lengths (new entries zero).
    void fit(std::size_t backbone_len, std::size_t head_len);
    void reset();
};

struct RoundMetrics {
    double mean_loss = 0.0;
    std::size_t steps = 0;
    std::size_t picked = 0;  // set bits after the round
};

/// One pass over `batches` for the task being learned (committed_tasks+1):
/// forward through compose_view(current binarized mask, include_free=true),
/// momentum SGD on every free weight and the head, and a plain SGD step on
/// the shadow using dL/dw_eff[i] * params[i]. Owned weights are untouched.
RoundMetrics train_pick_round(nn::Network& net, const Ledger& ledger, TaskId task, ShadowMask& shadow,
                              Head& head, std::span<const data::Batch> batches, const TrainHyper& hyper,
                              TaskOptimizer& opt);

/// Same pass with a fixed pick mask; only free weights flagged in
/// `trainable` (one byte per parameter) and the head are updated.
RoundMetrics train_masked_round(nn::Network& net, const Ledger& ledger, TaskId task,
                                std::span<const std::uint8_t> pick_mask, std::span<const std::uint8_t> trainable,
                                Head& head, std::span<const data::Batch> batches, const TrainHyper& hyper,
                                TaskOptimizer& opt);

}  // namespace cpg
