#pragma once

// Task-private output layer stacked on the shared backbone. Heads are never
// pruned, masked or recorded in the ledger.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpg/data.hpp"
#include "cpg/nn.hpp"

namespace cpg {

struct Head {
    std::size_t in_width = 0;
    std::size_t classes = 0;
    /// classes x in_width weights (row-major), then `classes` biases.
    std::vector<float> params;

    static Head init(std::size_t in_width, std::size_t classes, std::uint64_t seed);

    std::size_t param_count() const { return in_width * classes + classes; }

    /// Adds input columns; new weights are drawn uniformly from
    /// [-noise, noise] (exactly zero when noise is 0).
    void widen(std::size_t new_in_width, float noise, std::mt19937_64& rng);

    /// Parameters laid out for a backbone of width `in`, zero-filling the
    /// missing columns.
    std::vector<float> padded(std::size_t in) const;

    bool operator==(const Head&) const = default;
};

/// Backbone view followed by the head's parameters, matching nn::with_head.
std::vector<float> stack_effective(std::span<const float> view, const Head& head, std::size_t backbone_out);

/// Logits of backbone(view) -> head.
nn::Tensor task_logits(const nn::Network& backbone, std::span<const float> view, const Head& head,
                       const nn::Tensor& batch);

/// Fraction of argmax predictions equal to the labels; ties pick the lowest class.
double accuracy(const nn::Tensor& logits, std::span<const int> labels);

double accuracy(const nn::Network& backbone, std::span<const float> view, const Head& head,
                const data::Dataset& dataset);

}  // namespace cpg
