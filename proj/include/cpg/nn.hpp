#pragma once

// Minimal dense feed-forward network with hand-written reverse mode.
//
// A Network only describes structure: the layer chain plus a map from
// (layer, row, col) to a flat parameter index. Every computation takes an
// externally supplied effective weight vector, so ownership and masking
// are decided by the caller. Growth appends new flat indices at the end
// and never renumbers existing ones.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cpg::nn {

enum class LayerKind : std::uint8_t { dense = 0, relu = 1, head = 2 };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in_width = 0;
    std::size_t out_width = 0;
    bool has_bias = true;

    bool has_params() const { return kind != LayerKind::relu; }
    bool operator==(const LayerSpec&) const = default;
};

LayerSpec dense(std::size_t in, std::size_t out, bool bias = true);
LayerSpec relu(std::size_t width);
LayerSpec head(std::size_t in, std::size_t classes);

/// Row-major float tensor. dims[0] is the batch axis for batched data.
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> dims, std::vector<float> data);
    static Tensor zeros(std::vector<std::size_t> dims);

    std::size_t rows() const { return dims.empty() ? 0 : dims[0]; }
    /// Product of all dims after the first.
    std::size_t row_width() const;
    std::span<const float> row(std::size_t r) const;
    std::span<float> row(std::size_t r);

    bool operator==(const Tensor&) const = default;
};

class Network {
public:
    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }
    std::size_t input_width() const { return layers_.front().in_width; }
    std::size_t output_width() const { return layers_.back().out_width; }

    std::size_t weight_index(std::size_t layer, std::size_t row, std::size_t col) const;
    std::size_t bias_index(std::size_t layer, std::size_t row) const;

    /// Layer position of every flat parameter.
    std::vector<std::uint32_t> layer_of_params() const;

    /// Per-layer index tables, row-major over (out, in), then biases.
    struct IndexTable {
        std::vector<std::uint32_t> weights;
        std::vector<std::uint32_t> biases;
        bool operator==(const IndexTable&) const = default;
    };
    const std::vector<IndexTable>& index_tables() const { return tables_; }

    /// Rebuilds a network from persisted parts; validates the bijection.
    static Network from_parts(std::vector<LayerSpec> layers, std::vector<IndexTable> tables,
                              std::vector<float> params);

private:
    friend Network build_network(std::span<const LayerSpec>, std::uint64_t);
    friend std::size_t grow(Network&, std::span<const std::size_t>);
    friend Network with_head(const Network&, std::size_t);

    std::vector<LayerSpec> layers_;
    std::vector<IndexTable> tables_;
    std::vector<float> params_;
};

/// Validates the chain and initialises weights uniformly in
/// [-sqrt(6/(fan_in+fan_out)), +sqrt(...)]; biases start at zero.
Network build_network(std::span<const LayerSpec> spec, std::uint64_t seed);

/// Logits for a batch. Each output unit accumulates bias first, then the
/// inputs in ascending index order; zero weights are skipped, so padding a
/// layer with zero-valued weights leaves every output bit-identical.
Tensor forward(const Network& net, std::span<const float> effective, const Tensor& batch);

struct LossGrad {
    float loss = 0.0f;
    std::vector<float> grad;
};

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the effective weights.
LossGrad loss_and_grad(const Network& net, std::span<const float> effective, const Tensor& batch,
                       std::span<const int> labels);

/// Momentum SGD: v = mu*v + g; w -= lr*v. Entries with update_mask 0 are
/// skipped entirely (weight and velocity untouched).
void sgd_step(std::span<float> params, std::span<const float> grad,
              std::span<const std::uint8_t> update_mask, float lr, std::span<float> momentum,
              float momentum_coeff);

/// Widens dense layers by `increments[l]` output units (one entry per
/// layer; only dense layers may be non-zero). New rows, their biases and
/// the matching new input columns of the next parameterised layer are
/// appended to the flat vector with value 0. Returns the number added.
std::size_t grow(Network& net, std::span<const std::size_t> increments);

/// Parameter count the network would have after `grow(net, increments)`.
std::size_t param_count_after_growth(const Network& net, std::span<const std::size_t> increments);

/// Backbone plus a task head stacked on top. The head's parameters occupy
/// the flat range [backbone.param_count(), ...) in canonical order
/// (weights row-major, then biases); the returned params are zero.
Network with_head(const Network& backbone, std::size_t classes);

}  // namespace cpg::nn
